"""Scatterer geometries and pixel classification against them."""

from abc import ABC, abstractmethod
from enum import IntEnum
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from helmkit_inversion.errors import ConfigError
from helmkit_inversion.geometry.mesh import TriMesh


class PixelLabel(IntEnum):
    OUTSIDE = 0
    INSIDE = 1
    CUT = 2


class ScattererGeometry(ABC):
    """Base class for all scatterer shapes D inside the open unit disk"""

    @abstractmethod
    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean membership for an (n, 2) array of points"""
        pass

    @abstractmethod
    def max_radius(self) -> float:
        """Upper bound of |x| over the closure of D"""
        pass

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        """Config-style description, inverse of geometry_from_config"""
        pass

    def validate(self) -> None:
        if not self.max_radius() < 1.0:
            raise ConfigError(
                f"Scatterer {self.to_dict()} is not contained in the open unit disk"
            )

    def area_fractions(self, mesh: TriMesh, level: int = 4) -> np.ndarray:
        """Fraction of each triangle covered by D, from level^2 sub-triangle centroids."""
        bary = _subtriangle_barycentrics(level)
        p = mesh.nodes[mesh.triangles]
        samples = np.einsum("sk,tkd->tsd", bary, p)
        inside = self.contains(samples.reshape(-1, 2)).reshape(samples.shape[:2])
        return inside.mean(axis=1)


class DiskScatterer(ScattererGeometry):
    """Disk with given center and radius"""

    def __init__(self, center: Sequence[float], radius: float):
        self.center = np.asarray(center, dtype=float).reshape(2)
        self.radius = float(radius)
        if self.radius <= 0.0:
            raise ConfigError(f"Disk radius must be positive, got {radius}")
        self.validate()

    def contains(self, points):
        points = np.atleast_2d(points)
        return np.sum((points - self.center) ** 2, axis=1) < self.radius ** 2

    def max_radius(self):
        return float(np.linalg.norm(self.center) + self.radius)

    def to_dict(self):
        return {"type": "disk", "center": self.center.tolist(), "radius": self.radius}


class PearScatterer(ScattererGeometry):
    """Star-shaped domain r(t) < base + perturbation * cos(lobes * t) about center"""

    def __init__(
        self,
        center: Sequence[float],
        base_radius: float,
        perturbation: float,
        lobes: int,
    ):
        self.center = np.asarray(center, dtype=float).reshape(2)
        self.base_radius = float(base_radius)
        self.perturbation = float(perturbation)
        self.lobes = int(lobes)
        if self.base_radius <= abs(self.perturbation):
            raise ConfigError("Pear base radius must exceed the perturbation")
        self.validate()

    def boundary_radius(self, t: np.ndarray) -> np.ndarray:
        return self.base_radius + self.perturbation * np.cos(self.lobes * t)

    def contains(self, points):
        d = np.atleast_2d(points) - self.center
        r = np.hypot(d[:, 0], d[:, 1])
        t = np.arctan2(d[:, 1], d[:, 0])
        return r < self.boundary_radius(t)

    def analytic_area(self) -> float:
        return float(np.pi * (self.base_radius ** 2 + 0.5 * self.perturbation ** 2))

    def max_radius(self):
        return float(
            np.linalg.norm(self.center) + self.base_radius + abs(self.perturbation)
        )

    def to_dict(self):
        return {
            "type": "pear",
            "center": self.center.tolist(),
            "base_radius": self.base_radius,
            "perturbation": self.perturbation,
            "lobes": self.lobes,
        }


class UnionScatterer(ScattererGeometry):
    """Union of several geometries"""

    def __init__(self, parts: List[ScattererGeometry]):
        if not parts:
            raise ConfigError("Union scatterer needs at least one part")
        self.parts = list(parts)

    def contains(self, points):
        points = np.atleast_2d(points)
        inside = np.zeros(len(points), dtype=bool)
        for part in self.parts:
            inside |= part.contains(points)
        return inside

    def max_radius(self):
        return max(part.max_radius() for part in self.parts)

    def to_dict(self):
        return {"type": "union", "parts": [part.to_dict() for part in self.parts]}


def geometry_from_config(config: Dict[str, Any]) -> ScattererGeometry:
    """Build a geometry from its config mapping.

    Args:
        config: Mapping with a 'type' key (disk, pear or union) and the
            per-variant parameters

    Returns:
        The validated geometry

    Raises:
        ConfigError: If the type is unknown or a parameter is missing
    """
    try:
        kind = config["type"]
        if kind == "disk":
            return DiskScatterer(config["center"], config["radius"])
        if kind == "pear":
            return PearScatterer(
                config["center"],
                base_radius=config["base_radius"],
                perturbation=config["perturbation"],
                lobes=config["lobes"],
            )
        if kind == "union":
            return UnionScatterer([geometry_from_config(p) for p in config["parts"]])
    except KeyError as e:
        raise ConfigError(f"Missing geometry parameter {e} in {config}")
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Malformed geometry {config}: {e}")
    raise ConfigError(f"Unknown geometry type '{kind}'")


def classify_pixels(mesh: TriMesh, geom: ScattererGeometry) -> np.ndarray:
    """Label each triangle inside, outside or cut with respect to D.

    A triangle is inside when its three vertices and its centroid are in D,
    outside when none of them are, and cut otherwise.
    """
    vertices = mesh.nodes[mesh.triangles]
    samples = np.concatenate([vertices, vertices.mean(axis=1, keepdims=True)], axis=1)
    inside = geom.contains(samples.reshape(-1, 2)).reshape(-1, 4)
    labels = np.full(mesh.n_triangles, PixelLabel.CUT, dtype=np.int8)
    labels[inside.all(axis=1)] = PixelLabel.INSIDE
    labels[~inside.any(axis=1)] = PixelLabel.OUTSIDE
    return labels


def _subtriangle_barycentrics(level: int) -> np.ndarray:
    """Barycentric centroids of the level^2 congruent sub-triangles."""
    points: List[Tuple[float, float, float]] = []
    for i in range(level):
        for j in range(level - i):
            # upward sub-triangle
            points.append(((i + 1 / 3), (j + 1 / 3), (level - i - j - 2 / 3)))
            if i + j < level - 1:
                # downward sub-triangle
                points.append(((i + 2 / 3), (j + 2 / 3), (level - i - j - 4 / 3)))
    return np.asarray(points) / level
