from dataclasses import dataclass
from typing import List

import numpy as np
from absl import logging
from scipy.sparse import csgraph

from helmkit_inversion.errors import DimensionMismatch, EmptySupport
from helmkit_inversion.geometry.mesh import TriMesh, triangle_adjacency
from helmkit_inversion.reconstruct.solver import SUPPORT_FRACTION, ReconResult, support_mask


@dataclass(frozen=True)
class SupportComponent:
    pixels: np.ndarray
    area: float
    centroid: np.ndarray


@dataclass(frozen=True)
class SupportReport:
    """Support mask, per-pixel component labels (-1 outside) and the components."""

    mask: np.ndarray
    labels: np.ndarray
    components: List[SupportComponent]

    @property
    def n_components(self) -> int:
        return len(self.components)

    def centroid(self) -> np.ndarray:
        """Area-weighted centroid of the whole support."""
        areas = np.array([c.area for c in self.components])
        points = np.array([c.centroid for c in self.components])
        return areas @ points / areas.sum()


def extract_support(
    result: ReconResult, mesh: TriMesh, threshold_fraction: float = SUPPORT_FRACTION
) -> SupportReport:
    """Threshold the coefficients and split the support into connected components.

    Args:
        result: Reconstruction result
        mesh: Inversion mesh whose triangles are the pixels
        threshold_fraction: Pixels with a_m >= threshold_fraction * max(u) are kept

    Returns:
        SupportReport with components ordered by their smallest pixel index

    Raises:
        EmptySupport: If no pixel passes the threshold
    """
    if result.m != mesh.n_triangles:
        raise DimensionMismatch(
            f"Result has {result.m} pixels, mesh has {mesh.n_triangles} triangles"
        )
    mask = support_mask(result.a, result.upper, threshold_fraction)
    if not np.any(mask):
        raise EmptySupport("No pixel reaches the support threshold")

    pixels = np.flatnonzero(mask)
    adjacency = triangle_adjacency(mesh)[pixels][:, pixels]
    n_components, local_labels = csgraph.connected_components(adjacency, directed=False)

    labels = np.full(mesh.n_triangles, -1, dtype=int)
    labels[pixels] = local_labels
    areas = mesh.signed_areas()
    centroids = mesh.centroids()
    components = []
    for c in range(n_components):
        members = pixels[local_labels == c]
        area = float(areas[members].sum())
        centroid = areas[members] @ centroids[members] / area
        components.append(SupportComponent(pixels=members, area=area, centroid=centroid))

    logging.info(
        f"Support: {pixels.size} pixels in {n_components} component(s), "
        + ", ".join(f"({c.centroid[0]:.3f}, {c.centroid[1]:.3f})" for c in components)
    )
    return SupportReport(mask=mask, labels=labels, components=components)
