from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np

from helmkit_inversion.errors import ConfigError
from helmkit_inversion.fem import fields
from helmkit_inversion.geometry.mesh import TriMesh, build_disk_mesh
from helmkit_inversion.geometry.scatterers import ScattererGeometry


@dataclass(frozen=True)
class Scenario:
    """Physical and discretization parameters of one synthetic experiment.

    Attributes:
        k: Wavenumber
        q0: Background refractive index
        geometry: Scatterer D
        q_inclusion: True refractive index inside D
        q_min_assumed: A-priori lower bound of q on D, used in the box constraint
        n1: Trigonometric order count, N = 2 n1 + 1
        noise_level: Relative noise, delta = noise_level * ||V||_F
        d_tilde: Inertia budget d(qtilde)
        noise_seed: Seed of the noise generator
        inversion_h: Mesh size of the pixel partition
        forward_h: Mesh size of the data-generating mesh
        omega0_radius: Radius of the comparison disk, when known
    """

    k: float
    q0: float
    geometry: ScattererGeometry
    q_inclusion: float
    q_min_assumed: float
    n1: int
    noise_level: float
    d_tilde: int
    noise_seed: int
    inversion_h: float
    forward_h: float
    omega0_radius: Optional[float] = None

    def __post_init__(self):
        if not self.k > 0.0:
            raise ConfigError(f"k must be positive, got {self.k}")
        if not self.q0 < self.q_min_assumed <= self.q_inclusion:
            raise ConfigError(
                f"Need q0 < q_min_assumed <= q_inclusion, got "
                f"{self.q0}, {self.q_min_assumed}, {self.q_inclusion}"
            )
        if self.n1 < 1:
            raise ConfigError(f"n1 must be at least 1, got {self.n1}")
        if self.noise_level < 0.0:
            raise ConfigError(f"noise_level must be nonnegative, got {self.noise_level}")
        if self.d_tilde < 0 or self.d_tilde >= self.n_basis:
            raise ConfigError(f"d_tilde must lie in [0, {self.n_basis}), got {self.d_tilde}")
        if self.forward_h >= self.inversion_h:
            raise ConfigError(
                "forward_h must be finer than inversion_h to keep data and "
                "inversion meshes distinct"
            )
        if self.omega0_radius is not None and not 0.0 < self.omega0_radius <= 1.0:
            raise ConfigError(f"omega0_radius must lie in (0, 1], got {self.omega0_radius}")

    @property
    def n_basis(self) -> int:
        return fields.basis_size(self.n1)

    @property
    def contrast_bound(self) -> float:
        """q_min_assumed - q0, the largest admissible pixel coefficient"""
        return self.q_min_assumed - self.q0

    def forward_mesh(self) -> TriMesh:
        return build_disk_mesh(self.forward_h)

    def inversion_mesh(self) -> TriMesh:
        return build_disk_mesh(self.inversion_h)

    def index_field(self, mesh: TriMesh) -> np.ndarray:
        """Per-triangle q with area-averaged values on triangles cut by the boundary of D."""
        fractions = self.geometry.area_fractions(mesh)
        return self.q0 + (self.q_inclusion - self.q0) * fractions

    def to_dict(self) -> Dict[str, Any]:
        return {
            "k": self.k,
            "q0": self.q0,
            "geometry": self.geometry.to_dict(),
            "q_inclusion": self.q_inclusion,
            "q_min_assumed": self.q_min_assumed,
            "n1": self.n1,
            "noise_level": self.noise_level,
            "d_tilde": self.d_tilde,
            "noise_seed": self.noise_seed,
            "inversion_h": self.inversion_h,
            "forward_h": self.forward_h,
            "omega0_radius": self.omega0_radius,
        }
