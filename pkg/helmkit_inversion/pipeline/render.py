"""Rasterize per-pixel fields on the inversion mesh to grayscale PPM images."""

import json
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
from matplotlib import tri

from helmkit_inversion.errors import DimensionMismatch, DomainError
from helmkit_inversion.geometry.mesh import TriMesh

WHITE = 255


def raster_grid(resolution: int):
    """Pixel-center coordinates of a resolution x resolution grid over [-1, 1]^2, row 0 on top."""
    if int(resolution) != resolution or resolution < 1:
        raise DomainError(f"Resolution must be a positive integer, got {resolution}")
    centers = -1.0 + (np.arange(resolution) + 0.5) * 2.0 / resolution
    return np.meshgrid(centers, centers[::-1])


def rasterize(mesh: TriMesh, values: np.ndarray, resolution: int) -> np.ndarray:
    """Per-triangle values sampled at raster pixel centers; NaN outside the mesh."""
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.n_triangles,):
        raise DimensionMismatch(
            f"Field has {values.size} values, mesh has {mesh.n_triangles} triangles"
        )
    x, y = raster_grid(resolution)
    triangulation = tri.Triangulation(mesh.nodes[:, 0], mesh.nodes[:, 1], mesh.triangles)
    owner = triangulation.get_trifinder()(x, y)
    image = np.full(x.shape, np.nan)
    inside = (owner >= 0) & (x ** 2 + y ** 2 <= 1.0)
    image[inside] = values[owner[inside]]
    return image


def to_gray(image: np.ndarray, vmax: float) -> np.ndarray:
    """Map [0, vmax] linearly to gray levels 255..0; NaN pixels are white."""
    scale = vmax if vmax > 0.0 else 1.0
    level = np.clip(np.nan_to_num(image, nan=0.0) / scale, 0.0, 1.0)
    gray = np.rint(WHITE * (1.0 - level)).astype(np.uint8)
    gray[np.isnan(image)] = WHITE
    return gray


def write_ppm(path: Union[str, Path], gray: np.ndarray) -> None:
    height, width = gray.shape
    rgb = np.repeat(gray[:, :, None], 3, axis=2)
    with open(path, "wb") as f:
        f.write(f"P6\n{width} {height}\n255\n".encode("ascii"))
        f.write(rgb.tobytes())


def read_ppm(path: Union[str, Path]) -> np.ndarray:
    """Gray levels of a P6 image written by write_ppm."""
    with open(path, "rb") as f:
        magic, size, maxval, pixels = f.read().split(b"\n", 3)
    if magic != b"P6" or maxval != b"255":
        raise DomainError(f"{path} is not an 8-bit P6 image")
    width, height = (int(v) for v in size.split())
    return np.frombuffer(pixels, dtype=np.uint8).reshape(height, width, 3)[:, :, 0]


def render_field(
    mesh: TriMesh, values: np.ndarray, out: Union[str, Path], resolution: int
) -> Dict[str, Any]:
    """Write the PPM image and its value-scale sidecar (out with a .json suffix)."""
    values = np.asarray(values, dtype=float)
    image = rasterize(mesh, values, resolution)
    vmax = float(np.max(values)) if values.size else 0.0
    write_ppm(out, to_gray(image, vmax))
    scale = {
        "resolution": int(resolution),
        "vmin": 0.0,
        "vmax": vmax,
        "mapping": "gray = 255 * (1 - clip(value / vmax, 0, 1)), exterior white",
    }
    with open(Path(out).with_suffix(".json"), "w") as f:
        json.dump(scale, f, indent=2, sort_keys=True)
    return scale
