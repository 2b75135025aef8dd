"""Pipeline stages. Each command reads and writes files in one run directory.

Artifacts of gen: mesh_fine.json, mesh_inv.json, V.csv, Vdelta.csv, S.bin,
meta.json. beta adds beta.csv and negcount.csv, reconstruct adds recon.csv
and recon.json. All noise levels are relative: the absolute perturbation
is noise_level * ||V||_F.
"""

import json
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import numpy as np
import pandas as pd
from absl import logging

from helmkit_inversion.config_utils import RunConfig
from helmkit_inversion.errors import ConfigError, EmptySupport, NearResonance
from helmkit_inversion.fem import solvers
from helmkit_inversion.forward import data, io
from helmkit_inversion.geometry.mesh import TriMesh, build_disk_mesh
from helmkit_inversion.monotonicity import beta as monotonicity
from helmkit_inversion.pipeline import render
from helmkit_inversion.reconstruct import solver, support
from helmkit_inversion.reconstruct.objectives import parse_variant
from helmkit_inversion.reconstruct.problem import ReconProblem, SolverSettings

MESH_FINE = "mesh_fine.json"
MESH_INV = "mesh_inv.json"
V_CSV = "V.csv"
VDELTA_CSV = "Vdelta.csv"
STACK_BIN = "S.bin"
META_JSON = "meta.json"
BETA_CSV = "beta.csv"
NEGCOUNT_CSV = "negcount.csv"
RECON_CSV = "recon.csv"
RECON_JSON = "recon.json"
DTILDE_CSV = "dtilde.csv"


def _banner(title: str) -> None:
    logging.info("=" * 60)
    logging.info(title)
    logging.info("=" * 60)


def _require(path: Path) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"Missing pipeline artifact: {path}")
    return path


def _write_json(path: Path, payload: Dict[str, Any]) -> None:
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def read_meta(run_dir) -> Dict[str, Any]:
    with open(_require(Path(run_dir) / META_JSON), "r") as f:
        return json.load(f)


def cmd_gen(
    config: RunConfig,
    out_dir,
    noise_level: Optional[float] = None,
    seed: Optional[int] = None,
) -> Dict[str, Path]:
    """Generate meshes, V, V^delta and the sensitivity stack.

    Args:
        config: Run configuration
        out_dir: Run directory, created if missing
        noise_level: Overrides the scenario's relative noise level
        seed: Overrides the scenario's noise seed

    Returns:
        Mapping of artifact name to path
    """
    sc = config.scenario
    if noise_level is not None:
        sc = replace(sc, noise_level=float(noise_level))
    if seed is not None:
        sc = replace(sc, noise_seed=int(seed))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _banner(f"Generating data in {out}")

    fine = sc.forward_mesh()
    inv = sc.inversion_mesh()
    fine.write_json(out / MESH_FINE)
    inv.write_json(out / MESH_INV)

    measurement = data.compute_V(sc, fine)
    delta = sc.noise_level * measurement.norm
    vd = data.add_noise(measurement.matrix, delta, sc.noise_seed)
    io.write_matrix_csv(out / V_CSV, measurement.matrix)
    io.write_matrix_csv(out / VDELTA_CSV, vd)

    stack = data.compute_S(sc, inv)
    stack.write_binary(out / STACK_BIN)

    dtilde_computed = None
    if sc.omega0_radius is not None:
        dtilde_computed = solvers.dtilde_count(
            sc.k, sc.q0, sc.q_inclusion, sc.omega0_radius, inv
        )
        if sc.d_tilde < dtilde_computed:
            logging.warning(
                f"Configured d_tilde={sc.d_tilde} is below the computed "
                f"d(qtilde)={dtilde_computed} for omega0_radius={sc.omega0_radius}"
            )

    meta = {
        "scenario": sc.to_dict(),
        "seed": sc.noise_seed,
        "asymmetry": measurement.asymmetry,
        "N": sc.n_basis,
        "M": stack.m,
        "k": sc.k,
        "q0": sc.q0,
        "contrast_bound": sc.contrast_bound,
        "norm_V": measurement.norm,
        "noise_level": sc.noise_level,
        "delta": delta,
        "d_tilde": sc.d_tilde,
        "d_tilde_computed": dtilde_computed,
        "forward_triangles": fine.n_triangles,
        "noise_definition": "delta = noise_level * ||V||_F",
        "config": {
            "variant": config.variant.value,
            "reconstruct": config.settings.to_dict(),
            "alpha": config.alpha,
            "r0": config.r0_values,
            "resolution": config.resolution,
        },
    }
    _write_json(out / META_JSON, meta)
    logging.info(
        f"Wrote N={sc.n_basis}, M={stack.m}, ||V||_F={measurement.norm:.4e}, delta={delta:.4e}"
    )
    names = [MESH_FINE, MESH_INV, V_CSV, VDELTA_CSV, STACK_BIN, META_JSON]
    return {name: out / name for name in names}


def cmd_dtilde(
    k: float, qmax: float, r0_list: Sequence[float], mesh_h: float, out_path, q0: float = 1.0
) -> pd.DataFrame:
    """Sweep d(qtilde) over comparison radii and write the (r0, count) table.

    Rows whose operator is numerically singular get count -1.
    """
    _banner(f"d(qtilde) sweep k={k}, qmax={qmax}, h={mesh_h}")
    mesh = build_disk_mesh(mesh_h)
    rows = []
    for r0 in r0_list:
        try:
            count = solvers.dtilde_count(k, q0, qmax, float(r0), mesh)
        except NearResonance as e:
            logging.warning(f"r0={r0}: {e}; reporting -1")
            count = -1
        rows.append({"r0": float(r0), "count": int(count)})
    table = pd.DataFrame(rows, columns=["r0", "count"])
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(out_path, index=False, float_format="%.17g", lineterminator="\n")
    return table


def _absolute_delta(meta: Dict[str, Any], noise_level: Optional[float]) -> float:
    if noise_level is None:
        return float(meta["delta"])
    return float(noise_level) * float(meta["norm_V"])


def cmd_beta(
    run_dir,
    noise_level: Optional[float] = None,
    d: Optional[int] = None,
    alpha: Optional[float] = None,
) -> monotonicity.BetaMap:
    """Compute the beta map and the negative-count field from gen artifacts.

    Args:
        run_dir: Directory written by cmd_gen
        noise_level: Relative delta; defaults to the one used by gen
        d: Inertia budget; defaults to the scenario's d_tilde
        alpha: Contrast of the negative-count field; defaults to the config's
    """
    run = Path(run_dir)
    meta = read_meta(run)
    vd = io.read_matrix_csv(_require(run / VDELTA_CSV))
    stack = data.SensitivityStack.read_binary(_require(run / STACK_BIN))
    mesh = TriMesh.read_json(_require(run / MESH_INV))
    delta = _absolute_delta(meta, noise_level)
    d = int(meta["d_tilde"]) if d is None else int(d)
    alpha = float(meta["config"]["alpha"]) if alpha is None else float(alpha)
    _banner(f"Beta map delta={delta:.4e}, d={d}")

    beta_map = monotonicity.compute_beta_map(vd, stack, delta, d, centroids=mesh.centroids())
    beta_map.to_csv(run / BETA_CSV)

    counts = monotonicity.negative_count_field(vd, stack, alpha, delta)
    centroids = mesh.centroids()
    pd.DataFrame(
        {
            "pixel": np.arange(stack.m),
            "centroid_x": centroids[:, 0],
            "centroid_y": centroids[:, 1],
            "count": counts,
        }
    ).to_csv(run / NEGCOUNT_CSV, index=False, float_format="%.17g", lineterminator="\n")
    logging.info(f"Negative-count field at alpha={alpha}: min {counts.min()}, max {counts.max()}")
    return beta_map


def cmd_reconstruct(
    run_dir,
    variant=None,
    noise_level: Optional[float] = None,
    d: Optional[int] = None,
    settings: Optional[SolverSettings] = None,
) -> support.SupportReport:
    """Solve the box-constrained problem and extract the support.

    delta and d default to the values stored in beta.csv. When an override
    differs from them the beta map is recomputed in memory so that the box
    bounds and the objective use the same delta and d; beta.csv is left as is.

    recon.csv and recon.json are written before the support is checked, so
    an empty support still leaves the result on disk.

    Raises:
        EmptySupport: If no pixel passes the support threshold
    """
    run = Path(run_dir)
    meta = read_meta(run)
    vd = io.read_matrix_csv(_require(run / VDELTA_CSV))
    stack = data.SensitivityStack.read_binary(_require(run / STACK_BIN))
    mesh = TriMesh.read_json(_require(run / MESH_INV))
    beta_map = monotonicity.BetaMap.read_csv(_require(run / BETA_CSV))
    delta = beta_map.delta if noise_level is None else _absolute_delta(meta, noise_level)
    d = beta_map.d if d is None else int(d)
    if d != beta_map.d or not np.isclose(delta, beta_map.delta, rtol=1e-12, atol=0.0):
        logging.warning(
            f"beta.csv was computed with delta={beta_map.delta:.4e}, d={beta_map.d}; "
            f"recomputing for delta={delta:.4e}, d={d}"
        )
        beta_map = monotonicity.compute_beta_map(vd, stack, delta, d, centroids=mesh.centroids())
    variant = parse_variant(variant or meta["config"]["variant"])
    settings = settings or SolverSettings(**meta["config"]["reconstruct"])
    _banner(f"Reconstruction {variant.value}, delta={delta:.4e}, d={d}")

    problem = ReconProblem.from_beta(
        vd, stack, beta_map.beta, meta["contrast_bound"], delta, variant, settings
    )
    result = solver.solve(problem, centroids=mesh.centroids())
    result.to_csv(run / RECON_CSV)

    extra: Dict[str, Any] = {"d": d}
    try:
        report = support.extract_support(result, mesh)
    except EmptySupport:
        extra.update({"components": 0, "centroids": []})
        result.write_json(run / RECON_JSON, **extra)
        raise
    extra.update(
        {
            "components": report.n_components,
            "centroids": [c.centroid.tolist() for c in report.components],
        }
    )
    result.write_json(run / RECON_JSON, **extra)
    return report


def _field_column(df: pd.DataFrame, column: Optional[str]) -> str:
    if column:
        if column not in df.columns:
            raise ConfigError(f"Column '{column}' not in {list(df.columns)}")
        return column
    for name in ("a", "beta", "count"):
        if name in df.columns:
            return name
    return df.columns[-1]


def cmd_render(
    field_csv, mesh_json, out, resolution: int, column: Optional[str] = None
) -> Dict[str, Any]:
    """Rasterize one column of a per-pixel CSV to a PPM image with a JSON sidecar."""
    mesh = TriMesh.read_json(mesh_json)
    df = pd.read_csv(_require(Path(field_csv)), float_precision="round_trip")
    name = _field_column(df, column)
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    scale = render.render_field(mesh, df[name].to_numpy(dtype=float), out, resolution)
    logging.info(f"Rendered '{name}' from {field_csv} to {out}")
    return scale
