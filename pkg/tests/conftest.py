from pathlib import Path

import numpy as np
import pytest
from absl import flags

from helmkit_inversion import config_utils
from helmkit_inversion.forward import data
from helmkit_inversion.forward.scenario import Scenario
from helmkit_inversion.geometry.mesh import build_disk_mesh
from helmkit_inversion.geometry.scatterers import DiskScatterer
from helmkit_inversion.monotonicity import beta as monotonicity
from helmkit_inversion.pipeline import commands
from helmkit_inversion.reconstruct import solver
from helmkit_inversion.reconstruct.problem import ReconProblem

CONFIG_DIR = Path(__file__).resolve().parents[1] / "helmkit_inversion" / "configs"

if not flags.FLAGS.is_parsed():
    flags.FLAGS.mark_as_parsed()


def random_spd(rng, n, floor=0.5):
    b = rng.standard_normal((n, n))
    return b @ b.T / n + floor * np.eye(n)


def random_symmetric(rng, n):
    a = rng.standard_normal((n, n))
    return 0.5 * (a + a.T)


def small_config_dict(**overrides):
    """A run config small enough for a full pipeline in a few seconds."""
    scenario = {
        "k": 1.0,
        "q0": 1.0,
        "q_inclusion": 9.0,
        "q_min_assumed": 9.0,
        "n1": 4,
        "noise_level": 0.01,
        "d_tilde": 1,
        "noise_seed": 7,
        "inversion_h": 0.2,
        "forward_h": 0.1,
        "geometry": {"type": "disk", "center": [-0.2, 0.0], "radius": 0.3},
    }
    scenario.update(overrides)
    return {
        "scenario": scenario,
        "reconstruct": {"variant": "eigsum_penalized", "max_iterations": 300, "window": 50},
        "negcount": {"alpha": 8.0},
        "dtilde": {"r0": [1.0, 0.5], "mesh_h": 0.2},
        "render": {"resolution": 32},
    }


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def coarse_mesh():
    return build_disk_mesh(0.2)


@pytest.fixture(scope="session")
def medium_mesh():
    return build_disk_mesh(0.1)


@pytest.fixture(scope="session")
def fine_mesh():
    return build_disk_mesh(0.05)


@pytest.fixture
def small_scenario():
    return Scenario(
        k=1.0,
        q0=1.0,
        geometry=DiskScatterer((-0.2, 0.0), 0.3),
        q_inclusion=9.0,
        q_min_assumed=9.0,
        n1=4,
        noise_level=0.01,
        d_tilde=1,
        noise_seed=7,
        inversion_h=0.2,
        forward_h=0.1,
    )


@pytest.fixture
def small_config():
    return config_utils.parse_run_config(small_config_dict())


@pytest.fixture
def small_run(tmp_path, small_config):
    """Run directory after gen on the small config."""
    run_dir = tmp_path / "run"
    commands.cmd_gen(small_config, run_dir)
    return run_dir


@pytest.fixture(scope="session")
def desk_config():
    return config_utils.parse_run_config(
        config_utils.load_config(str(CONFIG_DIR / "desk_example1.yaml"))
    )


@pytest.fixture(scope="session")
def desk_data(desk_config):
    """Noiseless V, the sensitivity stack and the inversion mesh of the desk example."""
    sc = desk_config.scenario
    inversion = sc.inversion_mesh()
    measurement = data.compute_V(sc)
    stack = data.compute_S(sc, inversion)
    return sc, measurement, stack, inversion


@pytest.fixture(scope="session")
def desk_beta(desk_data):
    """Beta map of the noiseless desk example at delta = 1e-6 ||V||_F."""
    sc, measurement, stack, mesh = desk_data
    return monotonicity.compute_beta_map(
        measurement.matrix, stack, 1e-6 * measurement.norm, sc.d_tilde, centroids=mesh.centroids()
    )


@pytest.fixture(scope="session")
def desk_saturated(desk_data, desk_beta):
    """eigsum_plain reconstruction of the noiseless desk example with delta = 0."""
    sc, measurement, stack, mesh = desk_data
    problem = ReconProblem.from_beta(
        measurement.matrix, stack, desk_beta.beta, sc.contrast_bound, 0.0, "eigsum_plain"
    )
    return solver.solve(problem, centroids=mesh.centroids())
