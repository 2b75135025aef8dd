from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy import integrate

from helmkit_inversion.errors import ConfigError, DataFormatError, DimensionMismatch, DomainError
from helmkit_inversion.fem import fields
from helmkit_inversion.forward import data, io
from helmkit_inversion.geometry.scatterers import DiskScatterer
from helmkit_inversion.numerics import linalg_spectral
from helmkit_inversion.numerics.special_functions import bessel_j, bessel_j_prime


def field_energy(k, q0, j):
    """int |u_{q0}^j|^2 dx over the unit disk from the radial integral."""
    _, order = fields.basis_mode(j)
    kappa = k * np.sqrt(q0)
    value, _ = integrate.quad(lambda r: bessel_j(order, kappa * r) ** 2 * r, 0.0, 1.0)
    return value / (kappa * bessel_j_prime(order, kappa)) ** 2


class TestScenario:
    def test_derived_quantities(self, small_scenario):
        assert small_scenario.n_basis == 9
        assert small_scenario.contrast_bound == 8.0

    @pytest.mark.parametrize(
        "overrides",
        [
            {"k": 0.0},
            {"q_min_assumed": 10.0},
            {"q_min_assumed": 1.0},
            {"n1": 0},
            {"noise_level": -0.1},
            {"d_tilde": 9},
            {"forward_h": 0.2},
            {"omega0_radius": 1.5},
        ],
    )
    def test_validation(self, small_scenario, overrides):
        with pytest.raises(ConfigError):
            replace(small_scenario, **overrides)

    def test_index_field(self, small_scenario, medium_mesh):
        q = small_scenario.index_field(medium_mesh)
        assert q.min() == 1.0 and q.max() == 9.0
        area = medium_mesh.signed_areas() @ (q - 1.0) / 8.0
        assert area == pytest.approx(np.pi * 0.09, rel=0.02)


class TestComputeV:
    def test_shape_and_symmetry(self, small_scenario):
        measurement = data.compute_V(small_scenario)
        assert measurement.matrix.shape == (9, 9)
        assert_array_equal(measurement.matrix, measurement.matrix.T)
        assert measurement.asymmetry < data.ASYMMETRY_FAIL
        assert measurement.norm > 0.0

    def test_thirty_three_modes(self, small_scenario):
        measurement = data.compute_V(replace(small_scenario, n1=16))
        assert measurement.matrix.shape == (33, 33)
        assert np.all(np.isfinite(measurement.matrix))

    def test_rejects_an_index_out_of_range(self, small_scenario):
        with pytest.raises(DomainError):
            data.compute_V(replace(small_scenario, q_inclusion=2000.0, q_min_assumed=2000.0))

    def test_vanishing_scatterer(self, small_scenario):
        tiny = replace(small_scenario, geometry=DiskScatterer((-0.2, 0.0), 1e-6))
        assert data.compute_V(tiny).norm <= 1e-6

    def test_positive_contrast_dominates(self, small_scenario):
        w = linalg_spectral.eigvalsh_desc(data.compute_V(small_scenario).matrix)
        assert w[np.argmax(np.abs(w))] > 0.0


class TestComputeS:
    def test_blocks_are_gram_matrices(self, small_scenario):
        stack = data.compute_S(small_scenario)
        mesh = small_scenario.inversion_mesh()
        assert stack.matrices.shape == (mesh.n_triangles, 9, 9)
        w = linalg_spectral.eigvalsh_desc(stack.matrices)
        norms = np.linalg.norm(stack.matrices, axis=(1, 2))
        assert np.all(w[:, -1] >= -1e-12 * norms)
        # the pixel rule resolves more than the constant and linear content
        assert np.all(w[:, 3] > 1e-9 * norms)

    def test_sum_matches_field_energy(self, small_scenario):
        total = data.compute_S(small_scenario).matrices.sum(axis=0)
        k = small_scenario.k
        for j in range(5):
            expected = k ** 2 * field_energy(k, small_scenario.q0, j)
            assert total[j, j] == pytest.approx(expected, rel=2e-2)

    def test_contract_and_inner(self, small_scenario, rng):
        stack = data.compute_S(small_scenario)
        a = rng.uniform(size=stack.m)
        expected = sum(a[m] * stack[m] for m in range(stack.m))
        assert_allclose(stack.contract(a), expected, atol=1e-12)
        g = rng.standard_normal((9, 9))
        assert_allclose(stack.inner(g)[:5], [np.sum(stack[m] * g) for m in range(5)])

    def test_rejects_non_square_blocks(self):
        with pytest.raises(DimensionMismatch):
            data.SensitivityStack(np.zeros((3, 2, 4)))

    def test_dimension_check(self):
        stack = data.SensitivityStack(np.zeros((3, 4, 4)))
        with pytest.raises(DimensionMismatch):
            data.check_dimensions(np.zeros((5, 5)), stack)


class TestAddNoise:
    def test_zero_noise_is_an_exact_copy(self, rng):
        v = rng.standard_normal((5, 5))
        v = v + v.T
        noisy = data.add_noise(v, 0.0, 1)
        assert_array_equal(noisy, v)
        assert noisy is not v

    def test_noise_norm(self, rng):
        v = rng.standard_normal((9, 9))
        v = v + v.T
        delta = 0.05
        noisy = data.add_noise(v, delta, 99)
        assert_array_equal(noisy, noisy.T)
        assert np.linalg.norm(noisy - v, "fro") <= delta * (1 + 1e-12)

    def test_seeded(self):
        v = np.eye(4)
        assert_array_equal(data.add_noise(v, 0.1, 5), data.add_noise(v, 0.1, 5))
        assert not np.array_equal(data.add_noise(v, 0.1, 5), data.add_noise(v, 0.1, 6))

    def test_rejects_negative(self):
        with pytest.raises(DomainError):
            data.add_noise(np.eye(2), -1.0, 0)


class TestFrechetCheck:
    def test_second_order_residual(self, small_scenario, fine_mesh):
        support = np.linalg.norm(fine_mesh.centroids() - np.array([-0.2, 0.0]), axis=1) < 0.1
        table = data.frechet_check(small_scenario, [0.2, 0.1, 0.05], support, fine_mesh)
        assert list(table.columns) == ["epsilon", "residual", "ratio"]
        assert np.all(table["residual"] > 0.0)
        ratios = table["ratio"].to_numpy()[1:]
        assert np.all((ratios >= 0.2) & (ratios <= 0.35))

    def test_zero_perturbation(self, small_scenario, medium_mesh):
        table = data.frechet_check(small_scenario, [0.0], mesh=medium_mesh)
        assert table["residual"].iloc[0] == 0.0

    def test_derivative_is_semidefinite(self, small_scenario, medium_mesh):
        support = small_scenario.geometry.contains(medium_mesh.centroids())
        derivative = data.frechet_derivative(small_scenario, support, medium_mesh)
        w = linalg_spectral.eigvalsh_desc(derivative)
        assert w[-1] >= -1e-10 * np.abs(w).max()

    def test_support_shape(self, small_scenario, medium_mesh):
        with pytest.raises(DimensionMismatch):
            data.frechet_check(small_scenario, [0.1], np.ones(3, dtype=bool), medium_mesh)


class TestMatrixCsv:
    def test_layout(self, tmp_path):
        path = tmp_path / "V.csv"
        io.write_matrix_csv(path, np.array([[1.0, 0.1], [0.1, 1.0 / 3.0]]))
        lines = path.read_text().splitlines()
        assert lines[0] == "# n=2"
        assert lines[1] == "1,0.10000000000000001"
        assert len(lines) == 3

    def test_doubles_survive(self, tmp_path, rng):
        matrix = rng.standard_normal((7, 7)) * 10.0 ** rng.integers(-12, 12, size=(7, 7))
        path = tmp_path / "V.csv"
        io.write_matrix_csv(path, matrix)
        assert_array_equal(io.read_matrix_csv(path), matrix)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "V.csv"
        path.write_text("1,2\n3,4\n")
        with pytest.raises(DataFormatError):
            io.read_matrix_csv(path)

    def test_shape_mismatch(self, tmp_path):
        path = tmp_path / "V.csv"
        path.write_text("# n=3\n1,2\n3,4\n")
        with pytest.raises(DataFormatError):
            io.read_matrix_csv(path)

    def test_missing(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            io.read_matrix_csv(tmp_path / "absent.csv")


class TestStackBinary:
    def test_layout(self, tmp_path, rng):
        matrices = rng.standard_normal((3, 2, 2))
        path = tmp_path / "S.bin"
        io.write_stack_binary(path, matrices)
        raw = path.read_bytes()
        assert raw[:4] == b"SMST"
        assert int.from_bytes(raw[4:8], "little") == 3
        assert int.from_bytes(raw[8:12], "little") == 2
        assert len(raw) == 12 + 8 * 3 * 2 * 2
        assert_array_equal(np.frombuffer(raw[12:20], dtype="<f8"), matrices[0, 0, :1])
        assert_array_equal(data.SensitivityStack.read_binary(path).matrices, matrices)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "S.bin"
        io.write_stack_binary(path, np.zeros((1, 2, 2)))
        raw = bytearray(path.read_bytes())
        raw[:4] = b"XXXX"
        path.write_bytes(bytes(raw))
        with pytest.raises(DataFormatError):
            io.read_stack_binary(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "S.bin"
        io.write_stack_binary(path, np.zeros((2, 3, 3)))
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(DataFormatError):
            io.read_stack_binary(path)
        path.write_bytes(b"SMS")
        with pytest.raises(DataFormatError):
            io.read_stack_binary(path)
