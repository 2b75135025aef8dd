import numpy as np
import pytest
from numpy.testing import assert_allclose

from helmkit_inversion.errors import DataFormatError, DimensionMismatch, DomainError, SemidefiniteSensitivity
from helmkit_inversion.forward.data import SensitivityStack
from helmkit_inversion.geometry.scatterers import PixelLabel, classify_pixels
from helmkit_inversion.monotonicity import beta as monotonicity
from helmkit_inversion.numerics import linalg_spectral

from conftest import random_spd, random_symmetric


class TestClosedForm:
    def test_hand_computed(self):
        vd = np.diag([2.0, -1.0])
        assert monotonicity.beta_closed_form(vd, np.eye(2), 0.0, 1) == pytest.approx(2.0, abs=1e-12)
        assert monotonicity.beta_closed_form(vd, np.eye(2), 0.0, 0) == 0.0

    def test_positive_when_data_is_definite(self, rng):
        vd = random_spd(rng, 5)
        s = random_spd(rng, 5)
        assert monotonicity.beta_closed_form(vd, s, 0.0, 0) > 0.0

    @pytest.mark.parametrize("d", [0, 1, 2])
    @pytest.mark.parametrize("delta", [0.0, 0.3])
    def test_identity_sensitivity(self, rng, d, delta):
        diag = rng.uniform(-1.0, 3.0, size=6)
        beta = monotonicity.beta_closed_form(np.diag(diag), np.eye(6), delta, d)
        expected = max(0.0, np.sort(diag + delta)[d])
        assert beta == pytest.approx(expected, abs=1e-10)

    def test_scaling(self, rng):
        vd = random_symmetric(rng, 6)
        s = random_spd(rng, 6)
        beta = monotonicity.beta_closed_form(vd, s, 0.1, 2)
        assert monotonicity.beta_closed_form(vd, 4.0 * s, 0.1, 2) == pytest.approx(beta / 4.0, rel=1e-12)

    def test_monotone_in_budget_and_noise(self, rng):
        vd = random_symmetric(rng, 8)
        s = random_spd(rng, 8)
        by_d = [monotonicity.beta_closed_form(vd, s, 0.0, d) for d in range(4)]
        assert all(a <= b for a, b in zip(by_d, by_d[1:]))
        by_delta = [monotonicity.beta_closed_form(vd, s, delta, 1) for delta in (0.0, 0.1, 1.0)]
        assert all(a <= b for a, b in zip(by_delta, by_delta[1:]))

    def test_semidefinite_sensitivity(self):
        with pytest.raises(SemidefiniteSensitivity):
            monotonicity.beta_closed_form(np.eye(3), np.diag([1.0, 1.0, 0.0]), 0.0, 0)

    def test_cap(self):
        # S is negligible next to the data, so every alpha below the cap is feasible
        beta, _, capped = monotonicity.closed_form_details(1e15 * np.eye(2), np.eye(2), 0.0, 1)
        assert capped and beta == monotonicity.BETA_CAP

    @pytest.mark.parametrize("d", [-1, 3, 1.5])
    def test_rejects_budget(self, d):
        with pytest.raises(DomainError):
            monotonicity.beta_closed_form(np.eye(3), np.eye(3), 0.0, d)


class TestBisectionOracle:
    def test_agrees_with_closed_form(self):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            n = int(rng.integers(3, 17))
            vd = random_symmetric(rng, n)
            s = random_spd(rng, n)
            d = int(rng.integers(0, 3))
            delta = float(rng.choice([0.0, 0.1]))
            expected = monotonicity.beta_closed_form(vd, s, delta, d)
            found = monotonicity.beta_bisection_oracle(vd, s, delta, d)
            assert abs(found - expected) <= 1e-6 * (1.0 + expected)

    def test_infeasible_at_zero(self):
        assert monotonicity.beta_bisection_oracle(np.diag([-1.0, -1.0, 1.0]), np.eye(3), 0.0, 1) == 0.0

    def test_predicate_at_beta(self, rng):
        q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
        vd = q @ np.diag([3.0, 2.0, 1.5, 1.0, 0.5, -1.0]) @ q.T
        s = random_spd(rng, 6)
        beta = monotonicity.beta_bisection_oracle(vd, s, 0.05, 1)
        shifted = vd + 0.05 * np.eye(6)
        assert linalg_spectral.count_negative(shifted - 0.99 * beta * s) <= 1
        assert linalg_spectral.count_negative(shifted - 1.01 * beta * s) > 1

    def test_semidefinite_block(self):
        # rank-one S: beta is limited only in its range
        vd = np.diag([3.0, 1.0, 2.0])
        s = np.zeros((3, 3))
        s[0, 0] = 1.0
        assert monotonicity.beta_bisection_oracle(vd, s, 0.0, 0) == pytest.approx(3.0, rel=1e-9)

    def test_rejects_tolerance(self):
        with pytest.raises(DomainError):
            monotonicity.beta_bisection_oracle(np.eye(2), np.eye(2), 0.0, 0, tol=0.0)


class TestBetaMap:
    def test_matches_per_pixel_closed_form(self, rng):
        vd = random_symmetric(rng, 5)
        stack = SensitivityStack(np.stack([random_spd(rng, 5) for _ in range(6)]))
        beta_map = monotonicity.compute_beta_map(vd, stack, 0.1, 1)
        expected = [monotonicity.beta_closed_form(vd, stack[m], 0.1, 1) for m in range(6)]
        assert_allclose(beta_map.beta, expected)
        assert not beta_map.fallback.any()

    def test_semidefinite_blocks_use_fallback(self, rng):
        vd = random_spd(rng, 4)
        blocks = [random_spd(rng, 4), np.outer([1.0, 0.5, 0.0, 0.0], [1.0, 0.5, 0.0, 0.0])]
        beta_map = monotonicity.compute_beta_map(vd, SensitivityStack(np.stack(blocks)), 0.0, 0)
        assert beta_map.fallback.tolist() == [False, True]
        oracle = monotonicity.beta_bisection_oracle(vd, blocks[1], 0.0, 0)
        assert beta_map.beta[1] == pytest.approx(oracle, rel=1e-6)

    def test_dimension_mismatch(self, rng):
        stack = SensitivityStack(np.stack([np.eye(4)] * 2))
        with pytest.raises(DimensionMismatch):
            monotonicity.compute_beta_map(np.eye(3), stack, 0.0, 0)

    def test_csv(self, tmp_path, rng):
        vd = random_symmetric(rng, 4)
        stack = SensitivityStack(np.stack([random_spd(rng, 4) for _ in range(3)]))
        centroids = rng.uniform(-0.5, 0.5, size=(3, 2))
        beta_map = monotonicity.compute_beta_map(vd, stack, 0.037, 1, centroids=centroids)
        path = tmp_path / "beta.csv"
        beta_map.to_csv(path)
        assert path.read_text().splitlines()[0] == "pixel,centroid_x,centroid_y,beta,delta,d"
        loaded = monotonicity.BetaMap.read_csv(path)
        assert_allclose(loaded.beta, beta_map.beta, rtol=0, atol=0)
        assert_allclose(loaded.centroids, centroids, rtol=0, atol=0)
        assert loaded.delta == 0.037 and loaded.d == 1

    @pytest.mark.parametrize("column", ["delta", "d"])
    def test_csv_requires_delta_and_d(self, tmp_path, rng, column):
        stack = SensitivityStack(np.stack([random_spd(rng, 3) for _ in range(2)]))
        beta_map = monotonicity.compute_beta_map(random_symmetric(rng, 3), stack, 0.1, 1)
        path = tmp_path / "beta.csv"
        beta_map.to_frame().drop(columns=column).to_csv(path, index=False)
        with pytest.raises(DataFormatError):
            monotonicity.BetaMap.read_csv(path)

    def test_csv_rejects_mixed_budgets(self, tmp_path):
        path = tmp_path / "beta.csv"
        path.write_text(
            "pixel,centroid_x,centroid_y,beta,delta,d\n0,0.1,0.0,1.0,0.5,1\n1,0.2,0.0,1.0,0.5,2\n"
        )
        with pytest.raises(DataFormatError):
            monotonicity.BetaMap.read_csv(path)

    def test_csv_columns_checked(self, tmp_path):
        path = tmp_path / "beta.csv"
        path.write_text("pixel,value\n0,1.0\n")
        with pytest.raises(DataFormatError):
            monotonicity.BetaMap.read_csv(path)


class TestNegativeCountField:
    def test_zero_alpha_is_constant(self, rng):
        vd = random_symmetric(rng, 5)
        stack = SensitivityStack(np.stack([random_spd(rng, 5) for _ in range(4)]))
        counts = monotonicity.negative_count_field(vd, stack, 0.0, 0.1)
        expected = linalg_spectral.count_negative(vd + 0.1 * np.eye(5))
        assert counts.tolist() == [expected] * 4

    def test_nondecreasing_in_alpha(self, rng):
        vd = random_symmetric(rng, 6)
        stack = SensitivityStack(np.stack([random_spd(rng, 6) for _ in range(5)]))
        fields = [monotonicity.negative_count_field(vd, stack, alpha, 0.0) for alpha in (0.0, 4.0, 8.0)]
        assert np.all(fields[0] <= fields[1]) and np.all(fields[1] <= fields[2])


@pytest.mark.slow
class TestDeskExample:
    def test_inside_pixels_reach_contrast(self, desk_data, desk_beta):
        sc, _, _, mesh = desk_data
        inside = classify_pixels(mesh, sc.geometry) == PixelLabel.INSIDE
        assert inside.any()
        assert np.all(desk_beta.beta[inside] >= 0.99 * sc.contrast_bound)

    def test_far_pixels_are_an_order_below(self, desk_data, desk_beta):
        sc, _, _, mesh = desk_data
        inside = classify_pixels(mesh, sc.geometry) == PixelLabel.INSIDE
        gap = np.linalg.norm(mesh.centroids() - sc.geometry.center, axis=1) - sc.geometry.radius
        far = gap > 0.3
        assert far.any()
        assert desk_beta.beta[inside].min() >= 10.0 * desk_beta.beta[far].max()

    def test_negative_count_at_the_contrast_bound(self, desk_data):
        sc, measurement, stack, mesh = desk_data
        counts = monotonicity.negative_count_field(
            measurement.matrix, stack, sc.contrast_bound, 1e-6 * measurement.norm
        )
        inside = classify_pixels(mesh, sc.geometry) == PixelLabel.INSIDE
        assert counts.min() <= sc.d_tilde
        assert np.all(counts[inside] == counts.min())

    def test_admissible_contrasts_respect_inertia(self, desk_data):
        sc, measurement, stack, mesh = desk_data
        inside = classify_pixels(mesh, sc.geometry) == PixelLabel.INSIDE
        tau = 1e-3 * measurement.norm
        rng = np.random.default_rng(50)
        for _ in range(50):
            a = np.where(inside, rng.uniform(0.0, sc.contrast_bound, size=stack.m), 0.0)
            residual = measurement.matrix - stack.contract(a)
            assert linalg_spectral.count_negative(residual, -tau) <= sc.d_tilde
