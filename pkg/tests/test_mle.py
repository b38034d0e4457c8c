"""Weighted Dirichlet fitting: surrogate properties, both iteration schemes,
and oracle comparisons."""

import numpy as np
import pytest
from scipy.optimize import minimize

from dirmix.core import clamped_log, dirichlet_log_density
from dirmix.mle import (
    ALPHA_MAX,
    EmptyClusterError,
    WeightedSample,
    fit_dirichlet,
    fit_dirichlet_all,
    fit_dirichlet_linearized,
    inverse_digamma,
    linearized_step,
    quadratic_majorant,
    quadratic_step,
    weighted_neg_log_likelihood,
)
from dirmix.specfun import curvature, digamma, ln_gamma


def random_sample(rng, n, k, weight_low=0.0, weight_high=2.0):
    z = rng.dirichlet(rng.uniform(0.5, 5.0, k), size=n)
    return WeightedSample(clamped_log(z), rng.uniform(weight_low, weight_high, n))


class TestWeightedSample:
    def test_rejects_negative_weights(self):
        with pytest.raises(ValueError):
            WeightedSample(np.zeros((2, 3)), np.array([1.0, -0.1]))

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            WeightedSample(np.zeros((2, 3)), np.ones(3))


class TestNegLogLikelihood:
    def test_flat_alpha_closed_form(self):
        rng = np.random.default_rng(0)
        s = random_sample(rng, 20, 4)
        want = -s.total_weight * ln_gamma(4.0)  # ln Gamma(K) per unit weight
        got = weighted_neg_log_likelihood(np.ones(4), s)
        assert got == pytest.approx(want, abs=1e-10)

    def test_is_negated_weighted_density_sum(self):
        rng = np.random.default_rng(1)
        k = 3
        z = rng.dirichlet(np.ones(k), size=12)
        w = rng.uniform(0.0, 1.5, 12)
        s = WeightedSample(clamped_log(z), w)
        alpha = rng.uniform(0.3, 6.0, k)
        oracle = -sum(
            w[i] * dirichlet_log_density(z[i], alpha) for i in range(len(z))
        )
        assert weighted_neg_log_likelihood(alpha, s) == pytest.approx(oracle, abs=1e-10)

    def test_zero_mass_raises(self):
        s = WeightedSample(np.zeros((2, 3)), np.zeros(2))
        with pytest.raises(EmptyClusterError):
            weighted_neg_log_likelihood(np.ones(3), s)


class TestQuadraticMajorant:
    def test_tangency(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            k = int(rng.integers(2, 6))
            s = random_sample(rng, int(rng.integers(2, 25)), k)
            beta = rng.uniform(0.05, 20.0, k)
            f = weighted_neg_log_likelihood(beta, s)
            q = quadratic_majorant(beta, beta, s)
            assert abs(q - f) <= 1e-9 * max(1.0, abs(f))

    def test_domination(self):
        rng = np.random.default_rng(3)
        for _ in range(500):
            k = int(rng.integers(2, 6))
            s = random_sample(rng, int(rng.integers(2, 25)), k)
            alpha = rng.uniform(0.05, 20.0, k)
            beta = rng.uniform(0.05, 20.0, k)
            f = weighted_neg_log_likelihood(alpha, s)
            q = quadratic_majorant(alpha, beta, s)
            assert q >= f - 1e-9 * max(1.0, abs(f))

    def test_two_sample_hand_evaluation(self):
        # K=2, two samples, written out term by term
        z = np.array([[0.3, 0.7], [0.6, 0.4]])
        w = np.array([1.0, 0.5])
        s = WeightedSample(np.log(z), w)
        alpha = np.array([2.0, 1.0])
        beta = np.array([1.0, 3.0])
        total = 1.5
        data_term = -(
            (alpha[0] - 1) * (w[0] * np.log(z[0, 0]) + w[1] * np.log(z[1, 0]))
            + (alpha[1] - 1) * (w[0] * np.log(z[0, 1]) + w[1] * np.log(z[1, 1]))
        )
        per_coord = 0.0
        for i in range(2):
            diff = alpha[i] - beta[i]
            per_coord += (
                -np.log(alpha[i])
                + ln_gamma(beta[i] + 1.0)
                + digamma(beta[i] + 1.0) * diff
                + 0.5 * curvature(beta[i]) * diff * diff
            )
        tail = -ln_gamma(beta.sum()) - (alpha - beta).sum() * digamma(beta.sum())
        want = data_term + total * (per_coord + tail)
        assert quadratic_majorant(alpha, beta, s) == pytest.approx(want, abs=1e-9)


class TestQuadraticStep:
    def test_root_identity(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            k = int(rng.integers(2, 6))
            s = random_sample(rng, 30, k, weight_low=0.1)
            alpha = rng.uniform(0.05, 30.0, k)
            root = quadratic_step(alpha, s)
            mean_log = s.weighted_log_sums() / s.total_weight
            c = curvature(alpha)
            b = digamma(alpha + 1.0) - digamma(alpha.sum()) - c * alpha - mean_log
            assert np.max(np.abs(c * root * root + b * root - 1.0)) <= 1e-10

    def test_descent(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            k = int(rng.integers(2, 5))
            s = random_sample(rng, int(rng.integers(3, 40)), k, weight_low=0.05)
            alpha = rng.uniform(0.1, 15.0, k)
            f0 = weighted_neg_log_likelihood(alpha, s)
            f1 = weighted_neg_log_likelihood(quadratic_step(alpha, s), s)
            assert f1 <= f0 + 1e-10 * max(1.0, abs(f0))

    def test_fixed_point_at_stationarity(self):
        rng = np.random.default_rng(6)
        z = rng.dirichlet([4.0, 2.0, 1.0], size=400)
        s = WeightedSample(clamped_log(z), np.ones(400))
        alpha, _ = fit_dirichlet(np.ones(3), s, eps=1e-30, max_iter=5000)
        moved = np.linalg.norm(quadratic_step(alpha, s) - alpha)
        assert moved <= 1e-8 * max(1.0, np.linalg.norm(alpha))

    def test_output_positive(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            k = int(rng.integers(2, 5))
            s = random_sample(rng, 10, k, weight_low=0.1)
            assert np.all(quadratic_step(rng.uniform(0.01, 50.0, k), s) > 0.0)

    def test_empty_cluster_signalled(self):
        s = WeightedSample(np.log(np.full((3, 2), 0.5)), np.zeros(3))
        with pytest.raises(EmptyClusterError):
            quadratic_step(np.ones(2), s)


class TestFitDirichlet:
    def test_recovers_generator_parameters(self):
        rng = np.random.default_rng(8)
        true_alpha = np.array([3.0, 7.0, 2.0])
        z = rng.dirichlet(true_alpha, size=10000)
        s = WeightedSample(clamped_log(z), np.ones(len(z)))
        fitted, report = fit_dirichlet(np.ones(3), s)
        assert report.converged

        def objective(a):
            return weighted_neg_log_likelihood(a, s)

        res = minimize(
            objective,
            np.ones(3),
            method="L-BFGS-B",
            bounds=[(1e-8, None)] * 3,
            options=dict(ftol=1e-15, gtol=1e-12, maxiter=2000),
        )
        assert np.linalg.norm(fitted - res.x) / np.linalg.norm(res.x) <= 0.05
        assert abs(report.final_objective - res.fun) <= 1e-6

    def test_two_dim_against_golden_section_profile_oracle(self):
        rng = np.random.default_rng(9)
        z = rng.dirichlet([2.5, 5.0], size=4000)
        s = WeightedSample(clamped_log(z), np.ones(len(z)))

        invphi = (np.sqrt(5.0) - 1.0) / 2.0

        def golden_min(fun, lo, hi):
            # coarse grid, then plain golden-section on the winning interval
            grid = np.geomspace(lo, hi, 240)
            vals = np.array([fun(g) for g in grid])
            i = int(np.clip(vals.argmin(), 1, len(grid) - 2))
            a, b = grid[i - 1], grid[i + 1]
            c, d = b - invphi * (b - a), a + invphi * (b - a)
            fc, fd = fun(c), fun(d)
            for _ in range(100):
                if fc < fd:
                    b, d, fd = d, c, fc
                    c = b - invphi * (b - a)
                    fc = fun(c)
                else:
                    a, c, fc = c, d, fd
                    d = a + invphi * (b - a)
                    fd = fun(d)
            x = (a + b) / 2.0
            return x, fun(x)

        def profile(a0):
            x, fval = golden_min(
                lambda a1: weighted_neg_log_likelihood(np.array([a0, a1]), s),
                0.05,
                100.0,
            )
            return fval, x

        best_a0, _ = golden_min(lambda a0: profile(a0)[0], 0.05, 100.0)
        oracle = np.array([best_a0, profile(best_a0)[1]])
        fitted, _ = fit_dirichlet(np.ones(2), s)
        assert np.max(np.abs(fitted - oracle)) <= 1e-4 * max(1.0, np.max(np.abs(oracle)))

    def test_barycentric_data_gives_symmetric_estimate(self):
        rng = np.random.default_rng(10)
        z = rng.dirichlet([60.0, 60.0, 60.0], size=5000)
        s = WeightedSample(clamped_log(z), np.ones(len(z)))
        fitted, _ = fit_dirichlet(np.ones(3), s)
        assert fitted.max() / fitted.min() <= 1.05

    def test_trajectory_non_increasing(self):
        rng = np.random.default_rng(11)
        s = random_sample(rng, 50, 4, weight_low=0.1)
        _, report = fit_dirichlet(np.full(4, 0.5), s, record_trajectory=True)
        traj = np.array(report.trajectory)
        assert np.all(np.diff(traj) <= 1e-10 * np.maximum(1.0, np.abs(traj[:-1])))

    def test_rejects_nonpositive_eps(self):
        rng = np.random.default_rng(12)
        s = random_sample(rng, 10, 3, weight_low=0.1)
        with pytest.raises(ValueError):
            fit_dirichlet(np.ones(3), s, eps=0.0)

    def test_degenerate_single_point_hits_concentration_ceiling(self):
        z = np.array([[0.7, 0.2, 0.1]])
        s = WeightedSample(clamped_log(z), np.array([1.0]))
        fitted, report = fit_dirichlet(np.ones(3), s)
        assert report.converged
        assert fitted.sum() == pytest.approx(ALPHA_MAX, rel=1e-9)
        np.testing.assert_allclose(fitted / fitted.sum(), z[0], atol=1e-9)


class TestLinearizedScheme:
    def test_inverse_digamma_roundtrip(self):
        rng = np.random.default_rng(13)
        x = 10 ** rng.uniform(-3, 4, 200)
        y = digamma(x)
        np.testing.assert_allclose(inverse_digamma(y), x, rtol=1e-9)

    def test_descent_per_step(self):
        rng = np.random.default_rng(14)
        for _ in range(100):
            k = int(rng.integers(2, 5))
            s = random_sample(rng, 25, k, weight_low=0.1)
            alpha = rng.uniform(0.2, 10.0, k)
            f0 = weighted_neg_log_likelihood(alpha, s)
            f1 = weighted_neg_log_likelihood(linearized_step(alpha, s), s)
            assert f1 <= f0 + 1e-10 * max(1.0, abs(f0))

    def test_fixed_point_at_stationarity(self):
        rng = np.random.default_rng(15)
        z = rng.dirichlet([5.0, 3.0], size=500)
        s = WeightedSample(clamped_log(z), np.ones(500))
        alpha, _ = fit_dirichlet_linearized(np.ones(2), s, eps=1e-30, max_iter=5000)
        moved = np.linalg.norm(linearized_step(alpha, s) - alpha)
        assert moved <= 1e-8 * max(1.0, np.linalg.norm(alpha))

    def test_agrees_with_quadratic_scheme(self):
        rng = np.random.default_rng(16)
        for _ in range(20):
            k = int(rng.integers(2, 5))
            z = rng.dirichlet(rng.uniform(0.8, 6.0, k), size=300)
            s = WeightedSample(clamped_log(z), rng.uniform(0.2, 1.0, 300))
            _, quad = fit_dirichlet(np.ones(k), s)
            _, lin = fit_dirichlet_linearized(np.ones(k), s)
            assert abs(quad.final_objective - lin.final_objective) <= 1e-6 * max(
                1.0, abs(quad.final_objective)
            )


class TestBatchFit:
    def test_matches_sequential_fits(self):
        rng = np.random.default_rng(17)
        for _ in range(25):
            k = int(rng.integers(2, 6))
            n = int(rng.integers(5, 50))
            z = rng.dirichlet(rng.uniform(0.5, 4.0, k), size=n)
            lr = clamped_log(z)
            u = rng.uniform(0.0, 1.0, (n, k))
            a0 = rng.uniform(0.2, 5.0, (k, k))
            batch = fit_dirichlet_all(a0, lr, u)
            for j in range(k):
                seq, _ = fit_dirichlet(a0[j], WeightedSample(lr, u[:, j]))
                # BLAS paths differ between the two entry points, so the
                # iterates can part ways at the last ulp near the threshold
                np.testing.assert_allclose(batch[j], seq, rtol=1e-5, atol=1e-8)

    def test_empty_classes_left_untouched(self):
        rng = np.random.default_rng(18)
        z = rng.dirichlet(np.ones(3), size=10)
        u = np.zeros((10, 3))
        u[:, 1] = 1.0
        a0 = rng.uniform(0.5, 2.0, (3, 3))
        out = fit_dirichlet_all(a0, clamped_log(z), u)
        np.testing.assert_array_equal(out[0], a0[0])
        np.testing.assert_array_equal(out[2], a0[2])
        assert not np.array_equal(out[1], a0[1])
