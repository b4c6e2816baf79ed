import numpy as np
import pytest

from gapmm.bounds import ToyHQProblem
from gapmm.kernels import RobustKernel


def central_diff(f, theta, h=1e-6):
    theta = np.asarray(theta, dtype=float)
    g = np.zeros_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        g[i] = (f(theta + e) - f(theta - e)) / (2.0 * h)
    return g


def toy(targets, tau=1.0):
    return ToyHQProblem(np.asarray(targets, float), RobustKernel(tau=tau))


class TestUpperValue:
    def test_zero_residual(self):
        p = toy([0.0])
        assert p.upper_value(np.array([0.0]), np.array([1.0])) == 0.0

    def test_zero_weight_pays_kappa(self):
        # kappa(0) = tau^2/4, verified against the grid oracle in test_kernels
        p = toy([0.0])
        assert p.upper_value(np.array([1.0]), np.array([0.0])) == pytest.approx(0.25)

    def test_partial_weight(self):
        p = toy([0.0])
        val = p.upper_value(np.array([0.5]), np.array([0.75]))
        assert val == pytest.approx(0.109375, abs=1e-12)
        # cross-check against a direct numeric evaluation of the lift
        assert val == pytest.approx(0.75 * 0.25 / 2 + 0.25 * 0.0625, abs=1e-12)

    def test_dimension_mismatch(self):
        p = toy([0.0, 1.0])
        with pytest.raises(ValueError):
            p.upper_value(np.array([0.0, 1.0]), np.ones(2))
        with pytest.raises(ValueError):
            p.upper_value(np.array([0.0]), np.ones(3))


class TestLowerValue:
    def test_exact_mode_equals_j(self):
        p = toy([0.0])
        assert p.lower_value(np.array([0.0]), None) == 0.0
        theta = np.array([0.7])
        assert p.lower_value(theta, None) == p.exact_j(theta)

    def test_sandwich_random_draws(self):
        rng = np.random.default_rng(3)
        p = toy(rng.normal(size=20))
        for _ in range(1000):
            theta = np.array([rng.uniform(-3, 3)])
            w = rng.uniform(0, 1, size=20)
            lo = p.lower_value(theta, None)
            hi = p.upper_value(theta, w)
            assert lo <= p.exact_j(theta) <= hi + 1e-12
            assert p.duality_gap(theta, w, None) >= -1e-12


class TestRefine:
    def test_one_pass_is_exact_weight(self):
        rng = np.random.default_rng(5)
        p = toy(rng.normal(size=10))
        theta = np.array([0.3])
        for passes in (1, 3, 10):
            w = p.refine_upper(theta, rng.uniform(0, 1, size=10), passes)
            expected = p.kernel.weight(np.abs(theta[0] - p.targets))
            np.testing.assert_array_equal(w, expected)

    def test_refined_weight_touches(self):
        p = toy([0.0, 2.0, -1.0])
        theta = np.array([0.4])
        w = p.refine_upper(theta, p.init_upper(theta), 1)
        assert p.upper_value(theta, w) == pytest.approx(p.exact_j(theta), abs=1e-12)

    def test_zero_passes_rejected(self):
        p = toy([0.0])
        with pytest.raises(ValueError):
            p.refine_upper(np.array([0.0]), np.array([1.0]), 0)
        with pytest.raises(ValueError):
            p.refine_lower(np.array([0.0]), None, 0)

    def test_refine_lower_exact_mode_identity(self):
        p = toy([0.0])
        sentinel = object()
        assert p.refine_lower(np.array([1.0]), sentinel, 5) is sentinel


class TestGrad:
    def test_trivial_case(self):
        p = toy([0.0])
        g = p.grad_theta_upper(np.array([1.0]), np.array([1.0]))
        np.testing.assert_allclose(g, [1.0])

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        p = toy(rng.normal(size=15))
        for _ in range(50):
            theta = np.array([rng.uniform(-2, 2)])
            w = rng.uniform(0, 1, size=15)
            g = p.grad_theta_upper(theta, w)
            fd = central_diff(lambda th: p.upper_value(th, w), theta)
            np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-9)

    def test_envelope_property_at_converged_latent(self):
        # at the exact minimizing latent, the partial gradient of the bound
        # equals the gradient of the exact objective
        rng = np.random.default_rng(13)
        p = toy(rng.normal(size=12), tau=1.5)
        for _ in range(20):
            theta = np.array([rng.uniform(-2, 2)])
            w = p.refine_upper(theta, p.init_upper(theta), 1)
            assert p.duality_gap(theta, w, None) <= 1e-10
            g = p.grad_theta_upper(theta, w)
            fd = central_diff(p.exact_j, theta)
            np.testing.assert_allclose(g, fd, rtol=1e-4, atol=1e-7)


class TestDualityGap:
    def test_exact_minimizer_gap_zero(self):
        p = toy([0.0, 1.0, 5.0])
        theta = np.array([0.2])
        w = p.refine_upper(theta, p.init_upper(theta), 1)
        assert abs(p.duality_gap(theta, w, None)) < 1e-12

    def test_argmin_upper_is_weighted_mean(self):
        p = toy([1.0, 3.0])
        theta = p.argmin_upper(np.array([0.0]), np.array([1.0, 1.0]))
        np.testing.assert_allclose(theta, [2.0])
        # all-zero weights leave theta unchanged
        theta = p.argmin_upper(np.array([0.5]), np.array([0.0, 0.0]))
        np.testing.assert_allclose(theta, [0.5])


class TestPerTerm:
    def test_term_ops_sum_to_full(self):
        rng = np.random.default_rng(17)
        p = toy(rng.normal(size=8))
        theta = np.array([0.9])
        w = rng.uniform(0, 1, size=8)
        total = sum(p.term_upper_value(i, theta, w[i]) for i in range(8))
        assert total == pytest.approx(p.upper_value(theta, w), abs=1e-12)
        g = sum(p.term_grad_theta_upper(i, theta, w[i]) for i in range(8))
        np.testing.assert_allclose(g, p.grad_theta_upper(theta, w))
        j = sum(p.term_exact_j(i, theta) for i in range(8))
        assert j == pytest.approx(p.exact_j(theta), abs=1e-12)

    def test_solver_stats_reconstruct_argmin(self):
        rng = np.random.default_rng(19)
        p = toy(rng.normal(size=6))
        theta = np.array([0.1])
        w = p.refine_upper(theta, p.init_upper(theta), 1)
        stats = None
        for i in range(6):
            s = p.term_solver_stats(i, theta, w[i])
            stats = s if stats is None else tuple(a + b for a, b in zip(stats, s))
        np.testing.assert_allclose(p.theta_from_stats(stats, theta),
                                   p.argmin_upper(theta, w))


def test_with_outliers_factory():
    p = ToyHQProblem.with_outliers(100, outlier_fraction=0.2, seed=1)
    assert p.num_terms == 100
    assert np.sum(np.abs(p.targets) > 5.0) == 20
    q = ToyHQProblem.with_outliers(100, outlier_fraction=0.2, seed=1)
    np.testing.assert_array_equal(p.targets, q.targets)
