import numpy as np
import pytest

from gapmm.chl import inference
from gapmm.chl.inference import cd_backend_name, cd_dual_pass, cd_primal_pass
from gapmm.chl.net import (
    DualState,
    LayeredNet,
    PrimalState,
    clamped_dual,
    clamped_energy,
    ff_init,
    free_dual,
    free_energy,
    zero_dual,
)


def energy_quadratic(net, x, y):
    """Assemble E(z) = 1/2 z^T H z + q^T z + c from the residual structure
    (independent of the sweep code)."""
    sizes = net.sizes
    dim = sum(sizes[1:-1])

    def res(zflat):
        state = PrimalState(_split(zflat, sizes))
        return clamped_energy(net, x, y, state)

    H = np.zeros((dim, dim))
    q = np.zeros(dim)
    c = res(np.zeros(dim))
    h = 1.0
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = h
        q[i] = (res(e) - res(-e)) / 2.0
        H[i, i] = res(e) - 2 * c + res(-e)
    for i in range(dim):
        for j in range(i + 1, dim):
            e = np.zeros(dim)
            e[i] = h
            e[j] = h
            H[i, j] = H[j, i] = res(e) - c - q[i] - q[j] \
                - 0.5 * H[i, i] - 0.5 * H[j, j]
    return H, q, c


def _split(flat, sizes):
    out = []
    pos = 0
    for n in sizes[1:-1]:
        out.append(flat[pos:pos + n].copy())
        pos += n
    return out


class TestPrimalCD:
    def test_energy_non_increasing(self):
        rng = np.random.default_rng(0)
        for trial in range(100):
            sizes = [[3, 4, 2], [2, 3, 3, 1]][trial % 2]
            net = LayeredNet.random(sizes, seed=trial, scale=0.9)
            x = rng.normal(size=sizes[0])
            y = rng.normal(size=sizes[-1])
            state = PrimalState([np.abs(rng.normal(size=n)) for n in sizes[1:-1]])
            prev = clamped_energy(net, x, y, state)
            for _ in range(5):
                state = cd_primal_pass(net, x, y, state)
                cur = clamped_energy(net, x, y, state)
                assert cur <= prev + 1e-14
                prev = cur

    def test_fixed_point_at_minimizer(self):
        net = LayeredNet.random([3, 4, 2], seed=5, scale=0.8)
        x = np.array([0.3, -0.7, 1.1])
        y = np.array([0.5, -0.2])
        state = ff_init(net, x)
        for _ in range(400):
            state = cd_primal_pass(net, x, y, state)
        again = cd_primal_pass(net, x, y, state)
        for z1, z2 in zip(state.zs, again.zs):
            np.testing.assert_allclose(z2, z1, atol=1e-12)

    def test_matches_projected_gradient_oracle(self):
        # long-run projected gradient on the assembled quadratic
        net = LayeredNet.random([4, 3, 2], seed=2, scale=0.8)
        x = np.array([0.5, -1.0, 0.3, 0.9])
        y = np.array([1.0, 0.2])
        H, q, c = energy_quadratic(net, x, y)
        gamma = 1.0 / np.linalg.eigvalsh(H).max()
        z = np.ones(H.shape[0])
        for _ in range(1_000_000):
            z = np.maximum(0.0, z - gamma * (H @ z + q))
        oracle = 0.5 * z @ H @ z + q @ z + c

        state = ff_init(net, x)
        state = cd_primal_pass(net, x, y, state, passes=500)
        assert clamped_energy(net, x, y, state) == pytest.approx(oracle, abs=1e-8)

    def test_free_phase_monotone(self):
        rng = np.random.default_rng(3)
        net = LayeredNet.random([3, 4, 2], seed=7)
        x = rng.normal(size=3)
        state = PrimalState([np.abs(rng.normal(size=4))])
        prev = free_energy(net, x, state)
        for _ in range(10):
            state = cd_primal_pass(net, x, None, state)
            cur = free_energy(net, x, state)
            assert cur <= prev + 1e-14
            prev = cur

    def test_zero_passes_rejected(self):
        net = LayeredNet.random([2, 2, 1], seed=0)
        with pytest.raises(ValueError):
            cd_primal_pass(net, np.zeros(2), np.zeros(1), ff_init(net, np.zeros(2)), 0)


class TestDualCD:
    def test_dual_non_decreasing(self):
        rng = np.random.default_rng(1)
        for trial in range(100):
            sizes = [[3, 4, 2], [2, 3, 3, 1]][trial % 2]
            net = LayeredNet.random(sizes, seed=trial, scale=0.9)
            x = rng.normal(size=sizes[0])
            y = rng.normal(size=sizes[-1])
            state = DualState([np.abs(rng.normal(size=n)) for n in sizes[1:-1]],
                              rng.normal(size=sizes[-1]))
            prev = clamped_dual(net, x, y, state)
            for _ in range(5):
                state = cd_dual_pass(net, x, y, state)
                cur = clamped_dual(net, x, y, state)
                assert cur >= prev - 1e-14
                prev = cur

    def test_fixed_point_at_optimum(self):
        net = LayeredNet.random([3, 4, 2], seed=9, scale=0.8)
        x = np.array([0.3, -0.7, 1.1])
        y = np.array([0.5, -0.2])
        state = zero_dual(net, clamped=True)
        state = cd_dual_pass(net, x, y, state, passes=500)
        again = cd_dual_pass(net, x, y, state)
        val = clamped_dual(net, x, y, state)
        assert clamped_dual(net, x, y, again) == pytest.approx(val, abs=1e-12)

    def test_clamped_gap_closes_432(self):
        net = LayeredNet.random([4, 3, 2], seed=4, scale=0.8)
        x = np.array([0.5, -1.0, 0.3, 0.9])
        y = np.array([1.0, 0.2])
        primal = cd_primal_pass(net, x, y, ff_init(net, x), passes=500)
        dual = cd_dual_pass(net, x, y, zero_dual(net, clamped=True), passes=500)
        gap = clamped_energy(net, x, y, primal) - clamped_dual(net, x, y, dual)
        assert -1e-12 <= gap < 1e-6

    def test_free_gap_closes(self):
        net = LayeredNet.random([4, 3, 2], seed=4, scale=0.8)
        x = np.array([0.5, -1.0, 0.3, 0.9])
        primal = cd_primal_pass(net, x, None, ff_init(net, x), passes=500)
        dual = cd_dual_pass(net, x, None, zero_dual(net, clamped=False), passes=500)
        gap = free_energy(net, x, primal) - free_dual(net, x, dual)
        assert -1e-12 <= gap < 1e-6

    def test_clamped_needs_target(self):
        net = LayeredNet.random([2, 2, 1], seed=0)
        with pytest.raises(ValueError):
            cd_dual_pass(net, np.zeros(2), None, zero_dual(net, clamped=True))


class TestBackends:
    def test_backends_agree(self):
        try:
            from gapmm.chl import _cd_cy  # noqa: F401
        except ImportError:
            pytest.skip("compiled backend not built")
        rng = np.random.default_rng(8)
        net = LayeredNet.random([5, 4, 3, 2], seed=3, scale=0.8)
        x = rng.normal(size=5)
        y = rng.normal(size=2)
        active = cd_backend_name()
        results = {}
        for be in ("python", "compiled"):
            inference.set_backend(be)
            p = cd_primal_pass(net, x, y, ff_init(net, x), passes=50)
            d = cd_dual_pass(net, x, y, zero_dual(net, clamped=True), passes=50)
            results[be] = (p, d)
        inference.set_backend(active)
        for z1, z2 in zip(results["python"][0].zs, results["compiled"][0].zs):
            np.testing.assert_allclose(z1, z2, rtol=1e-12, atol=1e-14)
        for s1, s2 in zip(results["python"][1].slacks, results["compiled"][1].slacks):
            np.testing.assert_allclose(s1, s2, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(results["python"][1].lam_top,
                                   results["compiled"][1].lam_top,
                                   rtol=1e-12, atol=1e-14)
