"""Contrastive training of the layered energy model as a separable
bound-family problem.

Per sample i the contrastive objective is J_i = min E_clamped - min E_free,
sandwiched by

    upper:  E_clamped(z_hat_i) - D_free(lam_check_i)
    lower:  D_clamped(lam_hat_i) - E_free(z_check_i)

so an upper latent is a (clamped primal, free dual) pair and a lower latent
the mirrored (clamped dual, free primal) pair. One refinement pass runs one
coordinate-descent sweep on each member of the pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..bounds import BoundProblem
from .inference import cd_dual_pass, cd_primal_pass
from .net import (
    DualState,
    LayeredNet,
    PrimalState,
    Sample,
    clamped_dual,
    clamped_energy,
    ff_init,
    free_dual,
    free_energy,
    lambdas_from,
    residuals,
    zero_dual,
)

LIPSCHITZ_FLOOR = 1e-3
LIPSCHITZ_SAFETY = 6.0


@dataclass
class UpperState:
    z: PrimalState      # clamped-phase activations
    lam: DualState      # free-phase dual


@dataclass
class LowerState:
    lam: DualState      # clamped-phase dual
    z: PrimalState      # free-phase activations


def contrastive_upper(net: LayeredNet, batch, ups) -> float:
    if len(batch) != len(ups):
        raise ValueError("one state pair per sample required")
    total = 0.0
    for sample, up in zip(batch, ups):
        total += clamped_energy(net, sample.x, sample.y, up.z)
        total -= free_dual(net, sample.x, up.lam)
    return total


def contrastive_lower(net: LayeredNet, batch, lows) -> float:
    if len(batch) != len(lows):
        raise ValueError("one state pair per sample required")
    total = 0.0
    for sample, low in zip(batch, lows):
        total += clamped_dual(net, sample.x, sample.y, low.lam)
        total -= free_energy(net, sample.x, low.z)
    return total


def grad_params_upper_single(net: LayeredNet, sample: Sample,
                             up: UpperState) -> np.ndarray:
    """Partial derivative of the per-sample upper bound in the parameters,
    at fixed states (feasibility is pinned by the slack parametrization, so
    no projection term appears)."""
    L = net.depth
    x = np.asarray(sample.x, dtype=float)
    es = residuals(net, x, sample.y, up.z)
    lams = lambdas_from(net, DualState(up.lam.slacks, None))

    # adjoints of the free dual through the slack reconstruction chain
    adj = [None] * max(L - 1, 0)
    if L >= 2:
        adj[0] = -lams[0] - net.biases[0] - net.weights[0] @ x
        for m in range(1, L - 1):
            adj[m] = -lams[m] - net.biases[m] + net.weights[m] @ adj[m - 1]

    grads = []
    zs = [x] + up.z.zs
    for k in range(L):
        dW = -np.outer(es[k], zs[k])
        db = -es[k].copy()
        if k == 0 and L >= 2:
            dW += np.outer(lams[0], x)
        elif 1 <= k <= L - 2:
            dW -= np.outer(lams[k], adj[k - 1])
        if k <= L - 2:
            db += lams[k]
        grads.append(dW.ravel())
        grads.append(db)
    return np.concatenate(grads)


def estimate_lipschitz(net: LayeredNet, samples, safety: float = LIPSCHITZ_SAFETY,
                       dual_probe_passes: int = 10) -> float:
    """Conservative curvature bound of theta -> upper bound at fixed states.

    Accumulates activation-norm bounds (feed-forward pass) and dual-norm
    estimates (a few cold-start dual sweeps) over the dataset; any valid
    upper bound is acceptable, so a generous safety factor is applied.
    Returns the floor for an empty dataset.
    """
    total = 0.0
    for sample in samples:
        total += per_term_lipschitz(net, sample, safety, dual_probe_passes)
    return max(total, LIPSCHITZ_FLOOR)


def per_term_lipschitz(net: LayeredNet, sample: Sample,
                       safety: float = LIPSCHITZ_SAFETY,
                       dual_probe_passes: int = 10) -> float:
    x = np.asarray(sample.x, dtype=float)
    state = ff_init(net, x)
    act = max(float(z @ z) for z in [x] + state.zs)
    dual = cd_dual_pass(net, x, sample.y, zero_dual(net, clamped=True),
                        passes=dual_probe_passes)
    lam_sq = max(float(lam @ lam) for lam in lambdas_from(net, dual))
    return safety * (2.0 + act + lam_sq)


class CHLProblem(BoundProblem):
    """Separable bound problem over a labeled dataset.

    theta is the flat parameter vector of the layered net (weights and
    biases interleaved, layer by layer).
    """

    has_exact_j = False
    has_lower_bound = True
    separable = True

    def __init__(self, sizes, samples):
        self.layer_sizes = tuple(int(s) for s in sizes)
        if len(self.layer_sizes) < 2:
            raise ValueError("need at least input and output layer sizes")
        self.samples = list(samples)
        if not self.samples:
            raise ValueError("need at least one training sample")
        for i, s in enumerate(self.samples):
            if s.x.shape != (self.layer_sizes[0],):
                raise ValueError(f"sample {i}: input has shape {s.x.shape}, "
                                 f"expected ({self.layer_sizes[0]},)")
            if s.y.shape != (self.layer_sizes[-1],):
                raise ValueError(f"sample {i}: target has shape {s.y.shape}, "
                                 f"expected ({self.layer_sizes[-1]},)")
        self.num_terms = len(self.samples)
        template = LayeredNet.random(self.layer_sizes, seed=0)
        self.dim = template.num_params
        self._cached_theta = None
        self._cached_net = None

    def net(self, theta) -> LayeredNet:
        if theta is not self._cached_theta:
            self._cached_net = LayeredNet.from_flat(self.layer_sizes,
                                                    self._check_theta(theta))
            self._cached_theta = theta
        return self._cached_net

    def initial_theta(self, seed: int = 0, scale: float = 0.5) -> np.ndarray:
        return LayeredNet.random(self.layer_sizes, seed=seed, scale=scale).pack()

    # -- per-term operations ---------------------------------------------------

    def term_init_upper(self, i: int, theta):
        net = self.net(theta)
        return UpperState(z=ff_init(net, self.samples[i].x),
                          lam=zero_dual(net, clamped=False))

    def term_init_lower(self, i: int, theta):
        net = self.net(theta)
        return LowerState(lam=zero_dual(net, clamped=True),
                          z=ff_init(net, self.samples[i].x))

    def term_upper_value(self, i: int, theta, up_i) -> float:
        net = self.net(theta)
        s = self.samples[i]
        return clamped_energy(net, s.x, s.y, up_i.z) - free_dual(net, s.x, up_i.lam)

    def term_lower_value(self, i: int, theta, low_i) -> float:
        net = self.net(theta)
        s = self.samples[i]
        return clamped_dual(net, s.x, s.y, low_i.lam) - free_energy(net, s.x, low_i.z)

    def term_refine_upper(self, i: int, theta, up_i, passes: int):
        self._check_passes(passes)
        net = self.net(theta)
        s = self.samples[i]
        return UpperState(z=cd_primal_pass(net, s.x, s.y, up_i.z, passes),
                          lam=cd_dual_pass(net, s.x, None, up_i.lam, passes))

    def term_refine_lower(self, i: int, theta, low_i, passes: int):
        self._check_passes(passes)
        net = self.net(theta)
        s = self.samples[i]
        return LowerState(lam=cd_dual_pass(net, s.x, s.y, low_i.lam, passes),
                          z=cd_primal_pass(net, s.x, None, low_i.z, passes))

    def term_grad_theta_upper(self, i: int, theta, up_i) -> np.ndarray:
        return grad_params_upper_single(self.net(theta), self.samples[i], up_i)

    # -- full-problem operations ----------------------------------------------

    def init_upper(self, theta):
        return [self.term_init_upper(i, theta) for i in range(self.num_terms)]

    def init_lower(self, theta):
        return [self.term_init_lower(i, theta) for i in range(self.num_terms)]

    def upper_value(self, theta, up) -> float:
        return contrastive_upper(self.net(theta), self.samples, up)

    def lower_value(self, theta, low) -> float:
        return contrastive_lower(self.net(theta), self.samples, low)

    def refine_upper(self, theta, up, passes: int):
        return [self.term_refine_upper(i, theta, up[i], passes)
                for i in range(self.num_terms)]

    def refine_lower(self, theta, low, passes: int):
        return [self.term_refine_lower(i, theta, low[i], passes)
                for i in range(self.num_terms)]

    def grad_theta_upper(self, theta, up) -> np.ndarray:
        net = self.net(theta)
        total = np.zeros(self.dim)
        for sample, state in zip(self.samples, up):
            total += grad_params_upper_single(net, sample, state)
        return total

    def estimate_lipschitz(self, theta, safety: float = LIPSCHITZ_SAFETY) -> float:
        return estimate_lipschitz(self.net(theta), self.samples, safety)

    def per_term_lipschitz_bound(self, theta, safety: float = LIPSCHITZ_SAFETY) -> float:
        net = self.net(theta)
        return max(per_term_lipschitz(net, s, safety) for s in self.samples)
