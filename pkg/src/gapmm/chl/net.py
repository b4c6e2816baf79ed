"""Convex layered energy model: primal/dual energies of the clamped and
free phases.

Primal (clamped) energy for activations z_1..z_{L-1} >= 0:

    E(z) = 1/2 ||a_L - y||^2 + 1/2 ||z_1 - W_0 x - b_0||^2
           + 1/2 sum_{k=1}^{L-2} ||z_{k+1} - W_k z_k - b_k||^2,

with the linear readout a_L = W_{L-1} z_{L-1} + b_{L-1}. The free phase
drops the loss term. The dual maximizes

    D(lambda) = lambda_L . y - 1/2 ||lambda_L||^2
                - 1/2 sum_{k=1}^{L-1} ||lambda_k||^2
                - lambda_1 . (W_0 x) - sum_{k=1}^{L} lambda_k . b_{k-1}

subject to lambda_k >= W_k^T lambda_{k+1}; the free-phase dual forces
lambda_L = 0. Dual feasibility is carried structurally by nonnegative
slacks: lambda_k = W_k^T lambda_{k+1} + s_k, so every dual state stays
feasible for any parameters and the partial derivative of the bounds in
the parameters is well defined at fixed states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Sample:
    x: np.ndarray
    y: np.ndarray


class LayeredNet:
    """Weights W_k (n_{k+1} x n_k) and biases b_k for k = 0..L-1."""

    def __init__(self, weights, biases):
        self.weights = [np.asarray(W, dtype=float) for W in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        if len(self.weights) != len(self.biases):
            raise ValueError("need one bias vector per weight matrix")
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise ValueError(f"layer {k}: weight/bias shapes disagree")
            if k and W.shape[1] != self.weights[k - 1].shape[0]:
                raise ValueError(f"layer {k}: input size does not match layer {k - 1}")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {k}: non-finite parameters")

    @classmethod
    def random(cls, sizes, seed: int = 0, scale: float = 0.5,
               zero_bias: bool = False) -> "LayeredNet":
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            weights.append(rng.normal(0.0, scale / np.sqrt(n_in), size=(n_out, n_in)))
            biases.append(np.zeros(n_out) if zero_bias
                          else rng.normal(0.0, 0.1, size=n_out))
        return cls(weights, biases)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple([self.weights[0].shape[1]] + [W.shape[0] for W in self.weights])

    @property
    def depth(self) -> int:
        """Number of weight layers L."""
        return len(self.weights)

    @property
    def num_params(self) -> int:
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def pack(self) -> np.ndarray:
        parts = []
        for W, b in zip(self.weights, self.biases):
            parts.append(W.ravel())
            parts.append(b)
        return np.concatenate(parts)

    @classmethod
    def from_flat(cls, sizes, theta) -> "LayeredNet":
        theta = np.asarray(theta, dtype=float)
        weights, biases = [], []
        pos = 0
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            weights.append(theta[pos:pos + n_out * n_in].reshape(n_out, n_in))
            pos += n_out * n_in
            biases.append(theta[pos:pos + n_out])
            pos += n_out
        if pos != theta.size:
            raise ValueError(f"theta has {theta.size} entries, expected {pos}")
        return cls(weights, biases)


@dataclass
class PrimalState:
    """Hidden activations z_1..z_{L-1}, all elementwise nonnegative."""

    zs: list

    def copy(self) -> "PrimalState":
        return PrimalState([z.copy() for z in self.zs])


@dataclass
class DualState:
    """Nonnegative slacks s_1..s_{L-1}; lam_top is lambda_L (None in the
    free phase, where it is identically zero)."""

    slacks: list
    lam_top: np.ndarray | None = None

    def copy(self) -> "DualState":
        return DualState([s.copy() for s in self.slacks],
                         None if self.lam_top is None else self.lam_top.copy())


def _check_primal(net: LayeredNet, state: PrimalState):
    sizes = net.sizes
    if len(state.zs) != net.depth - 1:
        raise ValueError(f"expected {net.depth - 1} hidden layers, got {len(state.zs)}")
    for k, z in enumerate(state.zs):
        if z.shape != (sizes[k + 1],):
            raise ValueError(f"hidden layer {k + 1} has shape {z.shape}, "
                             f"expected ({sizes[k + 1]},)")


def readout(net: LayeredNet, x, state: PrimalState) -> np.ndarray:
    """Network output a_L = W_{L-1} z_{L-1} + b_{L-1}."""
    bottom = state.zs[-1] if state.zs else np.asarray(x, dtype=float)
    return net.weights[-1] @ bottom + net.biases[-1]


def residuals(net: LayeredNet, x, y, state: PrimalState) -> list:
    """Per-layer residuals; with a target y the last entry is the loss
    residual y - a_L, without it the list stops at the last hidden layer."""
    _check_primal(net, state)
    x = np.asarray(x, dtype=float)
    es = []
    prev = x
    for k in range(net.depth - 1):
        es.append(state.zs[k] - net.weights[k] @ prev - net.biases[k])
        prev = state.zs[k]
    if y is not None:
        es.append(np.asarray(y, dtype=float) - net.weights[-1] @ prev - net.biases[-1])
    return es


def clamped_energy(net: LayeredNet, x, y, state: PrimalState) -> float:
    es = residuals(net, x, y, state)
    return 0.5 * float(sum(e @ e for e in es))


def free_energy(net: LayeredNet, x, state: PrimalState) -> float:
    es = residuals(net, x, None, state)
    return 0.5 * float(sum(e @ e for e in es))


def ff_init(net: LayeredNet, x) -> PrimalState:
    """ReLU forward pass; the canonical cold start (always feasible)."""
    zs = []
    prev = np.asarray(x, dtype=float)
    for k in range(net.depth - 1):
        prev = np.maximum(0.0, net.weights[k] @ prev + net.biases[k])
        zs.append(prev)
    return PrimalState(zs)


def zero_dual(net: LayeredNet, clamped: bool) -> DualState:
    sizes = net.sizes
    slacks = [np.zeros(sizes[k]) for k in range(1, net.depth)]
    lam_top = np.zeros(sizes[-1]) if clamped else None
    return DualState(slacks, lam_top)


def lambdas_from(net: LayeredNet, state: DualState) -> list:
    """Reconstruct lambda_1..lambda_L from the slack parametrization."""
    sizes = net.sizes
    if len(state.slacks) != net.depth - 1:
        raise ValueError(f"expected {net.depth - 1} slack layers, "
                         f"got {len(state.slacks)}")
    lam_top = state.lam_top if state.lam_top is not None else np.zeros(sizes[-1])
    if lam_top.shape != (sizes[-1],):
        raise ValueError("top dual vector has the wrong size")
    lams = [None] * net.depth
    lams[-1] = np.asarray(lam_top, dtype=float)
    for k in range(net.depth - 2, -1, -1):
        s = state.slacks[k]
        if s.shape != (sizes[k + 1],):
            raise ValueError(f"slack layer {k + 1} has shape {s.shape}")
        lams[k] = net.weights[k + 1].T @ lams[k + 1] + s
    return lams


def clamped_dual(net: LayeredNet, x, y, state: DualState) -> float:
    if state.lam_top is None:
        raise ValueError("clamped dual needs a top dual vector")
    lams = lambdas_from(net, state)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lam_L = lams[-1]
    val = float(lam_L @ y) - 0.5 * float(lam_L @ lam_L)
    for lam in lams[:-1]:
        val -= 0.5 * float(lam @ lam)
    val -= float(lams[0] @ (net.weights[0] @ x))
    for k, lam in enumerate(lams):
        val -= float(lam @ net.biases[k])
    return val


def free_dual(net: LayeredNet, x, state: DualState) -> float:
    if state.lam_top is not None and np.any(state.lam_top != 0.0):
        raise ValueError("free-phase dual requires lambda_L = 0")
    lams = lambdas_from(net, DualState(state.slacks, None))
    x = np.asarray(x, dtype=float)
    val = 0.0
    for lam in lams[:-1]:
        val -= 0.5 * float(lam @ lam)
    val -= float(lams[0] @ (net.weights[0] @ x))
    for k, lam in enumerate(lams[:-1]):
        val -= float(lam @ net.biases[k])
    return val
