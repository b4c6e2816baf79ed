"""Coordinate-descent inference with backend dispatch.

One pass is one full sweep of exact 1-D updates over all coordinates. The
compiled kernel is preferred when importable; set GAPMM_CD_BACKEND to
"python" or "compiled" to force a choice. Both backends follow the same
fixed sweep order, so results agree to floating-point reduction order.
"""

from __future__ import annotations

import os

import numpy as np

from .net import DualState, LayeredNet, PrimalState, residuals


def _select_backend():
    choice = os.environ.get("GAPMM_CD_BACKEND", "auto").lower()
    if choice in ("compiled", "cy", "cython"):
        from . import _cd_cy
        return _cd_cy
    if choice in ("python", "py"):
        from . import _cd_py
        return _cd_py
    try:
        from . import _cd_cy
        return _cd_cy
    except ImportError:
        from . import _cd_py
        return _cd_py


_backend = _select_backend()


def cd_backend_name() -> str:
    return _backend.BACKEND


def set_backend(name: str):
    """Switch backend at runtime ("python" or "compiled"); for benchmarks."""
    global _backend
    if name in ("compiled", "cy", "cython"):
        from . import _cd_cy
        _backend = _cd_cy
    elif name in ("python", "py"):
        from . import _cd_py
        _backend = _cd_py
    else:
        raise ValueError(f"unknown backend {name!r}")


def _cache(net: LayeredNet) -> dict:
    # nets are immutable while a batch is evaluated, so weight-derived
    # quantities can live on the instance
    cache = getattr(net, "_inference_cache", None)
    if cache is None:
        cache = {}
        net._inference_cache = cache
    return cache


def _colsq(net: LayeredNet):
    cache = _cache(net)
    if "colsq" not in cache:
        cache["colsq"] = [np.sum(W * W, axis=0) for W in net.weights]
    return cache["colsq"]


def _dual_setup(net: LayeredNet, n_levels: int):
    """Direction stacks, curvatures and level offsets for the dual sweeps."""
    cache = _cache(net)
    key = ("dual", n_levels)
    if key not in cache:
        sizes = net.sizes
        offsets = np.zeros(n_levels + 1, dtype=np.int64)
        np.cumsum(sizes[1:n_levels + 1], out=offsets[1:])
        dstacks, qs = [], []
        for t in range(n_levels - 1, -1, -1):
            D = [None] * (t + 1)
            D[t] = np.eye(sizes[t + 1])
            for m in range(t - 1, -1, -1):
                D[m] = net.weights[m + 1].T @ D[m + 1]
            stacked = np.ascontiguousarray(np.concatenate(D, axis=0))
            dstacks.append(stacked)
            qs.append(np.sum(stacked * stacked, axis=0))
        cache[key] = (dstacks, qs, offsets)
    return cache[key]


def cd_primal_pass(net: LayeredNet, x, y, state: PrimalState,
                   passes: int = 1) -> PrimalState:
    """Sweeps of exact coordinate minimization of the (clamped if y is
    given, else free) primal energy; the energy never increases."""
    if passes < 1:
        raise ValueError("passes must be >= 1")
    out = state.copy()
    if not out.zs:
        return out
    es = [np.ascontiguousarray(e) for e in residuals(net, x, y, out)]
    _backend.primal_sweeps(net.weights, _colsq(net), out.zs, es, passes)
    return out


def cd_dual_pass(net: LayeredNet, x, y, state: DualState,
                 passes: int = 1) -> DualState:
    """Sweeps of exact coordinate maximization of the dual value in the
    slack parametrization (plus the top dual block in the clamped phase)."""
    if passes < 1:
        raise ValueError("passes must be >= 1")
    clamped = state.lam_top is not None
    if clamped and y is None:
        raise ValueError("clamped dual refinement needs the target y")
    out = state.copy()
    sizes = net.sizes
    depth = net.depth
    x = np.asarray(x, dtype=float)

    # active dual levels: lambda_1..lambda_L clamped, lambda_1..lambda_{L-1} free
    lam_L = out.lam_top if clamped else np.zeros(sizes[-1])
    full = [None] * depth
    full[depth - 1] = lam_L
    for k in range(depth - 2, -1, -1):
        full[k] = net.weights[k + 1].T @ full[k + 1] + out.slacks[k]
    lams = full if clamped else full[:-1]
    if not lams:
        return out

    cvecs = [-net.biases[i].copy() for i in range(len(lams))]
    if clamped:
        cvecs[depth - 1] += np.asarray(y, dtype=float)
    cvecs[0] -= net.weights[0] @ x
    gstack = np.concatenate([c - lam for c, lam in zip(cvecs, lams)])
    dstacks, qs, offsets = _dual_setup(net, len(lams))
    top_level = len(lams) - 1 if clamped else -1
    _backend.dual_sweeps(out.slacks, gstack, dstacks, qs, offsets, top_level, passes)
    if clamped:
        out.lam_top[:] = cvecs[-1] - gstack[offsets[-2]:offsets[-1]]
    return out
