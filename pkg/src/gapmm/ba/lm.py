"""Levenberg-Marquardt solvers for the weighted and joint lifted costs.

The bundle-adjustment normal equations are solved by the Schur complement
over the points (block-diagonal 3x3 point system, dense Cholesky on the
reduced camera system), which is adequate at the problem sizes this package
targets. The damping loop re-solves the cached linearization when a step is
rejected, so a rejection costs no extra residual evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse

from .cameras import N_CAMERA_PARAMS
from .problem import BAProblem

MAX_DAMPING = 1e12
MIN_DAMPING = 1e-12


@dataclass
class LMState:
    """Damping state shared across rounds of one optimization run."""

    damping: float = 1e-4
    grow: float = 10.0
    shrink: float = 0.1
    max_iterations: int = 10
    rel_decrease_tol: float = 1e-9
    no_progress: bool = False

    def __post_init__(self):
        if self.damping <= 0:
            raise ValueError("damping must be > 0")


@dataclass
class SolveInfo:
    iterations: int = 0
    initial_grad_norm: float = 0.0
    initial_cost: float = 0.0
    final_cost: float = 0.0
    no_progress: bool = False


def _damped(diag: np.ndarray, damping: float) -> np.ndarray:
    floor = 1e-8 * max(1.0, float(diag.max(initial=0.0)))
    return diag + damping * np.maximum(diag, floor)


def _solve_schur(n_cams, n_pts, cam_idx, pt_idx, Hcc, Hpp, Hcp, gc, gp, damping):
    """Solve the two-block normal equations  H [dc; dp] = [gc; gp].

    Per-observation blocks: Hcc (n,9,9), Hpp (n,3,3), Hcp (n,9,3),
    gc (n,9), gp (n,3). Returns (dc (C,9), dp (P,3)) or None when the
    reduced system is not positive definite.
    """
    B = np.zeros((n_cams, N_CAMERA_PARAMS, N_CAMERA_PARAMS))
    np.add.at(B, cam_idx, Hcc)
    C = np.zeros((n_pts, 3, 3))
    np.add.at(C, pt_idx, Hpp)
    v = np.zeros((n_cams, N_CAMERA_PARAMS))
    np.add.at(v, cam_idx, gc)
    w = np.zeros((n_pts, 3))
    np.add.at(w, pt_idx, gp)

    for blocks in (B, C):
        d = np.einsum("nii->ni", blocks)
        d[...] = _damped(d, damping)

    try:
        Cinv = np.linalg.inv(C)
    except np.linalg.LinAlgError:
        return None

    n_obs = len(cam_idx)
    # sparse camera-point coupling E (9C x 3P)
    rows = (cam_idx[:, None, None] * N_CAMERA_PARAMS
            + np.arange(N_CAMERA_PARAMS)[None, :, None])
    cols = pt_idx[:, None, None] * 3 + np.arange(3)[None, None, :]
    E = scipy.sparse.coo_matrix(
        (Hcp.ravel(), (np.broadcast_to(rows, Hcp.shape).ravel(),
                       np.broadcast_to(cols, Hcp.shape).ravel())),
        shape=(n_cams * N_CAMERA_PARAMS, n_pts * 3)).tocsr()
    Cinv_sp = scipy.sparse.block_diag(Cinv, format="csr") if n_pts else \
        scipy.sparse.csr_matrix((0, 0))

    S = np.zeros((n_cams * N_CAMERA_PARAMS,) * 2)
    for k in range(n_cams):
        S[k * N_CAMERA_PARAMS:(k + 1) * N_CAMERA_PARAMS,
          k * N_CAMERA_PARAMS:(k + 1) * N_CAMERA_PARAMS] = B[k]
    if n_obs:
        S -= (E @ Cinv_sp @ E.T).toarray()
    rhs = v.ravel() - (E @ (Cinv_sp @ w.ravel()) if n_obs else 0.0)

    try:
        chol = scipy.linalg.cho_factor(S, lower=True)
        dc = scipy.linalg.cho_solve(chol, rhs)
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError):
        return None
    dp_rhs = w.ravel() - E.T @ dc if n_obs else w.ravel()
    dp = np.einsum("nij,nj->ni", Cinv, dp_rhs.reshape(n_pts, 3))
    return dc.reshape(n_cams, N_CAMERA_PARAMS), dp


def solve_weighted_nlls(problem: BAProblem, theta, weights,
                        state: LMState | None = None):
    """LM on the weighted least-squares part of the lifted cost at fixed
    weights. Returns (theta', SolveInfo); the lifted cost never increases.
    """
    state = state if state is not None else LMState()
    weights = problem._check_weights(weights)
    theta = np.asarray(theta, dtype=float).copy()
    info = SolveInfo()
    cost = problem.lifted_cost(theta, weights)
    info.initial_cost = cost

    for it in range(state.max_iterations):
        r, J_cam, J_pt = problem.linearize(theta)
        wJc = weights[:, None, None] * J_cam
        Hcc = np.einsum("nia,nib->nab", wJc, J_cam)
        Hpp = np.einsum("nia,nib->nab", weights[:, None, None] * J_pt, J_pt)
        Hcp = np.einsum("nia,nib->nab", wJc, J_pt)
        gc = -np.einsum("nia,ni->na", wJc, r)
        gp = -np.einsum("nia,ni->na", weights[:, None, None] * J_pt, r)
        if it == 0:
            full_grad = np.concatenate([
                _scatter(gc, problem.cam_idx, problem.num_cameras).ravel(),
                _scatter(gp, problem.pt_idx, problem.num_points).ravel()])
            info.initial_grad_norm = float(np.linalg.norm(full_grad))

        accepted = False
        for _attempt in range(16):
            sol = _solve_schur(problem.num_cameras, problem.num_points,
                               problem.cam_idx, problem.pt_idx,
                               Hcc, Hpp, Hcp, gc, gp, state.damping)
            if sol is not None:
                dc, dp = sol
                cams, pts = problem.unpack(theta)
                theta_try = problem.pack(cams + dc, pts + dp)
                try:
                    cost_try = problem.lifted_cost(theta_try, weights)
                except ArithmeticError:
                    cost_try = np.inf
                if np.isfinite(cost_try) and cost_try <= cost:
                    theta = theta_try
                    decrease = cost - cost_try
                    cost = cost_try
                    state.damping = max(state.damping * state.shrink, MIN_DAMPING)
                    accepted = True
                    info.iterations += 1
                    break
            state.damping *= state.grow
            if state.damping > MAX_DAMPING:
                break
        if not accepted:
            info.no_progress = True
            state.no_progress = True
            break
        if decrease <= state.rel_decrease_tol * max(1.0, abs(cost)):
            break

    info.final_cost = cost
    return theta, info


def _scatter(per_obs, idx, n):
    out = np.zeros((n, per_obs.shape[1]))
    np.add.at(out, idx, per_obs)
    return out


def joint_hq_step(problem: BAProblem, theta, weights, state: LMState | None = None):
    """One LM round on the joint variable (theta, weights) of the lifted cost.

    Weights enter through v = sqrt(w); per-observation residual block
    [v * r; tau/sqrt(2) * (1 - v^2)], which reproduces the lifted cost
    exactly for the smooth truncated quadratic kernel. The v coordinates
    are eliminated per observation before the camera-point Schur solve.
    Returns (theta', weights', SolveInfo).
    """
    if problem.kernel.kind != "smooth-truncated-quadratic":
        raise ValueError("joint lifted rounds are defined for the "
                         "smooth-truncated-quadratic kernel only")
    state = state if state is not None else LMState()
    theta = np.asarray(theta, dtype=float).copy()
    weights = problem._check_weights(weights)
    v = np.sqrt(weights)
    tau = problem.kernel.tau
    info = SolveInfo()
    cost = problem.lifted_cost(theta, weights)
    info.initial_cost = cost

    for it in range(state.max_iterations):
        r, J_cam, J_pt = problem.linearize(theta)
        rsq = np.sum(r * r, axis=1)
        v2 = v * v
        Jtr_c = np.einsum("nia,ni->na", J_cam, r)
        Jtr_p = np.einsum("nia,ni->na", J_pt, r)
        Hcc = v2[:, None, None] * np.einsum("nia,nib->nab", J_cam, J_cam)
        Hpp = v2[:, None, None] * np.einsum("nia,nib->nab", J_pt, J_pt)
        Hcp = v2[:, None, None] * np.einsum("nia,nib->nab", J_cam, J_pt)
        hcv = v[:, None] * Jtr_c
        hpv = v[:, None] * Jtr_p
        Hvv = rsq + 2.0 * tau * tau * v2
        gc = -v2[:, None] * Jtr_c
        gp = -v2[:, None] * Jtr_p
        gv = -(v * rsq - tau * tau * v * (1.0 - v2))
        if it == 0:
            gfull = np.concatenate([
                _scatter(gc, problem.cam_idx, problem.num_cameras).ravel(),
                _scatter(gp, problem.pt_idx, problem.num_points).ravel(), gv])
            info.initial_grad_norm = float(np.linalg.norm(gfull))

        accepted = False
        for _attempt in range(16):
            denom = _damped(Hvv, state.damping)
            s = 1.0 / denom
            Hcc_r = Hcc - s[:, None, None] * np.einsum("na,nb->nab", hcv, hcv)
            Hcp_r = Hcp - s[:, None, None] * np.einsum("na,nb->nab", hcv, hpv)
            Hpp_r = Hpp - s[:, None, None] * np.einsum("na,nb->nab", hpv, hpv)
            gc_r = gc - (s * gv)[:, None] * hcv
            gp_r = gp - (s * gv)[:, None] * hpv
            sol = _solve_schur(problem.num_cameras, problem.num_points,
                               problem.cam_idx, problem.pt_idx,
                               Hcc_r, Hpp_r, Hcp_r, gc_r, gp_r, state.damping)
            if sol is not None:
                dc, dp = sol
                dv = s * (gv - np.einsum("na,na->n", hcv, dc[problem.cam_idx])
                          - np.einsum("na,na->n", hpv, dp[problem.pt_idx]))
                cams, pts = problem.unpack(theta)
                theta_try = problem.pack(cams + dc, pts + dp)
                v_try = v + dv
                try:
                    cost_try = problem.lifted_cost(theta_try, v_try * v_try)
                except ArithmeticError:
                    cost_try = np.inf
                if np.isfinite(cost_try) and cost_try <= cost:
                    theta, v = theta_try, v_try
                    decrease = cost - cost_try
                    cost = cost_try
                    state.damping = max(state.damping * state.shrink, MIN_DAMPING)
                    accepted = True
                    info.iterations += 1
                    break
            state.damping *= state.grow
            if state.damping > MAX_DAMPING:
                break
        if not accepted:
            info.no_progress = True
            state.no_progress = True
            break
        if decrease <= state.rel_decrease_tol * max(1.0, abs(cost)):
            break

    info.final_cost = cost
    return theta, v * v, info


class DenseNLLSProblem:
    """Small dense nonlinear-least-squares model sharing the LM damping loop.

    ``residual_fn(x) -> (m,)`` and ``jacobian_fn(x) -> (m, d)``; used for
    validating the solver against closed-form weighted least squares and for
    problems without camera-point structure.
    """

    def __init__(self, residual_fn, jacobian_fn, weights=None):
        self.residual_fn = residual_fn
        self.jacobian_fn = jacobian_fn
        self.weights = weights

    def cost(self, x) -> float:
        r = self.residual_fn(x)
        w = np.ones_like(r) if self.weights is None else self.weights
        return 0.5 * float(np.sum(w * r * r))

    def solve(self, x0, state: LMState | None = None):
        state = state if state is not None else LMState(max_iterations=50)
        x = np.asarray(x0, dtype=float).copy()
        cost = self.cost(x)
        info = SolveInfo(initial_cost=cost)
        for _ in range(state.max_iterations):
            r = self.residual_fn(x)
            J = self.jacobian_fn(x)
            w = np.ones_like(r) if self.weights is None else self.weights
            H = J.T @ (w[:, None] * J)
            g = -J.T @ (w * r)
            if info.iterations == 0:
                info.initial_grad_norm = float(np.linalg.norm(g))
            accepted = False
            for _attempt in range(16):
                Hd = H.copy()
                Hd[np.diag_indices_from(Hd)] = _damped(np.diag(H), state.damping)
                try:
                    dx = np.linalg.solve(Hd, g)
                except np.linalg.LinAlgError:
                    dx = None
                if dx is not None:
                    cost_try = self.cost(x + dx)
                    if np.isfinite(cost_try) and cost_try <= cost:
                        x = x + dx
                        decrease = cost - cost_try
                        cost = cost_try
                        state.damping = max(state.damping * state.shrink, MIN_DAMPING)
                        accepted = True
                        info.iterations += 1
                        break
                state.damping *= state.grow
                if state.damping > MAX_DAMPING:
                    break
            if not accepted:
                info.no_progress = True
                break
            if decrease <= state.rel_decrease_tol * max(1.0, abs(cost)):
                break
        info.final_cost = cost
        return x, info
