"""Optimization drivers built on the bound-family contract.

Four drivers plus a baseline:

* ``run_regemm``           -- relaxed generalized MM: accept latents whose
  upper value improves a convex combination of a lower bound and the
  previous accepted upper value.
* ``run_constant_memory_regemm`` -- same criterion for separable problems,
  with per-term latents cold-started, accumulated and discarded term by
  term, so peak latent memory is one term's worth.
* ``run_sudemm``           -- sufficient-descent MM: accept latents whose
  duality gap is at most a rho-fraction of the decrease guaranteed by a
  1/L gradient step.
* ``run_stochastic_sudemm`` -- mini-batch variant with per-term gap
  conditions and diminishing step sizes.
* ``run_alternating_baseline`` -- plain alternation (standard MM when the
  refinement is exact).

All drivers cold-start latent refinement each iteration and search the
required pass count by repeated doubling, which spends at most four times
the minimally sufficient number of passes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import BoundProblem
from .schedules import ConstantSchedule, PowerSchedule, require_valid_schedules
from .trace import RunTrace

GRADIENT = "gradient"
SOLVER = "solver"


@dataclass
class ReGeMMConfig:
    eta: float = 0.5
    iterations: int = 100
    r_min: int = 1
    r_max: int = 4096
    theta_update: str = SOLVER
    lipschitz: float | None = None

    def __post_init__(self):
        if not 0.0 < self.eta < 1.0:
            raise ValueError("eta must lie in (0, 1)")
        if self.r_min < 1:
            raise ValueError("r_min must be >= 1")
        if self.r_max < self.r_min:
            raise ValueError("r_max must be >= r_min")
        if self.theta_update not in (GRADIENT, SOLVER):
            raise ValueError(f"unknown theta update mode {self.theta_update!r}")
        if self.theta_update == GRADIENT and not (self.lipschitz and self.lipschitz > 0):
            raise ValueError("gradient updates require a Lipschitz constant > 0")


@dataclass
class SuDeMMConfig:
    lipschitz: float
    rho: float = 0.5
    iterations: int = 100
    r_min: int = 1
    r_max: int = 4096

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        if self.lipschitz <= 0:
            raise ValueError("lipschitz must be > 0")
        if self.r_min < 1 or self.r_max < self.r_min:
            raise ValueError("need 1 <= r_min <= r_max")


@dataclass
class StochasticSuDeMMConfig:
    alpha: PowerSchedule | ConstantSchedule
    rho: PowerSchedule | ConstantSchedule
    iterations: int = 1000
    batch_size: int = 10
    seed: int = 0
    max_passes: int = 40
    fixed_passes: int | None = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.max_passes < 1:
            raise ValueError("max_passes must be >= 1")
        if self.fixed_passes is not None and self.fixed_passes < 1:
            raise ValueError("fixed_passes must be >= 1")


def regemm_accepts(upper: float, lower: float, prev_upper: float, eta: float) -> bool:
    """Acceptance test for the relaxed criterion, with rounding-scale slack.

    The slack matters once the bounds agree to machine precision: upper and
    lower are computed through different expressions, so ulp-level noise
    must not stall the doubling loop.
    """
    slack = 1e-12 * max(1.0, abs(lower), abs(prev_upper))
    return upper <= eta * lower + (1.0 - eta) * prev_upper + slack


def sudemm_accepts(upper: float, lower: float, grad_sq: float, rho: float,
                   lipschitz: float) -> bool:
    slack = 1e-12 * max(1.0, abs(lower))
    return upper - lower <= rho / (2.0 * lipschitz) * grad_sq + slack


class LatentMeter:
    """Counts simultaneously live per-term latents (constant-memory check)."""

    def __init__(self):
        self.current = 0
        self.peak = 0

    def acquire(self):
        self.current += 1
        self.peak = max(self.peak, self.current)

    def release(self):
        self.current -= 1


def _doubling_schedule(r_min: int, r_max: int):
    r = r_min
    while r <= r_max:
        yield r
        r *= 2


def _refine_doubled(problem: BoundProblem, theta, r_min, r_max, accept):
    """Cold-started refinement with doubled pass counts until ``accept``.

    Returns (ok, up, low, upper, lower, passes_spent, attempts).
    """
    spent = 0
    attempts = []
    sides = 2 if problem.has_lower_bound else 1
    for r in _doubling_schedule(r_min, r_max):
        up = problem.refine_upper(theta, problem.init_upper(theta), r)
        low = problem.refine_lower(theta, problem.init_lower(theta), r)
        spent += sides * r
        attempts.append(r)
        upper = problem.upper_value(theta, up)
        lower = problem.lower_value(theta, low)
        if accept(upper, lower, up):
            return True, up, low, upper, lower, spent, attempts
    return False, None, None, math.nan, math.nan, spent, attempts


def run_regemm(problem: BoundProblem, theta0, config: ReGeMMConfig) -> RunTrace:
    """Relaxed generalized MM (full-batch, latents kept only within an
    iteration).

    Accepted latent pairs satisfy

        upper(theta, up) <= eta * lower(theta, low)
                            + (1 - eta) * previous accepted upper,

    after which theta is updated by the problem's inner solver or a 1/L
    gradient step on the accepted upper bound.
    """
    theta = problem._check_theta(theta0)
    trace = RunTrace(driver="regemm", update_mode=config.theta_update)
    prev_upper = problem.upper_value(theta, problem.init_upper(theta))
    trace.initial_upper = prev_upper
    eta = config.eta

    for t in range(1, config.iterations + 1):
        def accept(upper, lower, up, _prev=prev_upper):
            return regemm_accepts(upper, lower, _prev, eta)

        ok, up, low, upper, lower, spent, attempts = _refine_doubled(
            problem, theta, config.r_min, config.r_max, accept)
        trace.doubling_sequences.append(attempts)
        if not ok:
            trace.aborted = True
            trace.stopped_reason = (
                f"ReGeMM criterion unreachable within r_max={config.r_max} passes "
                f"at iteration {t}; duality gap cannot close far enough")
            break
        c_t = prev_upper - lower
        grad = problem.grad_theta_upper(theta, up)
        grad_norm = float(np.linalg.norm(grad))
        if config.theta_update == SOLVER:
            theta_new = problem.argmin_upper(theta, up)
        else:
            theta_new = theta - grad / config.lipschitz
        trace.append(t=t, upper=upper, lower=lower, c_t=c_t, gap=upper - lower,
                     grad_norm=grad_norm, passes=spent,
                     step_norm=float(np.linalg.norm(theta_new - theta)))
        prev_upper = upper
        theta = theta_new

    trace.theta_final = theta
    return trace


def run_constant_memory_regemm(problem: BoundProblem, theta0,
                               config: ReGeMMConfig) -> RunTrace:
    """ReGeMM over a separable problem with in-place accumulation.

    Per-term latents are cold-started, their bound values and theta-update
    statistics accumulated, and the latents discarded immediately, so at
    most one term's latents are live at any time.
    """
    if not problem.separable:
        raise ValueError("constant-memory driver needs a separable problem")
    theta = problem._check_theta(theta0)
    trace = RunTrace(driver="regemm-cm", update_mode=config.theta_update)
    meter_up = LatentMeter()
    meter_low = LatentMeter()
    n = problem.num_terms
    eta = config.eta
    sides = 2 if problem.has_lower_bound else 1

    prev_upper = 0.0
    for i in range(n):
        meter_up.acquire()
        v = problem.term_init_upper(i, theta)
        prev_upper += problem.term_upper_value(i, theta, v)
        del v
        meter_up.release()
    trace.initial_upper = prev_upper

    for t in range(1, config.iterations + 1):
        accepted = False
        spent = 0
        attempts = []
        for r in _doubling_schedule(config.r_min, config.r_max):
            upper = 0.0
            lower = 0.0
            grad = np.zeros(problem.dim)
            stats = None
            for i in range(n):
                meter_up.acquire()
                v = problem.term_refine_upper(i, theta, problem.term_init_upper(i, theta), r)
                upper += problem.term_upper_value(i, theta, v)
                grad += problem.term_grad_theta_upper(i, theta, v)
                if config.theta_update == SOLVER:
                    s = problem.term_solver_stats(i, theta, v)
                    stats = s if stats is None else tuple(a + b for a, b in zip(stats, s))
                del v
                meter_up.release()
                meter_low.acquire()
                w = problem.term_refine_lower(i, theta, problem.term_init_lower(i, theta), r)
                lower += problem.term_lower_value(i, theta, w)
                del w
                meter_low.release()
            spent += sides * r
            attempts.append(r)
            if regemm_accepts(upper, lower, prev_upper, eta):
                accepted = True
                break
        trace.doubling_sequences.append(attempts)
        if not accepted:
            trace.aborted = True
            trace.stopped_reason = (
                f"ReGeMM criterion unreachable within r_max={config.r_max} passes "
                f"at iteration {t}")
            break
        c_t = prev_upper - lower
        if config.theta_update == SOLVER:
            theta_new = problem.theta_from_stats(stats, theta)
        else:
            theta_new = theta - grad / config.lipschitz
        trace.append(t=t, upper=upper, lower=lower, c_t=c_t, gap=upper - lower,
                     grad_norm=float(np.linalg.norm(grad)), passes=spent,
                     step_norm=float(np.linalg.norm(theta_new - theta)))
        prev_upper = upper
        theta = theta_new

    trace.theta_final = theta
    trace.peak_live_upper_latents = meter_up.peak
    trace.peak_live_lower_latents = meter_low.peak
    return trace


def run_sudemm(problem: BoundProblem, theta0, config: SuDeMMConfig) -> RunTrace:
    """Sufficient-descent MM with 1/L gradient steps.

    Accepted latent pairs satisfy

        upper - lower <= rho / (2 L) * ||grad upper||^2,

    which guarantees J(theta) decreases by at least
    (1 - rho)/(2 L) * ||grad||^2 per step. Near stationarity the right-hand
    side vanishes and the criterion may become unreachable; the driver then
    stops gracefully.
    """
    theta = problem._check_theta(theta0)
    trace = RunTrace(driver="sudemm", update_mode=GRADIENT)
    rho, lip = config.rho, config.lipschitz
    trace.initial_upper = problem.upper_value(theta, problem.init_upper(theta))
    exact_prev = problem.exact_j(theta) if problem.has_exact_j else None

    for t in range(1, config.iterations + 1):
        def accept(upper, lower, up):
            g = problem.grad_theta_upper(theta, up)
            return sudemm_accepts(upper, lower, float(g @ g), rho, lip)

        ok, up, low, upper, lower, spent, attempts = _refine_doubled(
            problem, theta, config.r_min, config.r_max, accept)
        trace.doubling_sequences.append(attempts)
        if not ok:
            trace.stopped_reason = (
                f"stationarity reached: gap criterion unreachable within "
                f"r_max={config.r_max} passes at iteration {t}")
            break
        grad = problem.grad_theta_upper(theta, up)
        grad_sq = float(grad @ grad)
        theta_new = theta - grad / lip
        trace.append(t=t, upper=upper, lower=lower, c_t=upper - lower,
                     gap=upper - lower, grad_norm=math.sqrt(grad_sq),
                     passes=spent, step_norm=float(np.linalg.norm(theta_new - theta)))
        if exact_prev is not None:
            exact_new = problem.exact_j(theta_new)
            bound = exact_prev - (1.0 - rho) / (2.0 * lip) * grad_sq
            slack = 1e-9 * max(1.0, abs(exact_prev))
            if exact_new > bound + slack:
                raise RuntimeError(
                    f"sufficient-descent inequality violated at t={t}: "
                    f"J={exact_new:.6g} > {bound:.6g}; Lipschitz constant too small?")
            exact_prev = exact_new
        theta = theta_new

    trace.theta_final = theta
    return trace


def run_stochastic_sudemm(problem: BoundProblem, theta0,
                          config: StochasticSuDeMMConfig) -> RunTrace:
    """Mini-batch sufficient-descent MM (per-term gap conditions).

    Each iteration samples a batch, refines each sampled term's latents
    incrementally until   gap_i <= rho_t / 2 * ||grad_i||^2   or the pass
    cap, then takes a step along the mean gradient of the terms that met
    their condition. Terms still failing at the cap are skipped; if the
    whole batch fails, the theta update is skipped for this iteration.

    With ``fixed_passes`` set, the condition is ignored and every term gets
    exactly that many passes (the fixed-pass baseline).
    """
    if not problem.separable:
        raise ValueError("stochastic driver needs a separable problem")
    if config.fixed_passes is None:
        require_valid_schedules(config.alpha, config.rho)
    theta = problem._check_theta(theta0)
    n = problem.num_terms
    batch = min(config.batch_size, n)
    rng = np.random.default_rng(config.seed)
    name = "stochastic-sudemm" if config.fixed_passes is None else \
        f"stochastic-fixed-{config.fixed_passes}"
    trace = RunTrace(driver=name, update_mode=GRADIENT)
    trace.initial_upper = math.nan

    for t in range(1, config.iterations + 1):
        idx = rng.choice(n, size=batch, replace=False)
        rho_t = config.rho(t)
        batch_upper = 0.0
        batch_lower = 0.0
        grad_sum = np.zeros(problem.dim)
        n_met = 0
        total_passes = 0
        for i in idx:
            i = int(i)
            up = problem.term_init_upper(i, theta)
            low = problem.term_init_lower(i, theta)
            used = 0
            met = False
            target = config.fixed_passes or config.max_passes
            while used < target:
                up = problem.term_refine_upper(i, theta, up, 1)
                low = problem.term_refine_lower(i, theta, low, 1)
                used += 1
                if config.fixed_passes is None:
                    u_val = problem.term_upper_value(i, theta, up)
                    l_val = problem.term_lower_value(i, theta, low)
                    g = problem.term_grad_theta_upper(i, theta, up)
                    if u_val - l_val <= 0.5 * rho_t * float(g @ g) \
                            + 1e-12 * max(1.0, abs(l_val)):
                        met = True
                        break
            if config.fixed_passes is not None:
                u_val = problem.term_upper_value(i, theta, up)
                l_val = problem.term_lower_value(i, theta, low)
                g = problem.term_grad_theta_upper(i, theta, up)
                met = True
            total_passes += used
            batch_upper += u_val
            batch_lower += l_val
            if met:
                grad_sum += g
                n_met += 1
        if n_met:
            step = config.alpha(t) * grad_sum / n_met
            theta_new = theta - step
            grad_norm = float(np.linalg.norm(grad_sum / n_met))
        else:
            theta_new = theta
            grad_norm = 0.0
        trace.append(t=t, upper=batch_upper, lower=batch_lower,
                     c_t=batch_upper - batch_lower, gap=batch_upper - batch_lower,
                     grad_norm=grad_norm, passes=total_passes,
                     step_norm=float(np.linalg.norm(theta_new - theta)))
        theta = theta_new

    trace.theta_final = theta
    return trace


def run_alternating_baseline(problem: BoundProblem, theta0,
                             passes_per_round: int, iterations: int,
                             theta_update: str = SOLVER,
                             lipschitz: float | None = None) -> RunTrace:
    """Alternating minimization with a fixed per-round refinement budget.

    With exact refinement (enough passes to reach the bound optimum) this
    is standard MM: the accepted upper bound touches the objective.
    """
    if passes_per_round < 1:
        raise ValueError("passes_per_round must be >= 1")
    if theta_update == GRADIENT and not (lipschitz and lipschitz > 0):
        raise ValueError("gradient updates require a Lipschitz constant > 0")
    theta = problem._check_theta(theta0)
    trace = RunTrace(driver=f"alternating-{passes_per_round}", update_mode=theta_update)
    trace.initial_upper = problem.upper_value(theta, problem.init_upper(theta))

    for t in range(1, iterations + 1):
        up = problem.refine_upper(theta, problem.init_upper(theta), passes_per_round)
        low = problem.refine_lower(theta, problem.init_lower(theta), passes_per_round)
        upper = problem.upper_value(theta, up)
        lower = problem.lower_value(theta, low)
        grad = problem.grad_theta_upper(theta, up)
        if theta_update == SOLVER:
            theta_new = problem.argmin_upper(theta, up)
        else:
            theta_new = theta - grad / lipschitz
        spent = passes_per_round * (2 if problem.has_lower_bound else 1)
        trace.append(t=t, upper=upper, lower=lower, c_t=upper - lower,
                     gap=upper - lower, grad_norm=float(np.linalg.norm(grad)),
                     passes=spent, step_norm=float(np.linalg.norm(theta_new - theta)))
        theta = theta_new

    trace.theta_final = theta
    return trace


def assert_gradient_regemm_bound(trace: RunTrace, lipschitz: float,
                                 kappa: float = 1.0) -> bool:
    """Check c_t >= kappa * ||grad_(t-1)||^2 / (2 L) on a ReGeMM trace.

    Valid only for traces produced with gradient-step theta updates; the
    gradient entering the bound for iteration t is the one recorded at
    iteration t-1 (it drove the step from theta^(t-2) to theta^(t-1)).
    """
    if trace.update_mode != GRADIENT:
        raise ValueError("trace lacks gradient-step records")
    if not 0.0 < kappa <= 1.0:
        raise ValueError("kappa must lie in (0, 1]")
    if lipschitz <= 0:
        raise ValueError("lipschitz must be > 0")
    recs = trace.records
    for k in range(1, len(recs)):
        bound = kappa * recs[k - 1].grad_norm ** 2 / (2.0 * lipschitz)
        tol = 1e-12 * max(1.0, abs(recs[k].c_t), bound)
        if recs[k].c_t < bound - tol:
            return False
    return True
