"""Bound-family problem contract shared by all optimization drivers.

A problem exposes a family of upper bounds ``upper_value(theta, up)`` on an
objective J(theta) that is itself expensive (or impossible) to evaluate,
plus either a dual lower-bound family or a cheap exact J. Refinement
("passes") moves a latent toward the bound-optimal one for the current
theta: the upper value never increases, the lower value never decreases,
and with enough passes the two meet (strong duality).

Latents are opaque to the drivers; every problem defines a canonical
cold-start latent so that no latent state needs to survive between theta
updates.
"""

from __future__ import annotations

import abc

import numpy as np

from .kernels import RobustKernel


class UnsupportedBound(RuntimeError):
    """Raised when a problem has neither a lower-bound family nor exact J."""


class BoundProblem(abc.ABC):
    """Family of upper (and optionally lower) bounds on an objective.

    Subclasses set ``dim``, ``num_terms``, ``has_exact_j``,
    ``has_lower_bound`` and ``separable``. Separable problems additionally
    implement the per-term (``term_*``) operations used by the stochastic
    and constant-memory drivers.
    """

    dim: int = 0
    num_terms: int = 1
    has_exact_j: bool = False
    has_lower_bound: bool = False
    separable: bool = False

    # -- full-problem operations -------------------------------------------

    @abc.abstractmethod
    def init_upper(self, theta):
        """Canonical cold-start latent for the upper bound."""

    def init_lower(self, theta):
        """Canonical cold-start latent for the lower bound."""
        if not self.has_lower_bound:
            return None
        raise NotImplementedError

    @abc.abstractmethod
    def upper_value(self, theta, up) -> float:
        """Value of the upper bound at ``theta`` for latent ``up``."""

    def lower_value(self, theta, low) -> float:
        """Lower-bound value; falls back to exact J when available."""
        if self.has_exact_j:
            return self.exact_j(theta)
        raise UnsupportedBound("problem has neither a lower bound nor exact J")

    @abc.abstractmethod
    def refine_upper(self, theta, up, passes: int):
        """Run ``passes`` refinement passes; upper value is non-increasing."""

    def refine_lower(self, theta, low, passes: int):
        """Mirror of refine_upper; in exact-J mode the latent is inert."""
        self._check_passes(passes)
        if self.has_exact_j and not self.has_lower_bound:
            return low
        raise UnsupportedBound("problem has neither a lower bound nor exact J")

    @abc.abstractmethod
    def grad_theta_upper(self, theta, up) -> np.ndarray:
        """Partial derivative of the upper bound w.r.t. theta at fixed latent.

        This is only the partial derivative; the latent is held fixed, so no
        term from the latent's dependence on theta enters.
        """

    def exact_j(self, theta) -> float:
        raise UnsupportedBound("problem does not expose exact J")

    def duality_gap(self, theta, up, low) -> float:
        return self.upper_value(theta, up) - self.lower_value(theta, low)

    # -- optional inner solver ---------------------------------------------

    def argmin_upper(self, theta, up):
        """Problem-supplied minimizer (or descent step) of the upper bound
        in theta at fixed latent."""
        raise NotImplementedError("problem supplies no inner theta solver")

    # -- per-term interface (separable problems; Eq.-2-style sums) ----------

    def term_init_upper(self, i: int, theta):
        raise NotImplementedError

    def term_init_lower(self, i: int, theta):
        if not self.has_lower_bound:
            return None
        raise NotImplementedError

    def term_upper_value(self, i: int, theta, up_i) -> float:
        raise NotImplementedError

    def term_lower_value(self, i: int, theta, low_i) -> float:
        if self.has_exact_j:
            return self.term_exact_j(i, theta)
        raise UnsupportedBound("problem has neither a lower bound nor exact J")

    def term_refine_upper(self, i: int, theta, up_i, passes: int):
        raise NotImplementedError

    def term_refine_lower(self, i: int, theta, low_i, passes: int):
        self._check_passes(passes)
        if self.has_exact_j and not self.has_lower_bound:
            return low_i
        raise UnsupportedBound("problem has neither a lower bound nor exact J")

    def term_grad_theta_upper(self, i: int, theta, up_i) -> np.ndarray:
        raise NotImplementedError

    def term_exact_j(self, i: int, theta) -> float:
        raise UnsupportedBound("problem does not expose exact J")

    def term_solver_stats(self, i: int, theta, up_i):
        """Accumulable statistics from which an inner theta solve can be
        reconstructed (tuple of arrays; summed elementwise over terms)."""
        raise NotImplementedError

    def theta_from_stats(self, stats, theta):
        """Inner theta solve from accumulated ``term_solver_stats`` sums."""
        raise NotImplementedError

    # -- validation helpers --------------------------------------------------

    def _check_theta(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,):
            raise ValueError(f"theta has shape {theta.shape}, expected ({self.dim},)")
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta has non-finite entries")
        return theta

    @staticmethod
    def _check_passes(passes: int):
        if passes < 1:
            raise ValueError("passes must be >= 1")


class ToyHQProblem(BoundProblem):
    """One-dimensional half-quadratic instance used by the driver tests.

    J(theta) = sum_i psi(theta - m_i) with upper bound
    sum_i [ u_i (theta - m_i)^2 / 2 + kappa(u_i) ]. Exact J is available in
    closed form, so the lower bound is J itself. One refinement pass is one
    weight update u_i = weight(|theta - m_i|), which is already the exact
    minimizer of the lift.
    """

    has_exact_j = True
    has_lower_bound = False
    separable = True
    dim = 1

    def __init__(self, targets, kernel: RobustKernel | None = None):
        self.targets = np.asarray(targets, dtype=float).ravel()
        if self.targets.size < 1:
            raise ValueError("need at least one target")
        self.kernel = kernel if kernel is not None else RobustKernel()
        self.num_terms = self.targets.size

    @classmethod
    def with_outliers(cls, n: int, outlier_fraction: float = 0.2,
                      inlier_scale: float = 0.1, outlier_offset: float = 10.0,
                      seed: int = 0, kernel: RobustKernel | None = None):
        """Targets mostly near 0 with a fraction thrown to +-outlier_offset."""
        rng = np.random.default_rng(seed)
        m = rng.normal(0.0, inlier_scale, size=n)
        n_out = int(round(outlier_fraction * n))
        if n_out:
            idx = rng.choice(n, size=n_out, replace=False)
            m[idx] = rng.choice([-1.0, 1.0], size=n_out) * outlier_offset \
                + rng.normal(0.0, inlier_scale, size=n_out)
        return cls(m, kernel)

    # -- full-problem operations -------------------------------------------

    def init_upper(self, theta):
        return np.ones_like(self.targets)

    def upper_value(self, theta, up) -> float:
        theta = self._check_theta(theta)
        up = self._check_weights(up)
        r = theta[0] - self.targets
        return float(np.sum(self.kernel.lifted(r, up)))

    def refine_upper(self, theta, up, passes: int):
        theta = self._check_theta(theta)
        self._check_passes(passes)
        return self.kernel.weight(np.abs(theta[0] - self.targets))

    def grad_theta_upper(self, theta, up) -> np.ndarray:
        theta = self._check_theta(theta)
        up = self._check_weights(up)
        return np.array([np.sum(up * (theta[0] - self.targets))])

    def exact_j(self, theta) -> float:
        theta = self._check_theta(theta)
        return float(np.sum(self.kernel.psi(theta[0] - self.targets)))

    def argmin_upper(self, theta, up):
        theta = self._check_theta(theta)
        up = self._check_weights(up)
        total = float(np.sum(up))
        if total <= 1e-300:
            return theta.copy()
        return np.array([float(np.dot(up, self.targets)) / total])

    def suggest_lipschitz(self) -> float:
        """Curvature bound of the lift in theta: sum of weights <= N * 1."""
        return float(self.num_terms)

    # -- per-term interface ---------------------------------------------------

    def term_init_upper(self, i: int, theta):
        return 1.0

    def term_upper_value(self, i: int, theta, up_i) -> float:
        theta = self._check_theta(theta)
        return float(self.kernel.lifted(theta[0] - self.targets[i], up_i))

    def term_refine_upper(self, i: int, theta, up_i, passes: int):
        theta = self._check_theta(theta)
        self._check_passes(passes)
        return float(self.kernel.weight(abs(theta[0] - self.targets[i])))

    def term_grad_theta_upper(self, i: int, theta, up_i) -> np.ndarray:
        theta = self._check_theta(theta)
        return np.array([up_i * (theta[0] - self.targets[i])])

    def term_exact_j(self, i: int, theta) -> float:
        theta = self._check_theta(theta)
        return float(self.kernel.psi(theta[0] - self.targets[i]))

    def term_solver_stats(self, i: int, theta, up_i):
        return (np.array([up_i * self.targets[i]]), np.array([up_i]))

    def theta_from_stats(self, stats, theta):
        weighted_sum, total = stats
        if total[0] <= 1e-300:
            return np.asarray(theta, dtype=float).copy()
        return np.array([weighted_sum[0] / total[0]])

    def _check_weights(self, up) -> np.ndarray:
        up = np.asarray(up, dtype=float)
        if up.shape != self.targets.shape:
            raise ValueError(f"weights have shape {up.shape}, expected {self.targets.shape}")
        return up
