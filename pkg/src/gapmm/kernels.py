"""Robust kernels and their half-quadratic lifts.

A kernel is a triple (psi, weight, kappa) satisfying

    psi(r) = min_{w >= 0} [ w * r^2 / 2 + kappa(w) ],

with the minimizer given by ``weight(r)``. The lifted form
``w * r^2 / 2 + kappa(w)`` is therefore a majorizer of ``psi`` that touches
it at ``w = weight(r)``; this is what turns a robust cost into a weighted
least-squares upper bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("smooth-truncated-quadratic", "quadratic", "welsch")


@dataclass(frozen=True)
class RobustKernel:
    """Robust cost ``psi`` with weight function ``weight`` and penalty ``kappa``.

    kind: one of "smooth-truncated-quadratic" (the default cost used by the
        robust-fitting experiments), "quadratic" (plain least squares,
        weight == 1, kappa == 0) or "welsch".
    tau: scale parameter (> 0); ignored by the quadratic kernel.
    """

    kind: str = "smooth-truncated-quadratic"
    tau: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.tau <= 0:
            raise ValueError("kernel scale tau must be > 0")

    def psi(self, r):
        """Robust cost of a residual magnitude (elementwise on arrays)."""
        r = np.asarray(r, dtype=float)
        t2 = self.tau * self.tau
        if self.kind == "quadratic":
            out = 0.5 * r * r
        elif self.kind == "smooth-truncated-quadratic":
            r2 = r * r
            out = np.where(np.abs(r) <= self.tau, 0.5 * r2 - r2 * r2 / (4.0 * t2), t2 / 4.0)
        else:  # welsch
            out = 0.5 * t2 * (1.0 - np.exp(-(r * r) / t2))
        return out if out.ndim else float(out)

    def weight(self, r):
        """Minimizer of the lift: confidence weight in [0, 1]."""
        r = np.asarray(r, dtype=float)
        t2 = self.tau * self.tau
        if self.kind == "quadratic":
            out = np.ones_like(r)
        elif self.kind == "smooth-truncated-quadratic":
            out = np.maximum(0.0, 1.0 - r * r / t2)
        else:
            out = np.exp(-(r * r) / t2)
        return out if out.ndim else float(out)

    def kappa(self, w):
        """Penalty paid for down-weighting; kappa(1) = 0."""
        w = np.asarray(w, dtype=float)
        if np.any(w < 0):
            raise ValueError("weights must be >= 0")
        t2 = self.tau * self.tau
        if self.kind == "quadratic":
            out = np.zeros_like(w)
        elif self.kind == "smooth-truncated-quadratic":
            out = 0.25 * t2 * (w - 1.0) ** 2
        else:
            # 0 * log(0) -> 0 at the w = 0 boundary
            wl = np.where(w > 0, w * np.log(np.where(w > 0, w, 1.0)), 0.0)
            out = 0.5 * t2 * (1.0 + wl - w)
        return out if out.ndim else float(out)

    def lifted(self, r, w):
        """Half-quadratic majorizer ``w r^2/2 + kappa(w)``; >= psi(r)."""
        r = np.asarray(r, dtype=float)
        w = np.asarray(w, dtype=float)
        out = 0.5 * w * r * r + self.kappa(w)
        return out if out.ndim else float(out)
