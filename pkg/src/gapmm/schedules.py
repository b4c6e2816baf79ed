"""Step-size and gap-reduction schedules for the stochastic driver.

Valid schedules must satisfy  sum alpha_t = inf,  sum alpha_t^2 < inf  and
sum rho_t < inf.  The validator checks these symbolically for the built-in
families; constant schedules are tolerated with a warning because they are
common practice despite violating the summability conditions.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

ACCEPT = "accept"
REJECT = "reject"
WARN = "warn"


@dataclass(frozen=True)
class PowerSchedule:
    """t -> scale / (offset + t) ** power, for t = 1, 2, ..."""

    scale: float
    power: float
    offset: float = 0.0

    def __call__(self, t: int) -> float:
        return self.scale / (self.offset + t) ** self.power


@dataclass(frozen=True)
class ConstantSchedule:
    value: float

    def __call__(self, t: int) -> float:
        return self.value


@dataclass
class ScheduleReport:
    alpha_verdict: str
    rho_verdict: str
    messages: list[str]

    @property
    def ok(self) -> bool:
        return REJECT not in (self.alpha_verdict, self.rho_verdict)


def _check_alpha(s) -> tuple[str, str]:
    if isinstance(s, ConstantSchedule):
        if s.value <= 0:
            return REJECT, "constant step size must be > 0"
        return WARN, "constant step size: sum alpha_t^2 diverges"
    if isinstance(s, PowerSchedule):
        if s.scale <= 0 or s.offset < 0:
            return REJECT, "step-size schedule needs scale > 0 and offset >= 0"
        if s.power > 1.0:
            return REJECT, f"alpha power {s.power} > 1: sum alpha_t converges"
        if s.power <= 0.5:
            return REJECT, f"alpha power {s.power} <= 0.5: sum alpha_t^2 diverges"
        return ACCEPT, ""
    return REJECT, f"unknown step-size schedule {type(s).__name__}"


def _check_rho(s) -> tuple[str, str]:
    if isinstance(s, ConstantSchedule):
        if s.value <= 0:
            return REJECT, "constant gap-reduction parameter must be > 0"
        return WARN, "constant rho: sum rho_t diverges"
    if isinstance(s, PowerSchedule):
        if s.scale <= 0 or s.offset < 0:
            return REJECT, "rho schedule needs scale > 0 and offset >= 0"
        if s.power <= 1.0:
            return REJECT, f"rho power {s.power} <= 1: sum rho_t diverges"
        return ACCEPT, ""
    return REJECT, f"unknown rho schedule {type(s).__name__}"


def validate_schedules(alpha, rho) -> ScheduleReport:
    """Symbolic check of the summability conditions for both schedules."""
    av, am = _check_alpha(alpha)
    rv, rm = _check_rho(rho)
    messages = [m for m in (am, rm) if m]
    return ScheduleReport(alpha_verdict=av, rho_verdict=rv, messages=messages)


def require_valid_schedules(alpha, rho) -> ScheduleReport:
    """Validate and enforce: reject -> ValueError, warn -> warnings.warn."""
    report = validate_schedules(alpha, rho)
    if not report.ok:
        raise ValueError("invalid schedules: " + "; ".join(report.messages))
    if WARN in (report.alpha_verdict, report.rho_verdict):
        for msg in report.messages:
            warnings.warn(msg, stacklevel=2)
    return report
