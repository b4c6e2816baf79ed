"""Per-iteration run records and their CSV serialization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CSV_COLUMNS = ("t", "upper", "lower", "c_t", "gap", "grad_norm", "passes", "step_norm")


@dataclass
class TraceRecord:
    t: int
    upper: float
    lower: float
    c_t: float
    gap: float
    grad_norm: float
    passes: int
    step_norm: float


@dataclass
class RunTrace:
    """Iteration log of one driver run.

    ``initial_upper`` is the seed upper value at (theta^(-1), u^(0)); for
    drivers whose acceptance criterion references past upper values it is
    the first previous-upper term. ``aborted``/``stopped_reason`` flag early
    termination (criterion unreachable, stationarity reached).
    """

    driver: str = ""
    records: list[TraceRecord] = field(default_factory=list)
    theta_final: np.ndarray | None = None
    initial_upper: float = float("nan")
    update_mode: str = ""
    aborted: bool = False
    stopped_reason: str = ""
    peak_live_upper_latents: int = 0
    peak_live_lower_latents: int = 0
    doubling_sequences: list[list[int]] = field(default_factory=list)

    def append(self, **kw):
        self.records.append(TraceRecord(**kw))

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def __len__(self) -> int:
        return len(self.records)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for r in self.records:
                fh.write(",".join(_fmt(getattr(r, c)) for c in CSV_COLUMNS) + "\n")

    @staticmethod
    def read_csv(path) -> list[TraceRecord]:
        records = []
        with open(path, newline="") as fh:
            header = fh.readline().strip().split(",")
            if tuple(header) != CSV_COLUMNS:
                raise ValueError(f"unexpected trace header {header} in {path}")
            for line in fh:
                vals = line.strip().split(",")
                records.append(TraceRecord(
                    t=int(vals[0]), upper=float(vals[1]), lower=float(vals[2]),
                    c_t=float(vals[3]), gap=float(vals[4]), grad_norm=float(vals[5]),
                    passes=int(vals[6]), step_norm=float(vals[7])))
        return records


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))
