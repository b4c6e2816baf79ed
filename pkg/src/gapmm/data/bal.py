"""Bundle-adjustment-in-the-large text format.

Layout: a header line ``num_cameras num_points num_observations``, one line
per observation ``cam_idx point_idx x y``, then 9 reals per camera and
3 reals per point. Tokens may be split across lines arbitrarily; the parser
streams tokens and never buffers the file.
"""

from __future__ import annotations

import numpy as np

from ..ba.cameras import N_CAMERA_PARAMS
from ..ba.problem import BAProblem
from ..kernels import RobustKernel


class BALParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class _TokenStream:
    """Whitespace-separated tokens from a text stream, tracking line numbers."""

    def __init__(self, fh):
        self.fh = fh
        self.line = 0
        self._tokens = iter(())

    def next(self, what: str) -> str:
        while True:
            tok = next(self._tokens, None)
            if tok is not None:
                return tok
            line = self.fh.readline()
            if not line:
                raise BALParseError(f"file truncated while reading {what}", self.line)
            self.line += 1
            self._tokens = iter(line.split())

    def next_int(self, what: str) -> int:
        tok = self.next(what)
        try:
            return int(tok)
        except ValueError:
            raise BALParseError(f"expected integer for {what}, got {tok!r}", self.line) from None

    def next_float(self, what: str) -> float:
        tok = self.next(what)
        try:
            return float(tok)
        except ValueError:
            raise BALParseError(f"expected number for {what}, got {tok!r}", self.line) from None


def parse_bal(fh, kernel: RobustKernel | None = None) -> BAProblem:
    """Parse an open text stream into a BAProblem; single pass."""
    stream = _TokenStream(fh)
    n_cams = stream.next_int("camera count")
    n_pts = stream.next_int("point count")
    n_obs = stream.next_int("observation count")
    if min(n_cams, n_pts, n_obs) < 0:
        raise BALParseError("negative count in header", stream.line)

    cam_idx = np.empty(n_obs, dtype=np.int64)
    pt_idx = np.empty(n_obs, dtype=np.int64)
    meas = np.empty((n_obs, 2))
    for i in range(n_obs):
        cam_idx[i] = stream.next_int(f"camera index of observation {i}")
        pt_idx[i] = stream.next_int(f"point index of observation {i}")
        if not 0 <= cam_idx[i] < n_cams:
            raise BALParseError(
                f"camera index {cam_idx[i]} out of range [0, {n_cams})", stream.line)
        if not 0 <= pt_idx[i] < n_pts:
            raise BALParseError(
                f"point index {pt_idx[i]} out of range [0, {n_pts})", stream.line)
        meas[i, 0] = stream.next_float(f"x of observation {i}")
        meas[i, 1] = stream.next_float(f"y of observation {i}")

    cams = np.empty((n_cams, N_CAMERA_PARAMS))
    for c in range(n_cams):
        for j in range(N_CAMERA_PARAMS):
            cams[c, j] = stream.next_float(f"parameter {j} of camera {c}")
    pts = np.empty((n_pts, 3))
    for p in range(n_pts):
        for j in range(3):
            pts[p, j] = stream.next_float(f"coordinate {j} of point {p}")

    return BAProblem(cams, pts, cam_idx, pt_idx, meas, kernel)


def serialize_bal(problem: BAProblem, fh):
    """Write the canonical layout: observations one per line, then one
    value per line for cameras and points (the layout of the public files)."""
    fh.write(f"{problem.num_cameras} {problem.num_points} "
             f"{problem.num_observations}\n")
    for c, p, m in zip(problem.cam_idx, problem.pt_idx, problem.measurements):
        fh.write(f"{c} {p} {float(m[0])!r} {float(m[1])!r}\n")
    for cam in problem.camera_params:
        for val in cam:
            fh.write(f"{float(val)!r}\n")
    for pt in problem.points:
        for val in pt:
            fh.write(f"{float(val)!r}\n")
