"""Deterministic synthetic problem generators.

Both generators are fully determined by their spec (including the seed);
the same spec always produces bit-identical data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from ..ba.cameras import N_CAMERA_PARAMS, project_points
from ..ba.problem import BAProblem
from ..kernels import RobustKernel


@dataclass(frozen=True)
class SyntheticBASpec:
    cameras: int = 8
    points: int = 200
    observation_density: float = 0.5
    noise: float = 0.5
    outlier_fraction: float = 0.0
    outlier_spread: float = 30.0
    outlier_mode: str = "uniform"  # "uniform" or "offset" (clustered decoy)
    focal: float = 500.0
    camera_radius: float = 6.0
    seed: int = 0

    def __post_init__(self):
        if self.cameras < 1 or self.points < 1:
            raise ValueError("need at least one camera and one point")
        if not 0.0 < self.observation_density <= 1.0:
            raise ValueError("observation density must lie in (0, 1]")
        if not 0.0 <= self.outlier_fraction < 1.0:
            raise ValueError("outlier fraction must lie in [0, 1)")
        if self.outlier_mode not in ("uniform", "offset"):
            raise ValueError(f"unknown outlier mode {self.outlier_mode!r}")
        if self.noise < 0 or self.outlier_spread <= 0:
            raise ValueError("noise must be >= 0 and outlier spread > 0")


def _look_at_origin(position: np.ndarray) -> np.ndarray:
    """Rotation with the camera at ``position`` facing the origin, using the
    negative-z convention (points in front transform to z < 0)."""
    d = -position / np.linalg.norm(position)
    r3 = -d
    up = np.array([0.0, 0.0, 1.0])
    if abs(np.dot(up, r3)) > 0.99:
        up = np.array([0.0, 1.0, 0.0])
    r1 = np.cross(up, r3)
    r1 /= np.linalg.norm(r1)
    r2 = np.cross(r3, r1)
    return np.stack([r1, r2, r3])


def synth_ba(spec: SyntheticBASpec, kernel: RobustKernel | None = None):
    """Generate a synthetic instance; returns (problem, ground-truth theta).

    Observations are noisy projections of the ground truth; a fixed fraction
    is replaced by outliers (uniform box around the true projection, or a
    consistent offset forming a decoy mode).
    """
    rng = np.random.default_rng(spec.seed)
    points = rng.normal(0.0, 1.0, size=(spec.points, 3))

    cams = np.zeros((spec.cameras, N_CAMERA_PARAMS))
    angles = 2.0 * np.pi * np.arange(spec.cameras) / spec.cameras
    heights = rng.uniform(-0.3, 0.3, size=spec.cameras) * spec.camera_radius
    for k in range(spec.cameras):
        pos = np.array([spec.camera_radius * np.cos(angles[k]),
                        spec.camera_radius * np.sin(angles[k]), heights[k]])
        R = _look_at_origin(pos)
        cams[k, :3] = Rotation.from_matrix(R).as_rotvec()
        cams[k, 3:6] = -R @ pos
        cams[k, 6] = spec.focal

    per_point = max(2, int(round(spec.observation_density * spec.cameras)))
    per_point = min(per_point, spec.cameras)
    cam_idx = np.empty(spec.points * per_point, dtype=np.int64)
    pt_idx = np.empty_like(cam_idx)
    for j in range(spec.points):
        sel = rng.choice(spec.cameras, size=per_point, replace=False)
        cam_idx[j * per_point:(j + 1) * per_point] = np.sort(sel)
        pt_idx[j * per_point:(j + 1) * per_point] = j

    clean = project_points(cams, cam_idx, points, pt_idx)
    meas = clean + rng.normal(0.0, spec.noise, size=clean.shape)
    n_obs = len(cam_idx)
    n_out = int(round(spec.outlier_fraction * n_obs))
    if n_out:
        out_sel = rng.choice(n_obs, size=n_out, replace=False)
        if spec.outlier_mode == "uniform":
            meas[out_sel] = clean[out_sel] + rng.uniform(
                -spec.outlier_spread, spec.outlier_spread, size=(n_out, 2))
        else:
            angle = rng.uniform(0.0, 2.0 * np.pi)
            offset = spec.outlier_spread * np.array([np.cos(angle), np.sin(angle)])
            meas[out_sel] = clean[out_sel] + offset \
                + rng.normal(0.0, spec.noise, size=(n_out, 2))

    problem = BAProblem(cams, points, cam_idx, pt_idx, meas, kernel)
    return problem, problem.pack()


def perturb_ba_theta(problem: BAProblem, theta, rotation_noise: float,
                     translation_noise: float, point_noise: float,
                     seed: int) -> np.ndarray:
    """Randomized initialization for benchmark runs."""
    rng = np.random.default_rng(seed)
    cams, pts = problem.unpack(theta)
    cams = cams.copy()
    cams[:, :3] += rng.normal(0.0, rotation_noise, size=(len(cams), 3))
    cams[:, 3:6] += rng.normal(0.0, translation_noise, size=(len(cams), 3))
    pts = pts + rng.normal(0.0, point_noise, size=pts.shape)
    return problem.pack(cams, pts)


@dataclass(frozen=True)
class ClassificationSpec:
    samples: int = 200
    input_dim: int = 8
    classes: int = 4
    noise: float = 0.08
    seed: int = 0

    def __post_init__(self):
        if self.samples < 1 or self.input_dim < 2 or self.classes < 2:
            raise ValueError("need samples >= 1, input_dim >= 2, classes >= 2")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")


def synth_classification(spec: ClassificationSpec):
    """Interleaved-moons classification data with one-hot targets.

    Classes are arc segments of two interleaved half-circles, embedded into
    ``input_dim`` dimensions; linearly informative but not separable.
    """
    from ..chl.net import Sample

    rng = np.random.default_rng(spec.seed)
    n, c = spec.samples, spec.classes
    counts = [n // c + (1 if i < n % c else 0) for i in range(c)]

    xs = []
    labels = []
    arcs_per_moon = [(c + 1) // 2, c // 2]
    for cls in range(c):
        moon = cls % 2
        arc = cls // 2
        arcs = arcs_per_moon[moon]
        lo = np.pi * arc / arcs
        hi = np.pi * (arc + 1) / arcs
        a = rng.uniform(lo, hi, size=counts[cls])
        if moon == 0:
            pts = np.stack([np.cos(a), np.sin(a)], axis=1)
        else:
            pts = np.stack([1.0 - np.cos(a), 0.5 - np.sin(a)], axis=1)
        xs.append(pts)
        labels.extend([cls] * counts[cls])

    base = np.concatenate(xs)
    labels = np.array(labels)
    X = np.zeros((n, spec.input_dim))
    X[:, :2] = base
    X += rng.normal(0.0, spec.noise, size=X.shape)
    order = rng.permutation(n)

    samples = []
    for i in order:
        onehot = np.zeros(c)
        onehot[labels[i]] = 1.0
        samples.append(Sample(x=X[i].copy(), y=onehot))
    return samples
