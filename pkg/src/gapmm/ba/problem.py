"""Robust bundle adjustment problem container and its costs.

The parameter vector packs all camera parameters (9 per camera, BAL
convention) followed by all point coordinates. The exact robust cost
J(theta) = sum_i psi(||f_i(theta) - m_i||) is cheap here, so the problem
declares exact-J capability and the drivers use J in place of a dual lower
bound.
"""

from __future__ import annotations

import numpy as np

from ..kernels import RobustKernel
from .cameras import N_CAMERA_PARAMS, CameraPose, project_points, projection_jacobians


class BAProblem:
    def __init__(self, cameras, points, cam_idx, pt_idx, measurements,
                 kernel: RobustKernel | None = None):
        self.cam_idx = np.asarray(cam_idx, dtype=np.int64).ravel()
        self.pt_idx = np.asarray(pt_idx, dtype=np.int64).ravel()
        self.measurements = np.asarray(measurements, dtype=float).reshape(-1, 2)
        if isinstance(cameras, np.ndarray):
            self.camera_params = np.array(cameras, dtype=float).reshape(-1, N_CAMERA_PARAMS)
        else:
            self.camera_params = np.stack([c.params() for c in cameras])
        self.points = np.asarray(points, dtype=float).reshape(-1, 3)
        self.kernel = kernel if kernel is not None else RobustKernel()

        n = len(self.cam_idx)
        if not (len(self.pt_idx) == len(self.measurements) == n):
            raise ValueError("observation arrays disagree in length")
        if n and (self.cam_idx.min() < 0 or self.cam_idx.max() >= self.num_cameras):
            raise ValueError("camera index out of range")
        if n and (self.pt_idx.min() < 0 or self.pt_idx.max() >= self.num_points):
            raise ValueError("point index out of range")

    @property
    def num_cameras(self) -> int:
        return self.camera_params.shape[0]

    @property
    def num_points(self) -> int:
        return self.points.shape[0]

    @property
    def num_observations(self) -> int:
        return len(self.cam_idx)

    @property
    def dim(self) -> int:
        return self.num_cameras * N_CAMERA_PARAMS + self.num_points * 3

    def cameras(self) -> list[CameraPose]:
        return [CameraPose.from_params(p) for p in self.camera_params]

    # -- theta packing -------------------------------------------------------

    def pack(self, camera_params=None, points=None) -> np.ndarray:
        cams = self.camera_params if camera_params is None else camera_params
        pts = self.points if points is None else points
        return np.concatenate([np.asarray(cams, float).ravel(),
                               np.asarray(pts, float).ravel()])

    def unpack(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,):
            raise ValueError(f"theta has shape {theta.shape}, expected ({self.dim},)")
        nc = self.num_cameras * N_CAMERA_PARAMS
        cams = theta[:nc].reshape(self.num_cameras, N_CAMERA_PARAMS)
        pts = theta[nc:].reshape(self.num_points, 3)
        return cams, pts

    # -- costs ----------------------------------------------------------------

    def residuals(self, theta) -> np.ndarray:
        cams, pts = self.unpack(theta)
        proj = project_points(cams, self.cam_idx, pts, self.pt_idx)
        return proj - self.measurements

    def residual_norms(self, theta) -> np.ndarray:
        r = self.residuals(theta)
        return np.sqrt(np.sum(r * r, axis=1))

    def linearize(self, theta):
        """Residuals plus camera/point Jacobians for every observation."""
        cams, pts = self.unpack(theta)
        proj, J_cam, J_pt = projection_jacobians(cams, self.cam_idx, pts, self.pt_idx)
        return proj - self.measurements, J_cam, J_pt

    def robust_cost(self, theta) -> float:
        return float(np.sum(self.kernel.psi(self.residual_norms(theta))))

    def lifted_cost(self, theta, weights) -> float:
        weights = self._check_weights(weights)
        rn = self.residual_norms(theta)
        return float(np.sum(self.kernel.lifted(rn, weights)))

    def optimal_weights(self, theta) -> np.ndarray:
        return self.kernel.weight(self.residual_norms(theta))

    def lifted_grad(self, theta, weights) -> np.ndarray:
        """Gradient of the lifted cost in theta at fixed weights."""
        weights = self._check_weights(weights)
        r, J_cam, J_pt = self.linearize(theta)
        wr = weights[:, None] * r
        gc = np.einsum("nia,ni->na", J_cam, wr)
        gp = np.einsum("nia,ni->na", J_pt, wr)
        cam_grad = np.zeros((self.num_cameras, N_CAMERA_PARAMS))
        np.add.at(cam_grad, self.cam_idx, gc)
        pt_grad = np.zeros((self.num_points, 3))
        np.add.at(pt_grad, self.pt_idx, gp)
        return np.concatenate([cam_grad.ravel(), pt_grad.ravel()])

    def _check_weights(self, weights) -> np.ndarray:
        weights = np.asarray(weights, dtype=float).ravel()
        if weights.shape != (self.num_observations,):
            raise ValueError("one weight per observation required")
        if np.any(weights < 0):
            raise ValueError("weights must be >= 0")
        return weights
