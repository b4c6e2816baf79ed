"""BAL-convention camera model: angle-axis rotation, negative-z projection,
focal length and two radial distortion coefficients.

Projection of a world point X by a camera (r, t, f, k1, k2):

    p = R(r) X + t
    q = -(p_x, p_y) / p_z
    proj = f * (1 + k1 ||q||^2 + k2 ||q||^4) * q
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

N_CAMERA_PARAMS = 9


class ProjectionSingular(ArithmeticError):
    """Point lies on the camera's principal plane (z = 0 after transform)."""


@dataclass
class CameraPose:
    rotation: np.ndarray  # angle-axis, shape (3,)
    translation: np.ndarray  # shape (3,)
    focal: float
    k1: float = 0.0
    k2: float = 0.0

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=float).reshape(3)
        self.translation = np.asarray(self.translation, dtype=float).reshape(3)
        if self.focal <= 0:
            raise ValueError("focal length must be > 0")

    def params(self) -> np.ndarray:
        return np.concatenate([self.rotation, self.translation,
                               [self.focal, self.k1, self.k2]])

    @classmethod
    def from_params(cls, p) -> "CameraPose":
        p = np.asarray(p, dtype=float).reshape(N_CAMERA_PARAMS)
        return cls(p[:3], p[3:6], float(p[6]), float(p[7]), float(p[8]))


def _skew(v):
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def rotation_matrices(rotvecs: np.ndarray) -> np.ndarray:
    """Rodrigues formula for a (n, 3) stack of angle-axis vectors."""
    rotvecs = np.atleast_2d(np.asarray(rotvecs, dtype=float))
    phi2 = np.sum(rotvecs * rotvecs, axis=1)
    phi = np.sqrt(phi2)
    small = phi < 1e-8
    # sin(phi)/phi and (1-cos(phi))/phi^2 with series fallbacks
    a = np.where(small, 1.0 - phi2 / 6.0, np.sin(phi) / np.where(small, 1.0, phi))
    b = np.where(small, 0.5 - phi2 / 24.0,
                 (1.0 - np.cos(phi)) / np.where(small, 1.0, phi2))
    K = _skew(rotvecs)
    K2 = K @ K
    return np.eye(3) + a[:, None, None] * K + b[:, None, None] * K2


def rotation_jacobian_tensors(rotvecs: np.ndarray) -> np.ndarray:
    """Per-camera tensors A with A[i] @ (R v) = d(R(r) v)/dr_i, shape (n, 3, 3, 3).

    Compact exponential-coordinates derivative; for near-zero rotations the
    caller must use the -skew(v) limit instead.
    """
    rotvecs = np.atleast_2d(np.asarray(rotvecs, dtype=float))
    n = rotvecs.shape[0]
    R = rotation_matrices(rotvecs)
    phi2 = np.sum(rotvecs * rotvecs, axis=1)
    safe = np.where(phi2 < 1e-16, 1.0, phi2)
    K = _skew(rotvecs)
    out = np.zeros((n, 3, 3, 3))
    eye = np.eye(3)
    for i in range(3):
        # r x ((I - R) e_i)
        col = (eye[i] - R[:, :, i])
        cross = np.cross(rotvecs, col)
        out[:, i] = (rotvecs[:, i, None, None] * K + _skew(cross)) / safe[:, None, None]
    return out


def project_points(cam_params: np.ndarray, cam_idx: np.ndarray,
                   points: np.ndarray, pt_idx: np.ndarray) -> np.ndarray:
    """Project observation list; cam_params is (C, 9), points is (P, 3)."""
    cam_params = np.atleast_2d(cam_params)
    R = rotation_matrices(cam_params[:, :3])
    X = points[pt_idx]
    p = np.einsum("oij,oj->oi", R[cam_idx], X) + cam_params[cam_idx, 3:6]
    pz = p[:, 2]
    if np.any(pz == 0.0):
        raise ProjectionSingular("observation projects onto the z = 0 plane")
    q = -p[:, :2] / pz[:, None]
    n2 = np.sum(q * q, axis=1)
    f = cam_params[cam_idx, 6]
    k1 = cam_params[cam_idx, 7]
    k2 = cam_params[cam_idx, 8]
    rho = 1.0 + k1 * n2 + k2 * n2 * n2
    return (f * rho)[:, None] * q


def project(camera: CameraPose, point) -> np.ndarray:
    """Single-observation convenience wrapper around project_points."""
    point = np.asarray(point, dtype=float).reshape(1, 3)
    return project_points(camera.params()[None, :], np.array([0]),
                          point, np.array([0]))[0]


def projection_jacobians(cam_params: np.ndarray, cam_idx: np.ndarray,
                         points: np.ndarray, pt_idx: np.ndarray):
    """Residual Jacobians for every observation.

    Returns (proj, J_cam, J_pt) with shapes (n, 2), (n, 2, 9), (n, 2, 3).
    """
    cam_params = np.atleast_2d(cam_params)
    rot = cam_params[:, :3]
    R = rotation_matrices(rot)
    A = rotation_jacobian_tensors(rot)
    small = np.sum(rot * rot, axis=1) < 1e-16

    X = points[pt_idx]
    Rc = R[cam_idx]
    w = np.einsum("oij,oj->oi", Rc, X)
    p = w + cam_params[cam_idx, 3:6]
    pz = p[:, 2]
    if np.any(pz == 0.0):
        raise ProjectionSingular("observation projects onto the z = 0 plane")
    q = -p[:, :2] / pz[:, None]
    n2 = np.sum(q * q, axis=1)
    f = cam_params[cam_idx, 6]
    k1 = cam_params[cam_idx, 7]
    k2 = cam_params[cam_idx, 8]
    rho = 1.0 + k1 * n2 + k2 * n2 * n2
    proj = (f * rho)[:, None] * q

    n = len(cam_idx)
    # d proj / d q = f * (rho I + 2 (k1 + 2 k2 n2) q q^T)
    dproj_dq = np.zeros((n, 2, 2))
    coef = 2.0 * (k1 + 2.0 * k2 * n2)
    dproj_dq[:, 0, 0] = rho + coef * q[:, 0] * q[:, 0]
    dproj_dq[:, 0, 1] = coef * q[:, 0] * q[:, 1]
    dproj_dq[:, 1, 0] = dproj_dq[:, 0, 1]
    dproj_dq[:, 1, 1] = rho + coef * q[:, 1] * q[:, 1]
    dproj_dq *= f[:, None, None]

    # d q / d p
    dq_dp = np.zeros((n, 2, 3))
    inv_z = 1.0 / pz
    dq_dp[:, 0, 0] = -inv_z
    dq_dp[:, 0, 2] = p[:, 0] * inv_z * inv_z
    dq_dp[:, 1, 1] = -inv_z
    dq_dp[:, 1, 2] = p[:, 1] * inv_z * inv_z

    dproj_dp = dproj_dq @ dq_dp  # (n, 2, 3)

    # rotation: d p / d r_i = A_i (R X); small-angle limit is -skew(X)
    G = np.einsum("oikj,oj->oki", A[cam_idx], w)
    if np.any(small):
        lim = -_skew(X)
        mask = small[cam_idx]
        G[mask] = lim[mask]

    J_cam = np.zeros((n, 2, N_CAMERA_PARAMS))
    J_cam[:, :, 0:3] = dproj_dp @ G
    J_cam[:, :, 3:6] = dproj_dp
    J_cam[:, :, 6] = rho[:, None] * q
    J_cam[:, :, 7] = (f * n2)[:, None] * q
    J_cam[:, :, 8] = (f * n2 * n2)[:, None] * q

    J_pt = dproj_dp @ Rc
    return proj, J_cam, J_pt
