"""Pluecker line geometry, pinhole line projection and SO(3) pose utilities.

A 3D line is stored as the pair ``(n, v)`` where ``v = p2 - p1`` is the line
direction and ``n = p1 x p2`` is the normal of the plane spanned by the line and
the coordinate origin.  Lines are kept unnormalized; ``n = d * n_e`` with unit
normal ``n_e`` and ``d = |n| / |v|`` the distance of the line from the origin.

Rotation increments are applied on the left, ``R <- exp([dtheta]x) R``, and
translation increments additively, ``P <- P + dP``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateEndpoints, ProjectionDegenerate, ZeroNormal

EPS_DEG = 1e-9
_ORTHO_TOL = 1e-9
_SMALL_ANGLE = 1e-8


def _vec3(x, name="vector"):
    a = np.array(x, dtype=float).reshape(-1)
    if a.shape != (3,):
        raise ValueError(f"{name} must have 3 components, got shape {np.shape(x)}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite")
    a.setflags(write=False)
    return a


def skew(w) -> np.ndarray:
    """Return the skew-symmetric matrix ``[w]x`` with ``[w]x a = w x a``."""
    wx, wy, wz = np.asarray(w, dtype=float).reshape(3)
    return np.array([[0.0, -wz, wy],
                     [wz, 0.0, -wx],
                     [-wy, wx, 0.0]])


def vee(S) -> np.ndarray:
    """Inverse of :func:`skew` (antisymmetric part only)."""
    S = np.asarray(S, dtype=float)
    return 0.5 * np.array([S[2, 1] - S[1, 2], S[0, 2] - S[2, 0], S[1, 0] - S[0, 1]])


def exp_so3(theta) -> np.ndarray:
    """Rodrigues formula for ``exp([theta]x)``; Taylor expansion near zero."""
    theta = np.asarray(theta, dtype=float).reshape(3)
    angle = np.linalg.norm(theta)
    W = skew(theta)
    if angle < _SMALL_ANGLE:
        return np.eye(3) + W + 0.5 * W @ W
    a = np.sin(angle) / angle
    b = (1.0 - np.cos(angle)) / angle**2
    return np.eye(3) + a * W + b * W @ W


def rotation_angle(R) -> float:
    """Geodesic angle of ``R`` in radians, accurate for small angles."""
    R = np.asarray(R, dtype=float)
    s = np.linalg.norm(vee(R))
    c = 0.5 * (np.trace(R) - 1.0)
    return float(np.arctan2(s, c))


def log_so3(R) -> np.ndarray:
    """Rotation vector ``theta`` with ``exp_so3(theta) == R``."""
    R = np.asarray(R, dtype=float)
    w = vee(R)
    angle = rotation_angle(R)
    if angle < _SMALL_ANGLE:
        return w
    if np.pi - angle < 1e-6:
        # sin(angle) ~ 0: recover the axis from the symmetric part
        B = 0.5 * (R + np.eye(3))
        k = int(np.argmax(np.diag(B)))
        axis = B[:, k] / np.sqrt(max(B[k, k], 1e-300))
        if np.dot(axis, w) < 0:
            axis = -axis
        return angle * axis / np.linalg.norm(axis)
    return w * (angle / np.sin(angle))


@dataclass(frozen=True)
class PluckerLine3D:
    """3D line as (plane normal ``n``, direction ``v``) with ``n . v = 0``."""

    n: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        n = _vec3(self.n, "n")
        v = _vec3(self.v, "v")
        nv = np.linalg.norm(v)
        if nv <= EPS_DEG:
            raise DegenerateEndpoints("line direction is zero")
        if abs(n @ v) > 1e-9 * max(1.0, np.linalg.norm(n) * nv):
            raise ValueError(f"Pluecker constraint violated: n.v = {n @ v:.3e}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "v", v)

    @classmethod
    def from_endpoints(cls, p1, p2) -> "PluckerLine3D":
        return plucker_from_endpoints(p1, p2)

    @property
    def distance(self) -> float:
        """Distance ``d`` from the origin, so that ``n = d * |v| * n_e``."""
        return float(np.linalg.norm(self.n) / np.linalg.norm(self.v))

    @property
    def unit_normal(self) -> np.ndarray:
        nn = np.linalg.norm(self.n)
        if nn == 0.0:
            raise ZeroNormal("line passes through the origin")
        return self.n / nn

    @property
    def unit_direction(self) -> np.ndarray:
        return self.v / np.linalg.norm(self.v)

    def normalized(self) -> "PluckerLine3D":
        """Rescale so that ``|v| = 1`` and hence ``n = d * n_e``."""
        s = np.linalg.norm(self.v)
        return PluckerLine3D(self.n / s, self.v / s)

    def scaled(self, s: float) -> "PluckerLine3D":
        return PluckerLine3D(s * self.n, s * self.v)


@dataclass(frozen=True)
class LineSegment2D:
    """Image segment with homogeneous endpoints ``x_s``, ``x_e`` (pixels)."""

    x_s: np.ndarray
    x_e: np.ndarray

    def __post_init__(self):
        xs = _homogeneous(self.x_s, "x_s")
        xe = _homogeneous(self.x_e, "x_e")
        if np.linalg.norm(xs[:2] - xe[:2]) <= EPS_DEG:
            raise DegenerateEndpoints("segment endpoints coincide")
        object.__setattr__(self, "x_s", xs)
        object.__setattr__(self, "x_e", xe)

    @classmethod
    def from_pixels(cls, u_s, v_s, u_e, v_e) -> "LineSegment2D":
        return cls(np.array([u_s, v_s, 1.0]), np.array([u_e, v_e, 1.0]))

    @property
    def l(self) -> np.ndarray:
        """Homogeneous line through both endpoints, ``x_s x x_e``."""
        return np.cross(self.x_s, self.x_e)

    @property
    def start(self) -> np.ndarray:
        return self.x_s[:2].copy()

    @property
    def end(self) -> np.ndarray:
        return self.x_e[:2].copy()

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.x_e[:2] - self.x_s[:2]))

    @property
    def direction(self) -> np.ndarray:
        d = self.x_e[:2] - self.x_s[:2]
        return d / np.linalg.norm(d)

    def as_tuple(self):
        return (float(self.x_s[0]), float(self.x_s[1]), float(self.x_e[0]), float(self.x_e[1]))


def _homogeneous(x, name):
    a = np.array(x, dtype=float).reshape(-1)
    if a.shape == (2,):
        a = np.append(a, 1.0)
    if a.shape != (3,) or not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be a finite pixel [u, v] or [u, v, 1]")
    if a[2] == 0.0:
        raise ValueError(f"{name} is a point at infinity")
    a = a / a[2]
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CameraIntrinsics:
    """Undistorted pinhole intrinsics in pixels."""

    fu: float
    fv: float
    cu: float
    cv: float

    def __post_init__(self):
        for name in ("fu", "fv", "cu", "cv"):
            val = float(getattr(self, name))
            if not np.isfinite(val):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, val)
        if self.fu <= 0 or self.fv <= 0:
            raise ValueError("focal lengths must be positive")

    @property
    def K(self) -> np.ndarray:
        """3x3 line projection matrix."""
        return line_projection_matrix(self)

    @property
    def camera_matrix(self) -> np.ndarray:
        """Usual 3x3 point projection matrix."""
        return np.array([[self.fu, 0.0, self.cu],
                         [0.0, self.fv, self.cv],
                         [0.0, 0.0, 1.0]])

    def project_point(self, p_cam) -> np.ndarray:
        """Pinhole projection of a camera-frame point to pixels ``[u, v]``."""
        x, y, z = np.asarray(p_cam, dtype=float)
        return np.array([self.fu * x / z + self.cu, self.fv * y / z + self.cv])


@dataclass(frozen=True)
class ExtrinsicPose:
    """Rigid transform LiDAR -> camera: ``p_C = R p_L + P``."""

    R: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        R = np.array(self.R, dtype=float).reshape(3, 3)
        if not np.all(np.isfinite(R)):
            raise ValueError("R must be finite")
        if np.abs(R.T @ R - np.eye(3)).max() > _ORTHO_TOL:
            raise ValueError("R is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > _ORTHO_TOL:
            raise ValueError("R must have determinant +1")
        R.setflags(write=False)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "P", _vec3(self.P, "P"))

    @classmethod
    def identity(cls) -> "ExtrinsicPose":
        return cls(np.eye(3), np.zeros(3))

    def transform_point(self, p) -> np.ndarray:
        return self.R @ np.asarray(p, dtype=float) + self.P

    def compose(self, other: "ExtrinsicPose") -> "ExtrinsicPose":
        """``self * other``: apply ``other`` first."""
        return ExtrinsicPose(self.R @ other.R, self.R @ other.P + self.P)

    def inverse(self) -> "ExtrinsicPose":
        return ExtrinsicPose(self.R.T, -self.R.T @ self.P)


def plucker_from_endpoints(p1, p2, eps: float = EPS_DEG) -> PluckerLine3D:
    """Build the Pluecker line through ``p1`` and ``p2``.

    Parameters
    ----------
    p1, p2 : array_like, shape (3,)
        Distinct points on the line.
    eps : float
        Minimum endpoint separation.

    Returns
    -------
    PluckerLine3D
        ``n = p1 x p2`` and ``v = p2 - p1``.

    Raises
    ------
    DegenerateEndpoints
        If ``|p2 - p1| <= eps``.
    """
    p1 = np.asarray(p1, dtype=float).reshape(3)
    p2 = np.asarray(p2, dtype=float).reshape(3)
    v = p2 - p1
    if np.linalg.norm(v) <= eps:
        raise DegenerateEndpoints(f"endpoints closer than {eps}")
    return PluckerLine3D(np.cross(p1, p2), v)


def transform_line(pose: ExtrinsicPose, L: PluckerLine3D) -> PluckerLine3D:
    """Move a line from the LiDAR frame to the camera frame.

    ``n_C = R n_L + [P]x R v_L`` and ``v_C = R v_L``.
    """
    Rv = pose.R @ L.v
    return PluckerLine3D(pose.R @ L.n + np.cross(pose.P, Rv), Rv)


def line_projection_matrix(intr: CameraIntrinsics) -> np.ndarray:
    """Matrix mapping a camera-frame line normal to image line coefficients."""
    fu, fv, cu, cv = intr.fu, intr.fv, intr.cu, intr.cv
    return np.array([[fv, 0.0, 0.0],
                     [0.0, fu, 0.0],
                     [-fv * cu, -fu * cv, fu * fv]])


def project_line(K, L_cam: PluckerLine3D) -> np.ndarray:
    """Homogeneous image line ``l = K n_C`` of a camera-frame line.

    Raises
    ------
    ZeroNormal
        If the line passes through the camera centre.
    """
    if L_cam.distance <= 1e-12:
        raise ZeroNormal("line passes through the camera centre")
    return np.asarray(K, dtype=float) @ L_cam.n


def back_project_direction(K, l_prime) -> np.ndarray:
    """Normal of the plane back-projected from image line ``l'``: ``K^-1 l'``."""
    l_prime = np.asarray(l_prime, dtype=float).reshape(3)
    if not np.any(l_prime):
        raise ProjectionDegenerate("image line is zero")
    return np.linalg.solve(np.asarray(K, dtype=float), l_prime)


def pose_retract(pose: ExtrinsicPose, dtheta, dP) -> ExtrinsicPose:
    """Apply an error-state increment: ``R <- exp([dtheta]x) R``, ``P <- P + dP``."""
    R = exp_so3(dtheta) @ pose.R
    # re-orthonormalize to stop drift over many LM steps
    U, _, Vt = np.linalg.svd(R)
    R = U @ Vt
    return ExtrinsicPose(R, pose.P + np.asarray(dP, dtype=float).reshape(3))


def pose_error(est: ExtrinsicPose, gt: ExtrinsicPose):
    """Return ``(rotation error in degrees, translation error in metres)``.

    The rotation error is the geodesic angle of ``R_gt^T R_est``.
    """
    rot = np.degrees(rotation_angle(gt.R.T @ est.R))
    trans = float(np.linalg.norm(est.P - gt.P))
    return float(rot), trans
