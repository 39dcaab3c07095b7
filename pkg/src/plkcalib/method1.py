"""Joint rotation/translation refinement by point-to-projected-line error.

Each correspondence contributes the signed pixel distances of the two
detected segment endpoints to the image of the transformed 3D line.  The
pose is refined by Levenberg-Marquardt with left-multiplicative rotation
increments (see :func:`plkcalib.geometry.pose_retract`).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (DegenerateConfiguration, InsufficientLines,
                     ProjectionDegenerate)
from .geometry import (CameraIntrinsics, ExtrinsicPose, LineSegment2D,
                       PluckerLine3D, line_projection_matrix, pose_retract,
                       skew, transform_line)
from .lm import SolverConfig, levenberg_marquardt, singular_value_ratio

log = logging.getLogger(__name__)

MIN_LINES = 3


@dataclass(frozen=True)
class Correspondence:
    """A LiDAR-frame 3D line matched to a detected image segment."""

    line3d: PluckerLine3D
    segment2d: LineSegment2D
    id: Optional[str] = None


@dataclass
class DegeneracyReport:
    degenerate: bool = False
    reasons: list = field(default_factory=list)
    ratios: dict = field(default_factory=dict)

    def flag(self, reason: str):
        self.degenerate = True
        self.reasons.append(reason)


@dataclass
class CalibrationResult:
    pose: ExtrinsicPose
    final_cost: float
    iterations: int
    converged: bool
    per_line_residuals: list
    degeneracy: DegeneracyReport
    method: str = "method1"
    skipped: list = field(default_factory=list)
    stages: dict = field(default_factory=dict)


def as_line_matrix(K) -> np.ndarray:
    if isinstance(K, CameraIntrinsics):
        return line_projection_matrix(K)
    K = np.asarray(K, dtype=float)
    if K.shape != (3, 3):
        raise ValueError("K must be 3x3")
    return K


def _projected(corr, pose, K, line=None):
    L_c = transform_line(pose, corr.line3d if line is None else line)
    l = K @ L_c.n
    s2 = l[0] ** 2 + l[1] ** 2
    if s2 <= (1e-12 * np.linalg.norm(l)) ** 2 or s2 == 0.0:
        raise ProjectionDegenerate(f"line {corr.id!r} projects to the line at infinity")
    return L_c, l, s2


def residual(corr: Correspondence, pose: ExtrinsicPose, K) -> np.ndarray:
    """Signed pixel distances of the segment endpoints to the projected line."""
    K = as_line_matrix(K)
    _, l, s2 = _projected(corr, pose, K)
    seg = corr.segment2d
    return np.array([seg.x_s @ l, seg.x_e @ l]) / np.sqrt(s2)


def jacobian(corr: Correspondence, pose: ExtrinsicPose, K) -> np.ndarray:
    """2x6 derivative of :func:`residual`; columns are (dtheta, dP).

    The chain is dr/dl . dl/dn_C . dn_C/d(theta, P).  With the increment
    ``R <- exp([dtheta]x) R`` the rotation block is
    ``-(d [R n_e]x + [P]x [R v]x)`` for a unit-direction line ``n = d n_e``,
    and the translation block is ``-[R v]x``.
    """
    K = as_line_matrix(K)
    L = corr.line3d.normalized()
    _, l, s2 = _projected(corr, pose, K, L)
    s = np.sqrt(s2)
    seg = corr.segment2d
    dr_dl = np.empty((2, 3))
    for row, x in enumerate((seg.x_s, seg.x_e)):
        e = x @ l
        dr_dl[row] = [x[0] - l[0] * e / s2, x[1] - l[1] * e / s2, 1.0]
    dr_dl /= s
    R, P = pose.R, pose.P
    Rv = skew(R @ L.v)
    Rn = R @ L.n
    dn_dtheta = -(skew(Rn) + skew(P) @ Rv)
    dn_dP = -Rv
    dr_dn = dr_dl @ K
    return np.hstack([dr_dn @ dn_dtheta, dr_dn @ dn_dP])


def stacked(corrs, pose, K):
    """Residual vector (2N,) and Jacobian (2N, 6) over all correspondences."""
    r = np.concatenate([residual(c, pose, K) for c in corrs])
    J = np.vstack([jacobian(c, pose, K) for c in corrs])
    return r, J


def _retract6(pose, delta):
    return pose_retract(pose, delta[:3], delta[3:])


def usable_correspondences(corrs, pose, K):
    """Split ``corrs`` into those projecting to a finite line and the rest."""
    usable, skipped = [], []
    for c in corrs:
        try:
            _projected(c, pose, K)
        except ProjectionDegenerate:
            log.warning("skipping correspondence %r: projected line at infinity", c.id)
            skipped.append(c.id)
        else:
            usable.append(c)
    return usable, skipped


def check_line_count(corrs):
    if len(corrs) < MIN_LINES:
        raise InsufficientLines(
            f"at least {MIN_LINES} line pairs required, got {len(corrs)}")


def solve(corrs, init: ExtrinsicPose, K, cfg: SolverConfig = SolverConfig(),
          strict: bool = False) -> CalibrationResult:
    """Refine the extrinsic pose by minimizing the summed squared residuals.

    Raises
    ------
    InsufficientLines
        Fewer than three (usable) correspondences.
    DegenerateConfiguration
        Only when ``strict``; otherwise the flag is set on the result.
    """
    corrs = list(corrs)
    check_line_count(corrs)
    K = as_line_matrix(K)
    usable, skipped = usable_correspondences(corrs, init, K)
    check_line_count(usable)

    out = levenberg_marquardt(lambda p: stacked(usable, p, K), _retract6, init, cfg)

    degeneracy = DegeneracyReport()
    ratio = singular_value_ratio(out.jacobian)
    degeneracy.ratios["jacobian"] = ratio
    if ratio < cfg.degeneracy_threshold:
        degeneracy.flag("jacobian rank deficient: pose not fully constrained by the lines")

    per_line = []
    by_id = {id(c): i for i, c in enumerate(usable)}
    for c in corrs:
        if id(c) in by_id:
            i = by_id[id(c)]
            per_line.append(out.residuals[2 * i:2 * i + 2].copy())
        else:
            per_line.append(np.full(2, np.nan))

    result = CalibrationResult(
        pose=out.state,
        final_cost=out.cost,
        iterations=out.iterations,
        converged=out.converged,
        per_line_residuals=per_line,
        degeneracy=degeneracy,
        method="method1",
        skipped=skipped,
        stages={"lm": {"initial_cost": out.initial_cost, "cost_history": out.cost_history}},
    )
    if strict and degeneracy.degenerate:
        raise DegenerateConfiguration("; ".join(degeneracy.reasons), degeneracy.ratios, result)
    return result
