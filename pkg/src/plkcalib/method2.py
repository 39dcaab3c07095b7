"""Decoupled calibration (PLK-Calib): rotation first, then translation.

The back-projected plane normal ``m = K^-1 l'`` of an image line must be
perpendicular to the camera-frame line direction ``R v`` (depends on the
rotation only) and parallel to the camera-frame line normal
``R n + [P]x R v`` (linear in the translation once ``R`` is known).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfiguration, InsufficientLines
from .geometry import ExtrinsicPose, exp_so3, skew
from .lm import SolverConfig, levenberg_marquardt, singular_value_ratio
from .method1 import (CalibrationResult, DegeneracyReport, MIN_LINES,
                      as_line_matrix, check_line_count, usable_correspondences)
from . import method1


def _unit(x):
    return x / np.linalg.norm(x)


@dataclass(frozen=True)
class RotationProblem:
    """Per-line image lines ``l'`` (N, 3) and LiDAR directions ``v_L`` (N, 3)."""

    l_primes: np.ndarray
    v_L: np.ndarray
    K: np.ndarray

    def __post_init__(self):
        lp = np.atleast_2d(np.asarray(self.l_primes, dtype=float))
        v = np.atleast_2d(np.asarray(self.v_L, dtype=float))
        if lp.shape != v.shape or lp.shape[1:] != (3,):
            raise ValueError("l_primes and v_L must both be (N, 3)")
        if np.any(np.linalg.norm(lp, axis=1) == 0) or np.any(np.linalg.norm(v, axis=1) == 0):
            raise ValueError("zero image line or zero direction")
        object.__setattr__(self, "l_primes", lp)
        object.__setattr__(self, "v_L", v)
        object.__setattr__(self, "K", as_line_matrix(self.K))

    @property
    def K_inv_T(self) -> np.ndarray:
        return np.linalg.inv(self.K).T

    @property
    def normals(self) -> np.ndarray:
        """Back-projected plane normals ``K^-1 l'`` as rows."""
        return self.l_primes @ self.K_inv_T

    def __len__(self):
        return self.l_primes.shape[0]

    @classmethod
    def from_correspondences(cls, corrs, K, normalize: bool = True):
        K = as_line_matrix(K)
        lp = np.array([c.segment2d.l for c in corrs], dtype=float)
        v = np.array([c.line3d.v for c in corrs], dtype=float)
        if normalize:
            m = lp @ np.linalg.inv(K).T
            lp = lp / np.linalg.norm(m, axis=1)[:, None]
            v = v / np.linalg.norm(v, axis=1)[:, None]
        return cls(lp, v, K)


@dataclass(frozen=True)
class TranslationSystem:
    """Stacked linear system ``A P = b`` with 3 rows per line."""

    A: np.ndarray
    b: np.ndarray
    row_ids: tuple

    @property
    def n_lines(self) -> int:
        return self.A.shape[0] // 3


def rotation_residual(l_prime, v_L, R, K) -> float:
    """Co-perpendicularity defect ``l'^T K^-T R v_L``."""
    m = np.linalg.solve(as_line_matrix(K), np.asarray(l_prime, dtype=float))
    return float(m @ (np.asarray(R) @ np.asarray(v_L, dtype=float)))


def _rotation_residual_gradient(m, Rv):
    # d r' / d theta for R <- exp([theta]x) R
    return -m @ skew(Rv)


def rotation_jacobian(l_prime, v_L, R, K) -> np.ndarray:
    """Gradient of ``r'**2`` with respect to the left rotation increment.

    Returns a length-3 row, ``2 r' (-l'^T K^-T [R v_L]x)``.
    """
    m = np.linalg.solve(as_line_matrix(K), np.asarray(l_prime, dtype=float))
    Rv = np.asarray(R) @ np.asarray(v_L, dtype=float)
    r = m @ Rv
    return 2.0 * r * _rotation_residual_gradient(m, Rv)


def _rotation_eval(problem: RotationProblem):
    M = problem.normals
    V = problem.v_L

    def evaluate(R):
        RV = V @ R.T
        r = np.einsum("ij,ij->i", M, RV)
        # -m^T [Rv]x = (Rv x m)^T
        J = np.cross(RV, M)
        return r, J

    return evaluate


def _retract_rotation(R, delta):
    R = exp_so3(delta) @ R
    U, _, Vt = np.linalg.svd(R)
    return U @ Vt


def direction_span_ratio(v_L) -> float:
    """``sigma_2 / sigma_1`` of the unit line directions; 0 when all parallel."""
    V = np.asarray(v_L, dtype=float)
    V = V / np.linalg.norm(V, axis=1)[:, None]
    s = np.linalg.svd(V, compute_uv=False)
    return float(s[1] / s[0]) if s.size > 1 else 0.0


def solve_rotation(problem: RotationProblem, R_init, cfg: SolverConfig = SolverConfig(),
                   strict: bool = True):
    """Minimize the summed squared co-perpendicularity defects over SO(3).

    Returns ``(R, diagnostics)``.  With ``strict`` a parallel-direction
    configuration raises :class:`DegenerateConfiguration` carrying the
    solved rotation as ``partial``.
    """
    if len(problem) < MIN_LINES:
        raise InsufficientLines(f"at least {MIN_LINES} line pairs required, got {len(problem)}")
    R0 = np.asarray(R_init, dtype=float)
    out = levenberg_marquardt(_rotation_eval(problem), _retract_rotation, R0, cfg)

    span = direction_span_ratio(problem.v_L)
    jac_ratio = singular_value_ratio(out.jacobian)
    diagnostics = {
        "initial_cost": out.initial_cost,
        "cost": out.cost,
        "iterations": out.iterations,
        "converged": out.converged,
        "direction_span_ratio": span,
        "jacobian_ratio": jac_ratio,
        "degenerate": False,
        "reasons": [],
    }
    if span < cfg.degeneracy_threshold:
        diagnostics["reasons"].append("all line directions parallel: rotation about them is unobservable")
    elif jac_ratio < cfg.degeneracy_threshold:
        diagnostics["reasons"].append("rotation jacobian rank deficient")
    if diagnostics["reasons"]:
        diagnostics["degenerate"] = True
        if strict:
            raise DegenerateConfiguration(diagnostics["reasons"][0], diagnostics, out.state)
    return out.state, diagnostics


def build_translation_system(corrs, R, K, normalize: bool = True) -> TranslationSystem:
    """Stack ``[m]x [R v]x P = [m]x R n`` for every line.

    With ``normalize`` each line is rescaled to a unit direction (so ``n`` is
    the distance-weighted unit normal) and ``m`` to unit length.
    """
    K = as_line_matrix(K)
    R = np.asarray(R, dtype=float)
    Kinv = np.linalg.inv(K)
    A_blocks, b_blocks, ids = [], [], []
    for i, c in enumerate(corrs):
        L = c.line3d.normalized() if normalize else c.line3d
        m = Kinv @ c.segment2d.l
        if normalize:
            m = _unit(m)
        Sm = skew(m)
        A_blocks.append(Sm @ skew(R @ L.v))
        b_blocks.append(Sm @ (R @ L.n))
        ids.extend([c.id if c.id is not None else i] * 3)
    return TranslationSystem(np.vstack(A_blocks), np.concatenate(b_blocks), tuple(ids))


def solve_translation(system: TranslationSystem, threshold: float = 1e-8, strict: bool = True):
    """Least-squares ``P`` from ``A P = b`` via SVD.

    Returns ``(P, sigma_min / sigma_max)``.
    """
    if system.n_lines < MIN_LINES:
        raise InsufficientLines(
            f"at least {MIN_LINES} line pairs required, got {system.n_lines}")
    U, s, Vt = np.linalg.svd(system.A, full_matrices=False)
    ratio = float(s[-1] / s[0]) if s[0] > 0 else 0.0
    cutoff = np.finfo(float).eps * max(system.A.shape) * s[0]
    inv_s = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
    P = Vt.T @ (inv_s * (U.T @ system.b))
    if strict and ratio < threshold:
        raise DegenerateConfiguration(
            "translation system rank deficient (parallel lines?)",
            {"translation_ratio": ratio}, P)
    return P, ratio


def solve_plk_calib(corrs, init: ExtrinsicPose, K, cfg: SolverConfig = SolverConfig(),
                    strict: bool = False) -> CalibrationResult:
    """Two-stage estimate: rotation by LM, then translation by linear least squares.

    The translation stage always uses the rotation stage output.  Degenerate
    stages are flagged on the result, or raised when ``strict``.
    """
    corrs = list(corrs)
    check_line_count(corrs)
    K = as_line_matrix(K)
    usable, skipped = usable_correspondences(corrs, init, K)
    check_line_count(usable)

    problem = RotationProblem.from_correspondences(usable, K)
    R, rot_diag = solve_rotation(problem, init.R, cfg, strict=False)
    system = build_translation_system(usable, R, K)
    P, t_ratio = solve_translation(system, cfg.degeneracy_threshold, strict=False)
    trans_cost = float(np.sum((system.A @ P - system.b) ** 2))

    degeneracy = DegeneracyReport()
    degeneracy.ratios["direction_span"] = rot_diag["direction_span_ratio"]
    degeneracy.ratios["rotation_jacobian"] = rot_diag["jacobian_ratio"]
    degeneracy.ratios["translation"] = t_ratio
    for reason in rot_diag["reasons"]:
        degeneracy.flag(reason)
    if t_ratio < cfg.degeneracy_threshold:
        degeneracy.flag("translation system rank deficient: lines leave translation unconstrained")

    pose = ExtrinsicPose(R, P)
    per_line = []
    for c in corrs:
        try:
            per_line.append(method1.residual(c, pose, K))
        except Exception:
            per_line.append(np.full(2, np.nan))

    result = CalibrationResult(
        pose=pose,
        final_cost=rot_diag["cost"] + trans_cost,
        iterations=rot_diag["iterations"],
        converged=bool(rot_diag["converged"]),
        per_line_residuals=per_line,
        degeneracy=degeneracy,
        method="plk",
        skipped=skipped,
        stages={"rotation": rot_diag,
                "translation": {"cost": trans_cost, "singular_value_ratio": t_ratio}},
    )
    if strict and degeneracy.degenerate:
        raise DegenerateConfiguration("; ".join(degeneracy.reasons), degeneracy.ratios, result)
    return result
