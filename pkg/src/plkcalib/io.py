"""Readers and writers for calibration inputs, reports and segment lists.

Calibration inputs and reports are JSON documents carrying a
``schema_version``.  Segment lists are plain text, one ``u_s v_s u_e v_e``
record per line, ``#`` starting a comment.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import CalibrationError
from .geometry import (CameraIntrinsics, ExtrinsicPose, LineSegment2D,
                       plucker_from_endpoints, pose_error)
from .method1 import MIN_LINES, CalibrationResult, Correspondence

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
ROTATION_WARN_DEFECT = 1e-6
ROTATION_REJECT_DEFECT = 1e-3


class InputError(CalibrationError, ValueError):
    """A file failed to parse or violated a data invariant."""


@dataclass
class CalibrationInput:
    intrinsics: CameraIntrinsics
    initial_pose: ExtrinsicPose
    endpoints: list                      # [(p1, p2)] LiDAR frame, metres
    pixels: list                         # [(u_s, v_s, u_e, v_e)]
    ids: list
    ground_truth: Optional[ExtrinsicPose] = None

    @property
    def correspondences(self):
        return [Correspondence(plucker_from_endpoints(p1, p2),
                               LineSegment2D.from_pixels(*px), cid)
                for (p1, p2), px, cid in zip(self.endpoints, self.pixels, self.ids)]


def rotation_from_quaternion(q) -> np.ndarray:
    """Rotation matrix from a ``(w, x, y, z)`` quaternion, normalizing it."""
    q = np.asarray(q, dtype=float)
    if q.shape != (4,) or not np.all(np.isfinite(q)):
        raise InputError("quaternion must have 4 finite components (w, x, y, z)")
    defect = abs(np.linalg.norm(q) - 1.0)
    _check_defect(defect, "quaternion norm")
    return Rotation.from_quat(q, scalar_first=True).as_matrix()


def quaternion_from_rotation(R) -> np.ndarray:
    q = Rotation.from_matrix(R).as_quat(scalar_first=True)
    return q if q[0] >= 0 else -q


def orthonormalize(R) -> np.ndarray:
    """Nearest rotation to ``R``; warns or rejects depending on its defect."""
    R = np.asarray(R, dtype=float)
    if R.size != 9 or not np.all(np.isfinite(R)):
        raise InputError("rotation must be 9 finite numbers (row-major 3x3)")
    R = R.reshape(3, 3)
    defect = max(np.abs(R.T @ R - np.eye(3)).max(), abs(np.linalg.det(R) - 1.0))
    _check_defect(defect, "rotation orthonormality")
    if defect <= 1e-12:
        return R
    U, _, Vt = np.linalg.svd(R)
    return U @ Vt


def _check_defect(defect, what):
    if defect > ROTATION_REJECT_DEFECT:
        raise InputError(f"{what} defect {defect:.2e} exceeds {ROTATION_REJECT_DEFECT:g}")
    if defect > ROTATION_WARN_DEFECT:
        log.warning("%s defect %.2e; normalizing", what, defect)


def _pose_from_dict(d, what):
    if not isinstance(d, dict):
        raise InputError(f"{what} must be an object")
    if "quaternion_wxyz" in d:
        R = rotation_from_quaternion(d["quaternion_wxyz"])
    elif "rotation" in d:
        R = orthonormalize(d["rotation"])
    else:
        raise InputError(f"{what} needs 'quaternion_wxyz' or 'rotation'")
    try:
        return ExtrinsicPose(R, d["translation"])
    except KeyError:
        raise InputError(f"{what} is missing 'translation'") from None
    except ValueError as exc:
        raise InputError(f"{what}: {exc}") from None


def _pose_to_dict(pose: ExtrinsicPose):
    return {"rotation": pose.R.tolist(), "translation": pose.P.tolist()}


def parse_calibration_input(doc) -> CalibrationInput:
    """Validate a decoded input document."""
    if not isinstance(doc, dict):
        raise InputError("input must be a JSON object")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise InputError(f"unsupported schema_version {version!r}")
    try:
        intr = CameraIntrinsics(**{k: doc["intrinsics"][k] for k in ("fu", "fv", "cu", "cv")})
    except (KeyError, TypeError) as exc:
        raise InputError(f"intrinsics must provide fu, fv, cu, cv ({exc})") from None
    except ValueError as exc:
        raise InputError(f"intrinsics: {exc}") from None
    init = _pose_from_dict(doc.get("initial_pose"), "initial_pose")
    gt = None
    if doc.get("ground_truth") is not None:
        gt = _pose_from_dict(doc["ground_truth"], "ground_truth")

    records = doc.get("correspondences")
    if not isinstance(records, list):
        raise InputError("'correspondences' must be a list")
    if len(records) < MIN_LINES:
        raise InputError(f"at least {MIN_LINES} line pairs required, got {len(records)}")
    endpoints, pixels, ids = [], [], []
    for i, rec in enumerate(records):
        cid = str(rec.get("id", i)) if isinstance(rec, dict) else str(i)
        try:
            p1 = np.asarray(rec["p1"], dtype=float)
            p2 = np.asarray(rec["p2"], dtype=float)
            px = tuple(float(rec[k]) for k in ("u_s", "v_s", "u_e", "v_e"))
            plucker_from_endpoints(p1, p2)
            LineSegment2D.from_pixels(*px)
        except (KeyError, TypeError) as exc:
            raise InputError(f"correspondence {cid}: missing or malformed field {exc}") from None
        except ValueError as exc:
            raise InputError(f"correspondence {cid}: {exc}") from None
        endpoints.append((p1.reshape(3), p2.reshape(3)))
        pixels.append(px)
        ids.append(cid)
    return CalibrationInput(intr, init, endpoints, pixels, ids, gt)


def read_calibration_input(path) -> CalibrationInput:
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    return parse_calibration_input(doc)


def calibration_input_to_dict(inp: CalibrationInput) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "intrinsics": {"fu": inp.intrinsics.fu, "fv": inp.intrinsics.fv,
                       "cu": inp.intrinsics.cu, "cv": inp.intrinsics.cv},
        "initial_pose": _pose_to_dict(inp.initial_pose),
        "correspondences": [
            {"id": cid, "p1": p1.tolist(), "p2": p2.tolist(),
             "u_s": px[0], "v_s": px[1], "u_e": px[2], "v_e": px[3]}
            for (p1, p2), px, cid in zip(inp.endpoints, inp.pixels, inp.ids)
        ],
    }
    if inp.ground_truth is not None:
        doc["ground_truth"] = _pose_to_dict(inp.ground_truth)
    return doc


def write_calibration_input(inp: CalibrationInput, path):
    with open(path, "w") as f:
        json.dump(calibration_input_to_dict(inp), f, indent=2)
        f.write("\n")


@dataclass
class Report:
    method: str
    pose: ExtrinsicPose
    converged: bool
    iterations: int
    final_cost: float
    per_line_residuals: dict            # id -> [start_px, end_px]
    degeneracy: dict
    wall_time_s: float
    rot_err_deg: Optional[float] = None
    trans_err_m: Optional[float] = None

    @classmethod
    def from_result(cls, result: CalibrationResult, ids, wall_time_s, ground_truth=None):
        rot = trans = None
        if ground_truth is not None:
            rot, trans = pose_error(result.pose, ground_truth)
        residuals = {cid: [float(x) for x in r] for cid, r in zip(ids, result.per_line_residuals)}
        deg = {"degenerate": bool(result.degeneracy.degenerate),
               "reasons": list(result.degeneracy.reasons),
               "singular_value_ratios": {k: float(v) for k, v in result.degeneracy.ratios.items()}}
        return cls(result.method, result.pose, bool(result.converged), int(result.iterations),
                   float(result.final_cost), residuals, deg, float(wall_time_s), rot, trans)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "method": self.method,
            "pose": {"rotation": self.pose.R.tolist(),
                     "quaternion_wxyz": quaternion_from_rotation(self.pose.R).tolist(),
                     "translation_m": self.pose.P.tolist()},
            "converged": self.converged,
            "iterations": self.iterations,
            "final_cost_px2": self.final_cost,
            "rot_err_deg": self.rot_err_deg,
            "trans_err_m": self.trans_err_m,
            "per_line_residuals_px": self.per_line_residuals,
            "degeneracy": self.degeneracy,
            "wall_time_s": self.wall_time_s,
        }

    @classmethod
    def from_dict(cls, doc) -> "Report":
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise InputError(f"unsupported schema_version {doc.get('schema_version')!r}")
        pose = ExtrinsicPose(np.array(doc["pose"]["rotation"]), doc["pose"]["translation_m"])
        return cls(doc["method"], pose, doc["converged"], doc["iterations"],
                   doc["final_cost_px2"], doc["per_line_residuals_px"], doc["degeneracy"],
                   doc["wall_time_s"], doc.get("rot_err_deg"), doc.get("trans_err_m"))

    def dumps(self) -> str:
        # NaN residuals for skipped lines are written as JSON null
        return json.dumps(_nan_to_none(self.to_dict()), indent=2) + "\n"


def _nan_to_none(obj):
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _nan_to_none(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_nan_to_none(v) for v in obj]
    return obj


def read_report(path) -> Report:
    with open(path) as f:
        return Report.from_dict(json.load(f))


def read_segments(path):
    """Parse a segment file into :class:`LineSegment2D` objects.

    Raises :class:`InputError` naming the 1-based line of the first bad record.
    """
    segments = []
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            fields = text.replace(",", " ").split()
            try:
                if len(fields) != 4:
                    raise ValueError(f"expected 4 numbers, got {len(fields)}")
                segments.append(LineSegment2D.from_pixels(*map(float, fields)))
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: malformed segment record ({exc})") from None
    return segments


def write_segments(segments, path):
    with open(path, "w") as f:
        f.write("# u_s_px v_s_px u_e_px v_e_px\n")
        for s in segments:
            f.write(" ".join(repr(x) for x in s.as_tuple()) + "\n")
