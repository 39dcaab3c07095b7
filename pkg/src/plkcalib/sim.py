"""Synthetic line scenes and Monte Carlo evaluation of both solvers.

Four line arrangements are supported:

* ``a`` three nonparallel, non-coplanar lines
* ``b`` coplanar, nonparallel lines
* ``c`` parallel, non-coplanar lines
* ``d`` parallel lines lying in one plane

Scenes are sampled in the camera frame so every endpoint is visible under the
ground-truth pose, then moved into the LiDAR frame.  Noise is added to the
projected segment endpoints.
"""
from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import BehindCamera, CalibrationError
from .geometry import (CameraIntrinsics, ExtrinsicPose, LineSegment2D,
                       plucker_from_endpoints, pose_error, pose_retract)
from .lm import SolverConfig
from .method1 import Correspondence
from . import method1, method2


class ScenarioKind(str, enum.Enum):
    NON_PARALLEL_NON_COPLANAR = "a"
    COPLANAR = "b"
    PARALLEL = "c"
    COPLANAR_PARALLEL = "d"


class Method(str, enum.Enum):
    METHOD1 = "method1"
    PLK = "plk"

    @property
    def label(self):
        return "Method I" if self is Method.METHOD1 else "PLK-Calib"


DEFAULT_INTRINSICS = CameraIntrinsics(fu=500.0, fv=500.0, cu=320.0, cv=240.0)
IMAGE_SIZE = (640, 480)

# LiDAR x-forward/y-left/z-up to camera x-right/y-down/z-forward, small lever arm
DEFAULT_GT_POSE = ExtrinsicPose(
    np.array([[0.0, -1.0, 0.0],
              [0.0, 0.0, -1.0],
              [1.0, 0.0, 0.0]]),
    np.array([0.10, -0.20, 0.05]),
)


@dataclass(frozen=True)
class Scenario:
    kind: ScenarioKind = ScenarioKind.NON_PARALLEL_NON_COPLANAR
    line_count: int = 3
    scene_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ScenarioKind(self.kind))
        if self.line_count < 3:
            raise ValueError("line_count must be at least 3")
        if not self.scene_scale > 0:
            raise ValueError("scene_scale must be positive")


@dataclass(frozen=True)
class SceneConfig:
    """Camera and sampling ranges used to build synthetic scenes (metres, pixels)."""

    intrinsics: CameraIntrinsics = DEFAULT_INTRINSICS
    image_size: tuple = IMAGE_SIZE
    gt_pose: ExtrinsicPose = DEFAULT_GT_POSE
    depth_range: tuple = (2.0, 10.0)
    length_range: tuple = (3.0, 8.0)
    margin_px: float = 10.0
    min_image_length_px: float = 150.0
    min_angle_deg: float = 15.0
    # reject near-critical configurations in scenarios a/b: RMS pose error
    # predicted for 1 px endpoint noise (None disables the gate)
    max_rotation_gdop_deg: float = 1.5
    max_translation_gdop_m: float = 0.2


@dataclass(frozen=True)
class TrialConfig:
    pixel_noise_sigma: float = 1.0
    init_rot_offset_deg: float = 5.0
    init_trans_offset_m: float = 0.5
    trials: int = 10
    seed: int = 0
    resample_scene: bool = False

    def __post_init__(self):
        if self.pixel_noise_sigma < 0:
            raise ValueError("pixel_noise_sigma must be non-negative")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")


@dataclass
class Scene:
    kind: ScenarioKind
    lines: list
    endpoints: list          # LiDAR frame (p1, p2) pairs
    gt_pose: ExtrinsicPose


@dataclass
class TrialRecord:
    trial: int
    rot_err_deg: float
    trans_err_m: float
    converged: bool
    degenerate: bool
    error: str = ""


@dataclass
class TrialReport:
    scenario: ScenarioKind
    method: Method
    records: list = field(default_factory=list)

    @property
    def completed(self):
        return [r for r in self.records if not r.error]

    def _stat(self, name):
        vals = np.array([getattr(r, name) for r in self.completed], dtype=float)
        if vals.size == 0:
            return float("nan"), float("nan")
        return float(vals.mean()), float(vals.std())

    @property
    def rot_mean_std(self):
        return self._stat("rot_err_deg")

    @property
    def trans_mean_std(self):
        return self._stat("trans_err_m")

    @property
    def degeneracy_rate(self):
        if not self.records:
            return 0.0
        return sum(r.degenerate for r in self.records) / len(self.records)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scenario", "method", "trial", "rot_err_deg", "trans_err_m",
                    "converged", "degenerate"])
        for r in self.records:
            w.writerow([self.scenario.value, self.method.value, r.trial,
                        repr(r.rot_err_deg), repr(r.trans_err_m),
                        int(r.converged), int(r.degenerate)])
        return buf.getvalue()

    def summary(self) -> str:
        rm, rs = self.rot_mean_std
        tm, ts = self.trans_mean_std
        return (f"({self.scenario.value}) {self.method.label}: "
                f"{rm:.3f}+-{rs:.3f} deg / {tm:.3f}+-{ts:.3f} m  "
                f"[{len(self.completed)}/{len(self.records)} trials, "
                f"degenerate {100 * self.degeneracy_rate:.0f}%]")


def _random_unit(rng, size=3):
    x = rng.standard_normal(size)
    return x / np.linalg.norm(x)


def _visible(p, cfg: SceneConfig):
    z = p[2]
    if not cfg.depth_range[0] <= z <= cfg.depth_range[1]:
        return False
    u, v = cfg.intrinsics.project_point(p)
    W, H = cfg.image_size
    m = cfg.margin_px
    return m <= u <= W - m and m <= v <= H - m


def _segment_ok(p1, p2, cfg):
    if not (_visible(p1, cfg) and _visible(p2, cfg)):
        return False
    pix = np.linalg.norm(cfg.intrinsics.project_point(p1) - cfg.intrinsics.project_point(p2))
    return pix >= cfg.min_image_length_px


def _random_visible_point(rng, cfg, scale):
    W, H = cfg.image_size
    u = rng.uniform(cfg.margin_px, W - cfg.margin_px)
    v = rng.uniform(cfg.margin_px, H - cfg.margin_px)
    lo, hi = cfg.depth_range
    z = rng.uniform(lo + 0.2 * (hi - lo), hi - 0.4 * (hi - lo))
    intr = cfg.intrinsics
    return np.array([(u - intr.cu) / intr.fu * z, (v - intr.cv) / intr.fv * z, z])


def _pairwise_min_angle_deg(dirs):
    best = 180.0
    for i in range(len(dirs)):
        for j in range(i + 1, len(dirs)):
            c = abs(np.dot(dirs[i], dirs[j]))
            best = min(best, np.degrees(np.arccos(min(c, 1.0))))
    return best


def _angle_floor(cfg, n):
    # pairwise separation that random directions can still satisfy for larger n
    return min(cfg.min_angle_deg, 60.0 / n)


def _image_angles_ok(segs, cfg):
    intr = cfg.intrinsics
    dirs = []
    for p, q in segs:
        d = intr.project_point(q) - intr.project_point(p)
        dirs.append(d / np.linalg.norm(d))
    return _pairwise_min_angle_deg(dirs) >= _angle_floor(cfg, len(segs))


def _planarity(points):
    """Smallest / largest scatter eigenvalue of a point set."""
    X = np.asarray(points) - np.mean(points, axis=0)
    w = np.linalg.eigvalsh(X.T @ X)
    return w[0] / w[-1]


def _sample_line(rng, cfg, scale, mid=None, direction=None, tries=200):
    lo, hi = cfg.length_range
    for _ in range(tries):
        c = _random_visible_point(rng, cfg, scale) if mid is None else mid(rng)
        d = _random_unit(rng) if direction is None else direction
        half = 0.5 * rng.uniform(lo, hi) * scale
        p1, p2 = c - half * d, c + half * d
        if _segment_ok(p1, p2, cfg):
            return p1, p2
    return None


def _sample_plane(rng, cfg, scale):
    center = _random_visible_point(rng, cfg, scale)
    while True:
        normal = _random_unit(rng)
        # keep the plane well away from the camera centre and not seen edge-on
        if abs(normal @ center) / np.linalg.norm(center) > 0.5:
            break
    e1 = _random_unit(rng)
    e1 = e1 - (e1 @ normal) * normal
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(normal, e1)
    return center, normal, e1, e2


def _scene_cam(kind, n, rng, cfg, scale):
    """Camera-frame endpoint pairs satisfying the scenario predicate, or None."""
    lo, hi = cfg.length_range
    spread = 0.5 * hi * scale
    if kind is ScenarioKind.NON_PARALLEL_NON_COPLANAR:
        segs = [_sample_line(rng, cfg, scale) for _ in range(n)]
        if any(s is None for s in segs):
            return None
        dirs = [(q - p) / np.linalg.norm(q - p) for p, q in segs]
        if _pairwise_min_angle_deg(dirs) < _angle_floor(cfg, n):
            return None
        if abs(np.linalg.det(np.array(dirs[:3]))) < 0.2:
            return None
        if _planarity([p for s in segs for p in s]) < 1e-2:
            return None
        return segs

    if kind is ScenarioKind.PARALLEL:
        d = _random_unit(rng)
        segs = [_sample_line(rng, cfg, scale, direction=d) for _ in range(n)]
        if any(s is None for s in segs):
            return None
        if _planarity([p for s in segs for p in s]) < 1e-2:
            return None
        return segs

    center, normal, e1, e2 = _sample_plane(rng, cfg, scale)

    def in_plane(r):
        a, b = r.uniform(-spread, spread, size=2)
        return center + a * e1 + b * e2

    if kind is ScenarioKind.COPLANAR:
        segs = []
        for _ in range(n):
            phi = rng.uniform(0, np.pi)
            d = np.cos(phi) * e1 + np.sin(phi) * e2
            s = _sample_line(rng, cfg, scale, mid=in_plane, direction=d)
            if s is None:
                return None
            segs.append(s)
        dirs = [(q - p) / np.linalg.norm(q - p) for p, q in segs]
        if _pairwise_min_angle_deg(dirs) < _angle_floor(cfg, n):
            return None
        return segs

    # coplanar and parallel
    phi = rng.uniform(0, np.pi)
    d = np.cos(phi) * e1 + np.sin(phi) * e2
    segs = [_sample_line(rng, cfg, scale, mid=in_plane, direction=d) for _ in range(n)]
    if any(s is None for s in segs):
        return None
    # distinct lines: offsets across the common direction must differ
    perp = np.cross(normal, d)
    offs = sorted(float(perp @ p) for p, _ in segs)
    if min(np.diff(offs)) < 0.3 * scale:
        return None
    return segs


def pose_gdop(scene, cfg: SceneConfig):
    """Linearized RMS (rotation deg, translation m) error per pixel of endpoint noise."""
    corrs = observe(scene, cfg.gt_pose, cfg.intrinsics, 0.0, None)
    _, J = method1.stacked(corrs, cfg.gt_pose, cfg.intrinsics.K)
    try:
        C = np.linalg.inv(J.T @ J)
    except np.linalg.LinAlgError:
        return float("inf"), float("inf")
    rot = np.degrees(np.sqrt(max(np.trace(C[:3, :3]), 0.0)))
    return float(rot), float(np.sqrt(max(np.trace(C[3:, 3:]), 0.0)))


def _scene_ok(kind, segs, cfg):
    if segs is None:
        return False
    if kind in (ScenarioKind.PARALLEL, ScenarioKind.COPLANAR_PARALLEL):
        return True
    if not _image_angles_ok(segs, cfg):
        return False
    if cfg.max_rotation_gdop_deg is None and cfg.max_translation_gdop_m is None:
        return True
    to_lidar = cfg.gt_pose.inverse()
    endpoints = [(to_lidar.transform_point(p), to_lidar.transform_point(q)) for p, q in segs]
    scene = Scene(kind, [plucker_from_endpoints(p, q) for p, q in endpoints], endpoints, cfg.gt_pose)
    rot, trans = pose_gdop(scene, cfg)
    if cfg.max_rotation_gdop_deg is not None and rot > cfg.max_rotation_gdop_deg:
        return False
    return cfg.max_translation_gdop_m is None or trans <= cfg.max_translation_gdop_m


def generate_scene(scenario: Scenario, rng_seed, cfg: SceneConfig = SceneConfig(),
                   max_attempts: int = 10000) -> Scene:
    """Sample LiDAR-frame lines for ``scenario`` visible under ``cfg.gt_pose``."""
    scenario = scenario if isinstance(scenario, Scenario) else Scenario(scenario)
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    for _ in range(max_attempts):
        segs = _scene_cam(scenario.kind, scenario.line_count, rng, cfg, scenario.scene_scale)
        if _scene_ok(scenario.kind, segs, cfg):
            break
    else:
        raise RuntimeError(f"could not sample a scene of kind {scenario.kind.value!r}")
    to_lidar = cfg.gt_pose.inverse()
    endpoints = [(to_lidar.transform_point(p), to_lidar.transform_point(q)) for p, q in segs]
    lines = [plucker_from_endpoints(p, q) for p, q in endpoints]
    return Scene(scenario.kind, lines, endpoints, cfg.gt_pose)


def observe(scene: Scene, gt_pose: ExtrinsicPose, intr: CameraIntrinsics, sigma: float, rng):
    """Project the scene's endpoints and add i.i.d. Gaussian pixel noise."""
    corrs = []
    for i, ((p1, p2), line) in enumerate(zip(scene.endpoints, scene.lines)):
        pix = []
        for p in (p1, p2):
            pc = gt_pose.transform_point(p)
            if pc[2] <= 0:
                raise BehindCamera(f"line {i}: endpoint has depth {pc[2]:.3f}")
            pix.append(intr.project_point(pc))
        noise = rng.normal(0.0, sigma, size=(2, 2)) if sigma > 0 else np.zeros((2, 2))
        (us, vs), (ue, ve) = pix[0] + noise[0], pix[1] + noise[1]
        corrs.append(Correspondence(line, LineSegment2D.from_pixels(us, vs, ue, ve), str(i)))
    return corrs


def perturb_initial(gt: ExtrinsicPose, rot_deg_per_axis, trans_m_per_axis) -> ExtrinsicPose:
    """Offset ``gt`` by a fixed rotation vector (degrees per axis) and translation."""
    dtheta = np.radians(np.broadcast_to(np.asarray(rot_deg_per_axis, dtype=float), (3,)))
    dP = np.broadcast_to(np.asarray(trans_m_per_axis, dtype=float), (3,))
    return pose_retract(gt, dtheta, dP)


def _solver(method: Method):
    return method1.solve if method is Method.METHOD1 else method2.solve_plk_calib


def run_trial(scene, method, trial_cfg: TrialConfig, scene_cfg: SceneConfig, rng,
              solver_cfg: SolverConfig = SolverConfig(), trial: int = 0) -> TrialRecord:
    gt = scene_cfg.gt_pose
    init = perturb_initial(gt, trial_cfg.init_rot_offset_deg, trial_cfg.init_trans_offset_m)
    try:
        corrs = observe(scene, gt, scene_cfg.intrinsics, trial_cfg.pixel_noise_sigma, rng)
        res = _solver(Method(method))(corrs, init, scene_cfg.intrinsics.K, solver_cfg)
    except CalibrationError as exc:
        return TrialRecord(trial, float("nan"), float("nan"), False, False,
                           f"{type(exc).__name__}: {exc}")
    rot, trans = pose_error(res.pose, gt)
    return TrialRecord(trial, rot, trans, res.converged, res.degeneracy.degenerate)


def trial_rngs(seed: int, trial: int):
    """Independent (scene, noise) generators for one trial index."""
    return (np.random.default_rng([seed, 0, trial]),
            np.random.default_rng([seed, 1, trial]))


def run_monte_carlo(scenario, trial_cfg: TrialConfig, method,
                    scene_cfg: SceneConfig = SceneConfig(),
                    solver_cfg: SolverConfig = SolverConfig()) -> TrialReport:
    """Repeat noise draws and solves; deterministic for a fixed seed.

    Trial ``k`` draws its noise from a stream keyed by ``(seed, k)``, so its
    outcome does not depend on the total number of trials.  Unless
    ``resample_scene`` is set, every trial shares the scene of trial 0.
    """
    scenario = scenario if isinstance(scenario, Scenario) else Scenario(scenario)
    method = Method(method)
    report = TrialReport(scenario.kind, method)
    shared = None
    for k in range(trial_cfg.trials):
        scene_rng, noise_rng = trial_rngs(trial_cfg.seed, k)
        if trial_cfg.resample_scene or shared is None:
            shared = generate_scene(scenario, scene_rng, scene_cfg)
        report.records.append(
            run_trial(shared, method, trial_cfg, scene_cfg, noise_rng, solver_cfg, trial=k))
    return report
