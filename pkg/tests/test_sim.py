import numpy as np
import pytest

from plkcalib import sim
from plkcalib.errors import BehindCamera
from plkcalib.geometry import ExtrinsicPose, pose_error
from plkcalib.method1 import solve
from plkcalib.method2 import solve_plk_calib

from conftest import noiseless

SEEDS = range(5)


def unit_dirs(scene):
    return np.array([L.unit_direction for L in scene.lines])


def scatter_eigs(scene):
    pts = np.array([p for pair in scene.endpoints for p in pair])
    centred = pts - pts.mean(axis=0)
    return np.linalg.eigvalsh(centred.T @ centred)


@pytest.mark.parametrize("seed", SEEDS)
def test_scenario_a_predicate(seed):
    scene = sim.generate_scene(sim.Scenario("a"), seed)
    D = unit_dirs(scene)
    assert np.linalg.matrix_rank(D, tol=1e-6) == 3
    for i in range(3):
        for j in range(i + 1, 3):
            ang = np.degrees(np.arccos(min(1.0, abs(D[i] @ D[j]))))
            assert ang >= 15.0
    eig = scatter_eigs(scene)
    assert eig[0] / eig[-1] > 1e-6


@pytest.mark.parametrize("seed", SEEDS)
def test_scenario_b_coplanar(seed):
    scene = sim.generate_scene(sim.Scenario("b"), seed)
    eig = scatter_eigs(scene)
    assert eig[0] < 1e-12 * eig[-1]
    D = unit_dirs(scene)
    assert min(np.linalg.norm(np.cross(D[i], D[j])) for i in range(3) for j in range(i + 1, 3)) > 0.1


@pytest.mark.parametrize("seed", SEEDS)
def test_scenario_c_parallel(seed):
    scene = sim.generate_scene(sim.Scenario("c"), seed)
    D = unit_dirs(scene)
    for i in range(3):
        for j in range(i + 1, 3):
            assert np.linalg.norm(np.cross(D[i], D[j])) < 1e-12
    eig = scatter_eigs(scene)
    assert eig[0] / eig[-1] > 1e-6


@pytest.mark.parametrize("seed", SEEDS)
def test_scenario_d_parallel_coplanar(seed):
    scene = sim.generate_scene(sim.Scenario("d"), seed)
    D = unit_dirs(scene)
    assert max(np.linalg.norm(np.cross(D[0], d)) for d in D[1:]) < 1e-12
    eig = scatter_eigs(scene)
    assert eig[0] < 1e-12 * eig[-1]


@pytest.mark.parametrize("kind", "abcd")
def test_endpoints_visible(kind):
    scene = sim.generate_scene(sim.Scenario(kind), 3)
    cfg = sim.SceneConfig()
    w, h = cfg.image_size
    for p1, p2 in scene.endpoints:
        for p in (p1, p2):
            pc = cfg.gt_pose.transform_point(p)
            assert pc[2] > 0
            u, v = cfg.intrinsics.project_point(pc)
            assert 0 <= u <= w and 0 <= v <= h


@pytest.mark.parametrize("n", [4, 6])
def test_more_lines(n):
    scene = sim.generate_scene(sim.Scenario("a", line_count=n), 0)
    assert len(scene.lines) == n


def test_scenario_validation():
    with pytest.raises(ValueError):
        sim.Scenario("a", line_count=2)
    with pytest.raises(ValueError):
        sim.Scenario("z")
    with pytest.raises(ValueError):
        sim.TrialConfig(pixel_noise_sigma=-1)
    with pytest.raises(ValueError):
        sim.TrialConfig(trials=0)


def test_generate_scene_deterministic():
    a = sim.generate_scene(sim.Scenario("b"), 42)
    b = sim.generate_scene(sim.Scenario("b"), 42)
    for (p, q), (r, s) in zip(a.endpoints, b.endpoints):
        assert np.array_equal(p, r) and np.array_equal(q, s)


def test_noise_std(scene_a, intr, gt_pose):
    rng = np.random.default_rng(0)
    clean = np.array([c.segment2d.as_tuple() for c in noiseless(scene_a)])
    disp = []
    for _ in range(10_000 // 12 + 1):
        obs = sim.observe(scene_a, gt_pose, intr, 1.0, rng)
        disp.append(np.array([c.segment2d.as_tuple() for c in obs]) - clean)
    disp = np.concatenate(disp).ravel()
    assert disp.size >= 10_000
    assert abs(disp.std() - 1.0) < 0.1
    assert abs(disp.mean()) < 0.05


def test_observe_behind_camera(scene_a, intr):
    flipped = ExtrinsicPose(np.diag([1.0, -1.0, -1.0]) @ sim.DEFAULT_GT_POSE.R, sim.DEFAULT_GT_POSE.P)
    with pytest.raises(BehindCamera):
        sim.observe(scene_a, flipped, intr, 0.0, None)


def test_observe_ids_and_pairing(scene_a, intr, gt_pose):
    obs = noiseless(scene_a)
    assert [c.id for c in obs] == ["0", "1", "2"]
    assert all(c.line3d is L for c, L in zip(obs, scene_a.lines))


def test_perturb_zero_is_identity(gt_pose):
    out = sim.perturb_initial(gt_pose, 0.0, 0.0)
    assert pose_error(out, gt_pose) == (0.0, 0.0)


def test_perturb_magnitude(gt_pose):
    rot, trans = pose_error(sim.perturb_initial(gt_pose, 5.0, 0.5), gt_pose)
    # single rotation vector (5, 5, 5) deg has geodesic angle 5*sqrt(3)
    assert rot == pytest.approx(5 * np.sqrt(3), abs=1e-9)
    assert trans == pytest.approx(0.5 * np.sqrt(3), abs=1e-12)


@pytest.mark.parametrize("kind", "ab")
@pytest.mark.parametrize("solver", [solve, solve_plk_calib])
def test_zero_noise_both_solvers(kind, solver, intr, gt_pose):
    scene = sim.generate_scene(sim.Scenario(kind), 7)
    res = solver(noiseless(scene), sim.perturb_initial(gt_pose, 5.0, 0.5), intr.K)
    rot, trans = pose_error(res.pose, gt_pose)
    assert rot < 1e-6 and trans < 1e-6


def test_monte_carlo_deterministic():
    cfg = sim.TrialConfig(trials=3, seed=4)
    a = sim.run_monte_carlo("a", cfg, "plk").to_csv()
    b = sim.run_monte_carlo("a", cfg, "plk").to_csv()
    assert a == b


def test_trial_independent_of_trial_count():
    short = sim.run_monte_carlo("b", sim.TrialConfig(trials=2, seed=1), "method1")
    long = sim.run_monte_carlo("b", sim.TrialConfig(trials=4, seed=1), "method1")
    assert short.records == long.records[:2]


def test_csv_format():
    rep = sim.run_monte_carlo("a", sim.TrialConfig(trials=2), "method1")
    lines = rep.to_csv().splitlines()
    assert lines[0] == "scenario,method,trial,rot_err_deg,trans_err_m,converged,degenerate"
    assert len(lines) == 3
    assert lines[1].startswith("a,method1,0,")


def test_report_aggregates_completed_only():
    rep = sim.TrialReport(sim.ScenarioKind("a"), sim.Method("plk"), [
        sim.TrialRecord(0, 1.0, 2.0, True, False),
        sim.TrialRecord(1, 3.0, 4.0, True, False),
        sim.TrialRecord(2, float("nan"), float("nan"), False, False, "boom"),
    ])
    assert rep.rot_mean_std == (2.0, 1.0)
    assert rep.trans_mean_std == (3.0, 1.0)
    assert "2/3 trials" in rep.summary()


def test_parallel_scenarios_flagged():
    for kind in "cd":
        rep = sim.run_monte_carlo(kind, sim.TrialConfig(trials=3), "plk")
        assert rep.degeneracy_rate == 1.0


def test_three_line_estimators_coincide():
    cfg = sim.TrialConfig(trials=10, seed=0)
    plk = sim.run_monte_carlo("a", cfg, "plk").records
    m1 = sim.run_monte_carlo("a", cfg, "method1").records
    for a, b in zip(plk, m1):
        assert abs(a.trans_err_m - b.trans_err_m) < 1e-6
        assert abs(a.rot_err_deg - b.rot_err_deg) < 1e-6
