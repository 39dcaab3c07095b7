import numpy as np
import pytest

from plkcalib import sim
from plkcalib.errors import DegenerateConfiguration, InsufficientLines
from plkcalib.geometry import exp_so3, pose_error, project_line, transform_line
from plkcalib.method1 import Correspondence
from plkcalib.method2 import (RotationProblem, TranslationSystem, build_translation_system,
                              direction_span_ratio, rotation_jacobian, rotation_residual,
                              solve_plk_calib, solve_rotation, solve_translation)

from conftest import noiseless, random_correspondence, random_pose


def test_rotation_residual_dot_oracle(rng, intr):
    for _ in range(20):
        R = random_pose(rng).R
        l, v = rng.normal(size=3), rng.normal(size=3)
        m = np.linalg.inv(intr.K) @ l
        assert rotation_residual(l, v, R, intr.K) == pytest.approx(m @ R @ v, rel=1e-10)


def test_rotation_residual_zero_at_truth(scene_a, intr, gt_pose):
    for c in noiseless(scene_a):
        r = rotation_residual(c.segment2d.l, c.line3d.v, gt_pose.R, intr.K)
        m = np.linalg.solve(intr.K, c.segment2d.l)
        assert abs(r) / (np.linalg.norm(m) * np.linalg.norm(c.line3d.v)) < 1e-12


def test_rotation_jacobian_finite_differences(rng, intr):
    h, worst = 1e-6, 0.0
    for _ in range(100):
        pose = random_pose(rng)
        c = random_correspondence(rng, pose, intr, pixel_noise=5.0)
        R = exp_so3(rng.normal(size=3) * 0.05) @ pose.R
        l, v = c.segment2d.l / np.linalg.norm(c.segment2d.l), c.line3d.unit_direction
        f = lambda R_: rotation_residual(l, v, R_, intr.K) ** 2
        num = np.array([(f(exp_so3(h * e) @ R) - f(exp_so3(-h * e) @ R)) / (2 * h)
                        for e in np.eye(3)])
        ana = rotation_jacobian(l, v, R, intr.K)
        worst = max(worst, np.linalg.norm(ana - num) / np.linalg.norm(num))
    assert worst < 1e-5


def test_rotation_jacobian_zero_when_residual_zero(scene_a, intr, gt_pose):
    c = noiseless(scene_a)[0]
    g = rotation_jacobian(c.segment2d.l, c.line3d.v, gt_pose.R, intr.K)
    m = np.linalg.solve(intr.K, c.segment2d.l)
    assert np.linalg.norm(g) < 1e-12 * np.linalg.norm(m) ** 2 * np.linalg.norm(c.line3d.v) ** 2


def test_rotation_jacobian_descent_direction(rng, intr, gt_pose):
    c = random_correspondence(rng, gt_pose, intr)
    l, v = c.segment2d.l / np.linalg.norm(c.segment2d.l), c.line3d.unit_direction
    R = exp_so3([0.05, -0.03, 0.02]) @ gt_pose.R
    g = rotation_jacobian(l, v, R, intr.K)
    before = rotation_residual(l, v, R, intr.K) ** 2
    after = rotation_residual(l, v, exp_so3(-1e-4 * g / np.linalg.norm(g)) @ R, intr.K) ** 2
    assert after < before


def test_rotation_solve_invariant_to_input_scaling(scene_b, intr, gt_pose):
    obs = sim.observe(scene_b, gt_pose, intr, 1.0, np.random.default_rng(2))
    R0 = sim.perturb_initial(gt_pose, 5.0, 0.0).R
    a, _ = solve_rotation(RotationProblem.from_correspondences(obs, intr.K), R0)
    scaled = [Correspondence(c.line3d.scaled(3.0), c.segment2d) for c in obs]
    b, _ = solve_rotation(RotationProblem.from_correspondences(scaled, intr.K), R0)
    assert np.degrees(np.linalg.norm(a.T @ b - np.eye(3))) < 1e-6


def test_rotation_noiseless_recovery(scene_a, intr, gt_pose):
    problem = RotationProblem.from_correspondences(noiseless(scene_a), intr.K)
    R, diag = solve_rotation(problem, sim.perturb_initial(gt_pose, 5.0, 0.0).R)
    assert diag["converged"] and not diag["degenerate"]
    np.testing.assert_allclose(R, gt_pose.R, atol=1e-9)


def test_rotation_parallel_directions_raise(scene_c, intr, gt_pose):
    problem = RotationProblem.from_correspondences(noiseless(scene_c), intr.K)
    assert direction_span_ratio(problem.v_L) < 1e-8
    with pytest.raises(DegenerateConfiguration) as info:
        solve_rotation(problem, gt_pose.R)
    assert info.value.partial is not None


def test_translation_system_consistent_at_truth(scene_a, intr, gt_pose):
    sys_ = build_translation_system(noiseless(scene_a), gt_pose.R, intr.K)
    np.testing.assert_allclose(sys_.A @ gt_pose.P, sys_.b, atol=1e-9)


def test_translation_block_rank(scene_a, intr, gt_pose):
    sys_ = build_translation_system(noiseless(scene_a)[:1], gt_pose.R, intr.K)
    assert sys_.A.shape == (3, 3)
    assert np.linalg.matrix_rank(sys_.A, tol=1e-9) <= 2


def test_translation_single_line_insufficient(scene_a, intr, gt_pose):
    sys_ = build_translation_system(noiseless(scene_a)[:1], gt_pose.R, intr.K)
    with pytest.raises(InsufficientLines):
        solve_translation(sys_)


def test_translation_matches_normal_equations(scene_a, intr, gt_pose):
    obs = sim.observe(scene_a, gt_pose, intr, 1.0, np.random.default_rng(9))
    sys_ = build_translation_system(obs, gt_pose.R, intr.K)
    P, ratio = solve_translation(sys_)
    oracle = np.linalg.solve(sys_.A.T @ sys_.A, sys_.A.T @ sys_.b)
    np.testing.assert_allclose(P, oracle, atol=1e-9)
    assert ratio > 1e-8


def test_translation_rhs_scales_with_distance(scene_a, intr, gt_pose):
    # without normalization, doubling n doubles b and leaves A unchanged
    obs = noiseless(scene_a)
    doubled = [Correspondence(type(c.line3d)(2 * c.line3d.n, c.line3d.v), c.segment2d) for c in obs]
    a = build_translation_system(obs, gt_pose.R, intr.K, normalize=False)
    b = build_translation_system(doubled, gt_pose.R, intr.K, normalize=False)
    np.testing.assert_allclose(b.A, a.A)
    np.testing.assert_allclose(b.b, 2 * a.b)


def test_translation_parallel_lines_degenerate(scene_c, intr, gt_pose):
    sys_ = build_translation_system(noiseless(scene_c), gt_pose.R, intr.K)
    with pytest.raises(DegenerateConfiguration):
        solve_translation(sys_)
    _, ratio = solve_translation(sys_, strict=False)
    assert ratio < 1e-8


def test_translation_system_row_ids(scene_a, intr, gt_pose):
    sys_ = build_translation_system(noiseless(scene_a), gt_pose.R, intr.K)
    assert isinstance(sys_, TranslationSystem)
    assert sys_.n_lines == 3 and len(sys_.row_ids) == 9


@pytest.mark.parametrize("fixture", ["scene_a", "scene_b"])
def test_plk_noiseless_recovery(fixture, request, intr, gt_pose):
    scene = request.getfixturevalue(fixture)
    res = solve_plk_calib(noiseless(scene), sim.perturb_initial(gt_pose, 5.0, 0.5), intr.K)
    rot, trans = pose_error(res.pose, gt_pose)
    assert res.converged and not res.degeneracy.degenerate
    assert rot < 1e-6 and trans < 1e-6
    assert set(res.stages) == {"rotation", "translation"}


def test_plk_flags_parallel(scene_c, intr, gt_pose):
    res = solve_plk_calib(noiseless(scene_c), sim.perturb_initial(gt_pose, 5.0, 0.5), intr.K)
    assert res.degeneracy.degenerate
    assert res.degeneracy.ratios["translation"] < 1e-8


def test_plk_rejects_two_lines(scene_a, intr, gt_pose):
    with pytest.raises(InsufficientLines, match="at least 3 line pairs required"):
        solve_plk_calib(noiseless(scene_a)[:2], gt_pose, intr.K)


def test_back_projected_normal_parallel_to_camera_normal(scene_a, intr, gt_pose):
    for c in noiseless(scene_a):
        n_c = transform_line(gt_pose, c.line3d).n
        l = project_line(intr.K, transform_line(gt_pose, c.line3d))
        m = np.linalg.solve(intr.K, l)
        assert np.linalg.norm(np.cross(m, n_c)) < 1e-9 * np.linalg.norm(m) * np.linalg.norm(n_c)
