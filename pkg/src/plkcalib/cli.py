"""Command-line entry point: ``plkcalib {calibrate,simulate,preprocess}``.

Exit codes
----------
0  success (calibrate: solver converged)
1  calibrate: solver stopped without meeting a tolerance
2  calibrate: degenerate line configuration
3  parse, validation or argument error

Log verbosity is read from the ``PLKCALIB_LOG`` environment variable
(``DEBUG``, ``INFO``, ``WARNING``, ...).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time

from . import io as fio
from . import method1, method2, sim
from .errors import CalibrationError
from .lm import SolverConfig
from .preprocess import SegmentSet, merge_all

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_DEGENERATE = 2
EXIT_INPUT = 3

SCENARIO_NAMES = {"a": "nonparallel, non-coplanar", "b": "coplanar",
                  "c": "parallel", "d": "coplanar and parallel"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _solver_flags(p):
    g = p.add_argument_group("solver settings")
    g.add_argument("--max-iterations", "--max-iters", type=int, dest="max_iterations")
    g.add_argument("--cost-tolerance", type=float)
    g.add_argument("--step-tolerance", type=float)
    g.add_argument("--initial-lambda", type=float)
    g.add_argument("--lambda-up", type=float)
    g.add_argument("--lambda-down", type=float)
    g.add_argument("--degeneracy-threshold", type=float)


def _solver_config(args) -> SolverConfig:
    overrides = {k: getattr(args, k) for k in SolverConfig.__dataclass_fields__
                 if getattr(args, k, None) is not None}
    try:
        return SolverConfig(**overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def build_parser():
    parser = _Parser(prog="plkcalib", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("calibrate", help="estimate the LiDAR-camera extrinsic from a line file")
    p.add_argument("--input", required=True, help="calibration input JSON")
    p.add_argument("--method", choices=["method1", "plk"], default="plk")
    p.add_argument("--out", help="write the report here instead of stdout")
    _solver_flags(p)

    p = sub.add_parser("simulate", help="Monte Carlo run on a synthetic scenario")
    p.add_argument("--scenario", choices=sorted(SCENARIO_NAMES), required=True)
    p.add_argument("--method", choices=["method1", "plk"], required=True)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--sigma", type=float, default=1.0, help="pixel noise std")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lines", type=int, default=3)
    p.add_argument("--rot-offset", type=float, default=5.0, help="initial error, deg per axis")
    p.add_argument("--trans-offset", type=float, default=0.5, help="initial error, m per axis")
    p.add_argument("--resample-scene", action="store_true", help="new scene for every trial")
    p.add_argument("--out", help="CSV path; CSV goes to stdout when omitted")
    _solver_flags(p)

    p = sub.add_parser("preprocess", help="merge and filter detected 2D segments")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--merge-dist", type=float, default=5.0, help="px")
    p.add_argument("--merge-angle", type=float, default=2.0, help="deg")
    p.add_argument("--min-length", type=float, default=20.0, help="px")
    return parser


def cmd_calibrate(args) -> int:
    cfg = _solver_config(args)
    inp = fio.read_calibration_input(args.input)
    solve = method1.solve if args.method == "method1" else method2.solve_plk_calib
    t0 = time.perf_counter()
    result = solve(inp.correspondences, inp.initial_pose, inp.intrinsics.K, cfg)
    wall = time.perf_counter() - t0
    report = fio.Report.from_result(result, inp.ids, wall, inp.ground_truth)
    text = report.dumps()
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    if result.degeneracy.degenerate:
        print("degenerate configuration: " + "; ".join(result.degeneracy.reasons), file=sys.stderr)
        return EXIT_DEGENERATE
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_simulate(args) -> int:
    cfg = _solver_config(args)
    try:
        scenario = sim.Scenario(args.scenario, line_count=args.lines)
        trial_cfg = sim.TrialConfig(pixel_noise_sigma=args.sigma,
                                    init_rot_offset_deg=args.rot_offset,
                                    init_trans_offset_m=args.trans_offset,
                                    trials=args.trials, seed=args.seed,
                                    resample_scene=args.resample_scene)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    report = sim.run_monte_carlo(scenario, trial_cfg, args.method, solver_cfg=cfg)
    csv_text = report.to_csv()
    summary = report.summary()
    if args.out:
        with open(args.out, "w", newline="") as f:
            f.write(csv_text)
        print(summary)
    else:
        sys.stdout.write(csv_text)
        print(summary, file=sys.stderr)
    return EXIT_OK


def cmd_preprocess(args) -> int:
    try:
        cfg = SegmentSet((), args.merge_dist, args.merge_angle, args.min_length)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    segments = fio.read_segments(args.infile)
    out = merge_all(SegmentSet(segments, cfg.merge_dist_px, cfg.merge_angle_deg, cfg.min_length_px))
    fio.write_segments(out.segments, args.outfile)
    print(f"segments: {len(segments)} in, {len(out)} out")
    return EXIT_OK


COMMANDS = {"calibrate": cmd_calibrate, "simulate": cmd_simulate, "preprocess": cmd_preprocess}


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("PLKCALIB_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"plkcalib: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (fio.InputError, CalibrationError) as exc:
        print(f"plkcalib: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"plkcalib: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
