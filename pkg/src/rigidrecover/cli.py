"""Command-line interface.

Subcommands: ``feasibility``, ``synth``, ``recover-ortho``,
``recover-persp``, ``ambiguity``.  Human-readable tables go to stdout
(or JSON with ``--json``); diagnostics go to stderr.  Exit codes: 0 on
success, 1 when the solver legitimately finds no admissible answer, 2 on
malformed input.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import __version__
from .errors import (
    AngleMismatch,
    DegenerateImages,
    GuardExhausted,
    IllConditioned,
    InconsistentLengths,
    InvalidInstance,
    InvariantError,
    MirrorMismatch,
    NegativeRadicand,
    NoConvergence,
    NonPositiveLengths,
    NoSolution,
    OutOfArc,
    ParseError,
    SchemaError,
)
from .feasibility import ProblemInstance, dof_balance, reference_table
from .geometry import ORTHOGONAL, PERSPECTIVE
from .ortho_solver import SOLVER_SHAPES, SOLVERS
from .persp_solver import solve_five_point_two_frame, trace_ambiguity_family
from .scene_io import (
    Scene,
    body_to_dict,
    dumps_canonical,
    load_scene,
    pose_to_dict,
    save_scene,
    write_report,
)
from .synth import SynthSpec, generate

_SOLVER_FAILURES = (
    NoSolution,
    NoConvergence,
    IllConditioned,
    NonPositiveLengths,
    DegenerateImages,
    InconsistentLengths,
    GuardExhausted,
    OutOfArc,
    AngleMismatch,
    MirrorMismatch,
    NegativeRadicand,
)
_INPUT_FAILURES = (ParseError, SchemaError, InvariantError, InvalidInstance, ValueError, OSError)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rigidrecover",
        description="Structure and motion recovery from multi-frame point correspondences.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_feas = sub.add_parser("feasibility", help="degrees-of-freedom balance")
    p_feas.add_argument("--points", type=int, default=0)
    p_feas.add_argument("--lines", type=int, default=0)
    p_feas.add_argument("--frames", type=int, default=1)
    p_feas.add_argument("--projection", choices=[PERSPECTIVE, ORTHOGONAL],
                        default=PERSPECTIVE)
    p_feas.add_argument("--paper-table", action="store_true",
                        help="print the built-in reference table instead")
    p_feas.add_argument("--json", action="store_true")

    p_synth = sub.add_parser("synth", help="generate a synthetic scene file")
    p_synth.add_argument("--n-points", type=int, required=True)
    p_synth.add_argument("--n-frames", type=int, required=True)
    p_synth.add_argument("--projection", choices=[PERSPECTIVE, ORTHOGONAL],
                         required=True)
    p_synth.add_argument("--seed", type=int, default=0,
                         help="overridden by RIGID_RECOVER_SEED when set")
    p_synth.add_argument("--body-scale", type=float, default=1.0)
    p_synth.add_argument("--max-rotation", type=float, default=np.pi)
    p_synth.add_argument("--max-translation", type=float, default=1.0)
    p_synth.add_argument("--noise-sigma", type=float, default=0.0)
    p_synth.add_argument("--out", required=True)

    p_ortho = sub.add_parser("recover-ortho", help="orthogonal-projection recovery")
    p_ortho.add_argument("--config", choices=sorted(SOLVERS), required=True)
    p_ortho.add_argument("--scene", required=True)
    p_ortho.add_argument("--out")
    p_ortho.add_argument("--json", action="store_true")

    p_persp = sub.add_parser("recover-persp", help="five-point two-frame perspective recovery")
    p_persp.add_argument("--scene", required=True)
    p_persp.add_argument("--out")
    p_persp.add_argument("--json", action="store_true")

    p_amb = sub.add_parser("ambiguity", help="trace the four-point two-frame solution family")
    p_amb.add_argument("--scene", required=True)
    p_amb.add_argument("--theta-center", type=float, default=None,
                       help="grid centre; defaults to the angle implied by the scene poses")
    p_amb.add_argument("--theta-span", type=float, default=0.1)
    p_amb.add_argument("--grid-points", type=int, default=11)
    p_amb.add_argument("--out")
    p_amb.add_argument("--json", action="store_true")
    return parser


def _report_skeleton(argv: list[str], seed: int | None) -> dict:
    return {
        "schema_version": "1",
        "command": list(argv),
        "seed": seed,
        "tool_version": __version__,
    }


def _finish_report(report: dict, out: str | None, as_json: bool, t0: float) -> None:
    report["timing"] = {"seconds": time.perf_counter() - t0}
    if out:
        write_report(report, out)
    if as_json:
        print(dumps_canonical(report))


def _report_row(r) -> dict:
    return {
        "points": r.instance.points,
        "lines": r.instance.lines,
        "frames": r.instance.frames,
        "projection": r.instance.projection,
        "dof": r.dof,
        "info": r.info,
        "margin": r.margin,
        "verdict": r.verdict,
    }


def _cmd_feasibility(args, argv) -> int:
    if args.paper_table:
        reports = reference_table()
    else:
        reports = [
            dof_balance(
                ProblemInstance(args.points, args.lines, args.frames, args.projection)
            )
        ]
    if args.json:
        print(dumps_canonical({"rows": [_report_row(r) for r in reports]}))
        return 0
    header = f"{'points':>6} {'lines':>6} {'frames':>6} {'projection':>12} {'dof':>5} {'info':>5} {'margin':>7}  verdict"
    print(header)
    for r in reports:
        i = r.instance
        print(
            f"{i.points:>6} {i.lines:>6} {i.frames:>6} {i.projection:>12} "
            f"{r.dof:>5} {r.info:>5} {r.margin:>7}  {r.verdict}"
        )
    return 0


def _cmd_synth(args, argv) -> int:
    seed = args.seed
    env_seed = os.environ.get("RIGID_RECOVER_SEED")
    if env_seed is not None:
        seed = int(env_seed)
    spec = SynthSpec(
        n_points=args.n_points,
        n_frames=args.n_frames,
        projection=args.projection,
        seed=seed,
        body_scale=args.body_scale,
        motion_magnitude=(args.max_rotation, args.max_translation),
        noise_sigma=args.noise_sigma,
    )
    body, poses, obs = generate(spec)
    save_scene(Scene(args.projection, body, tuple(poses), tuple(obs)), args.out)
    print(f"wrote {args.projection} scene with {args.n_points} points, "
          f"{args.n_frames} frames (seed {seed}) to {args.out}")
    return 0


def _lengths_to_dict(lengths) -> dict:
    return {f"{p}-{q}": v for (p, q), v in lengths.values.items()}


def _cmd_recover_ortho(args, argv) -> int:
    t0 = time.perf_counter()
    scene = load_scene(args.scene)
    n_points, n_frames = SOLVER_SHAPES[args.config]
    if scene.projection != ORTHOGONAL:
        raise InvariantError("recover-ortho needs an orthogonal scene")
    if len(scene.observations) < n_frames or len(scene.body.labels) != n_points:
        raise InvariantError(
            f"config {args.config} needs {n_points} points over {n_frames} frames"
        )
    report = _report_skeleton(argv, None)
    result: dict = {"config": args.config}
    report["results"] = result
    code = 0
    try:
        solutions = SOLVERS[args.config](list(scene.observations[:n_frames]))
    except _SOLVER_FAILURES as exc:
        result["error"] = {"type": type(exc).__name__, "message": str(exc)}
        print(f"recover-ortho {args.config}: {type(exc).__name__}: {exc}", file=sys.stderr)
        code = 1
    else:
        result["solutions"] = [
            {
                "lengths": _lengths_to_dict(s.lengths),
                "structures": [body_to_dict(st) for st in s.structures],
                "motions": [pose_to_dict(p) for p in s.motions],
                "mirror": s.mirror_flag,
                "residual": s.residual,
            }
            for s in solutions
        ]
        if not args.json:
            print(f"{args.config}: {len(solutions)} solution(s)")
            for k, s in enumerate(solutions):
                pretty = ", ".join(
                    f"{p}-{q}={np.sqrt(v):.6f}" for (p, q), v in sorted(s.lengths.values.items())
                )
                print(f"  [{k}] residual={s.residual:.3e} lengths: {pretty}")
    _finish_report(report, args.out, args.json, t0)
    return code


def _cmd_recover_persp(args, argv) -> int:
    t0 = time.perf_counter()
    scene = load_scene(args.scene)
    if scene.projection != PERSPECTIVE:
        raise InvariantError("recover-persp needs a perspective scene")
    if len(scene.body.labels) != 5 or len(scene.observations) < 2:
        raise InvariantError("recover-persp needs 5 points over 2 frames")
    report = _report_skeleton(argv, None)
    result: dict = {}
    report["results"] = result
    code = 0
    try:
        solutions = solve_five_point_two_frame(list(scene.observations[:2]))
    except _SOLVER_FAILURES as exc:
        result["error"] = {"type": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, NoConvergence):
            result["error"]["best_residual"] = exc.best_residual
        print(f"recover-persp: {type(exc).__name__}: {exc}", file=sys.stderr)
        code = 1
    else:
        result["solutions"] = [
            {
                "body": body_to_dict(s.body),
                "poses": [pose_to_dict(p) for p in s.poses],
                "theta1": s.vars.theta1,
                "theta2": s.vars.theta2,
                "phi2": s.vars.phi2,
                "residual": s.residual,
                "frame2_mirrored": s.frame2_mirrored,
                "degenerate": s.degenerate,
            }
            for s in solutions
        ]
        if not args.json:
            print(f"recover-persp: {len(solutions)} solution(s)")
            for k, s in enumerate(solutions):
                print(
                    f"  [{k}] theta1={s.vars.theta1:.6f} residual={s.residual:.3e}"
                    f"{' (mirrored frame 2)' if s.frame2_mirrored else ''}"
                )
    _finish_report(report, args.out, args.json, t0)
    return code


def _gt_theta1(scene: Scene) -> float:
    labels = sorted(scene.body.labels)
    a = scene.body.point(labels[0])
    b = scene.body.point(labels[1])
    f1 = scene.poses[0].translation
    u = a - b
    v = f1 - b
    cosang = (u @ v) / (np.linalg.norm(u) * np.linalg.norm(v))
    return float(np.arccos(np.clip(cosang, -1.0, 1.0)))


def _cmd_ambiguity(args, argv) -> int:
    t0 = time.perf_counter()
    scene = load_scene(args.scene)
    if scene.projection != PERSPECTIVE:
        raise InvariantError("ambiguity needs a perspective scene")
    if len(scene.body.labels) != 4 or len(scene.observations) < 2:
        raise InvariantError("ambiguity needs 4 points over 2 frames")
    if args.grid_points < 1:
        raise InvariantError("need at least one grid point")
    center = args.theta_center if args.theta_center is not None else _gt_theta1(scene)
    if args.grid_points == 1:
        grid = [center]
    else:
        grid = list(np.linspace(center - args.theta_span / 2,
                                center + args.theta_span / 2, args.grid_points))
    report = _report_skeleton(argv, None)
    family = trace_ambiguity_family(list(scene.observations[:2]), grid)
    spread = family.max_pairwise_shape_distance() if len(family.samples) > 1 else 0.0
    report["results"] = {
        "grid": list(family.grid),
        "break_index": family.break_index,
        "max_pairwise_shape_distance": spread,
        "samples": [
            {
                "theta1": s.theta1,
                "body": body_to_dict(s.body),
                "residual": s.residual,
            }
            for s in family.samples
        ],
    }
    if not args.json:
        print(
            f"ambiguity: {len(family.samples)} of {len(grid)} grid points solved; "
            f"max pairwise shape distance {spread:.3e}"
        )
        for s in family.samples:
            print(f"  theta1={s.theta1:.6f} residual={s.residual:.3e}")
        if family.break_index is not None:
            print(f"  chain broke at grid index {family.break_index}", file=sys.stderr)
    _finish_report(report, args.out, args.json, t0)
    return 0 if family.samples else 1


_COMMANDS = {
    "feasibility": _cmd_feasibility,
    "synth": _cmd_synth,
    "recover-ortho": _cmd_recover_ortho,
    "recover-persp": _cmd_recover_persp,
    "ambiguity": _cmd_ambiguity,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args, argv)
    except _INPUT_FAILURES as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _SOLVER_FAILURES as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
