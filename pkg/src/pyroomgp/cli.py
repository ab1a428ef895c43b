"""
Command-line entry point.

::

    pyroomgp grid --cols 2 --rows 2 --plan plan.json --traj traj.json
    pyroomgp simulate --plan plan.json --traj traj.json --out scan.jsonl
    pyroomgp run --config cfg.json --variant room_based --svg out.svg --metrics m.csv
    pyroomgp bench --config cfg.json --out bench.csv
    pyroomgp query --model snapshot.json --x 1.0 --y 2.0
"""

from __future__ import annotations

import argparse
from pathlib import Path
from typing import Sequence

from . import __version__
from .config import ScanParams, Variant, load_run_config
from .geometry import Point2
from .harness import (
    bench_models,
    load_map_snapshot,
    loglog_slope,
    query_map,
    run_pipeline,
    save_map_snapshot,
    write_metrics_csv,
)
from .logger import MapLogger
from .svg_export import SvgOptions, export_svg
from .world_sim import (
    grid_plan,
    load_floor_plan,
    load_scan_log,
    load_trajectory,
    loop_trajectory,
    playback,
    save_floor_plan,
    save_scan_log,
    save_trajectory,
)


def _cmd_grid(args: argparse.Namespace, logger: MapLogger) -> int:
    plan = grid_plan(args.cols, args.rows, args.room_w, args.room_h)
    poses = loop_trajectory(args.cols, args.rows, args.room_w, args.room_h, step=args.step)
    save_floor_plan(plan, args.plan)
    save_trajectory(poses, args.traj)
    logger.info(f"Wrote {plan.name} ({len(plan.walls)} walls) and {len(poses)} poses")
    return 0


def _cmd_simulate(args: argparse.Namespace, logger: MapLogger) -> int:
    plan = load_floor_plan(args.plan)
    poses = load_trajectory(args.traj)
    params = ScanParams(n_beams=args.beams, max_range=args.max_range, seed=args.seed)
    n = save_scan_log(playback(plan, poses, params), args.out)
    logger.info(f"Wrote {n} scans to {args.out}")
    return 0


def _cmd_run(args: argparse.Namespace, logger: MapLogger) -> int:
    cfg = load_run_config(args.config, args.variant)
    frames = load_scan_log(args.scans) if args.scans else None
    logger.info(f"Running {cfg.variant.value} on {cfg.plan_path.name}")
    state, metrics = run_pipeline(cfg, logger, frames=frames)

    if args.metrics:
        write_metrics_csv({cfg.variant: metrics}, args.metrics)
        logger.info(f"Metrics written to {args.metrics}")
    if args.svg:
        options = SvgOptions(contours=args.contours, grid_step=args.grid_step)
        export_svg(state, args.svg, options, logger)
        logger.info(f"SVG written to {args.svg}")
    if args.snapshot:
        save_map_snapshot(state, args.snapshot, include_cov=args.with_cov)
        logger.info(f"Snapshot written to {args.snapshot}")
    if metrics:
        last = metrics[-1]
        logger.info(
            f"{last.n_points} points, {last.n_rooms} rooms, {last.n_segments} segments, "
            f"{last.n_inducing} inducing points, last update {last.update_ms:.1f} ms"
        )
    return 0


def _cmd_bench(args: argparse.Namespace, logger: MapLogger) -> int:
    cfg = load_run_config(args.config)
    frames = load_scan_log(args.scans) if args.scans else None
    variants = args.variants or [v.value for v in Variant]
    results = bench_models(cfg, args.out, variants, frames, args.workers, logger)
    for variant, metrics in results.items():
        logger.info(f"{variant.value}: log-log slope {loglog_slope(metrics):.2f}")
    return 0


def _cmd_query(args: argparse.Namespace, logger: MapLogger) -> int:
    models = load_map_snapshot(args.model)
    room, result = query_map(models, Point2(args.x, args.y), args.reversion)
    logger.debug(f"Queried room {room} of {len(models)}")
    print(f"{result.distance:.6f} {result.variance:.6g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pyroomgp",
        description="Room segmentation and room-local GP distance fields for 2D indoor maps.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--debug", action="store_true", help="Log DEBUG messages")
    parser.add_argument("--quiet", action="store_true", help="Only log errors")
    parser.add_argument("--log-file", type=Path, help="Mirror the log to this file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("grid", help="Write a reference grid plan and its loop trajectory")
    p.add_argument("--cols", type=int, default=2)
    p.add_argument("--rows", type=int, default=2)
    p.add_argument("--room-w", type=float, default=5.0)
    p.add_argument("--room-h", type=float, default=4.0)
    p.add_argument("--step", type=float, default=0.25, help="Pose spacing (m)")
    p.add_argument("--plan", type=Path, required=True)
    p.add_argument("--traj", type=Path, required=True)
    p.set_defaults(func=_cmd_grid)

    p = sub.add_parser("simulate", help="Record lidar scans along a trajectory")
    p.add_argument("--plan", type=Path, required=True)
    p.add_argument("--traj", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="Scan log (JSON lines)")
    p.add_argument("--beams", type=int, default=360)
    p.add_argument("--max-range", type=float, default=8.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("run", help="Build a map with one model variant")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--variant", choices=[v.value for v in Variant])
    p.add_argument("--scans", type=Path, help="Replay a recorded scan log")
    p.add_argument("--svg", type=Path)
    p.add_argument("--contours", action="store_true", help="Draw distance iso-contours")
    p.add_argument("--grid-step", type=float, default=0.1)
    p.add_argument("--metrics", type=Path, help="Per-frame metrics CSV")
    p.add_argument("--snapshot", type=Path, help="Room models as JSON")
    p.add_argument("--with-cov", action="store_true", help="Include covariances in the snapshot")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("bench", help="Time every model variant on the same scans")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--scans", type=Path, help="Replay a recorded scan log")
    p.add_argument("--variants", nargs="+", choices=[v.value for v in Variant])
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("query", help="Distance and variance at a point of a saved map")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--y", type=float, required=True)
    p.add_argument("--reversion", choices=["log", "matern"])
    p.set_defaults(func=_cmd_query)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logger = MapLogger(debug=args.debug, quiet=args.quiet, output_path=args.log_file)
    if args.command in ("run", "bench"):
        logger.log_startup(args.command, __version__)
    try:
        return args.func(args, logger)
    except (OSError, ValueError) as e:
        logger.log_exception(f"pyroomgp {args.command} failed", e, exit_code=1)
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
