"""
End-to-end pipeline driver and model benchmark.

``run_pipeline`` streams the scans of one run through a map model and
records per-frame timings; ``bench_models`` replays one recorded scan log
through every variant and writes the timings as CSV together with a fitted
log-log growth rate of the update cost per variant.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import TYPE_CHECKING, NamedTuple, Sequence

import numpy as np
from sklearn.metrics import adjusted_rand_score

from .config import RunConfig, Variant
from .geometry import Point2, min_segment_distance, points_array, segment_distance_matrix
from .gpedf import DistanceResult, GpEdfModel, query_distance
from .models import MapModel, get_map_model
from .room_index import RoomIndex
from .world_sim import (
    FloorPlan,
    Pose,
    ScanFrame,
    load_floor_plan,
    load_trajectory,
    playback,
)

if TYPE_CHECKING:
    from .logger import MapLogger

CSV_COLUMNS = (
    "variant",
    "frame",
    "n_points",
    "update_ms",
    "predict_ms",
    "segmentation_ms",
    "n_rooms",
    "n_inducing",
    "n_segments",
)
SUMMARY_COLUMNS = ("variant", "n_frames", "slope", "final_update_ms")


@dataclass(frozen=True)
class FrameMetrics:
    """
    Timings and map size after one frame.

    :param frame: Frame index
    :param n_points: Scan points integrated so far
    :param update_ms: Map update time
    :param predict_ms: Time to query the fixed probe batch
    :param segmentation_ms: Room segmentation time (0 for the global variants)
    :param n_rooms: Rooms in the map
    :param n_inducing: Inducing points over all room models
    :param n_segments: Wall segments in the store
    """

    frame: int
    n_points: int
    update_ms: float
    predict_ms: float
    segmentation_ms: float
    n_rooms: int
    n_inducing: int
    n_segments: int

    def counts(self) -> tuple[int, int, int, int, int]:
        """Everything except the timings."""
        return self.frame, self.n_points, self.n_rooms, self.n_inducing, self.n_segments


@dataclass
class MapState:
    """The map at the end of a run."""

    variant: Variant
    model: MapModel
    pose: Pose | None = None


class SegmentationQuality(NamedTuple):
    k: int
    ari: float


def free_space_probes(plan: FloorPlan, n: int, seed: int, clearance: float = 0.2) -> np.ndarray:
    """
    ``n`` points drawn uniformly from the plan's bounding box, at least
    ``clearance`` away from every wall.

    :raises ValueError: If the plan leaves no room for probes
    """
    starts, ends = plan.wall_arrays
    lo = np.minimum(starts, ends).min(axis=0)
    hi = np.maximum(starts, ends).max(axis=0)
    rng = np.random.default_rng(seed)
    found: list[np.ndarray] = []
    total = 0
    for _ in range(100):
        batch = rng.uniform(lo, hi, size=(4 * n, 2))
        keep = batch[min_segment_distance(batch, starts, ends) >= clearance]
        found.append(keep)
        total += keep.shape[0]
        if total >= n:
            return np.vstack(found)[:n]
    raise ValueError(f"Could not place {n} probes {clearance} m away from the walls of {plan.name}")


def run_pipeline(
    cfg: RunConfig,
    logger: MapLogger | None = None,
    plan: FloorPlan | None = None,
    frames: Sequence[ScanFrame] | None = None,
) -> tuple[MapState, list[FrameMetrics]]:
    """
    Build a map from one run and time every frame.

    Per frame the model integrates the scan (line extraction, segmentation,
    GP updates, depending on the variant), then a fixed batch of
    ``cfg.predict_batch`` free-space probes is queried. Timings use a
    monotonic clock; the first frame is a warm-up and gets no metrics row.

    :param cfg: Run configuration
    :type cfg: RunConfig
    :param logger: Optional logger
    :type logger: MapLogger | None, optional
    :param plan: Floor plan, read from ``cfg.plan_path`` when omitted
    :type plan: FloorPlan | None, optional
    :param frames: Recorded scans, simulated along ``cfg.trajectory_path`` when omitted
    :type frames: Sequence[ScanFrame] | None, optional
    :return: Final map and one metrics row per frame after the first
    :rtype: tuple[MapState, list[FrameMetrics]]
    :raises FileNotFoundError: If a referenced file is missing
    :raises ValueError: On malformed inputs
    """
    if plan is None or frames is None:
        cfg.validate_paths()
    plan = plan if plan is not None else load_floor_plan(cfg.plan_path)
    if frames is None:
        frames = list(playback(plan, load_trajectory(cfg.trajectory_path), cfg.scan))

    model = get_map_model(cfg.variant, cfg, logger)
    probes = free_space_probes(plan, cfg.predict_batch, cfg.seed)
    metrics: list[FrameMetrics] = []
    pose: Pose | None = None
    for i, frame in enumerate(frames):
        timing = model.integrate(frame)
        start = time.perf_counter()
        model.query_batch(probes)
        predict_ms = 1000.0 * (time.perf_counter() - start)
        pose = frame.pose
        if i == 0:
            continue
        metrics.append(
            FrameMetrics(
                frame=frame.index,
                n_points=model.n_points,
                update_ms=timing.update_ms,
                predict_ms=predict_ms,
                segmentation_ms=timing.segmentation_ms,
                n_rooms=model.n_rooms,
                n_inducing=model.n_inducing,
                n_segments=model.n_segments,
            )
        )
        if logger and i % 50 == 0:
            logger.info(
                f"[{cfg.variant.value}] frame {frame.index}: {model.n_points} points, "
                f"{model.n_rooms} rooms, {model.n_inducing} inducing, "
                f"update {timing.update_ms:.1f} ms"
            )
    if logger:
        logger.info(
            f"[{cfg.variant.value}] done: {len(frames)} frames, {model.n_rooms} rooms, "
            f"{model.n_segments} segments, {model.n_inducing} inducing points"
        )
    return MapState(cfg.variant, model, pose), metrics


def segmentation_quality(state: MapState, plan: FloorPlan) -> SegmentationQuality:
    """
    Room count and adjusted Rand index of the segment labelling.

    Every prior line of every room model is matched to the ground-truth wall
    closest to its midpoint; lines matched to unlabelled walls (door jambs)
    are skipped.

    :param state: Final map
    :type state: MapState
    :param plan: Labelled floor plan
    :type plan: FloorPlan
    :return: Number of rooms and the ARI
    :rtype: SegmentationQuality
    :raises ValueError: If the plan has no room labels or the map has no segments
    """
    if not plan.has_labels or plan.room_labels is None:
        raise ValueError(f"Floor plan '{plan.name}' has no room labels to score against")
    models = state.model.room_models()
    starts, ends = plan.wall_arrays
    predicted: list[int] = []
    truth: list[int] = []
    for room, model in sorted(models.items()):
        if not model.lines:
            continue
        mids = points_array([line.midpoint for line in model.lines])
        nearest = segment_distance_matrix(mids, starts, ends).argmin(axis=1)
        for wall in nearest:
            label = plan.room_labels[int(wall)]
            if label is not None:
                predicted.append(room)
                truth.append(label)
    if not predicted:
        raise ValueError("The map has no wall segments to score")
    return SegmentationQuality(len(models), float(adjusted_rand_score(truth, predicted)))


def loglog_slope(metrics: Sequence[FrameMetrics], min_points: int = 1000) -> float:
    """
    Least-squares slope of ``log(update_ms)`` against ``log(n_points)``.

    Rows below ``min_points`` or with a zero time are ignored; NaN when fewer
    than two rows remain.
    """
    rows = [
        (m.n_points, m.update_ms)
        for m in metrics
        if m.n_points >= min_points and m.update_ms > 0.0
    ]
    if len(rows) < 2:
        return math.nan
    x = np.log([n for n, _ in rows])
    y = np.log([t for _, t in rows])
    if np.ptp(x) == 0.0:
        return math.nan
    return float(np.polyfit(x, y, 1)[0])


def segmentation_trend(metrics: Sequence[FrameMetrics]) -> tuple[float, float]:
    """
    Median segmentation time over the run and the largest time in its last 10% of frames.

    :raises ValueError: If ``metrics`` is empty
    """
    if not metrics:
        raise ValueError("segmentation_trend needs at least one frame")
    times = np.array([m.segmentation_ms for m in metrics])
    tail = times[int(math.floor(0.9 * len(times))) :]
    return float(np.median(times)), float(tail.max())


def write_metrics_csv(rows: dict[Variant, list[FrameMetrics]], path: Path | str) -> Path:
    """Write one row per (variant, frame) with the fixed benchmark columns."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for variant, metrics in rows.items():
            for m in metrics:
                writer.writerow({"variant": variant.value, **asdict(m)})
    return path


def bench_models(
    cfg: RunConfig,
    out_path: Path | str,
    variants: Sequence[Variant | str] = tuple(Variant),
    frames: Sequence[ScanFrame] | None = None,
    workers: int = 1,
    logger: MapLogger | None = None,
) -> dict[Variant, list[FrameMetrics]]:
    """
    Run every variant on the same recorded scans and write the timings.

    The main CSV holds exactly one row per (variant, frame). A sibling
    ``<stem>.summary.csv`` holds, per variant, the frame count, the log-log
    slope of update time against point count (see :func:`loglog_slope`),
    and the final frame's update time.

    :param cfg: Run configuration; its variant is ignored
    :type cfg: RunConfig
    :param out_path: CSV file to write
    :type out_path: Path | str
    :param variants: Variants to run, all three by default
    :type variants: Sequence[Variant | str], optional
    :param frames: Recorded scans, simulated once from the config when omitted
    :type frames: Sequence[ScanFrame] | None, optional
    :param workers: Worker threads; the recorded scans are shared read-only
    :type workers: int, optional
    :param logger: Optional logger
    :type logger: MapLogger | None, optional
    :return: Metrics by variant
    :rtype: dict[Variant, list[FrameMetrics]]
    """
    cfg.validate_paths()
    plan = load_floor_plan(cfg.plan_path)
    if frames is None:
        frames = list(playback(plan, load_trajectory(cfg.trajectory_path), cfg.scan))
    resolved = [v if isinstance(v, Variant) else Variant(v) for v in variants]

    def _run(variant: Variant) -> list[FrameMetrics]:
        _, metrics = run_pipeline(replace(cfg, variant=variant), logger, plan, frames)
        return metrics

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = dict(zip(resolved, pool.map(_run, resolved)))
    else:
        results = {variant: _run(variant) for variant in resolved}

    out = write_metrics_csv(results, out_path)
    summary = out.with_name(f"{out.stem}.summary.csv")
    with open(summary, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        for variant, metrics in results.items():
            writer.writerow(
                {
                    "variant": variant.value,
                    "n_frames": len(metrics),
                    "slope": loglog_slope(metrics),
                    "final_update_ms": metrics[-1].update_ms if metrics else math.nan,
                }
            )
    if logger:
        logger.info(f"Wrote {out} and {summary}")
    return results


def save_map_snapshot(state: MapState, path: Path | str, include_cov: bool = False) -> Path:
    """
    Write every room model of a map, plus its room labelling, as JSON.

    :param state: Map to export
    :type state: MapState
    :param path: Output file
    :type path: Path | str
    :param include_cov: Also export the variational covariances
    :type include_cov: bool, optional
    :return: The written path
    :rtype: Path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rooms = state.model.rooms
    data = {
        "variant": state.variant.value,
        "rooms": rooms.to_dict() if rooms is not None else None,
        "models": [
            model.to_dict(include_cov) for _, model in sorted(state.model.room_models().items())
        ],
    }
    path.write_text(json.dumps(data, indent=2))
    return path


def load_map_snapshot(path: Path | str) -> dict[int, GpEdfModel]:
    """
    Read the room models of a map snapshot.

    A single-model snapshot (as written by ``save_model_snapshot``) is
    accepted as a one-room map.

    :raises ValueError: If the file is not valid JSON or a model is malformed
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e
    if not isinstance(data, dict):
        raise ValueError(f"{path}: snapshot must be a JSON object")
    entries = data["models"] if "models" in data else [data]
    models = [GpEdfModel.from_dict(entry) for entry in entries]
    if not models:
        raise ValueError(f"{path}: snapshot holds no models")
    return {model.room_id: model for model in models}


def query_map(
    models: dict[int, GpEdfModel], x: Point2, reversion: str | None = None
) -> tuple[int, DistanceResult]:
    """
    Distance at ``x`` from the model of the room containing it.

    :return: The room queried and its answer
    :rtype: tuple[int, DistanceResult]
    """
    with_lines = {room: model.lines for room, model in models.items() if model.lines}
    if len(models) == 1 or not with_lines:
        room = min(models)
    else:
        room = RoomIndex(with_lines).locate(x)
    return room, query_distance(models[room], x, reversion)
