"""
Room-based model: rooms are segmented from the wall lines and each room
keeps its own GP-EDF with the room's walls as prior.

After every segmentation update the room models follow the rooms: a room that
splits hands its inducing points to the two halves, rooms that merge pool
theirs, and segments that change room take the inducing points they own with
them. Distance queries go to the single room containing the query point.
"""

from __future__ import annotations

import math
import time
from collections import defaultdict
from dataclasses import replace
from typing import TYPE_CHECKING, ClassVar, Mapping, Sequence

import numpy as np

from ..config import GpHyper, LineParams, SegConfig, Variant
from ..geometry import Point2
from ..gpedf import (
    DistanceResult,
    GpEdfModel,
    merge_models,
    partition_model,
    query_distance,
    query_distances,
    select_inducing,
    set_lines,
    split_model,
    transfer_lines,
    update_model,
)
from ..line_extraction import PointCluster, SegmentStore
from ..room_index import RoomIndex, assign_clusters, rebuild_index
from ..segmentation import RoomSegmenter, RoomTransitions
from ._base import UpdateTiming, cluster_points, observe_frame

if TYPE_CHECKING:
    from ..geometry import LineSegment
    from ..logger import MapLogger
    from ..segmentation import RoomSet
    from ..world_sim import ScanFrame


def _components(transitions: RoomTransitions) -> list[tuple[list[int], list[int]]]:
    """Connected groups of old and new rooms under the transition relation."""
    seen_new: set[int] = set()
    groups: list[tuple[list[int], list[int]]] = []
    for start in sorted(transitions.predecessors):
        if start in seen_new:
            continue
        olds: set[int] = set()
        news: set[int] = {start}
        stack = [("new", start)]
        while stack:
            side, room = stack.pop()
            if side == "new":
                for old in transitions.predecessors[room]:
                    if old not in olds:
                        olds.add(old)
                        stack.append(("old", old))
            else:
                for new in transitions.successors[room]:
                    if new not in news:
                        news.add(new)
                        stack.append(("new", new))
        seen_new |= news
        groups.append((sorted(olds), sorted(news)))
    return groups


def _refresh(
    child: GpEdfModel, previous: Sequence[LineSegment], lines: Sequence[LineSegment]
) -> GpEdfModel:
    """Set new prior lines, pruning inducing points next to lines not in ``previous``."""
    return set_lines(replace(child, lines=tuple(previous)), lines)


def _exchange(
    a: GpEdfModel, b: GpEdfModel, new_lines: Mapping[int, Sequence[LineSegment]]
) -> tuple[GpEdfModel, GpEdfModel]:
    """Two rooms that kept their ids but traded segments."""
    parents = {room: {s.id for s in lines} for room, lines in new_lines.items()}
    to_b = [s for s in a.lines if s.id in parents[b.room_id] and s.id not in parents[a.room_id]]
    a, b = transfer_lines(a, b, to_b)
    to_a = [s for s in b.lines if s.id in parents[a.room_id] and s.id not in parents[b.room_id]]
    b, a = transfer_lines(b, a, to_a)
    return a, b


def reconcile_models(
    models: Mapping[int, GpEdfModel],
    room_lines: Mapping[int, Sequence[LineSegment]],
    transitions: RoomTransitions,
    hyper: GpHyper,
    logger: MapLogger | None = None,
) -> dict[int, GpEdfModel]:
    """
    Carry room models across a segmentation update.

    Old and new rooms linked by shared store segments are handled together:

    - one old room to one new room: the prior lines are refreshed
    - one old room to two new rooms: the model is split
    - two rooms keeping their ids but trading segments: lines are transferred
    - several old rooms to one new room: the models are merged
    - anything else: the models are merged and re-partitioned
    - a new room without history starts empty with its lines as prior

    Models of old rooms whose segments all disappeared (absorbed into other
    store segments) are partitioned over the new rooms by the usual ownership
    rules and merged in, so no inducing point is lost.

    :param models: Current models by room id
    :type models: Mapping[int, GpEdfModel]
    :param room_lines: Prior lines of every new room
    :type room_lines: Mapping[int, Sequence[LineSegment]]
    :param transitions: Old-to-new room relation
    :type transitions: RoomTransitions
    :param hyper: Hyperparameters of fresh models
    :type hyper: GpHyper
    :param logger: Optional logger
    :type logger: MapLogger | None, optional
    :return: One model per new room
    :rtype: dict[int, GpEdfModel]
    """
    out: dict[int, GpEdfModel] = {}
    for olds, news in _components(transitions):
        olds = [o for o in olds if o in models]
        if not olds:
            for room in news:
                out[room] = GpEdfModel.empty(room, hyper, room_lines[room])
            continue

        if len(olds) == 1 and len(news) == 1:
            parent = models[olds[0]]
            out[news[0]] = _refresh(
                replace(parent, room_id=news[0]), parent.lines, room_lines[news[0]]
            )
        elif len(olds) == 1 and len(news) == 2:
            parent = models[olds[0]]
            r1, r2 = news
            children = split_model(parent, room_lines[r1], room_lines[r2], (r1, r2))
            for child in children:
                out[child.room_id] = _refresh(child, parent.lines, room_lines[child.room_id])
            if logger:
                logger.debug(
                    f"Room model {olds[0]} split into {r1} ({children[0].n_inducing} inducing) "
                    f"and {r2} ({children[1].n_inducing} inducing)"
                )
        elif len(olds) == 2 and olds == news:
            a, b = _exchange(models[olds[0]], models[olds[1]], room_lines)
            for child in (a, b):
                out[child.room_id] = _refresh(child, child.lines, room_lines[child.room_id])
        else:
            merged = models[olds[0]]
            for other in olds[1:]:
                merged = merge_models(merged, models[other], logger)
            if len(news) == 1:
                out[news[0]] = _refresh(
                    replace(merged, room_id=news[0]), merged.lines, room_lines[news[0]]
                )
            else:
                children = partition_model(merged, [(room, room_lines[room]) for room in news])
                for child in children:
                    out[child.room_id] = _refresh(child, merged.lines, room_lines[child.room_id])
            if logger:
                logger.debug(f"Room models {olds} merged into {news}")

    orphans = [room for room, succ in transitions.successors.items() if not succ and room in models]
    for room in orphans:
        orphan = models[room]
        if orphan.n_inducing == 0:
            continue
        if not out:
            if logger:
                logger.warn(f"Dropped {orphan.n_inducing} inducing points of vanished room {room}")
            continue
        groups = [(r, room_lines[r]) for r in sorted(out)]
        for child in partition_model(orphan, groups):
            if child.n_inducing:
                out[child.room_id] = merge_models(
                    out[child.room_id], replace(child, lines=(), n_absorbed=0), logger
                )
    return out


class RoomBasedModel:
    """
    :param hyper: GP hyperparameters
    :type hyper: GpHyper | None, optional
    :param line_params: Line extraction parameters
    :type line_params: LineParams | None, optional
    :param seg: Room segmentation parameters
    :type seg: SegConfig | None, optional
    :param max_range: Sensor range (m), bounds which rooms residual points may go to
    :type max_range: float, optional
    :param logger: Optional logger
    :type logger: MapLogger | None, optional
    """

    variant: ClassVar[Variant] = Variant.room_based

    def __init__(
        self,
        hyper: GpHyper | None = None,
        line_params: LineParams | None = None,
        seg: SegConfig | None = None,
        max_range: float = math.inf,
        logger: MapLogger | None = None,
    ):
        self.hyper = hyper or GpHyper()
        self.line_params = line_params or LineParams()
        self.max_range = max_range
        self.logger = logger
        self.store = SegmentStore(self.line_params, logger)
        self.segmenter = RoomSegmenter(seg, logger)
        self.models: dict[int, GpEdfModel] = {}
        self.index: RoomIndex | None = None
        self.current_room: int | None = None
        self._n_points = 0
        self._residual: list[np.ndarray] = []

    def locate(self, x: Point2) -> int | None:
        """Room containing ``x``, None before the first room exists."""
        if self.index is None or len(self.index) == 0:
            return None
        return self.index.locate(x)

    def integrate(self, frame: ScanFrame) -> UpdateTiming:
        start = time.perf_counter()
        obs = observe_frame(frame, self.line_params, self.logger)
        self._n_points += obs.n_points
        for segment in obs.segments:
            self.store.add(segment)
        sensor_room = self.locate(frame.pose.position)

        seg_start = time.perf_counter()
        result = self.segmenter.update(self.store.segments, sensor_room)
        seg_end = time.perf_counter()

        self.models = reconcile_models(
            self.models, result.segments_by_room(), result.transitions, self.hyper, self.logger
        )
        if result.rooms.rooms:
            self.index = rebuild_index(result.rooms, result.visibility.segments)
        else:
            self.index = None
        self.current_room = self.locate(frame.pose.position)
        self._absorb(obs.residual_clusters)
        end = time.perf_counter()

        return UpdateTiming(
            1000.0 * ((seg_start - start) + (end - seg_end)), 1000.0 * (seg_end - seg_start)
        )

    def _absorb(self, clusters: Sequence[PointCluster]) -> None:
        if not clusters:
            return
        if self.index is None:
            if self.logger:
                n = sum(len(c.points) for c in clusters)
                self.logger.debug(f"No rooms yet; skipped {n} residual points")
            return
        owners = assign_clusters(
            self.index,
            clusters,
            self.current_room,
            self.segmenter.state,
            self.max_range,
            self.logger,
        )
        by_room: dict[int, list[PointCluster]] = defaultdict(list)
        for cluster, room in zip(clusters, owners):
            by_room[room].append(cluster)
        for room, group in sorted(by_room.items()):
            pts = cluster_points(group)
            self._residual.append(pts)
            self.models[room] = update_model(select_inducing(self.models[room], pts), pts)

    def query(self, x: Point2) -> DistanceResult:
        room = self.locate(x)
        if room is None:
            return DistanceResult(self.hyper.d_cap, self.hyper.signal_var)
        return query_distance(self.models[room], x)

    def query_batch(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        out = np.full(pts.shape[0], self.hyper.d_cap)
        if self.index is None:
            return out
        by_room: dict[int, list[int]] = defaultdict(list)
        for i, (x, y) in enumerate(pts):
            by_room[self.index.locate(Point2(float(x), float(y)))].append(i)
        for room, idx in by_room.items():
            out[idx] = query_distances(self.models[room], pts[idx])[0]
        return out

    def room_models(self) -> dict[int, GpEdfModel]:
        return dict(self.models)

    def residual_points(self) -> dict[int, np.ndarray]:
        """Absorbed residual points grouped by the room that contains them now."""
        if self.index is None or not self._residual:
            return {}
        pts = np.vstack(self._residual)
        rooms = np.array([self.index.locate(Point2(float(x), float(y))) for x, y in pts])
        return {int(room): pts[rooms == room] for room in np.unique(rooms)}

    @property
    def segments(self) -> list[LineSegment]:
        return self.store.segments

    @property
    def rooms(self) -> RoomSet | None:
        return self.segmenter.state

    @property
    def n_points(self) -> int:
        return self._n_points

    @property
    def n_rooms(self) -> int:
        return len(self.models)

    @property
    def n_inducing(self) -> int:
        return sum(model.n_inducing for model in self.models.values())

    @property
    def n_segments(self) -> int:
        return len(self.store)
