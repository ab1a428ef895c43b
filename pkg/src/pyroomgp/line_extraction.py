"""
Scan points to wall segments.

A scan is cut into clusters wherever consecutive returns jump by more than
``gap_threshold``; each cluster goes through recursive split-and-merge with a
total-least-squares (principal axis) line fit; accepted runs become segments
and everything else becomes residual points tagged with its cluster id. New
segments are then folded into the map's global segment store.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, NamedTuple, Sequence

import numpy as np

from .config import LineParams
from .geometry import ON_TOLERANCE, LineSegment, Point2, line_angle, segment_segment_distance
from .world_sim import Pose, ScanFrame

if TYPE_CHECKING:
    from .logger import MapLogger


@dataclass(frozen=True)
class PointCluster:
    """Consecutive scan returns of a single frame that belong to one object."""

    points: list[Point2]
    frame_pose: Pose
    cluster_id: int

    def __post_init__(self) -> None:
        if not self.points:
            raise ValueError("A PointCluster needs at least one point")

    @property
    def centroid(self) -> Point2:
        n = len(self.points)
        return Point2(sum(p.x for p in self.points) / n, sum(p.y for p in self.points) / n)


@dataclass
class ExtractionResult:
    """
    Output of split-and-merge on one cluster.

    :param segments: Accepted segments (normals toward the robot)
    :param residual_points: Points not explained by a segment, with their cluster id
    :param segment_point_counts: Number of cluster points attributed to each segment
    """

    segments: list[LineSegment] = field(default_factory=list)
    residual_points: list[tuple[Point2, int]] = field(default_factory=list)
    segment_point_counts: list[int] = field(default_factory=list)

    def extend(self, other: ExtractionResult) -> None:
        self.segments.extend(other.segments)
        self.residual_points.extend(other.residual_points)
        self.segment_point_counts.extend(other.segment_point_counts)


class OrientResult(NamedTuple):
    segment: LineSegment
    on_line: bool


class LineFit(NamedTuple):
    centroid: np.ndarray
    direction: np.ndarray
    normal: np.ndarray
    max_deviation: float
    argmax: int


def fit_line(points: np.ndarray) -> LineFit:
    """
    Total-least-squares fit of an ``(N, 2)`` point array.

    :return: Centroid, unit direction, unit normal, and the largest
        perpendicular deviation with its index
    :rtype: LineFit
    """
    centroid = points.mean(axis=0)
    centered = points - centroid
    if points.shape[0] < 2:
        return LineFit(centroid, np.array([1.0, 0.0]), np.array([0.0, 1.0]), 0.0, 0)
    # principal axis of the scatter matrix
    _, vecs = np.linalg.eigh(centered.T @ centered)
    direction = vecs[:, 1]
    normal = np.array([-direction[1], direction[0]])
    dev = np.abs(centered @ normal)
    k = int(np.argmax(dev))
    return LineFit(centroid, direction, normal, float(dev[k]), k)


def orient_normal(segment: LineSegment, robot_pos: Point2) -> OrientResult:
    """
    Point the segment normal toward ``robot_pos``.

    :return: The oriented segment, and ``on_line=True`` (segment unchanged) when
        the robot sits on the supporting line
    :rtype: OrientResult
    """
    dx, dy = segment.direction
    nx, ny = -dy, dx
    offset = nx * (robot_pos.x - segment.p1.x) + ny * (robot_pos.y - segment.p1.y)
    if abs(offset) <= ON_TOLERANCE:
        return OrientResult(segment, True)
    if offset < 0.0:
        nx, ny = -nx, -ny
    return OrientResult(
        LineSegment(segment.p1, segment.p2, (nx, ny), segment.last_robot_pos, segment.id), False
    )


def cluster_scan_points(frame: ScanFrame, params: LineParams) -> list[PointCluster]:
    """
    Group consecutive returns of a frame into clusters.

    A new cluster starts whenever two consecutive hit points are more than
    ``gap_threshold`` apart. For full 360 degree scans the last and first
    clusters are joined when the wrap-around gap is small.

    :param frame: Scan to cluster
    :type frame: ScanFrame
    :param params: Line extraction parameters
    :type params: LineParams
    :return: Clusters in beam order (small ones included)
    :rtype: list[PointCluster]
    """
    points = frame.points
    if not points:
        return []

    runs: list[list[Point2]] = [[points[0]]]
    for prev, cur in zip(points, points[1:]):
        if prev.distance_to(cur) > params.gap_threshold:
            runs.append([cur])
        else:
            runs[-1].append(cur)

    full_sweep = (
        len(frame.ranges) > 1
        and frame.ranges[0] is not None
        and frame.ranges[-1] is not None
    )
    if len(runs) > 1 and full_sweep and points[-1].distance_to(points[0]) <= params.gap_threshold:
        runs[0] = runs.pop() + runs[0]

    return [PointCluster(run, frame.pose, i) for i, run in enumerate(runs)]


def _split(
    points: np.ndarray, lo: int, hi: int, params: LineParams, out: list[tuple[int, int]]
) -> None:
    """Recursively split ``points[lo:hi]`` until every run fits a line."""
    if hi - lo < 3:
        out.append((lo, hi))
        return
    fit = fit_line(points[lo:hi])
    if fit.max_deviation <= params.split_deviation:
        out.append((lo, hi))
        return
    k = lo + fit.argmax
    # the split point closes the left run
    k = min(max(k, lo + 1), hi - 2)
    _split(points, lo, k + 1, params, out)
    _split(points, k + 1, hi, params, out)


def _merge_runs(
    points: np.ndarray, runs: list[tuple[int, int]], params: LineParams
) -> list[tuple[int, int]]:
    merged = [runs[0]]
    for lo, hi in runs[1:]:
        plo, _ = merged[-1]
        if fit_line(points[plo:hi]).max_deviation <= params.split_deviation:
            merged[-1] = (plo, hi)
        else:
            merged.append((lo, hi))
    return merged


def _segment_from_run(run: np.ndarray, pose: Pose) -> tuple[LineSegment, bool] | None:
    fit = fit_line(run)
    t = (run - fit.centroid) @ fit.direction
    a = fit.centroid + t.min() * fit.direction
    b = fit.centroid + t.max() * fit.direction
    p1, p2 = Point2(float(a[0]), float(a[1])), Point2(float(b[0]), float(b[1]))
    if p1.distance_to(p2) == 0.0:
        return None
    robot = pose.position
    base = LineSegment(p1, p2, (-float(fit.direction[1]), float(fit.direction[0])), robot)
    oriented = orient_normal(base, robot)
    return oriented.segment, oriented.on_line


def extract_segments(
    cluster: PointCluster, params: LineParams, logger: MapLogger | None = None
) -> ExtractionResult:
    """
    Split-and-merge one cluster into segments and residual points.

    Runs are split at their largest deviation from the TLS line until every
    run fits within ``split_deviation``; adjacent runs that fit together are
    merged back. A run becomes a segment when it has at least
    ``min_points_per_segment`` points and spans at least ``min_length``.

    :param cluster: Cluster to process
    :type cluster: PointCluster
    :param params: Line extraction parameters
    :type params: LineParams
    :param logger: Optional logger for normal-orientation fallbacks
    :type logger: MapLogger | None, optional
    :return: Segments and residual points; every cluster point lands in exactly one
    :rtype: ExtractionResult
    """
    pts = np.array([p.as_tuple() for p in cluster.points], dtype=float)
    runs: list[tuple[int, int]] = []
    _split(pts, 0, len(pts), params, runs)
    runs = _merge_runs(pts, runs, params)

    result = ExtractionResult()
    for lo, hi in runs:
        accepted = None
        if hi - lo >= params.min_points_per_segment:
            built = _segment_from_run(pts[lo:hi], cluster.frame_pose)
            if built is not None and built[0].length >= params.min_length:
                accepted = built
        if accepted is None:
            result.residual_points.extend((p, cluster.cluster_id) for p in cluster.points[lo:hi])
            continue
        segment, on_line = accepted
        if on_line and logger:
            logger.debug("Robot on the supporting line of a new segment; kept default normal")
        result.segments.append(segment)
        result.segment_point_counts.append(hi - lo)
    return result


def merged_fit(a: LineSegment, b: LineSegment) -> LineSegment:
    """
    TLS refit of two segments treated as uniform point densities.

    The result spans the union of both segments' projections onto the refit
    line, keeps ``a``'s id and normal side, and takes ``b``'s robot position.
    """
    segs = (a, b)
    lengths = np.array([s.length for s in segs])
    mids = np.array([s.midpoint.as_tuple() for s in segs])
    centroid = (lengths[:, None] * mids).sum(axis=0) / lengths.sum()
    scatter = np.zeros((2, 2))
    for s, length, mid in zip(segs, lengths, mids):
        d = np.array(s.p2 - s.p1)
        m = mid - centroid
        scatter += length * (np.outer(m, m) + np.outer(d, d) / 12.0)
    _, vecs = np.linalg.eigh(scatter)
    direction = vecs[:, 1]

    ends = np.array([p.as_tuple() for s in segs for p in s.endpoints])
    t = (ends - centroid) @ direction
    p1 = centroid + t.min() * direction
    p2 = centroid + t.max() * direction
    normal = np.array([-direction[1], direction[0]])
    if normal @ np.array(a.normal) < 0.0:
        normal = -normal
    return LineSegment(
        Point2(float(p1[0]), float(p1[1])),
        Point2(float(p2[0]), float(p2[1])),
        (float(normal[0]), float(normal[1])),
        b.last_robot_pos,
        a.id,
    )


def mergeable(a: LineSegment, b: LineSegment, params: LineParams) -> bool:
    """All three merge criteria plus normal agreement."""
    if a.normal[0] * b.normal[0] + a.normal[1] * b.normal[1] <= 0.0:
        return False
    if line_angle(a, b) > math.radians(params.merge_angle_deg):
        return False
    ma, mb = a.midpoint, b.midpoint
    offset = max(
        abs(b.normal[0] * (ma.x - b.p1.x) + b.normal[1] * (ma.y - b.p1.y)),
        abs(a.normal[0] * (mb.x - a.p1.x) + a.normal[1] * (mb.y - a.p1.y)),
    )
    if offset > params.merge_offset:
        return False
    return segment_segment_distance(a, b) <= params.merge_gap


class SegmentStore:
    """
    The map's global set of merged wall segments.

    Segment ids are assigned here and never reused. Mutations must be
    serialized per map.
    """

    def __init__(self, params: LineParams | None = None, logger: MapLogger | None = None):
        self.params = params or LineParams()
        self.logger = logger
        self._segments: dict[int, LineSegment] = {}
        self._next_id = 0

    def __len__(self) -> int:
        return len(self._segments)

    def __iter__(self):
        return iter(self.segments)

    @property
    def segments(self) -> list[LineSegment]:
        """Segments in id order."""
        return [self._segments[k] for k in sorted(self._segments)]

    def get(self, segment_id: int) -> LineSegment:
        return self._segments[segment_id]

    def _take_id(self) -> int:
        self._next_id += 1
        return self._next_id - 1

    def add(self, segment: LineSegment) -> LineSegment:
        """
        Fold one segment into the store.

        Any stored segment it is mergeable with is absorbed (repeatedly, since
        a refit can bridge two stored segments). The survivor keeps the oldest
        id and the robot position of ``segment``.
        """
        current = segment
        while True:
            partner = next(
                (
                    s
                    for s in self.segments
                    if s.id != current.id and mergeable(s, current, self.params)
                ),
                None,
            )
            if partner is None:
                break
            if current.id == -1 or partner.id < current.id:
                older, newer = partner, current
            else:
                older, newer = current, partner
            merged = merged_fit(older, newer).with_robot_pos(segment.last_robot_pos)
            self._segments.pop(partner.id, None)
            self._segments.pop(current.id, None)
            if self.logger:
                self.logger.debug(
                    f"Merged segment into #{merged.id} (length {merged.length:.2f} m)"
                )
            current = merged
            self._segments[current.id] = current

        if current.id == -1:
            current = current.with_id(self._take_id())
        self._segments[current.id] = current
        return current


def merge_segments(
    global_set: SegmentStore, new_segments: Sequence[LineSegment], params: LineParams | None = None
) -> SegmentStore:
    """
    Fold new segments into the global store.

    A new segment merges with a stored one iff their normals agree, their
    directions are within ``merge_angle_deg``, their lateral offset is within
    ``merge_offset``, and the gap between them is within ``merge_gap``.

    :param global_set: Store to update in place
    :type global_set: SegmentStore
    :param new_segments: Segments from the latest frame
    :type new_segments: Sequence[LineSegment]
    :param params: Overrides the store's parameters when given
    :type params: LineParams | None, optional
    :return: The same store
    :rtype: SegmentStore
    """
    if params is not None:
        global_set.params = params
    for segment in new_segments:
        global_set.add(segment)
    return global_set
