"""
Exact 2D primitives shared by every other module.

Points, wall segments with an inward normal, axis-aligned boxes, and the
distance / intersection / half-plane tests built on them. Scalar helpers work on
the frozen value types; the ``*_matrix`` helpers are vectorised with numpy for
the GP distance queries, which evaluate many points against many segments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, NamedTuple, Sequence

import numpy as np

ON_TOLERANCE = 1e-9
"""Distance (m) under which a point counts as lying on a line."""

_PARALLEL_EPS = 1e-12


@dataclass(frozen=True, slots=True)
class Point2:
    """A position in the world frame, in meters."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"Point2 coordinates must be finite (got x={self.x}, y={self.y})")

    def __sub__(self, other: Point2) -> tuple[float, float]:
        return (self.x - other.x, self.y - other.y)

    def distance_to(self, other: Point2) -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


class Side(str, Enum):
    positive = "positive"
    negative = "negative"
    on = "on"


@dataclass(frozen=True, slots=True)
class LineSegment:
    """
    A wall segment with a unit normal pointing into the room it bounds.

    Any positive length is accepted. The minimum segment length belongs to
    the code that produces segments: line extraction drops shorter runs and
    the corner and doorway rules never cut a piece shorter than it.

    :param p1: First endpoint
    :type p1: Point2
    :param p2: Second endpoint
    :type p2: Point2
    :param normal: Unit vector perpendicular to ``p2 - p1``
    :type normal: tuple[float, float]
    :param last_robot_pos: Most recent robot position the segment was observed from
    :type last_robot_pos: Point2
    :param id: Stable identifier, -1 until a segment store assigns one
    :type id: int, optional
    """

    p1: Point2
    p2: Point2
    normal: tuple[float, float]
    last_robot_pos: Point2
    id: int = field(default=-1)

    def __post_init__(self) -> None:
        nx, ny = self.normal
        if abs(math.hypot(nx, ny) - 1.0) > 1e-9:
            raise ValueError(f"Segment normal must be a unit vector (got {self.normal})")
        dx, dy = self.p2 - self.p1
        length = math.hypot(dx, dy)
        if length > 0.0 and abs(nx * dx + ny * dy) > 1e-9 * max(1.0, length):
            raise ValueError(
                f"Segment normal {self.normal} is not perpendicular to its direction ({dx}, {dy})"
            )

    @classmethod
    def from_endpoints(
        cls, p1: Point2, p2: Point2, toward: Point2, id: int = -1
    ) -> LineSegment:
        """
        Build a segment whose normal points at ``toward``.

        ``toward`` is also recorded as the observing robot position. When
        ``toward`` lies on the supporting line the left-hand normal is used.

        :raises ValueError: If the endpoints coincide
        """
        dx, dy = p2 - p1
        length = math.hypot(dx, dy)
        if length == 0.0:
            raise ValueError(f"Cannot build a segment from coincident endpoints {p1}")
        nx, ny = -dy / length, dx / length
        if nx * (toward.x - p1.x) + ny * (toward.y - p1.y) < 0.0:
            nx, ny = -nx, -ny
        return cls(p1, p2, (nx, ny), toward, id)

    @property
    def length(self) -> float:
        return self.p1.distance_to(self.p2)

    @property
    def direction(self) -> tuple[float, float]:
        """Unit vector from ``p1`` to ``p2``."""
        dx, dy = self.p2 - self.p1
        length = math.hypot(dx, dy)
        if length == 0.0:
            raise ValueError(f"Segment {self.id} is degenerate (zero length)")
        return (dx / length, dy / length)

    @property
    def midpoint(self) -> Point2:
        return Point2(0.5 * (self.p1.x + self.p2.x), 0.5 * (self.p1.y + self.p2.y))

    @property
    def endpoints(self) -> tuple[Point2, Point2]:
        return (self.p1, self.p2)

    def with_endpoints(self, p1: Point2, p2: Point2) -> LineSegment:
        """Copy with new endpoints on the same supporting line (normal kept)."""
        return replace(self, p1=p1, p2=p2)

    def with_id(self, id: int) -> LineSegment:
        return replace(self, id=id)

    def with_robot_pos(self, pos: Point2) -> LineSegment:
        return replace(self, last_robot_pos=pos)


@dataclass(frozen=True, slots=True)
class Aabb:
    """Axis-aligned bounding box."""

    min: Point2
    max: Point2

    def __post_init__(self) -> None:
        if self.min.x > self.max.x or self.min.y > self.max.y:
            raise ValueError(f"Aabb min {self.min} must not exceed max {self.max}")

    def contains(self, p: Point2, tol: float = 0.0) -> bool:
        return (
            self.min.x - tol <= p.x <= self.max.x + tol
            and self.min.y - tol <= p.y <= self.max.y + tol
        )

    def distance_to(self, p: Point2) -> float:
        """Euclidean distance from ``p`` to the box (0 inside)."""
        dx = max(self.min.x - p.x, 0.0, p.x - self.max.x)
        dy = max(self.min.y - p.y, 0.0, p.y - self.max.y)
        return math.hypot(dx, dy)

    def intersects_disc(self, center: Point2, radius: float) -> bool:
        return self.distance_to(center) <= radius

    def as_bounds(self) -> tuple[float, float, float, float]:
        """``(minx, miny, maxx, maxy)``, the interleaved order rtree expects."""
        return (self.min.x, self.min.y, self.max.x, self.max.y)


class Intersection(NamedTuple):
    point: Point2 | None
    collinear: bool


def _cross(ax: float, ay: float, bx: float, by: float) -> float:
    return ax * by - ay * bx


def closest_point_on_segment(p: Point2, s: LineSegment) -> Point2:
    """
    Closest point to ``p`` on the closed segment ``s``.

    :raises ValueError: If ``s`` has zero length
    """
    dx, dy = s.p2 - s.p1
    length_sq = dx * dx + dy * dy
    if length_sq == 0.0:
        raise ValueError(f"Segment {s.id} is degenerate (zero length)")
    t = ((p.x - s.p1.x) * dx + (p.y - s.p1.y) * dy) / length_sq
    t = min(1.0, max(0.0, t))
    return Point2(s.p1.x + t * dx, s.p1.y + t * dy)


def segment_point_distance(p: Point2, s: LineSegment) -> float:
    """
    Minimum Euclidean distance from ``p`` to the closed segment ``s``.

    :param p: Query point
    :type p: Point2
    :param s: Segment
    :type s: LineSegment
    :return: Distance in meters
    :rtype: float
    :raises ValueError: If ``s`` has zero length
    """
    return p.distance_to(closest_point_on_segment(p, s))


def segment_intersection(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> Intersection:
    """
    Intersection of the closed segments ``p1p2`` and ``q1q2``.

    Collinear pairs never intersect; they report ``collinear=True`` whether or
    not they overlap.
    """
    rx, ry = p2 - p1
    sx, sy = q2 - q1
    qpx, qpy = q1 - p1
    r_len = math.hypot(rx, ry)
    s_len = math.hypot(sx, sy)
    denom = _cross(rx, ry, sx, sy)

    if abs(denom) <= _PARALLEL_EPS * max(r_len * s_len, 1.0):
        offset = abs(_cross(qpx, qpy, rx, ry)) / r_len if r_len > 0.0 else math.hypot(qpx, qpy)
        return Intersection(None, offset <= ON_TOLERANCE)

    t = _cross(qpx, qpy, sx, sy) / denom
    u = _cross(qpx, qpy, rx, ry) / denom
    tol_t = ON_TOLERANCE / r_len if r_len > 0.0 else 0.0
    tol_u = ON_TOLERANCE / s_len if s_len > 0.0 else 0.0
    if -tol_t <= t <= 1.0 + tol_t and -tol_u <= u <= 1.0 + tol_u:
        return Intersection(Point2(p1.x + t * rx, p1.y + t * ry), False)
    return Intersection(None, False)


def segments_intersect(s1: LineSegment, s2: LineSegment) -> Intersection:
    """
    Intersection point of two segments, if their closed extents cross.

    :return: ``Intersection(point, collinear)``; ``point`` is None for parallel,
        collinear, or non-crossing pairs
    :rtype: Intersection
    """
    return segment_intersection(s1.p1, s1.p2, s2.p1, s2.p2)


def line_intersection(s1: LineSegment, s2: LineSegment) -> Point2 | None:
    """Intersection of the two supporting (infinite) lines, None when parallel."""
    rx, ry = s1.p2 - s1.p1
    sx, sy = s2.p2 - s2.p1
    denom = _cross(rx, ry, sx, sy)
    if abs(denom) <= _PARALLEL_EPS * max(math.hypot(rx, ry) * math.hypot(sx, sy), 1.0):
        return None
    qpx, qpy = s2.p1 - s1.p1
    t = _cross(qpx, qpy, sx, sy) / denom
    return Point2(s1.p1.x + t * rx, s1.p1.y + t * ry)


def signed_offset(p: Point2, s: LineSegment) -> float:
    """``normal · (p - p1)``: signed distance of ``p`` from the supporting line."""
    return s.normal[0] * (p.x - s.p1.x) + s.normal[1] * (p.y - s.p1.y)


def half_plane_side(p: Point2, s: LineSegment) -> Side:
    """
    Side of ``s``'s supporting line that ``p`` lies on, relative to its normal.

    :return: ``Side.on`` within 1e-9 m of the line
    :rtype: Side
    """
    offset = signed_offset(p, s)
    if abs(offset) <= ON_TOLERANCE:
        return Side.on
    return Side.positive if offset > 0.0 else Side.negative


def bounding_box(segments: Iterable[LineSegment]) -> Aabb:
    """
    Smallest box covering all segment endpoints.

    :raises ValueError: If ``segments`` is empty
    """
    xs: list[float] = []
    ys: list[float] = []
    for s in segments:
        xs.extend((s.p1.x, s.p2.x))
        ys.extend((s.p1.y, s.p2.y))
    if not xs:
        raise ValueError("bounding_box requires at least one segment")
    return Aabb(Point2(min(xs), min(ys)), Point2(max(xs), max(ys)))


def line_angle(s1: LineSegment, s2: LineSegment) -> float:
    """Angle between the undirected supporting lines, in [0, pi/2]."""
    d1 = s1.direction
    d2 = s2.direction
    cos = min(1.0, abs(d1[0] * d2[0] + d1[1] * d2[1]))
    return math.acos(cos)


def segment_segment_distance(s1: LineSegment, s2: LineSegment) -> float:
    """Shortest distance between two closed segments (0 when they cross)."""
    if segments_intersect(s1, s2).point is not None:
        return 0.0
    return min(
        segment_point_distance(s1.p1, s2),
        segment_point_distance(s1.p2, s2),
        segment_point_distance(s2.p1, s1),
        segment_point_distance(s2.p2, s1),
    )


def points_array(points: Sequence[Point2]) -> np.ndarray:
    """Stack points into an ``(N, 2)`` float array."""
    if not points:
        return np.zeros((0, 2))
    return np.array([(p.x, p.y) for p in points], dtype=float)


def segments_arrays(segments: Sequence[LineSegment]) -> tuple[np.ndarray, np.ndarray]:
    """Endpoint arrays ``(starts, ends)``, each ``(M, 2)``."""
    if not segments:
        return np.zeros((0, 2)), np.zeros((0, 2))
    starts = np.array([(s.p1.x, s.p1.y) for s in segments], dtype=float)
    ends = np.array([(s.p2.x, s.p2.y) for s in segments], dtype=float)
    return starts, ends


def segment_distance_matrix(
    points: np.ndarray, starts: np.ndarray, ends: np.ndarray
) -> np.ndarray:
    """
    Distances from every point to every segment.

    :param points: ``(N, 2)`` query points
    :type points: np.ndarray
    :param starts: ``(M, 2)`` first endpoints
    :type starts: np.ndarray
    :param ends: ``(M, 2)`` second endpoints
    :type ends: np.ndarray
    :return: ``(N, M)`` distance matrix
    :rtype: np.ndarray
    :raises ValueError: If any segment has zero length
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    d = ends - starts
    length_sq = np.einsum("ij,ij->i", d, d)
    if np.any(length_sq == 0.0):
        raise ValueError("segment_distance_matrix received a degenerate (zero length) segment")
    rel = points[:, None, :] - starts[None, :, :]
    t = np.clip(np.einsum("nmk,mk->nm", rel, d) / length_sq[None, :], 0.0, 1.0)
    foot = starts[None, :, :] + t[:, :, None] * d[None, :, :]
    return np.linalg.norm(points[:, None, :] - foot, axis=2)


def min_segment_distance(
    points: np.ndarray, starts: np.ndarray, ends: np.ndarray, chunk: int = 4096
) -> np.ndarray:
    """
    Distance from each point to its nearest segment, ``inf`` with no segments.

    Evaluated in chunks of ``chunk`` points to bound memory.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.full(points.shape[0], np.inf)
    if starts.shape[0] == 0:
        return out
    for lo in range(0, points.shape[0], chunk):
        out[lo : lo + chunk] = segment_distance_matrix(points[lo : lo + chunk], starts, ends).min(
            axis=1
        )
    return out


def crossing_matrix(
    p: np.ndarray, q: np.ndarray, starts: np.ndarray, ends: np.ndarray, closed: bool = False
) -> np.ndarray:
    """
    Which of the paths ``p[b] -> q[b]`` cross which segments ``starts[a] -> ends[a]``.

    A path is crossed when the intersection lies strictly inside it (its own
    endpoints do not count unless ``closed``) and anywhere on the closed
    segment. Parallel and collinear pairs never cross.

    :return: ``(B, A)`` boolean matrix
    :rtype: np.ndarray
    """
    p = np.atleast_2d(np.asarray(p, dtype=float))
    q = np.atleast_2d(np.asarray(q, dtype=float))
    r = q - p
    s = ends - starts
    denom = r[:, None, 0] * s[None, :, 1] - r[:, None, 1] * s[None, :, 0]
    qp = starts[None, :, :] - p[:, None, :]
    parallel = np.abs(denom) <= _PARALLEL_EPS
    safe = np.where(parallel, 1.0, denom)
    t = (qp[..., 0] * s[None, :, 1] - qp[..., 1] * s[None, :, 0]) / safe
    u = (qp[..., 0] * r[:, None, 1] - qp[..., 1] * r[:, None, 0]) / safe
    r_len = np.linalg.norm(r, axis=1)[:, None]
    eps_t = ON_TOLERANCE / np.maximum(r_len, ON_TOLERANCE)
    if closed:
        on_path = (t >= -eps_t) & (t <= 1.0 + eps_t)
    else:
        on_path = (t > eps_t) & (t < 1.0 - eps_t)
    return ~parallel & on_path & (u >= 0.0) & (u <= 1.0)


def pairwise_segment_distances(starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """
    Closed segment-to-segment distances of one segment set, ``(M, M)``.

    :raises ValueError: If any segment has zero length
    """
    m = starts.shape[0]
    if m == 0:
        return np.zeros((0, 0))
    ep = segment_distance_matrix(np.vstack([starts, ends]), starts, ends)
    # ep[k, j]: endpoint k (starts then ends) to segment j
    from_i = np.minimum(ep[:m], ep[m:])
    dist = np.minimum(from_i, from_i.T)
    dist[crossing_matrix(starts, ends, starts, ends, closed=True)] = 0.0
    np.fill_diagonal(dist, 0.0)
    return dist
