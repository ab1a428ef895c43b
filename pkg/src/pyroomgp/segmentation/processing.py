"""
Wall segments to the directed segment graph.

The merged segment set is copied into a :class:`SegmentGraph` and three rules
are applied until none of them fires any more: close corners are joined,
segments are split where another segment ends against them, and segments are
split where a doorway-sized gap faces them. Linked endpoints always share the
same coordinates.
"""

from __future__ import annotations

import math
from collections import defaultdict
from typing import TYPE_CHECKING, Iterable, Iterator

import numpy as np

from ..config import SegConfig
from ..geometry import (
    ON_TOLERANCE,
    LineSegment,
    Point2,
    line_angle,
    line_intersection,
    segment_distance_matrix,
    segments_arrays,
)

if TYPE_CHECKING:
    from ..logger import MapLogger

NodeKey = tuple[int, int]
"""``(store segment id, piece index along that segment)``."""

Endpoint = tuple[int, int]
"""``(node handle, 0 for p1 / 1 for p2)``."""


class SegmentGraph:
    """
    Segments with directed corner links between their endpoints.

    Nodes are addressed by an internal handle while the graph is being
    processed; :meth:`nodes` exposes them under stable :data:`NodeKey` keys,
    numbering the pieces of each store segment from its ``p1`` end.
    """

    def __init__(self, segments: Iterable[LineSegment] = ()):
        self._segments: dict[int, LineSegment] = {}
        self._parent: dict[int, int] = {}
        self._links: dict[Endpoint, set[Endpoint]] = defaultdict(set)
        self._arcs: set[tuple[Endpoint, Endpoint]] = set()
        self._next = 0
        self.revision = 0
        for segment in segments:
            self._insert(segment, segment.id)

    def __len__(self) -> int:
        return len(self._segments)

    def _insert(self, segment: LineSegment, parent: int) -> int:
        handle = self._next
        self._next += 1
        self._segments[handle] = segment
        self._parent[handle] = parent
        return handle

    @property
    def handles(self) -> list[int]:
        return sorted(self._segments)

    def segment(self, handle: int) -> LineSegment:
        return self._segments[handle]

    def endpoint(self, ep: Endpoint) -> Point2:
        segment = self._segments[ep[0]]
        return segment.p1 if ep[1] == 0 else segment.p2

    def is_linked(self, ep: Endpoint) -> bool:
        return bool(self._links.get(ep))

    def link(self, a: Endpoint, b: Endpoint) -> None:
        """Add the directed link ``a -> b``."""
        if a == b or (a, b) in self._arcs or (b, a) in self._arcs:
            return
        self._arcs.add((a, b))
        self._links[a].add(b)
        self._links[b].add(a)
        self.revision += 1

    def move_endpoint(self, ep: Endpoint, point: Point2) -> None:
        handle, end = ep
        segment = self._segments[handle]
        if end == 0:
            self._segments[handle] = segment.with_endpoints(point, segment.p2)
        else:
            self._segments[handle] = segment.with_endpoints(segment.p1, point)
        self.revision += 1

    def split(self, handle: int, at: Point2) -> tuple[int, int]:
        """
        Replace a node by its two halves meeting at ``at``.

        Links of the old ``p1`` move to the first half, links of the old
        ``p2`` to the second. Both halves keep the normal and robot position.

        :return: Handles of the ``p1`` half and the ``p2`` half
        :rtype: tuple[int, int]
        """
        segment = self._segments.pop(handle)
        parent = self._parent.pop(handle)
        first = self._insert(segment.with_endpoints(segment.p1, at), parent)
        second = self._insert(segment.with_endpoints(at, segment.p2), parent)
        self._rehome((handle, 0), (first, 0))
        self._rehome((handle, 1), (second, 1))
        self.revision += 1
        return first, second

    def _rehome(self, old: Endpoint, new: Endpoint) -> None:
        partners = self._links.pop(old, set())
        for partner in partners:
            self._links[partner].discard(old)
            self._links[partner].add(new)
            self._links[new].add(partner)
        arcs = {arc for arc in self._arcs if old in arc}
        for a, b in arcs:
            self._arcs.discard((a, b))
            self._arcs.add((new if a == old else a, new if b == old else b))

    def _keys(self) -> dict[int, NodeKey]:
        by_parent: dict[int, list[int]] = defaultdict(list)
        for handle, parent in self._parent.items():
            by_parent[parent].append(handle)
        keys: dict[int, NodeKey] = {}
        for parent, handles in by_parent.items():
            ref = self._segments[handles[0]]
            ox, oy = ref.p1.x, ref.p1.y
            dx, dy = ref.direction
            handles.sort(
                key=lambda h: (self._segments[h].midpoint.x - ox) * dx
                + (self._segments[h].midpoint.y - oy) * dy
            )
            for rank, handle in enumerate(handles):
                keys[handle] = (parent, rank)
        return keys

    def nodes(self) -> dict[NodeKey, LineSegment]:
        """Current segments by stable key, in key order."""
        keys = self._keys()
        return {keys[h]: self._segments[h] for h in sorted(self._segments, key=keys.__getitem__)}

    def edges(self) -> list[tuple[NodeKey, NodeKey]]:
        """Directed links between distinct nodes, as key pairs."""
        keys = self._keys()
        out = {
            (keys[a[0]], keys[b[0]])
            for a, b in self._arcs
            if a[0] != b[0] and a[0] in keys and b[0] in keys
        }
        return sorted(out)

    def undirected_edges(self) -> list[tuple[NodeKey, NodeKey]]:
        return sorted({(min(a, b), max(a, b)) for a, b in self.edges()})


def _non_parallel(s1: LineSegment, s2: LineSegment, cfg: SegConfig) -> bool:
    return line_angle(s1, s2) > math.radians(cfg.parallel_angle_deg)


def _keeps_orientation(segment: LineSegment, end: int, point: Point2) -> bool:
    """Moving endpoint ``end`` to ``point`` keeps the segment non-degenerate and same-directed."""
    if end == 0:
        vx, vy = segment.p2.x - point.x, segment.p2.y - point.y
    else:
        vx, vy = point.x - segment.p1.x, point.y - segment.p1.y
    dx, dy = segment.direction
    return vx * dx + vy * dy > ON_TOLERANCE


def _corner_candidates(
    graph: SegmentGraph, cfg: SegConfig
) -> list[tuple[float, Endpoint, Endpoint]]:
    """Unlinked endpoint pairs of different nodes closer than ``corner_dist``, nearest first."""
    eps = [(h, e) for h in graph.handles for e in (0, 1) if not graph.is_linked((h, e))]
    if len(eps) < 2:
        return []
    pts = np.array([graph.endpoint(ep).as_tuple() for ep in eps])
    dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    out = []
    rows, cols = np.nonzero(np.triu(dist < cfg.corner_dist, k=1))
    for i, j in zip(rows, cols):
        if eps[i][0] != eps[j][0]:
            out.append((float(dist[i, j]), eps[i], eps[j]))
    out.sort()
    return out


def _normals_agree(si: LineSegment, sj: LineSegment, corner: Point2) -> bool:
    """Both normals point toward the corner side, or both away from it."""
    mi, mj = si.midpoint, sj.midpoint
    a = si.normal[0] * (corner.x - mj.x) + si.normal[1] * (corner.y - mj.y)
    b = sj.normal[0] * (corner.x - mi.x) + sj.normal[1] * (corner.y - mi.y)
    if abs(a) <= ON_TOLERANCE or abs(b) <= ON_TOLERANCE:
        return False
    return (a > 0.0) == (b > 0.0)


def _corner_snap(graph: SegmentGraph, a: Endpoint, b: Endpoint, cfg: SegConfig) -> Point2 | None:
    si, sj = graph.segment(a[0]), graph.segment(b[0])
    if not _non_parallel(si, sj, cfg):
        return None
    corner = line_intersection(si, sj)
    if corner is None or not _normals_agree(si, sj, corner):
        return None
    if not (_keeps_orientation(si, a[1], corner) and _keeps_orientation(sj, b[1], corner)):
        return None
    return corner


def connect_corners(graph: SegmentGraph, cfg: SegConfig) -> SegmentGraph:
    """
    Join nearby endpoints of non-parallel segments into corners.

    A pair qualifies when the two closest unlinked endpoints are less than
    ``corner_dist`` apart and both normals point toward the corner side or
    both point away from it. Both endpoints move to the intersection of the
    supporting lines and are linked. Pairs are handled nearest first and every
    endpoint takes part in at most one corner.

    :param graph: Graph to update in place
    :type graph: SegmentGraph
    :param cfg: Segmentation parameters
    :type cfg: SegConfig
    :return: The same graph
    :rtype: SegmentGraph
    """
    while True:
        applied = False
        for _, a, b in _corner_candidates(graph, cfg):
            if graph.is_linked(a) or graph.is_linked(b):
                continue
            corner = _corner_snap(graph, a, b, cfg)
            if corner is None:
                continue
            graph.move_endpoint(a, corner)
            graph.move_endpoint(b, corner)
            graph.link(a, b)
            applied = True
        if not applied:
            return graph


def _endpoint_distances(graph: SegmentGraph) -> tuple[list[int], np.ndarray]:
    """
    Distances from every endpoint to every segment.

    :return: Handles in order, and an ``(n, 2, n)`` array whose ``[j, e, i]``
        entry is the distance from endpoint ``e`` of node ``j`` to node ``i``
    """
    handles = graph.handles
    segs = [graph.segment(h) for h in handles]
    starts, ends = segments_arrays(segs)
    pts = np.stack([starts, ends], axis=1).reshape(-1, 2)
    dist = segment_distance_matrix(pts, starts, ends).reshape(len(handles), 2, len(handles))
    return handles, dist


def _split_candidates(
    graph: SegmentGraph, lo: float, hi: float, strict_hi: bool
) -> Iterator[tuple[int, int, int, float]]:
    """``(h1, h2, end, dist)`` for ordered pairs whose closest ``l2`` endpoint lies in the band."""
    if len(graph) < 2:
        return
    handles, dist = _endpoint_distances(graph)
    closest_end = np.argmin(dist, axis=1)
    closest = np.min(dist, axis=1)
    in_band = (closest >= lo) & ((closest < hi) if strict_hi else (closest <= hi))
    np.fill_diagonal(in_band, False)
    for j, i in zip(*np.nonzero(in_band)):
        yield handles[i], handles[j], int(closest_end[j, i]), float(closest[j, i])


def _split_point(l1: LineSegment, l2: LineSegment, cfg: SegConfig) -> Point2 | None:
    """Where ``l2``'s supporting line cuts ``l1``, if at least ``min_length`` from both ends."""
    if not _non_parallel(l1, l2, cfg):
        return None
    x = line_intersection(l1, l2)
    if x is None:
        return None
    dx, dy = l1.direction
    t = (x.x - l1.p1.x) * dx + (x.y - l1.p1.y) * dy
    if t < cfg.min_length or l1.length - t < cfg.min_length:
        return None
    return Point2(l1.p1.x + t * dx, l1.p1.y + t * dy)


def split_at_corner(graph: SegmentGraph, cfg: SegConfig) -> SegmentGraph:
    """
    Split a segment where another one ends close against its interior.

    ``l1`` is split when the endpoint of ``l2`` closest to it is unlinked,
    lies within ``corner_dist`` of ``l1``, and ``l2``'s supporting line cuts
    ``l1`` at least ``min_length`` from both of its ends. ``l2``'s endpoint
    is moved onto the cut and linked to both new endpoints.
    """
    changed = True
    while changed:
        changed = False
        for h1, h2, end, _ in _split_candidates(graph, 0.0, cfg.corner_dist, strict_hi=True):
            if graph.is_linked((h2, end)):
                continue
            l1, l2 = graph.segment(h1), graph.segment(h2)
            cut = _split_point(l1, l2, cfg)
            if cut is None or not _keeps_orientation(l2, end, cut):
                continue
            first, second = graph.split(h1, cut)
            graph.move_endpoint((h2, end), cut)
            graph.link((h2, end), (first, 1))
            graph.link((h2, end), (second, 0))
            changed = True
            break
    return graph


def split_at_doorway(graph: SegmentGraph, cfg: SegConfig) -> SegmentGraph:
    """
    Split a segment in front of a doorway-sized gap.

    ``l1`` is split when the endpoint of ``l2`` closest to it lies between
    ``door_min`` and ``door_max`` from ``l1`` and ``l2``'s supporting line
    cuts ``l1`` at least ``min_length`` from both of its ends. The two new
    endpoints are linked to each other.
    """
    changed = True
    while changed:
        changed = False
        for h1, h2, _, _ in _split_candidates(graph, cfg.door_min, cfg.door_max, strict_hi=False):
            cut = _split_point(graph.segment(h1), graph.segment(h2), cfg)
            if cut is None:
                continue
            first, second = graph.split(h1, cut)
            graph.link((first, 1), (second, 0))
            changed = True
            break
    return graph


def process_segments(
    segments: Iterable[LineSegment], cfg: SegConfig, logger: MapLogger | None = None
) -> SegmentGraph:
    """
    Build the segment graph and apply the three rules to a fixed point.

    :param segments: Merged wall segments (with store ids)
    :type segments: Iterable[LineSegment]
    :param cfg: Segmentation parameters
    :type cfg: SegConfig
    :param logger: Optional logger
    :type logger: MapLogger | None, optional
    :return: Processed graph
    :rtype: SegmentGraph
    """
    graph = SegmentGraph(segments)
    # every rule application adds a link or a node, so this bound is never reached in practice
    max_rounds = 4 * len(graph) + 8
    for _ in range(max_rounds):
        before = graph.revision
        connect_corners(graph, cfg)
        split_at_corner(graph, cfg)
        split_at_doorway(graph, cfg)
        if graph.revision == before:
            break
    else:
        if logger:
            logger.warn(f"Segment processing stopped after {max_rounds} rounds without settling")
    if logger:
        logger.debug(f"Segment graph: {len(graph)} nodes, {len(graph.edges())} links")
    return graph
