"""
Incremental room segmentation.

Rooms are kept between frames and only change when the spectral estimate
of the room count changes: a lower count re-clusters the whole graph, a
higher count tries to split a room (Fiedler test, then an edge-ratio test on
the two candidate halves), starting with the one the robot is in. Room ids
are stable; new rooms get fresh ids.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Mapping, NamedTuple, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from ..config import SegConfig
from ..geometry import LineSegment
from .processing import NodeKey, SegmentGraph, process_segments
from .spectral import fiedler_value, label_by_nearest, spectral_cluster
from .visibility import VisibilityGraph, build_visibility_graph

if TYPE_CHECKING:
    from ..logger import MapLogger


@dataclass(frozen=True)
class RoomSet:
    """
    An immutable room labelling of the segment graph.

    :param rooms: Room id to the node keys it holds; rooms are disjoint and non-empty
    :param k_old: Room count the next update compares the spectral estimate against
    :param connectivity: Pairs ``(a, b)``, ``a < b``, of adjacent rooms
    :param next_id: Smallest room id never handed out
    """

    rooms: Mapping[int, frozenset[NodeKey]] = field(default_factory=dict)
    k_old: int = 1
    connectivity: frozenset[tuple[int, int]] = frozenset()
    next_id: int = 0

    def __post_init__(self) -> None:
        seen: set[NodeKey] = set()
        for room, keys in self.rooms.items():
            if not keys:
                raise ValueError(f"Room {room} is empty")
            if seen & keys:
                raise ValueError(f"Room {room} shares segments with another room")
            seen |= keys

    @property
    def k(self) -> int:
        return len(self.rooms)

    @property
    def room_ids(self) -> list[int]:
        return sorted(self.rooms)

    def labels(self) -> dict[NodeKey, int]:
        return {key: room for room, keys in self.rooms.items() for key in keys}

    def room_of(self, key: NodeKey) -> int | None:
        for room, keys in self.rooms.items():
            if key in keys:
                return room
        return None

    def neighbors(self, room: int) -> set[int]:
        """Rooms adjacent to ``room``."""
        return {b if a == room else a for a, b in self.connectivity if room in (a, b)}

    def to_dict(self, segments: Mapping[NodeKey, LineSegment] | None = None) -> dict[str, Any]:
        """
        Room labels and connectivity as plain JSON types.

        :param segments: Node geometry to include, keyed like the rooms
        :type segments: Mapping[NodeKey, LineSegment] | None, optional
        """
        out: dict[str, Any] = {
            "k": self.k,
            "k_old": self.k_old,
            "rooms": {str(r): sorted([list(key) for key in self.rooms[r]]) for r in self.room_ids},
            "connectivity": sorted([list(pair) for pair in self.connectivity]),
        }
        if segments is not None:
            labels = self.labels()
            out["segments"] = [
                {
                    "key": list(key),
                    "room": labels.get(key),
                    "p1": list(seg.p1.as_tuple()),
                    "p2": list(seg.p2.as_tuple()),
                    "normal": list(seg.normal),
                }
                for key, seg in sorted(segments.items())
            ]
        return out


class RoomTransitions(NamedTuple):
    """Which rooms each old room's segments went to, and where each new room's came from."""

    successors: dict[int, set[int]]
    predecessors: dict[int, set[int]]

    @property
    def changed(self) -> bool:
        return any(succ != {room} for room, succ in self.successors.items()) or any(
            not pred <= {room} for room, pred in self.predecessors.items()
        )


def room_transitions(old: RoomSet, new: RoomSet) -> RoomTransitions:
    """
    Match rooms across an update through the store segments they share.

    Node keys are matched by store segment id, so a segment that was split
    into more pieces still links its old room to its new one.
    """
    old_parent: dict[int, set[int]] = defaultdict(set)
    for room, keys in old.rooms.items():
        for parent, _ in keys:
            old_parent[parent].add(room)
    successors: dict[int, set[int]] = {room: set() for room in old.rooms}
    predecessors: dict[int, set[int]] = {room: set() for room in new.rooms}
    for room, keys in new.rooms.items():
        for parent, _ in keys:
            for src in old_parent.get(parent, ()):
                successors[src].add(room)
                predecessors[room].add(src)
    return RoomTransitions(successors, predecessors)


def _majority(values: Sequence[int]) -> int:
    counts = Counter(values)
    best = max(counts.values())
    return min(v for v, c in counts.items() if c == best)


def _carry_labels(
    state: RoomSet,
    nodes: Sequence[NodeKey],
    clusters: Mapping[NodeKey, int],
    current_room: int | None,
) -> tuple[dict[NodeKey, int], int]:
    """Previous room of every node, guessed from its cluster for nodes never seen before."""
    next_id = state.next_id
    if not state.rooms:
        return {key: next_id for key in nodes}, next_id + 1

    prev = state.labels()
    by_parent: dict[int, list[int]] = defaultdict(list)
    for key, room in prev.items():
        by_parent[key[0]].append(room)

    base: dict[NodeKey, int] = {}
    for key in nodes:
        if key in prev:
            base[key] = prev[key]
        elif key[0] in by_parent:
            base[key] = _majority(by_parent[key[0]])

    fallback = current_room if current_room in state.rooms else min(state.rooms)
    members: dict[int, list[int]] = defaultdict(list)
    for key, room in base.items():
        members[clusters[key]].append(room)
    for key in nodes:
        if key not in base:
            seen = members.get(clusters[key])
            base[key] = _majority(seen) if seen else fallback
    return base, next_id


def _follow_clusters(
    base: dict[NodeKey, int], clusters: Mapping[NodeKey, int]
) -> dict[NodeKey, int]:
    """Move nodes into the room that holds a strict majority of their cluster."""
    groups: dict[int, list[NodeKey]] = defaultdict(list)
    for key in base:
        groups[clusters[key]].append(key)
    labels = dict(base)
    for keys in groups.values():
        counts = Counter(base[key] for key in keys)
        room, count = min(counts.items(), key=lambda rc: (-rc[1], rc[0]))
        if 2 * count > len(keys):
            for key in keys:
                labels[key] = room
    return labels


def _match_clusters(
    base: dict[NodeKey, int], clusters: Mapping[NodeKey, int], next_id: int, min_size: int
) -> tuple[dict[NodeKey, int], int]:
    """
    Give each cluster the old room id it overlaps most.

    Leftover clusters of at least ``min_size`` nodes get new ids; smaller ones
    keep their previous labels.
    """
    overlap = Counter((clusters[key], base[key]) for key in base)
    mapping: dict[int, int] = {}
    used: set[int] = set()
    for (cluster, room), _ in sorted(overlap.items(), key=lambda kv: (-kv[1], kv[0])):
        if cluster not in mapping and room not in used:
            mapping[cluster] = room
            used.add(room)
    sizes = Counter(clusters[key] for key in base)
    for cluster in sorted(sizes):
        if cluster not in mapping and sizes[cluster] >= min_size:
            mapping[cluster] = next_id
            next_id += 1
    return {key: mapping.get(clusters[key], base[key]) for key in base}, next_id


class SplitDecision(NamedTuple):
    room: int
    fiedler: float | None
    ratio: float | None
    accepted: bool
    halves: tuple[frozenset[NodeKey], frozenset[NodeKey]] | None


def _core(gv: VisibilityGraph, nodes: Sequence[NodeKey], min_size: int) -> list[NodeKey]:
    """Nodes of the connected components holding at least ``min_size`` segments."""
    nodes = list(nodes)
    if not nodes:
        return []
    _, component = connected_components(csr_matrix(gv.adjacency(nodes)), directed=False)
    sizes = np.bincount(component)
    return [key for key, c in zip(nodes, component) if sizes[c] >= min_size]


def evaluate_split(
    gv: VisibilityGraph, members: Sequence[NodeKey], room: int, cfg: SegConfig
) -> SplitDecision:
    """
    Decide whether one room should split in two.

    Only connected components of the room's induced subgraph (all edge kinds)
    with at least ``min_room_segments`` segments take part. Their Fiedler
    value must be below ``fiedler_threshold``. A half of the 2-clustering
    smaller than ``min_room_segments`` is peeled off and the rest clustered
    again; otherwise every left-out segment joins the half holding its nearest
    segment, and the split is accepted when the number of edges between the
    halves divided by the size of the smaller half is below
    ``edge_ratio_threshold``.
    """
    sub = gv.subgraph(members)
    min_size = cfg.min_room_segments
    core = _core(sub, sub.nodes, min_size)
    fiedler: float | None = None
    while len(core) >= 2 * min_size:
        local = sub.subgraph(core)
        fiedler = fiedler_value(local)
        if fiedler >= cfg.fiedler_threshold:
            return SplitDecision(room, fiedler, None, False, None)
        two = spectral_cluster(local, cfg, k=2)
        if two.k < 2:
            break
        halves = [
            frozenset(key for key, label in two.labels.items() if label == side) for side in (0, 1)
        ]
        small = min(halves, key=lambda half: (len(half), min(half)))
        if len(small) < min_size:
            core = _core(sub, [key for key in core if key not in small], min_size)
            continue
        labels = dict(two.labels)
        label_by_nearest(sub, labels, [key for key in sub.nodes if key not in labels])
        a = frozenset(key for key, label in labels.items() if label == 0)
        b = frozenset(key for key, label in labels.items() if label == 1)
        ratio = gv.edges_between(a, b) / min(len(a), len(b))
        return SplitDecision(room, fiedler, ratio, ratio < cfg.edge_ratio_threshold, (a, b))
    return SplitDecision(room, fiedler, None, False, None)


def _connectivity(
    gv: VisibilityGraph, labels: Mapping[NodeKey, int]
) -> frozenset[tuple[int, int]]:
    pairs = set()
    for u, v, _, _ in gv.edges():
        ru, rv = labels[u], labels[v]
        if ru != rv:
            pairs.add((min(ru, rv), max(ru, rv)))
    return frozenset(pairs)


def _group(labels: Mapping[NodeKey, int]) -> dict[int, frozenset[NodeKey]]:
    rooms: dict[int, set[NodeKey]] = defaultdict(set)
    for key, room in labels.items():
        rooms[room].add(key)
    return {room: frozenset(keys) for room, keys in sorted(rooms.items())}


def incremental_update(
    state: RoomSet,
    gv: VisibilityGraph,
    cfg: SegConfig,
    current_room: int | None = None,
    logger: MapLogger | None = None,
) -> RoomSet:
    """
    Update the room labelling for a new visibility graph.

    Nodes keep their previous room. If the spectral room count drops below
    ``state.k_old`` the whole graph is re-clustered at the lower count and
    clusters inherit the old room ids they overlap most; leftover clusters
    with fewer than ``min_room_segments`` nodes keep their old labels. If it
    rises, rooms are tested for a split (see :func:`evaluate_split`), the
    robot's current room first and then the others from largest to smallest;
    the first accepted split is applied and the larger half keeps the room
    id. When no room splits, and when the count is unchanged, nodes follow
    the room holding a strict majority of their cluster. Rooms joined by any
    edge of the graph are adjacent.

    :param state: Previous room set
    :type state: RoomSet
    :param gv: Visibility graph of the current frame
    :type gv: VisibilityGraph
    :param cfg: Segmentation parameters
    :type cfg: SegConfig
    :param current_room: Room the robot is in, if known
    :type current_room: int | None, optional
    :param logger: Optional logger
    :type logger: MapLogger | None, optional
    :return: New room set; it partitions the graph's nodes
    :rtype: RoomSet
    """
    nodes = gv.nodes
    if not nodes:
        return RoomSet({}, state.k_old, frozenset(), state.next_id)

    clusters = spectral_cluster(gv, cfg, logger=logger)
    base, next_id = _carry_labels(state, nodes, clusters.labels, current_room)
    k_rooms = len(set(base.values()))

    if clusters.k < state.k_old:
        labels, next_id = _match_clusters(base, clusters.labels, next_id, cfg.min_room_segments)
        if logger:
            logger.debug(f"Room count fell to {clusters.k} (was {state.k_old}); re-clustered")
    elif clusters.k > state.k_old:
        by_room = _group(base)
        first = current_room if current_room in by_room else _majority(list(base.values()))
        order = [first] + sorted(
            (room for room in by_room if room != first), key=lambda r: (-len(by_room[r]), r)
        )
        decision: SplitDecision | None = None
        for room in order:
            decision = evaluate_split(gv, sorted(by_room[room]), room, cfg)
            if decision.accepted:
                break
            if logger:
                logger.debug(
                    f"Split of room {room} rejected "
                    f"(fiedler {decision.fiedler}, ratio {decision.ratio})"
                )
        if decision is not None and decision.accepted and decision.halves is not None:
            keep, move = sorted(decision.halves, key=lambda h: (-len(h), min(h)))
            labels = dict(base)
            for key in move:
                labels[key] = next_id
            next_id += 1
            if logger:
                logger.debug(
                    f"Split room {decision.room} (fiedler {decision.fiedler:.3f}, "
                    f"ratio {decision.ratio:.2f}): "
                    f"{len(keep)} + {len(move)} segments"
                )
        else:
            labels = _follow_clusters(base, clusters.labels)
    else:
        labels = _follow_clusters(base, clusters.labels)

    rooms = _group(labels)
    if logger and len(rooms) != k_rooms:
        logger.debug(f"Rooms: {k_rooms} -> {len(rooms)}")
    return RoomSet(rooms, len(rooms), _connectivity(gv, labels), next_id)


@dataclass
class SegmentationResult:
    graph: SegmentGraph
    visibility: VisibilityGraph
    rooms: RoomSet
    transitions: RoomTransitions

    def segments_by_room(self) -> dict[int, list[LineSegment]]:
        return {
            room: [self.visibility.segments[key] for key in sorted(keys)]
            for room, keys in sorted(self.rooms.rooms.items())
        }


class RoomSegmenter:
    """
    Runs segment processing, the visibility graph, and the room update per frame.

    :param cfg: Segmentation parameters
    :type cfg: SegConfig | None, optional
    :param logger: Optional logger
    :type logger: MapLogger | None, optional
    """

    def __init__(self, cfg: SegConfig | None = None, logger: MapLogger | None = None):
        self.cfg = cfg or SegConfig()
        self.logger = logger
        self.state = RoomSet()
        self.last: SegmentationResult | None = None

    def update(
        self, segments: Sequence[LineSegment], current_room: int | None = None
    ) -> SegmentationResult:
        """
        Segment the current global segment set.

        :param segments: Merged wall segments with store ids
        :type segments: Sequence[LineSegment]
        :param current_room: Room the robot was located in
        :type current_room: int | None, optional
        :return: Graphs, the new room set, and how rooms changed
        :rtype: SegmentationResult
        """
        graph = process_segments(segments, self.cfg, self.logger)
        visibility = build_visibility_graph(graph, self.cfg, self.logger)
        rooms = incremental_update(self.state, visibility, self.cfg, current_room, self.logger)
        transitions = room_transitions(self.state, rooms)
        self.state = rooms
        self.last = SegmentationResult(graph, visibility, rooms, transitions)
        return self.last
