"""
The undirected weighted visibility graph over processed wall segments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Iterator

import numpy as np

from ..config import SegConfig
from ..geometry import (
    ON_TOLERANCE,
    LineSegment,
    crossing_matrix,
    pairwise_segment_distances,
    segment_segment_distance,
    segments_arrays,
)
from .processing import NodeKey, SegmentGraph

if TYPE_CHECKING:
    from ..logger import MapLogger


class EdgeKind(str, Enum):
    neighbor = "neighbor"
    passage = "passage"
    visibility = "visibility"


@dataclass
class VisibilityGraph:
    """
    Segments as nodes, joined by neighbor, passage, and visibility edges.

    Edges are stored once under the ordered key pair; weights lie in (0, 1].
    """

    segments: dict[NodeKey, LineSegment] = field(default_factory=dict)
    _edges: dict[tuple[NodeKey, NodeKey], tuple[float, EdgeKind]] = field(default_factory=dict)
    _adj: dict[NodeKey, set[NodeKey]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for key in self.segments:
            self._adj.setdefault(key, set())

    @property
    def nodes(self) -> list[NodeKey]:
        return sorted(self.segments)

    def __len__(self) -> int:
        return len(self.segments)

    def add_edge(self, a: NodeKey, b: NodeKey, weight: float, kind: EdgeKind) -> None:
        """
        Add an undirected edge; an existing edge is kept.

        :raises ValueError: For self-edges, unknown nodes, or weights outside (0, 1]
        """
        if a == b:
            raise ValueError(f"Self-edge on node {a} is not allowed")
        if a not in self.segments or b not in self.segments:
            raise ValueError(f"Edge ({a}, {b}) references a node not in the graph")
        if not 0.0 < weight <= 1.0:
            raise ValueError(f"Edge weight must be in (0, 1] (got {weight})")
        pair = (a, b) if a < b else (b, a)
        if pair in self._edges:
            return
        self._edges[pair] = (weight, kind)
        self._adj[a].add(b)
        self._adj[b].add(a)

    def has_edge(self, a: NodeKey, b: NodeKey) -> bool:
        return ((a, b) if a < b else (b, a)) in self._edges

    def weight(self, a: NodeKey, b: NodeKey) -> float:
        """Edge weight, 0 when the nodes are not joined."""
        entry = self._edges.get((a, b) if a < b else (b, a))
        return entry[0] if entry else 0.0

    def kind(self, a: NodeKey, b: NodeKey) -> EdgeKind | None:
        entry = self._edges.get((a, b) if a < b else (b, a))
        return entry[1] if entry else None

    def edges(self) -> Iterator[tuple[NodeKey, NodeKey, float, EdgeKind]]:
        for (a, b), (w, kind) in sorted(self._edges.items()):
            yield a, b, w, kind

    def neighbors(self, key: NodeKey) -> set[NodeKey]:
        return set(self._adj.get(key, ()))

    def degree(self, key: NodeKey) -> float:
        """Weighted degree."""
        return sum(self.weight(key, other) for other in self._adj.get(key, ()))

    def adjacency(self, nodes: list[NodeKey] | None = None) -> np.ndarray:
        """Symmetric weight matrix over ``nodes`` (all nodes in key order by default)."""
        nodes = self.nodes if nodes is None else nodes
        index = {key: i for i, key in enumerate(nodes)}
        a = np.zeros((len(nodes), len(nodes)))
        for (u, v), (w, _) in self._edges.items():
            if u in index and v in index:
                a[index[u], index[v]] = a[index[v], index[u]] = w
        return a

    def subgraph(self, nodes: Iterable[NodeKey]) -> VisibilityGraph:
        """Induced subgraph, keeping every edge kind."""
        keep = {key: self.segments[key] for key in nodes}
        sub = VisibilityGraph(keep)
        for (u, v), (w, kind) in self._edges.items():
            if u in keep and v in keep:
                sub.add_edge(u, v, w, kind)
        return sub

    def edges_between(self, group_a: Iterable[NodeKey], group_b: Iterable[NodeKey]) -> int:
        """Number of edges (any kind) with one end in each group."""
        a, b = set(group_a), set(group_b)
        return sum(1 for u, v in self._edges if (u in a and v in b) or (u in b and v in a))


def edge_weight(l_i: LineSegment, l_j: LineSegment, cfg: SegConfig, max_len: float) -> float:
    """
    Weight of a visibility edge.

    Product of a Gaussian factor on the segment distance, an exponential
    factor on the distance between the robot positions the two segments were
    last seen from, and the mean length of the pair relative to the longest
    segment in the graph.

    :param l_i: First segment
    :type l_i: LineSegment
    :param l_j: Second segment
    :type l_j: LineSegment
    :param cfg: Segmentation parameters (``gamma_d``, ``gamma_r``)
    :type cfg: SegConfig
    :param max_len: Length of the longest segment in the graph
    :type max_len: float
    :return: Weight in (0, 1]
    :rtype: float
    :raises ValueError: If ``max_len`` is not positive
    """
    if max_len <= 0.0:
        raise ValueError(f"max_len must be > 0 (got {max_len})")
    d = segment_segment_distance(l_i, l_j)
    r = l_i.last_robot_pos.distance_to(l_j.last_robot_pos)
    size = min(1.0, (l_i.length + l_j.length) / (2.0 * max_len))
    return math.exp(-cfg.gamma_d * d * d) * math.exp(-cfg.gamma_r * r) * size


def _add_passages(
    gv: VisibilityGraph, keys: list[NodeKey], segs: list[LineSegment], cfg: SegConfig
) -> None:
    """Collinear, same-facing pairs separated by a doorway-sized gap."""
    normals = np.array([s.normal for s in segs])
    dirs = np.array([s.direction for s in segs])
    p1 = np.array([s.p1.as_tuple() for s in segs])
    mids = np.array([s.midpoint.as_tuple() for s in segs])
    same_facing = normals @ normals.T > 0.0
    aligned = np.abs(dirs @ dirs.T) >= math.cos(math.radians(cfg.parallel_angle_deg))
    # offset[i, j]: distance of mid_j from l_i's supporting line
    offset = np.abs(np.einsum("ik,ijk->ij", normals, mids[None, :, :] - p1[:, None, :]))
    collinear = np.maximum(offset, offset.T) <= cfg.collinear_offset
    rows, cols = np.nonzero(np.triu(same_facing & aligned & collinear, k=1))
    for i, j in zip(rows, cols):
        gap = segment_segment_distance(segs[i], segs[j])
        if cfg.door_min <= gap <= cfg.door_max:
            gv.add_edge(keys[i], keys[j], 1.0, EdgeKind.passage)


def _add_visibility(
    gv: VisibilityGraph, keys: list[NodeKey], segs: list[LineSegment], cfg: SegConfig
) -> None:
    starts, ends = segments_arrays(segs)
    normals = np.array([s.normal for s in segs])
    mids = 0.5 * (starts + ends)
    dist = pairwise_segment_distances(starts, ends)
    max_len = max(s.length for s in segs)

    def side(points: np.ndarray) -> np.ndarray:
        # side[i, j]: signed offset of points[j] from l_i
        return np.einsum("ik,ijk->ij", normals, points[None, :, :] - starts[:, None, :])

    start_side, end_side, mid_side = side(starts), side(ends), side(mids)
    near = dist <= cfg.visibility_radius
    np.fill_diagonal(near, False)
    candidates = near & ((start_side > ON_TOLERANCE) | (end_side > ON_TOLERANCE))
    facing = (mid_side > ON_TOLERANCE) & (mid_side.T > ON_TOLERANCE)

    for i in range(len(segs)):
        la = np.flatnonzero(candidates[i])
        lb = np.flatnonzero(candidates[i] & facing[i])
        if lb.size == 0:
            continue
        sight_from = np.repeat(mids[i][None, :], lb.size, axis=0)
        blocked = crossing_matrix(sight_from, mids[lb], starts[la], ends[la])
        # a segment never occludes its own sight line
        blocked &= la[None, :] != lb[:, None]
        for j in lb[~blocked.any(axis=1)]:
            if not gv.has_edge(keys[i], keys[j]):
                w = edge_weight(segs[i], segs[j], cfg, max_len)
                if w > 0.0:
                    gv.add_edge(keys[i], keys[j], w, EdgeKind.visibility)


def build_visibility_graph(
    graph: SegmentGraph, cfg: SegConfig, logger: MapLogger | None = None
) -> VisibilityGraph:
    """
    Build the visibility graph from a processed segment graph.

    Corner links become neighbor edges and doorway-separated collinear pairs
    become passage edges, both with weight 1. A visibility edge joins ``l_i``
    and ``l_j`` when ``l_j`` lies within ``visibility_radius``, the two face
    each other (each midpoint on the other's positive side), and the line
    between their midpoints crosses no segment with an endpoint on ``l_i``'s
    positive side.

    :param graph: Segment graph after corner and doorway processing
    :type graph: SegmentGraph
    :param cfg: Segmentation parameters
    :type cfg: SegConfig
    :param logger: Optional logger
    :type logger: MapLogger | None, optional
    :return: Visibility graph over the same node keys
    :rtype: VisibilityGraph
    """
    nodes = graph.nodes()
    gv = VisibilityGraph(dict(nodes))
    for a, b in graph.undirected_edges():
        gv.add_edge(a, b, 1.0, EdgeKind.neighbor)
    if len(nodes) < 2:
        return gv

    keys = list(nodes)
    segs = [nodes[k] for k in keys]
    _add_passages(gv, keys, segs, cfg)
    _add_visibility(gv, keys, segs, cfg)
    if logger:
        counts = {kind: 0 for kind in EdgeKind}
        for *_, kind in gv.edges():
            counts[kind] += 1
        logger.debug(
            "Visibility graph: "
            + ", ".join(f"{n} {kind.value}" for kind, n in counts.items())
            + f" edges over {len(gv)} nodes"
        )
    return gv
