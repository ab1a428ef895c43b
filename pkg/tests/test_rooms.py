"""Tests for incremental room segmentation."""

from __future__ import annotations

import numpy as np
import pytest

from pyroomgp.config import SegConfig
from pyroomgp.geometry import LineSegment, Point2
from pyroomgp.segmentation import (
    EdgeKind,
    RoomSegmenter,
    RoomSet,
    VisibilityGraph,
    evaluate_split,
    incremental_update,
    room_transitions,
)

CFG = SegConfig()


def graph_from(adjacency: np.ndarray) -> VisibilityGraph:
    n = adjacency.shape[0]
    segments = {
        (i, 0): LineSegment.from_endpoints(
            Point2(2.0 * i, 0.0), Point2(2.0 * i + 1.0, 0.0), Point2(2.0 * i + 0.5, 1.0), i
        )
        for i in range(n)
    }
    gv = VisibilityGraph(segments)
    rows, cols = np.nonzero(np.triu(adjacency, k=1))
    for i, j in zip(rows, cols):
        gv.add_edge((int(i), 0), (int(j), 0), float(adjacency[i, j]), EdgeKind.visibility)
    return gv


def cliques(n: int, links: dict[tuple[int, int], float] | None = None) -> np.ndarray:
    """Two n-cliques with optional cross links between them."""
    a = np.zeros((2 * n, 2 * n))
    a[:n, :n] = 1.0
    a[n:, n:] = 1.0
    np.fill_diagonal(a, 0.0)
    for (i, j), w in (links or {}).items():
        a[i, j] = a[j, i] = w
    return a


def keys(*ids: int) -> frozenset:
    return frozenset((i, 0) for i in ids)


def square(x0: float, first_id: int) -> list[LineSegment]:
    center = Point2(x0 + 2.0, 1.5)
    corners = [Point2(x0, 0), Point2(x0 + 4, 0), Point2(x0 + 4, 3), Point2(x0, 3)]
    return [
        LineSegment.from_endpoints(a, b, center, id=first_id + i)
        for i, (a, b) in enumerate(zip(corners, corners[1:] + corners[:1]))
    ]


class TestRoomSet:
    def test_empty_room_rejected(self):
        with pytest.raises(ValueError, match="is empty"):
            RoomSet({0: frozenset()})

    def test_overlapping_rooms_rejected(self):
        with pytest.raises(ValueError, match="shares segments"):
            RoomSet({0: keys(1, 2), 1: keys(2, 3)})

    def test_lookup(self):
        rooms = RoomSet({0: keys(1, 2), 3: keys(4)}, 2, frozenset({(0, 3)}), 4)
        assert rooms.k == 2
        assert rooms.room_ids == [0, 3]
        assert rooms.room_of((4, 0)) == 3
        assert rooms.room_of((9, 0)) is None
        assert rooms.neighbors(0) == {3}
        assert rooms.labels() == {(1, 0): 0, (2, 0): 0, (4, 0): 3}

    def test_to_dict(self):
        rooms = RoomSet({0: keys(2, 1)}, 1, frozenset(), 1)
        seg = LineSegment.from_endpoints(Point2(0, 0), Point2(1, 0), Point2(0, 1), 1)
        out = rooms.to_dict({(1, 0): seg})
        assert out["rooms"] == {"0": [[1, 0], [2, 0]]}
        assert out["connectivity"] == []
        assert out["segments"] == [
            {"key": [1, 0], "room": 0, "p1": [0.0, 0.0], "p2": [1.0, 0.0], "normal": [0.0, 1.0]}
        ]


class TestRoomTransitions:
    def test_split_room(self):
        old = RoomSet({0: frozenset({(1, 0), (2, 0)})})
        new = RoomSet({0: frozenset({(1, 0)}), 1: frozenset({(2, 0), (2, 1)})})
        transitions = room_transitions(old, new)
        assert transitions.successors == {0: {0, 1}}
        assert transitions.predecessors == {0: {0}, 1: {0}}
        assert transitions.changed

    def test_unchanged(self):
        rooms = RoomSet({0: keys(1), 1: keys(2)})
        assert not room_transitions(rooms, rooms).changed


class TestEvaluateSplit:
    def test_weakly_joined_cliques_split(self):
        gv = graph_from(cliques(4, {(3, 4): 1.0}))
        decision = evaluate_split(gv, gv.nodes, 0, CFG)
        assert decision.fiedler < CFG.fiedler_threshold
        assert decision.ratio == pytest.approx(0.25)
        assert decision.accepted
        assert set(decision.halves) == {keys(0, 1, 2, 3), keys(4, 5, 6, 7)}

    def test_complete_graph_kept(self):
        a = np.ones((8, 8)) - np.eye(8)
        decision = evaluate_split(graph_from(a), graph_from(a).nodes, 0, CFG)
        assert decision.fiedler == pytest.approx(8 / 7)
        assert decision.ratio is None
        assert not decision.accepted

    def test_too_many_cross_edges(self):
        """Three cross edges over halves of five give a ratio of 0.6."""
        gv = graph_from(cliques(5, {(0, 5): 0.01, (1, 6): 0.01, (2, 7): 0.01}))
        decision = evaluate_split(gv, gv.nodes, 0, CFG)
        assert decision.ratio == pytest.approx(0.6)
        assert not decision.accepted

    def test_edgeless_room(self):
        gv = graph_from(np.zeros((3, 3)))
        decision = evaluate_split(gv, gv.nodes, 0, CFG)
        assert decision.fiedler is None
        assert not decision.accepted

    def test_small_appendage_not_split_off(self):
        """A three-segment fragment hanging off a room is not a room of its own."""
        a = np.zeros((9, 9))
        a[:6, :6] = 1.0
        a[6:, 6:] = 1.0
        np.fill_diagonal(a, 0.0)
        a[5, 6] = a[6, 5] = 0.01
        gv = graph_from(a)
        decision = evaluate_split(gv, gv.nodes, 0, CFG)
        assert decision.fiedler < CFG.fiedler_threshold
        assert not decision.accepted
        assert decision.halves is None

    def test_fragment_joins_nearest_half(self):
        a = np.zeros((11, 11))
        a[:8, :8] = cliques(4, {(3, 4): 1.0})
        a[8:, 8:] = 1.0
        np.fill_diagonal(a, 0.0)
        a[7, 8] = a[8, 7] = 0.01
        gv = graph_from(a)
        decision = evaluate_split(gv, gv.nodes, 0, CFG)
        assert decision.accepted
        assert decision.ratio == pytest.approx(0.25)
        assert set(decision.halves) == {keys(0, 1, 2, 3), keys(*range(4, 11))}


class TestIncrementalUpdate:
    def test_first_split(self, logger):
        gv = graph_from(cliques(4, {(3, 4): 1.0}))
        rooms = incremental_update(RoomSet(), gv, CFG, logger=logger)
        assert rooms.rooms == {0: keys(0, 1, 2, 3), 1: keys(4, 5, 6, 7)}
        assert rooms.k_old == 2
        assert rooms.connectivity == {(0, 1)}
        assert rooms.next_id == 2

    def test_rejected_split_keeps_room(self):
        gv = graph_from(cliques(5, {(0, 5): 0.01, (1, 6): 0.01, (2, 7): 0.01}))
        rooms = incremental_update(RoomSet(), gv, CFG)
        assert rooms.rooms == {0: frozenset(gv.nodes)}
        assert rooms.k_old == 1

    def test_stable_rooms(self):
        state = RoomSet({0: keys(0, 1, 2, 3), 1: keys(4, 5, 6, 7)}, 2, frozenset(), 2)
        rooms = incremental_update(state, graph_from(cliques(4)), CFG)
        assert rooms.rooms == state.rooms
        assert rooms.next_id == 2

    def test_fewer_clusters_merge(self):
        state = RoomSet({0: keys(0, 1, 2, 3), 1: keys(4, 5, 6, 7)}, 2, frozenset(), 2)
        a = np.ones((8, 8)) - np.eye(8)
        rooms = incremental_update(state, graph_from(a), CFG)
        assert rooms.rooms == {0: frozenset(graph_from(a).nodes)}
        assert rooms.next_id == 2

    def test_new_node_follows_cluster(self):
        state = RoomSet({0: keys(0, 1, 2, 3), 1: keys(4, 5, 6)}, 2, frozenset(), 2)
        rooms = incremental_update(state, graph_from(cliques(4)), CFG)
        assert rooms.room_of((7, 0)) == 1

    def test_other_room_splits_when_current_cannot(self, logger):
        a = np.zeros((16, 16))
        a[:8, :8] = 1.0
        a[8:, 8:] = cliques(4, {(3, 4): 1.0})
        np.fill_diagonal(a, 0.0)
        state = RoomSet({0: keys(*range(8)), 1: keys(*range(8, 16))}, 2, frozenset(), 2)
        rooms = incremental_update(state, graph_from(a), CFG, current_room=0, logger=logger)
        assert rooms.rooms == {
            0: keys(*range(8)),
            1: keys(8, 9, 10, 11),
            2: keys(12, 13, 14, 15),
        }
        assert rooms.next_id == 3

    def test_small_leftover_cluster_gets_no_room(self):
        a = np.zeros((10, 10))
        a[:8, :8] = 1.0
        a[8, 9] = a[9, 8] = 1.0
        np.fill_diagonal(a, 0.0)
        state = RoomSet({0: keys(*range(10))}, 3, frozenset(), 5)
        rooms = incremental_update(state, graph_from(a), CFG)
        assert rooms.rooms == {0: keys(*range(10))}
        assert rooms.next_id == 5

        loose = SegConfig(min_room_segments=2)
        rooms = incremental_update(state, graph_from(a), loose)
        assert rooms.rooms == {0: keys(*range(8)), 5: keys(8, 9)}
        assert rooms.next_id == 6

    def test_rooms_partition_nodes(self):
        gv = graph_from(cliques(4, {(3, 4): 1.0}))
        rooms = incremental_update(RoomSet(), gv, CFG)
        labelled = [key for members in rooms.rooms.values() for key in members]
        assert sorted(labelled) == gv.nodes

    def test_empty_graph(self):
        state = RoomSet({}, 3, frozenset(), 5)
        rooms = incremental_update(state, VisibilityGraph(), CFG)
        assert rooms.rooms == {}
        assert rooms.next_id == 5


class TestRoomSegmenter:
    def test_two_separate_rooms(self, logger):
        segmenter = RoomSegmenter(CFG, logger)
        walls = square(0.0, 0) + square(20.0, 4)
        result = segmenter.update(walls)
        assert result.rooms.rooms == {0: keys(0, 1, 2, 3), 1: keys(4, 5, 6, 7)}
        by_room = result.segments_by_room()
        assert [s.id for s in by_room[1]] == [4, 5, 6, 7]

    def test_repeat_update_is_stable(self):
        segmenter = RoomSegmenter(CFG)
        walls = square(0.0, 0) + square(20.0, 4)
        first = segmenter.update(walls)
        second = segmenter.update(walls, current_room=0)
        assert second.rooms.rooms == first.rooms.rooms
        assert not second.transitions.changed

    def test_single_room(self, square_room):
        result = RoomSegmenter().update(square_room)
        assert result.rooms.rooms == {0: keys(0, 1, 2, 3)}
        assert result.rooms.connectivity == frozenset()
