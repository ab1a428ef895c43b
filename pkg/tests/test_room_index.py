"""Tests for room lookup and residual cluster assignment."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pyroomgp.geometry import LineSegment, Point2, bounding_box
from pyroomgp.line_extraction import PointCluster
from pyroomgp.room_index import RoomIndex, assign_clusters, locate, rebuild_index, rooms_in_range
from pyroomgp.segmentation import RoomSet
from pyroomgp.world_sim import Pose, grid_plan


def box_walls(x0: float, x1: float, y0: float = 0.0, y1: float = 3.0) -> list[LineSegment]:
    """Inward-facing walls of an axis-aligned room."""
    center = Point2(0.5 * (x0 + x1), 0.5 * (y0 + y1))
    corners = [Point2(x0, y0), Point2(x1, y0), Point2(x1, y1), Point2(x0, y1)]
    return [
        LineSegment.from_endpoints(a, b, center)
        for a, b in zip(corners, corners[1:] + corners[:1])
    ]


def cluster(*points: tuple[float, float], pose=(1.0, 1.0)) -> PointCluster:
    return PointCluster([Point2(*p) for p in points], Pose(0.0, pose[0], pose[1], 0.0), 0)


@pytest.fixture
def side_by_side():
    """Rooms 0 and 1 next to each other, boxes touching at x = 4."""
    return RoomIndex({0: box_walls(0, 4), 1: box_walls(4, 8)})


class TestRoomIndex:
    def test_entries(self, side_by_side):
        assert len(side_by_side) == 2
        assert side_by_side.rooms == [0, 1]
        assert 1 in side_by_side
        assert side_by_side.box(1) == bounding_box(box_walls(4, 8))

    def test_empty_room_rejected(self):
        with pytest.raises(ValueError, match="no segments"):
            RoomIndex({0: box_walls(0, 4), 1: []})

    def test_empty_index_locate(self):
        with pytest.raises(ValueError, match="empty room index"):
            RoomIndex({}).locate(Point2(0, 0))

    @pytest.mark.parametrize("x,room", [(1.0, 0), (6.0, 1)])
    def test_inside_one_box(self, side_by_side, x, room):
        assert side_by_side.locate(Point2(x, 1.5)) == room

    def test_closest_positive_segment_wins(self):
        """Both closest segments face the point; the nearer one decides."""
        index = RoomIndex({0: box_walls(0, 5), 1: box_walls(4, 8)})
        assert index.containing(Point2(4.2, 1.5)) == [0, 1]
        assert index.locate(Point2(4.2, 1.5)) == 1
        assert index.locate(Point2(4.8, 1.5)) == 0

    def test_only_positive_side_wins(self):
        """Room 1's nearest wall faces away from the point, so room 0 takes it."""
        walls_b = box_walls(4, 8)
        walls_b[3] = LineSegment.from_endpoints(Point2(4, 3), Point2(4, 0), Point2(3, 1.5))
        index = RoomIndex({0: box_walls(0, 5), 1: walls_b})
        assert index.locate(Point2(4.2, 1.5)) == 0

    def test_outside_every_box(self, side_by_side):
        assert side_by_side.locate(Point2(10.0, 1.5)) == 1
        assert side_by_side.locate(Point2(-1.0, 10.0)) == 0

    def test_locate_helper(self, side_by_side):
        assert locate(side_by_side, Point2(6.0, 1.0)) == 1

    def test_resolve_needs_candidates(self, side_by_side):
        with pytest.raises(ValueError, match="at least one candidate"):
            side_by_side.resolve(Point2(0, 0), [])


def test_rebuild_index():
    walls = box_walls(0, 4) + box_walls(4, 8)
    segments = {(i, 0): s for i, s in enumerate(walls)}
    rooms = RoomSet(
        {0: frozenset((i, 0) for i in range(4)), 1: frozenset((i, 0) for i in range(4, 8))}
    )
    index = rebuild_index(rooms, segments)
    assert index.rooms == [0, 1]
    assert index.box(0) == bounding_box(walls[:4])


class TestAssignClusters:
    @pytest.fixture
    def rooms(self):
        return RoomSet(
            {0: frozenset({(0, 0)}), 1: frozenset({(1, 0)})}, 2, frozenset({(0, 1)}), 2
        )

    def test_centroid_in_sensor_room(self, side_by_side, rooms):
        c = cluster((1, 1), (3, 3))
        assert c.centroid == Point2(2.0, 2.0)
        assert assign_clusters(side_by_side, [c], 0, rooms, 8.0) == [0]

    def test_neighbor_room_in_range(self, side_by_side, rooms, logger):
        out = assign_clusters(side_by_side, [cluster((6, 1), (6, 2))], 0, rooms, 8.0, logger)
        assert out == [1]

    def test_neighbor_out_of_range(self, side_by_side, rooms):
        """Room 1's box is more than 0.5 m from the sensor, so only room 0 is a candidate."""
        assert rooms_in_range(side_by_side, rooms, 0, Point2(1, 1), 0.5) == [0]
        assert assign_clusters(side_by_side, [cluster((6, 1))], 0, rooms, 0.5) == [0]

    def test_centroid_outside_boxes(self, side_by_side, rooms):
        assert assign_clusters(side_by_side, [cluster((9, 1.5))], 0, rooms, 8.0) == [1]

    def test_unknown_sensor_room(self, side_by_side):
        assert assign_clusters(side_by_side, [cluster((6, 1)), cluster((1, 1))], None) == [1, 0]

    def test_without_connectivity(self, side_by_side):
        assert assign_clusters(side_by_side, [cluster((6, 1))], 0) == [0]


GRID = grid_plan(2, 2)
GRID_INDEX = RoomIndex(
    {
        room: [
            LineSegment.from_endpoints(
                a, b, Point2(2.5 + 5.25 * (room % 2), 2.0 + 4.25 * (room // 2))
            )
            for (a, b), label in zip(GRID.walls, GRID.room_labels)
            if label == room
        ]
        for room in GRID.room_ids()
    }
)


@given(
    room=st.integers(min_value=0, max_value=3),
    u=st.floats(min_value=0.01, max_value=0.99),
    v=st.floats(min_value=0.01, max_value=0.99),
)
@settings(max_examples=60, deadline=None)
def test_points_inside_rooms_located(room, u, v):
    x0, y0 = 5.25 * (room % 2), 4.25 * (room // 2)
    assert GRID_INDEX.locate(Point2(x0 + 5.0 * u, y0 + 4.0 * v)) == room
