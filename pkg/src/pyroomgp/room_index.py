"""
Spatial lookup of rooms.

Room bounding boxes go into an R-tree. A point inside several boxes is
resolved against each candidate room's closest segment: the room whose
segment has the point on its positive (interior) side wins, and among several
such rooms the one with the closest segment.
"""

from __future__ import annotations

import math
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import rtree

from .geometry import (
    Aabb,
    LineSegment,
    Point2,
    bounding_box,
    segment_point_distance,
    signed_offset,
)
from .segmentation.processing import NodeKey
from .segmentation.rooms import RoomSet

if TYPE_CHECKING:
    from .line_extraction import PointCluster
    from .logger import MapLogger


class RoomIndex:
    """
    R-tree over room bounding boxes, with the per-room segment lists used for tie-breaks.

    Immutable once built; rebuild it after the rooms change.

    :param room_segments: Segments of every room
    :type room_segments: Mapping[int, Sequence[LineSegment]]
    :raises ValueError: If a room has no segments
    """

    def __init__(self, room_segments: Mapping[int, Sequence[LineSegment]]):
        self._segments: dict[int, tuple[LineSegment, ...]] = {}
        self._boxes: dict[int, Aabb] = {}
        self._tree = rtree.index.Index(interleaved=True)
        for room in sorted(room_segments):
            segments = tuple(room_segments[room])
            if not segments:
                raise ValueError(f"Room {room} has no segments; cannot index an empty room")
            box = bounding_box(segments)
            self._segments[room] = segments
            self._boxes[room] = box
            self._tree.insert(room, box.as_bounds())

    def __len__(self) -> int:
        return len(self._boxes)

    def __contains__(self, room: object) -> bool:
        return room in self._boxes

    @property
    def rooms(self) -> list[int]:
        return sorted(self._boxes)

    def box(self, room: int) -> Aabb:
        return self._boxes[room]

    def segments(self, room: int) -> tuple[LineSegment, ...]:
        return self._segments[room]

    def containing(self, p: Point2) -> list[int]:
        """Rooms whose box contains ``p`` (boundary included)."""
        return sorted(int(r) for r in self._tree.intersection((p.x, p.y, p.x, p.y)))

    def _closest(self, room: int, p: Point2) -> tuple[float, LineSegment]:
        return min(
            ((segment_point_distance(p, s), s) for s in self._segments[room]),
            key=lambda ds: ds[0],
        )

    def resolve(self, p: Point2, candidates: Iterable[int]) -> int:
        """
        Pick one room among ``candidates`` for ``p``.

        Each candidate contributes its segment closest to ``p``. If ``p`` is on
        the positive side of exactly one of them, that room wins; if of
        several, the room with the closest such segment; if of none, the room
        with the closest segment overall.
        """
        scored = []
        for room in sorted(candidates):
            dist, seg = self._closest(room, p)
            scored.append((dist, room, signed_offset(p, seg) > 0.0))
        if not scored:
            raise ValueError("resolve needs at least one candidate room")
        positive = [entry for entry in scored if entry[2]]
        pool = positive or scored
        return min(pool, key=lambda e: (e[0], e[1]))[1]

    def nearest_boxes(self, p: Point2) -> list[int]:
        """Rooms whose box is closest to ``p``."""
        dists = {room: box.distance_to(p) for room, box in self._boxes.items()}
        best = min(dists.values())
        return sorted(room for room, d in dists.items() if d <= best + 1e-9)

    def locate(self, p: Point2) -> int:
        """
        Room containing ``p``.

        Points outside every box go to the nearest box, with the same tie-break.

        :raises ValueError: If the index is empty
        """
        if not self._boxes:
            raise ValueError("Cannot locate a point in an empty room index")
        candidates = self.containing(p)
        if len(candidates) == 1:
            return candidates[0]
        return self.resolve(p, candidates or self.nearest_boxes(p))


def rebuild_index(rooms: RoomSet, segments: Mapping[NodeKey, LineSegment]) -> RoomIndex:
    """
    Index every room of a room set.

    :param rooms: Current rooms
    :type rooms: RoomSet
    :param segments: Geometry of every node key in ``rooms``
    :type segments: Mapping[NodeKey, LineSegment]
    :return: New index with one entry per room
    :rtype: RoomIndex
    :raises ValueError: If a room has no segments in ``segments``
    """
    return RoomIndex(
        {
            room: [segments[key] for key in sorted(keys) if key in segments]
            for room, keys in rooms.rooms.items()
        }
    )


def locate(index: RoomIndex, p: Point2) -> int:
    """Room containing ``p`` (see :meth:`RoomIndex.locate`)."""
    return index.locate(p)


def rooms_in_range(
    index: RoomIndex, rooms: RoomSet, sensor_room: int, sensor_pos: Point2, max_range: float
) -> list[int]:
    """The sensor's room plus its adjacent rooms whose box intersects the sensor disc."""
    out = {sensor_room} if sensor_room in index else set()
    for room in rooms.neighbors(sensor_room):
        if room in index and index.box(room).intersects_disc(sensor_pos, max_range):
            out.add(room)
    return sorted(out)


def assign_clusters(
    index: RoomIndex,
    clusters: Sequence[PointCluster],
    sensor_room: int | None,
    rooms: RoomSet | None = None,
    max_range: float = math.inf,
    logger: MapLogger | None = None,
) -> list[int]:
    """
    Room of every residual point cluster.

    Each cluster is represented by the mean of its points. Candidates are the
    sensor's room and its adjacent rooms within ``max_range`` of the frame
    pose; a centroid inside exactly one candidate box goes there, otherwise
    the closest-segment rules of :meth:`RoomIndex.resolve` decide. Without a
    known sensor room every centroid is located over the whole index.

    :param index: Room index
    :type index: RoomIndex
    :param clusters: Residual point clusters of one frame
    :type clusters: Sequence[PointCluster]
    :param sensor_room: Room the robot is in
    :type sensor_room: int | None
    :param rooms: Room set providing connectivity
    :type rooms: RoomSet | None, optional
    :param max_range: Sensor range (m)
    :type max_range: float, optional
    :return: Room id per cluster, in order
    :rtype: list[int]
    """
    out: list[int] = []
    for cluster in clusters:
        centroid = cluster.centroid
        if sensor_room is None or sensor_room not in index:
            out.append(index.locate(centroid))
            continue
        if rooms is not None:
            candidates = rooms_in_range(
                index, rooms, sensor_room, cluster.frame_pose.position, max_range
            )
        else:
            candidates = [sensor_room]
        inside = [room for room in candidates if index.box(room).contains(centroid)]
        if len(inside) == 1:
            out.append(inside[0])
        else:
            out.append(index.resolve(centroid, inside or candidates))
    if logger and clusters:
        logger.debug(f"Assigned {len(clusters)} residual clusters to rooms {sorted(set(out))}")
    return out
