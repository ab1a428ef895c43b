"""
Protocol definitions for the map model variants.

The benchmark drives every variant through the same contract: feed it one
scan frame at a time and query distances in between. Structural subtyping
keeps the variants free of a shared base class, which also makes stand-ins
for tests trivial.
"""

from __future__ import annotations

from collections import defaultdict
from typing import TYPE_CHECKING, ClassVar, NamedTuple, Protocol, Sequence, runtime_checkable

import numpy as np

from ..config import LineParams, Variant
from ..gpedf import DistanceResult, GpEdfModel
from ..line_extraction import PointCluster, cluster_scan_points, extract_segments

if TYPE_CHECKING:
    from ..geometry import LineSegment, Point2
    from ..logger import MapLogger
    from ..segmentation import RoomSet
    from ..world_sim import ScanFrame


class UpdateTiming(NamedTuple):
    """Wall time of one frame, split into map update and room segmentation (ms)."""

    update_ms: float
    segmentation_ms: float


class FrameObservations(NamedTuple):
    """
    One frame cut into wall evidence and everything else.

    :param segments: Segments extracted from the frame (no store ids yet)
    :param residual_clusters: Residual points grouped by their scan cluster
    :param n_points: Number of hit points in the frame
    """

    segments: list[LineSegment]
    residual_clusters: list[PointCluster]
    n_points: int


@runtime_checkable
class MapModel(Protocol):
    """
    Protocol for an incrementally built distance map.

    Implementations own their state; :meth:`integrate` must be called with
    frames in trajectory order.
    """

    variant: ClassVar[Variant]

    def integrate(self, frame: ScanFrame) -> UpdateTiming:
        """
        Absorb one scan frame.

        :param frame: Next frame of the stream
        :type frame: ScanFrame
        :return: Time spent updating the map and segmenting rooms
        :rtype: UpdateTiming
        """
        ...

    def query(self, x: Point2) -> DistanceResult:
        """
        Distance to the nearest surface at ``x``.

        :param x: Query point
        :type x: Point2
        :return: Distance and residual variance
        :rtype: DistanceResult
        """
        ...

    def query_batch(self, points: np.ndarray) -> np.ndarray:
        """
        Distances at an ``(N, 2)`` array of points.

        :param points: Query points
        :type points: np.ndarray
        :return: ``(N,)`` distances
        :rtype: np.ndarray
        """
        ...

    def room_models(self) -> dict[int, GpEdfModel]:
        """
        Current distance field of every room (one entry for global variants).

        :return: Models by room id
        :rtype: dict[int, GpEdfModel]
        """
        ...

    def residual_points(self) -> dict[int, np.ndarray]:
        """
        Scan points absorbed by the GP so far, grouped by room.

        These are the points not explained by a wall segment; the standard
        model has no walls, so it reports every point under room 0.

        :return: ``(N, 2)`` arrays by room id
        :rtype: dict[int, np.ndarray]
        """
        ...

    @property
    def segments(self) -> list[LineSegment]:
        """Wall segments currently used as priors (empty for the standard model)."""
        ...

    @property
    def rooms(self) -> RoomSet | None:
        """Room labelling, None for the global variants."""
        ...

    @property
    def n_points(self) -> int:
        """Number of scan points integrated so far."""
        ...

    @property
    def n_rooms(self) -> int:
        ...

    @property
    def n_inducing(self) -> int:
        ...

    @property
    def n_segments(self) -> int:
        ...


def observe_frame(
    frame: ScanFrame, params: LineParams, logger: MapLogger | None = None
) -> FrameObservations:
    """
    Cluster a frame and run split-and-merge on every cluster.

    Residual points keep their cluster; each residual group becomes its own
    :class:`PointCluster` so it can be assigned to a room as a whole.

    :param frame: Scan to process
    :type frame: ScanFrame
    :param params: Line extraction parameters
    :type params: LineParams
    :param logger: Optional logger
    :type logger: MapLogger | None, optional
    :return: Segments, residual clusters, and the frame's point count
    :rtype: FrameObservations
    """
    segments: list[LineSegment] = []
    residual: dict[int, list[Point2]] = defaultdict(list)
    for cluster in cluster_scan_points(frame, params):
        result = extract_segments(cluster, params, logger)
        segments.extend(result.segments)
        for point, cluster_id in result.residual_points:
            residual[cluster_id].append(point)
    clusters = [
        PointCluster(points, frame.pose, cluster_id)
        for cluster_id, points in sorted(residual.items())
    ]
    return FrameObservations(segments, clusters, len(frame.points))


def cluster_points(clusters: Sequence[PointCluster]) -> np.ndarray:
    """All points of ``clusters`` as one ``(N, 2)`` array."""
    pts = [p.as_tuple() for cluster in clusters for p in cluster.points]
    return np.array(pts, dtype=float).reshape(-1, 2)
