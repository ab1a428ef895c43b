"""
Global line-based model: one GP-EDF whose prior holds every wall segment.

Walls enter through the line prior; only residual points reach the GP, which
is updated in streaming fashion.
"""

from __future__ import annotations

import time
from typing import TYPE_CHECKING, ClassVar

import numpy as np

from ..config import GpHyper, LineParams, Variant
from ..gpedf import (
    DistanceResult,
    GpEdfModel,
    query_distance,
    query_distances,
    select_inducing,
    set_lines,
    update_model,
)
from ..line_extraction import SegmentStore
from ._base import UpdateTiming, cluster_points, observe_frame

if TYPE_CHECKING:
    from ..geometry import LineSegment, Point2
    from ..logger import MapLogger
    from ..segmentation import RoomSet
    from ..world_sim import ScanFrame


class LineGlobalModel:
    """
    :param hyper: GP hyperparameters
    :type hyper: GpHyper | None, optional
    :param line_params: Line extraction parameters
    :type line_params: LineParams | None, optional
    :param logger: Optional logger
    :type logger: MapLogger | None, optional
    """

    variant: ClassVar[Variant] = Variant.line_global

    def __init__(
        self,
        hyper: GpHyper | None = None,
        line_params: LineParams | None = None,
        logger: MapLogger | None = None,
    ):
        self.logger = logger
        self.line_params = line_params or LineParams()
        self.store = SegmentStore(self.line_params, logger)
        self.model = GpEdfModel.empty(0, hyper)
        self._n_points = 0
        self._residual: list[np.ndarray] = []

    def integrate(self, frame: ScanFrame) -> UpdateTiming:
        start = time.perf_counter()
        obs = observe_frame(frame, self.line_params, self.logger)
        self._n_points += obs.n_points
        for segment in obs.segments:
            self.store.add(segment)
        model = set_lines(self.model, self.store.segments)
        residual = cluster_points(obs.residual_clusters)
        if residual.shape[0]:
            self._residual.append(residual)
            model = update_model(select_inducing(model, residual), residual)
        self.model = model
        return UpdateTiming(1000.0 * (time.perf_counter() - start), 0.0)

    def query(self, x: Point2) -> DistanceResult:
        return query_distance(self.model, x)

    def query_batch(self, points: np.ndarray) -> np.ndarray:
        return query_distances(self.model, points)[0]

    def room_models(self) -> dict[int, GpEdfModel]:
        return {0: self.model}

    def residual_points(self) -> dict[int, np.ndarray]:
        return {0: np.vstack(self._residual) if self._residual else np.zeros((0, 2))}

    @property
    def segments(self) -> list[LineSegment]:
        return self.store.segments

    @property
    def rooms(self) -> RoomSet | None:
        return None

    @property
    def n_points(self) -> int:
        return self._n_points

    @property
    def n_rooms(self) -> int:
        return 1

    @property
    def n_inducing(self) -> int:
        return self.model.n_inducing

    @property
    def n_segments(self) -> int:
        return len(self.store)
