"""
Standard global model: one zero-mean GP-EDF over every scan point.

No line prior is used; walls are learned from their points like any other
surface. All measurements are kept and the variational state is refit from
scratch on every frame, which makes this the baseline whose update cost
grows with the amount of data.
"""

from __future__ import annotations

import time
from typing import TYPE_CHECKING, ClassVar

import numpy as np

from ..config import GpHyper, Variant
from ..gpedf import (
    DistanceResult,
    GpEdfModel,
    fit_batch,
    query_distance,
    query_distances,
    select_inducing,
)
from ._base import UpdateTiming

if TYPE_CHECKING:
    from ..geometry import LineSegment, Point2
    from ..logger import MapLogger
    from ..segmentation import RoomSet
    from ..world_sim import ScanFrame


class StandardGlobalModel:
    """
    :param hyper: GP hyperparameters
    :type hyper: GpHyper | None, optional
    :param logger: Optional logger
    :type logger: MapLogger | None, optional
    """

    variant: ClassVar[Variant] = Variant.standard_global

    def __init__(self, hyper: GpHyper | None = None, logger: MapLogger | None = None):
        self.logger = logger
        self.model = GpEdfModel.empty(0, hyper)
        self._points = np.zeros((0, 2))

    def integrate(self, frame: ScanFrame) -> UpdateTiming:
        start = time.perf_counter()
        new = np.array([p.as_tuple() for p in frame.points], dtype=float).reshape(-1, 2)
        if new.shape[0]:
            self._points = np.vstack([self._points, new])
            self.model = fit_batch(select_inducing(self.model, new), self._points)
        elapsed = 1000.0 * (time.perf_counter() - start)
        if self.logger:
            self.logger.debug(
                f"Frame {frame.index}: refit on {self._points.shape[0]} points, "
                f"{self.model.n_inducing} inducing"
            )
        return UpdateTiming(elapsed, 0.0)

    def query(self, x: Point2) -> DistanceResult:
        return query_distance(self.model, x)

    def query_batch(self, points: np.ndarray) -> np.ndarray:
        return query_distances(self.model, points)[0]

    def room_models(self) -> dict[int, GpEdfModel]:
        return {0: self.model}

    def residual_points(self) -> dict[int, np.ndarray]:
        return {0: self._points.copy()}

    @property
    def segments(self) -> list[LineSegment]:
        return []

    @property
    def rooms(self) -> RoomSet | None:
        return None

    @property
    def n_points(self) -> int:
        return int(self._points.shape[0])

    @property
    def n_rooms(self) -> int:
        return 1

    @property
    def n_inducing(self) -> int:
        return self.model.n_inducing

    @property
    def n_segments(self) -> int:
        return 0
