"""
SVG rendering of a map: wall segments colored by room, the residual (obstacle)
points the GP absorbed, the robot pose, room connectivity, and optional distance-field
iso-contours of the robot's room.

Contours are traced with marching squares from scikit-image, which is an
optional dependency (``pip install pyroomgp[render]``).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .geometry import Aabb, LineSegment, Point2, bounding_box
from .gpedf import GpEdfModel, query_distances
from .room_index import RoomIndex

if TYPE_CHECKING:
    from .harness import MapState
    from .logger import MapLogger

_SKIMAGE_MISSING_MESSAGE = (
    "Iso-contours need scikit-image, which is not installed. "
    "Install it with: pip install 'pyroomgp[render]' "
    "(or export without contours)."
)

# tab10
PALETTE = (
    "#1f77b4",
    "#ff7f0e",
    "#2ca02c",
    "#d62728",
    "#9467bd",
    "#8c564b",
    "#e377c2",
    "#7f7f7f",
    "#bcbd22",
    "#17becf",
)


def _import_find_contours():
    """Lazy-import ``skimage.measure.find_contours`` with a helpful error if missing."""
    try:
        from skimage.measure import find_contours
    except ImportError as e:  # pragma: no cover - exercised only without scikit-image
        raise ImportError(_SKIMAGE_MISSING_MESSAGE) from e
    return find_contours


@dataclass(frozen=True)
class SvgOptions:
    """
    :param contours: Draw distance-field iso-contours of the robot's room
    :param grid_step: Sampling step (m) of the contour grid
    :param levels: Contour distances (m); a level at or below 0 is traced at half a grid step
    :param scale: Pixels per meter
    :param margin: Border (m) around the map
    :param show_points: Draw residual points
    :param show_connectivity: Draw links between adjacent rooms
    """

    contours: bool = False
    grid_step: float = 0.1
    levels: tuple[float, ...] = (0.0, 0.25, 0.5, 1.0)
    scale: float = 50.0
    margin: float = 0.5
    show_points: bool = True
    show_connectivity: bool = True

    def __post_init__(self) -> None:
        if self.grid_step <= 0.0:
            raise ValueError(f"grid_step must be > 0 (got {self.grid_step})")
        if self.scale <= 0.0:
            raise ValueError(f"scale must be > 0 (got {self.scale})")


def room_color(rank: int) -> str:
    return PALETTE[rank % len(PALETTE)]


def contour_polylines(
    model: GpEdfModel, box: Aabb, level: float, grid_step: float = 0.1
) -> list[np.ndarray]:
    """
    Iso-lines ``d = level`` of a model's distance field inside ``box``.

    :param model: Distance field
    :type model: GpEdfModel
    :param box: Area to sample
    :type box: Aabb
    :param level: Distance of the iso-line; at or below 0 it is traced at ``grid_step / 2``
    :type level: float
    :param grid_step: Sampling step (m)
    :type grid_step: float, optional
    :return: One ``(K, 2)`` world-coordinate vertex array per contour piece
    :rtype: list[np.ndarray]
    :raises ImportError: If scikit-image is not installed
    """
    find_contours = _import_find_contours()
    xs = np.arange(box.min.x, box.max.x + 0.5 * grid_step, grid_step)
    ys = np.arange(box.min.y, box.max.y + 0.5 * grid_step, grid_step)
    if xs.size < 2 or ys.size < 2:
        return []
    gx, gy = np.meshgrid(xs, ys)
    dist, _ = query_distances(model, np.column_stack([gx.ravel(), gy.ravel()]))
    field = dist.reshape(gy.shape)
    target = level if level > 0.0 else 0.5 * grid_step
    out = []
    for piece in find_contours(field, target):
        rows, cols = piece[:, 0], piece[:, 1]
        out.append(np.column_stack([box.min.x + cols * grid_step, box.min.y + rows * grid_step]))
    return out


class SvgExporter:
    """
    Writes map snapshots as SVG.

    :param options: Rendering options
    :type options: SvgOptions | None, optional
    :param logger: Optional logger
    :type logger: MapLogger | None, optional
    """

    def __init__(self, options: SvgOptions | None = None, logger: MapLogger | None = None):
        self.options = options or SvgOptions()
        self.logger = logger

    def _extent(
        self, models: dict[int, GpEdfModel], points: dict[int, np.ndarray], pose: Point2 | None
    ) -> Aabb:
        xs: list[float] = []
        ys: list[float] = []
        for model in models.values():
            for s in model.lines:
                xs.extend((s.p1.x, s.p2.x))
                ys.extend((s.p1.y, s.p2.y))
        for pts in points.values():
            xs.extend(pts[:, 0].tolist())
            ys.extend(pts[:, 1].tolist())
        if pose is not None:
            xs.append(pose.x)
            ys.append(pose.y)
        m = self.options.margin
        return Aabb(Point2(min(xs) - m, min(ys) - m), Point2(max(xs) + m, max(ys) + m))

    def _contour_room(self, models: dict[int, GpEdfModel], pose: Point2 | None) -> int:
        with_lines = {room: model.lines for room, model in models.items() if model.lines}
        if pose is None or not with_lines:
            return min(models)
        return RoomIndex(with_lines).locate(pose)

    def render(self, state: MapState) -> str:
        """
        Build the SVG document.

        :param state: Map to draw
        :type state: MapState
        :return: SVG text
        :rtype: str
        :raises ValueError: If the map holds no segments and no residual points
        """
        models = state.model.room_models()
        points = {room: pts for room, pts in state.model.residual_points().items() if len(pts)}
        if not models or (not points and not any(m.lines for m in models.values())):
            raise ValueError("Cannot render an empty map")
        pose = state.pose.position if state.pose is not None else None
        ext = self._extent(models, points, pose)
        k = self.options.scale
        width = (ext.max.x - ext.min.x) * k
        height = (ext.max.y - ext.min.y) * k

        def px(x: float, y: float) -> tuple[float, float]:
            return (x - ext.min.x) * k, (ext.max.y - y) * k

        colors = {room: room_color(rank) for rank, room in enumerate(sorted(models))}
        parts = [
            f'<svg width="{width:.0f}" height="{height:.0f}" '
            f'viewBox="0 0 {width:.1f} {height:.1f}" fill="none" '
            f'xmlns="http://www.w3.org/2000/svg">',
            f'  <rect width="{width:.1f}" height="{height:.1f}" fill="#ffffff" />',
        ]

        if self.options.contours:
            room = self._contour_room(models, pose)
            model = models[room]
            box = bounding_box(model.lines) if model.lines else ext
            for level in self.options.levels:
                for line in contour_polylines(model, box, level, self.options.grid_step):
                    pts = " ".join("{:.1f},{:.1f}".format(*px(x, y)) for x, y in line)
                    parts.append(
                        f'  <polyline class="contour" data-level="{level:g}" points="{pts}" '
                        f'stroke="#999999" stroke-width="0.8" />'
                    )

        for room in sorted(models):
            for s in models[room].lines:
                (x1, y1), (x2, y2) = px(s.p1.x, s.p1.y), px(s.p2.x, s.p2.y)
                parts.append(
                    f'  <line class="segment" data-room="{room}" x1="{x1:.1f}" y1="{y1:.1f}" '
                    f'x2="{x2:.1f}" y2="{y2:.1f}" stroke="{colors[room]}" stroke-width="3" />'
                )

        if self.options.show_points:
            for room in sorted(points):
                for x, y in points[room]:
                    cx, cy = px(float(x), float(y))
                    parts.append(
                        f'  <circle class="point" data-room="{room}" cx="{cx:.1f}" cy="{cy:.1f}" '
                        f'r="1.5" fill="#000000" />'
                    )

        rooms = state.model.rooms
        if self.options.show_connectivity and rooms is not None:
            centers = {
                room: self._center(models[room].lines)
                for room in models
                if models[room].lines
            }
            for a, b in sorted(rooms.connectivity):
                if a in centers and b in centers:
                    (x1, y1), (x2, y2) = px(*centers[a]), px(*centers[b])
                    parts.append(
                        f'  <line class="connectivity" x1="{x1:.1f}" y1="{y1:.1f}" '
                        f'x2="{x2:.1f}" y2="{y2:.1f}" stroke="#ff0000" stroke-width="1.5" '
                        f'stroke-dasharray="6 4" />'
                    )

        if state.pose is not None:
            cx, cy = px(state.pose.x, state.pose.y)
            hx, hy = px(
                state.pose.x + 0.4 * np.cos(state.pose.theta),
                state.pose.y + 0.4 * np.sin(state.pose.theta),
            )
            parts.append(
                f'  <circle class="pose" cx="{cx:.1f}" cy="{cy:.1f}" r="6" fill="#000000" />'
            )
            parts.append(
                f'  <line class="heading" x1="{cx:.1f}" y1="{cy:.1f}" x2="{hx:.1f}" y2="{hy:.1f}" '
                f'stroke="#000000" stroke-width="2" />'
            )
        parts.append("</svg>")
        return "\n".join(parts) + "\n"

    @staticmethod
    def _center(lines: Sequence[LineSegment]) -> tuple[float, float]:
        box = bounding_box(lines)
        return 0.5 * (box.min.x + box.max.x), 0.5 * (box.min.y + box.max.y)

    def write(self, state: MapState, path: Path | str) -> Path:
        """
        Render ``state`` and write it to ``path``.

        :raises OSError: If ``path`` cannot be written
        """
        path = Path(path)
        text = self.render(state)
        try:
            path.write_text(text)
        except OSError as e:
            raise OSError(f"Cannot write SVG to {path}: {e.strerror or e}") from e
        if self.logger:
            self.logger.debug(f"SVG written to {path}")
        return path


def export_svg(
    state: MapState,
    path: Path | str,
    options: SvgOptions | None = None,
    logger: MapLogger | None = None,
) -> Path:
    """
    Write an SVG snapshot of a map.

    :param state: Map to draw
    :type state: MapState
    :param path: Output file
    :type path: Path | str
    :param options: Rendering options
    :type options: SvgOptions | None, optional
    :param logger: Optional logger
    :type logger: MapLogger | None, optional
    :return: The written path
    :rtype: Path
    """
    return SvgExporter(options, logger).write(state, path)
