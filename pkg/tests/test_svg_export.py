"""Tests for SVG map rendering."""

from __future__ import annotations

import re

import numpy as np
import pytest

from pyroomgp.config import Variant
from pyroomgp.geometry import Aabb, LineSegment, Point2, min_segment_distance
from pyroomgp.gpedf import GpEdfModel, select_inducing
from pyroomgp.harness import MapState
from pyroomgp.segmentation.rooms import RoomSet
from pyroomgp.svg_export import PALETTE, SvgExporter, SvgOptions, contour_polylines, export_svg
from pyroomgp.world_sim import Pose


def box_walls(x0: float, y0: float, x1: float, y1: float) -> list[LineSegment]:
    center = Point2(0.5 * (x0 + x1), 0.5 * (y0 + y1))
    c = [Point2(x0, y0), Point2(x1, y0), Point2(x1, y1), Point2(x0, y1)]
    return [LineSegment.from_endpoints(a, b, center) for a, b in zip(c, c[1:] + c[:1])]


class StubModel:
    def __init__(
        self,
        models: dict[int, GpEdfModel],
        rooms: RoomSet | None = None,
        points: dict[int, np.ndarray] | None = None,
    ):
        self._models = models
        self._points = points or {}
        self.rooms = rooms

    def room_models(self) -> dict[int, GpEdfModel]:
        return self._models

    def residual_points(self) -> dict[int, np.ndarray]:
        return self._points


@pytest.fixture
def four_rooms():
    boxes = {0: (0, 0, 4, 3), 1: (4, 0, 8, 3), 2: (0, 3, 4, 6), 3: (4, 3, 8, 6)}
    models = {room: GpEdfModel.empty(room, lines=box_walls(*b)) for room, b in boxes.items()}
    return MapState(Variant.room_based, StubModel(models), Pose(0.0, 2.0, 1.5, 0.0))


@pytest.fixture
def one_room():
    model = GpEdfModel.empty(0, lines=box_walls(0, 0, 4, 3))
    return MapState(Variant.line_global, StubModel({0: model}), Pose(0.0, 2.0, 1.5, 0.0))


def segment_strokes(svg: str) -> list[str]:
    return re.findall(r'<line class="segment"[^>]*stroke="(#[0-9a-f]{6})"', svg)


class TestOptions:
    @pytest.mark.parametrize("field", ["grid_step", "scale"])
    def test_rejects_non_positive(self, field):
        with pytest.raises(ValueError, match=f"{field} must be > 0"):
            SvgOptions(**{field: 0.0})


class TestRender:
    def test_room_colors(self, four_rooms):
        svg = SvgExporter().render(four_rooms)
        strokes = segment_strokes(svg)
        assert len(strokes) == 16
        assert set(strokes) == set(PALETTE[:4])

    def test_document_shape(self, one_room):
        svg = SvgExporter(SvgOptions(margin=0.5, scale=10.0)).render(one_room)
        assert svg.startswith('<svg width="50" height="40"')
        assert svg.rstrip().endswith("</svg>")
        assert 'class="pose"' in svg
        assert 'class="heading"' in svg

    def test_no_contours_by_default(self, one_room):
        assert 'class="contour"' not in SvgExporter().render(one_room)

    def test_points_toggle(self):
        model = GpEdfModel.empty(0, lines=box_walls(0, 0, 4, 3))
        points = {0: np.array([[1.0, 1.0], [2.0, 1.0], [2.0, 2.0]])}
        state = MapState(Variant.line_global, StubModel({0: model}, points=points))
        assert SvgExporter().render(state).count('class="point"') == 3
        assert 'class="point"' not in SvgExporter(SvgOptions(show_points=False)).render(state)

    def test_draws_residual_points_not_inducing_points(self):
        walls = box_walls(0, 0, 4, 3)
        obstacle = np.array([[1.0, 1.0], [1.05, 1.0], [1.1, 1.0], [1.1, 1.05]])
        model = select_inducing(GpEdfModel.empty(0, lines=walls), obstacle)
        assert model.n_inducing < len(obstacle)
        state = MapState(Variant.line_global, StubModel({0: model}, points={0: obstacle}))
        svg = SvgExporter(SvgOptions(margin=0.0, scale=10.0)).render(state)
        centers = re.findall(r'class="point" data-room="0" cx="([^"]+)" cy="([^"]+)"', svg)
        assert [(float(x), float(y)) for x, y in centers] == [
            pytest.approx((10.0 * x, 10.0 * (3.0 - y))) for x, y in obstacle
        ]

    def test_points_only_map(self):
        points = {0: np.array([[0.0, 0.0], [2.0, 1.0]])}
        stub = StubModel({0: GpEdfModel.empty(0)}, points=points)
        state = MapState(Variant.standard_global, stub)
        svg = SvgExporter(SvgOptions(margin=0.5, scale=10.0)).render(state)
        assert svg.startswith('<svg width="30" height="20"')

    def test_connectivity(self, four_rooms):
        rooms = RoomSet(
            rooms={r: frozenset({(r, 0)}) for r in range(4)},
            connectivity=frozenset({(0, 1), (0, 2)}),
        )
        state = MapState(four_rooms.variant, StubModel(four_rooms.model.room_models(), rooms))
        assert SvgExporter().render(state).count('class="connectivity"') == 2
        options = SvgOptions(show_connectivity=False)
        assert 'class="connectivity"' not in SvgExporter(options).render(state)

    def test_empty_map(self):
        state = MapState(Variant.standard_global, StubModel({0: GpEdfModel.empty(0)}))
        with pytest.raises(ValueError, match="empty map"):
            SvgExporter().render(state)

    def test_export_writes_file(self, one_room, temp_dir, logger):
        path = export_svg(one_room, temp_dir / "map.svg", logger=logger)
        assert path.read_text().startswith("<svg")

    def test_unwritable_path(self, one_room, temp_dir):
        with pytest.raises(OSError, match="Cannot write SVG"):
            export_svg(one_room, temp_dir / "missing" / "map.svg")


class TestContours:
    @pytest.fixture(autouse=True)
    def _needs_skimage(self):
        pytest.importorskip("skimage")

    def test_zero_level_hugs_walls(self):
        walls = box_walls(0, 0, 4, 3)
        model = GpEdfModel.empty(0, lines=walls)
        pieces = contour_polylines(model, Aabb(Point2(0, 0), Point2(4, 3)), 0.0, 0.1)
        assert pieces
        starts = np.array([s.p1.as_tuple() for s in walls])
        ends = np.array([s.p2.as_tuple() for s in walls])
        for piece in pieces:
            assert np.all(min_segment_distance(piece, starts, ends) <= 0.15)

    def test_level_distance(self):
        walls = box_walls(0, 0, 4, 3)
        model = GpEdfModel.empty(0, lines=walls)
        pieces = contour_polylines(model, Aabb(Point2(0, 0), Point2(4, 3)), 1.0, 0.05)
        starts = np.array([s.p1.as_tuple() for s in walls])
        ends = np.array([s.p2.as_tuple() for s in walls])
        dist = np.concatenate([min_segment_distance(p, starts, ends) for p in pieces])
        assert dist == pytest.approx(1.0, abs=0.05)

    def test_tiny_box(self):
        model = GpEdfModel.empty(0, lines=box_walls(0, 0, 4, 3))
        assert contour_polylines(model, Aabb(Point2(1, 1), Point2(1.01, 1.01)), 0.5) == []

    def test_render_contours(self, four_rooms):
        svg = SvgExporter(SvgOptions(contours=True, levels=(0.0, 0.5))).render(four_rooms)
        levels = set(re.findall(r'class="contour" data-level="([^"]+)"', svg))
        assert levels == {"0", "0.5"}
