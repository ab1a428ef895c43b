"""Tests for the room-local GP distance field."""

from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pyroomgp.config import GpHyper
from pyroomgp.geometry import LineSegment, Point2, min_segment_distance, segments_arrays
from pyroomgp.gpedf import (
    GpEdfModel,
    fit_batch,
    line_prior_mean,
    load_model_snapshot,
    log_line_prior,
    matern32,
    merge_models,
    predict_residual,
    query_distance,
    query_distances,
    query_gradient,
    save_model_snapshot,
    select_inducing,
    set_lines,
    split_model,
    transfer_lines,
    update_model,
)

HYPER = GpHyper()


def box_walls(x0: float, x1: float, y0: float = 0.0, y1: float = 3.0) -> list[LineSegment]:
    center = Point2(0.5 * (x0 + x1), 0.5 * (y0 + y1))
    corners = [Point2(x0, y0), Point2(x1, y0), Point2(x1, y1), Point2(x0, y1)]
    return [
        LineSegment.from_endpoints(a, b, center)
        for a, b in zip(corners, corners[1:] + corners[:1])
    ]


def circle(n: int, radius: float = 1.0, phase: float = 0.0) -> np.ndarray:
    t = phase + np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    return np.column_stack([radius * np.cos(t), radius * np.sin(t)])


def true_distance(points: np.ndarray, lines: list[LineSegment]) -> np.ndarray:
    starts, ends = segments_arrays(lines)
    return min_segment_distance(points, starts, ends)


WALL = LineSegment.from_endpoints(Point2(0, 0), Point2(1, 0), Point2(0.5, 1))


class TestKernelAndPrior:
    def test_kernel_at_zero(self):
        assert matern32(Point2(1, 1), Point2(1, 1), HYPER) == pytest.approx(1.0)

    def test_kernel_at_one_centimetre(self):
        assert matern32(Point2(0, 0), Point2(0.01, 0), HYPER) == pytest.approx(2 * math.exp(-1))

    def test_kernel_decreasing(self):
        r = np.linspace(0.0, 0.5, 50)
        k = matern32(np.zeros((1, 2)), np.column_stack([r, np.zeros_like(r)]), HYPER)[0]
        assert np.all(np.diff(k) < 0.0)

    def test_prior_on_line(self):
        assert line_prior_mean(Point2(0.3, 0.0), [WALL], 100.0) == pytest.approx(1.0)

    def test_prior_two_centimetres(self):
        assert line_prior_mean(Point2(0.5, 0.02), [WALL], 100.0) == pytest.approx(math.exp(-2))

    def test_prior_without_lines(self):
        assert line_prior_mean(Point2(0.5, 0.02), [], 100.0) == 0.0
        assert log_line_prior(Point2(0, 0), [], 100.0)[0] == -math.inf


class TestModelState:
    def test_inconsistent_shapes(self):
        with pytest.raises(ValueError, match="Inconsistent model state"):
            GpEdfModel(0, z=np.zeros((2, 2)), mean=np.zeros(1), cov=np.zeros((2, 2)))

    def test_empty(self):
        model = GpEdfModel.empty(3, lines=[WALL])
        assert model.room_id == 3
        assert model.n_inducing == 0
        assert not model.is_empty
        assert GpEdfModel.empty(3).is_empty


class TestQueries:
    @given(
        x=st.floats(min_value=-3.0, max_value=3.0),
        y=st.floats(min_value=-3.0, max_value=3.0),
    )
    @settings(max_examples=100, deadline=None)
    def test_prior_exactness(self, x, y):
        """With walls only the field is the exact distance to the nearest wall."""
        lines = box_walls(-1, 1, -1, 1)
        d = query_distance(GpEdfModel.empty(0, lines=lines), Point2(x, y)).distance
        assert d == pytest.approx(true_distance(np.array([[x, y]]), lines)[0], abs=1e-9)

    def test_prior_exactness_dense(self):
        lines = box_walls(-1, 1, -1, 1)
        pts = np.random.default_rng(3).uniform(-3.0, 3.0, size=(10_000, 2))
        truth = true_distance(pts, lines)
        keep = truth < HYPER.d_cap
        dist, _ = query_distances(GpEdfModel.empty(0, lines=lines), pts[keep])
        assert keep.sum() == 10_000
        assert np.max(np.abs(dist - truth[keep])) <= 1e-9

    def test_room_walls_match_brute_force(self):
        lines = box_walls(0, 4)
        rng = np.random.default_rng(0)
        pts = rng.uniform([0.0, 0.0], [4.0, 3.0], size=(300, 2))
        truth = true_distance(pts, lines)
        keep = (truth > 0) & (truth <= 2)
        pts, truth = pts[keep][:100], truth[keep][:100]
        dist, _ = query_distances(GpEdfModel.empty(0, lines=lines), pts)
        assert np.max(np.abs(dist - truth)) <= 0.1

    def test_on_line_is_zero(self):
        result = query_distance(GpEdfModel.empty(0, lines=[WALL]), Point2(0.5, 0.0))
        assert result.distance == pytest.approx(0.0, abs=1e-12)
        assert result.variance == pytest.approx(HYPER.signal_var)

    def test_clamped_far_away(self):
        model = GpEdfModel.empty(0, lines=[WALL])
        assert query_distance(model, Point2(0.5, 20.0)).distance == pytest.approx(HYPER.d_cap)
        assert query_distance(GpEdfModel.empty(0), Point2(0, 0)).distance == pytest.approx(
            HYPER.d_cap
        )

    def test_distance_never_negative(self):
        model = fit_batch(select_inducing(GpEdfModel.empty(0), circle(40)), circle(40))
        dist, var = query_distances(model, circle(100, radius=1.05))
        assert np.all(dist >= 0.0)
        assert np.all(var >= 0.0)

    def test_matern_reversion(self):
        model = GpEdfModel.empty(0, lines=[WALL])
        d = query_distance(model, Point2(0.5, 0.05), "matern").distance
        lr = 100.0 * d
        assert (1 + lr) * math.exp(-lr) == pytest.approx(math.exp(-5.0), rel=1e-6)
        assert d > 0.05

    def test_unknown_reversion(self):
        with pytest.raises(ValueError, match="Supported: log, matern"):
            query_distance(GpEdfModel.empty(0, lines=[WALL]), Point2(0, 1), "sqrt")


class TestGradient:
    def test_single_wall(self):
        result = query_gradient(GpEdfModel.empty(0, lines=[WALL]), Point2(0.5, 0.5))
        assert not result.clamped
        assert result.gradient.tolist() == pytest.approx([0.0, 1.0], abs=1e-6)

    def test_between_parallel_walls(self):
        top = LineSegment.from_endpoints(Point2(0, 2), Point2(1, 2), Point2(0.5, 1))
        result = query_gradient(GpEdfModel.empty(0, lines=[WALL, top]), Point2(0.5, 1.0))
        assert np.linalg.norm(result.gradient) == pytest.approx(0.0, abs=1e-6)

    def test_clamp_region(self):
        result = query_gradient(GpEdfModel.empty(0, lines=[WALL]), Point2(0.5, 30.0))
        assert result.clamped
        assert result.gradient.tolist() == [0.0, 0.0]

    def test_eikonal_in_closed_room(self):
        lines = box_walls(0, 4)
        model = GpEdfModel.empty(0, lines=lines)
        xs, ys = np.meshgrid(np.linspace(0.1, 3.9, 25), np.linspace(0.1, 2.9, 20))
        pts = np.column_stack([xs.ravel(), ys.ravel()])
        truth = true_distance(pts, lines)
        pts = pts[(truth > 0.3) & (truth < 2.0)]
        norms = np.array(
            [np.linalg.norm(query_gradient(model, Point2(*p)).gradient) for p in pts]
        )
        assert np.mean((norms >= 0.8) & (norms <= 1.2)) >= 0.9


class TestRoomWithObstacle:
    """A 6 x 4 m room with a round obstacle of radius 0.3 m known only from points."""

    CENTER = np.array([3.0, 2.0])
    RADIUS = 0.3

    @pytest.fixture(scope="class")
    def scene(self):
        walls = box_walls(0, 6, 0, 4)
        surface = self.CENTER + circle(200, self.RADIUS)
        model = select_inducing(GpEdfModel.empty(0, lines=walls), surface)
        model = update_model(model, surface)
        # offset columns keep grid points off the corner bisectors
        xs, ys = np.meshgrid(np.arange(0.05, 6.0, 0.1), np.arange(0.0, 4.0 + 1e-9, 0.1))
        grid = np.column_stack([xs.ravel(), ys.ravel()])
        to_surface = np.linalg.norm(grid[:, None, :] - surface[None, :, :], axis=2).min(axis=1)
        inside = np.linalg.norm(grid - self.CENTER, axis=1) < self.RADIUS
        truth = np.where(inside, 0.0, np.minimum(true_distance(grid, walls), to_surface))
        return model, grid, truth

    def test_distances_match_brute_force(self, scene):
        model, grid, truth = scene
        keep = (truth > 0.05) & (truth <= 2.0)
        dist, _ = query_distances(model, grid[keep])
        assert np.mean(np.abs(dist - truth[keep]) <= 0.1) >= 0.95

    def test_gradient_has_unit_norm(self, scene):
        model, grid, truth = scene
        pts = grid[(truth > 0.3) & (truth <= 2.0)]
        norms = np.array(
            [np.linalg.norm(query_gradient(model, Point2(*p)).gradient) for p in pts]
        )
        assert np.mean((norms >= 0.8) & (norms <= 1.2)) >= 0.9


class TestSelectInducing:
    def test_first_point_added(self):
        model = select_inducing(GpEdfModel.empty(0), [Point2(1, 1)])
        assert model.inducing_points == [Point2(1.0, 1.0)]
        assert model.cov == pytest.approx(np.array([[1.0]]))

    def test_duplicate_skipped(self):
        model = select_inducing(GpEdfModel.empty(0), [Point2(1, 1)])
        assert select_inducing(model, [Point2(1, 1)]) is model

    def test_close_point_skipped(self):
        model = select_inducing(GpEdfModel.empty(0), [Point2(0, 0), Point2(0.01, 0)])
        assert model.n_inducing == 1

    def test_distant_point_added(self):
        model = select_inducing(GpEdfModel.empty(0), [Point2(0, 0)])
        model = select_inducing(model, [Point2(1, 0)])
        assert model.n_inducing == 2
        assert model.mean.shape == (2,)

    def test_represented_batch_adds_nothing(self):
        pts = circle(200)
        model = select_inducing(GpEdfModel.empty(0), pts)
        assert 0 < model.n_inducing <= 200
        assert select_inducing(model, pts).n_inducing == model.n_inducing

    def test_inducing_points_distinct(self):
        model = select_inducing(GpEdfModel.empty(0), circle(200))
        k = matern32(model.z, model.z, HYPER)
        np.fill_diagonal(k, 0.0)
        assert np.all(k < HYPER.signal_var)


class TestUpdate:
    @pytest.fixture
    def obstacle(self):
        pts = circle(200)
        return pts, select_inducing(GpEdfModel.empty(0), pts)

    def test_empty_batch(self, obstacle):
        _, model = obstacle
        assert update_model(model, []) is model

    def test_non_finite_targets(self, obstacle):
        pts, model = obstacle
        with pytest.raises(ValueError, match="non-finite"):
            update_model(model, pts[:2], [1.0, math.nan])

    def test_target_count_mismatch(self, obstacle):
        pts, model = obstacle
        with pytest.raises(ValueError, match="targets"):
            update_model(model, pts[:3], [1.0])

    def test_without_inducing_points_counts_only(self):
        model = update_model(GpEdfModel.empty(0), circle(5))
        assert model.n_absorbed == 5

    def test_streaming_matches_batch_fit(self):
        """Six sequential batches give the same posterior as one batch fit on the same Z."""
        pts = circle(300)
        model = select_inducing(GpEdfModel.empty(0), pts)
        streamed = model
        for batch in np.array_split(pts, 6):
            streamed = update_model(streamed, batch)
        batched = fit_batch(model, pts)
        queries = circle(50, radius=1.01, phase=0.013)
        mean_s, _ = predict_residual(streamed, queries)
        mean_b, _ = predict_residual(batched, queries)
        assert np.max(np.abs(mean_s - mean_b)) <= 1e-3
        assert streamed.n_absorbed == batched.n_absorbed == 300

    def test_update_leaves_input_untouched(self, obstacle):
        pts, model = obstacle
        before = model.mean.copy()
        update_model(model, pts[:20])
        assert np.array_equal(model.mean, before)

    def test_covariance_stays_psd(self, obstacle):
        pts, model = obstacle
        for batch in np.array_split(pts, 8):
            model = update_model(model, batch)
        assert np.allclose(model.cov, model.cov.T)
        assert np.min(np.linalg.eigvalsh(model.cov)) >= -1e-8

    def test_measured_surface_is_near(self, obstacle):
        pts, model = obstacle
        model = update_model(model, pts)
        dist, _ = query_distances(model, pts)
        assert np.max(dist) <= 0.1

    def test_points_on_prior_lines_leave_zero_residual(self):
        pts = np.column_stack([np.linspace(0.0, 1.0, 30), np.zeros(30)])
        model = select_inducing(GpEdfModel.empty(0, lines=[WALL]), pts)
        model = update_model(model, pts)
        mean, _ = predict_residual(model, pts)
        assert np.max(np.abs(mean)) <= 1e-3


class TestSplitMerge:
    @pytest.fixture
    def parent(self):
        z = [Point2(1, 1), Point2(2, 2), Point2(6, 1)]
        model = select_inducing(GpEdfModel.empty(7, lines=box_walls(0, 4) + box_walls(4, 8)), z)
        return update_model(model, z)

    def test_split_conserves_inducing_points(self, parent):
        a, b = split_model(parent, box_walls(0, 4), box_walls(4, 8))
        assert a.n_inducing + b.n_inducing == parent.n_inducing
        assert a.inducing_points == [Point2(1, 1), Point2(2, 2)]
        assert b.inducing_points == [Point2(6, 1)]

    def test_split_carries_variational_blocks(self, parent):
        a, b = split_model(parent, box_walls(0, 4), box_walls(4, 8), (7, 9))
        assert a.mean == pytest.approx(parent.mean[:2])
        assert a.cov == pytest.approx(parent.cov[:2, :2])
        assert b.cov == pytest.approx(parent.cov[2:, 2:])
        assert (a.room_id, b.room_id) == (7, 9)

    def test_split_all_in_one_room(self):
        z = [Point2(1, 1), Point2(3, 2)]
        model = select_inducing(GpEdfModel.empty(0, lines=box_walls(0, 4) + box_walls(4, 8)), z)
        a, b = split_model(model, box_walls(0, 4), box_walls(4, 8))
        assert (a.n_inducing, b.n_inducing) == (2, 0)

    def test_split_overlap_positive_side(self):
        """A point in both boxes goes to the side whose nearest wall faces it."""
        walls_b = box_walls(4, 8)
        walls_b[3] = LineSegment.from_endpoints(Point2(4, 3), Point2(4, 0), Point2(3, 1.5))
        lines = box_walls(0, 5) + walls_b
        model = select_inducing(GpEdfModel.empty(0, lines=lines), [Point2(4.2, 1.5)])
        a, b = split_model(model, box_walls(0, 5), walls_b)
        assert (a.n_inducing, b.n_inducing) == (1, 0)

    def test_split_needs_lines(self, parent):
        with pytest.raises(ValueError, match="non-empty"):
            split_model(parent, box_walls(0, 4), [])

    def test_merge_with_empty(self, parent):
        assert merge_models(parent, GpEdfModel.empty(1)) is parent

    def test_merge_pools_lines_and_state(self, parent):
        a, b = split_model(parent, box_walls(0, 4), box_walls(4, 8), (0, 1))
        merged = merge_models(a, b)
        assert merged.room_id == 0
        assert len(merged.lines) == len(a.lines) + len(b.lines)
        assert merged.n_inducing == 3
        assert merged.cov[:2, 2:] == pytest.approx(np.zeros((2, 1)))

    def test_merge_drops_covered_points(self):
        m1 = select_inducing(GpEdfModel.empty(0), [Point2(0, 0), Point2(1, 0)])
        m2 = select_inducing(GpEdfModel.empty(1), [Point2(0, 0.001)])
        assert merge_models(m1, m2).n_inducing == 2

    def test_merge_hyper_mismatch(self):
        m1 = GpEdfModel.empty(0, lines=[WALL])
        m2 = GpEdfModel.empty(1, GpHyper(decay=50.0), lines=[WALL])
        with pytest.raises(ValueError, match="different hyperparameters"):
            merge_models(m1, m2)

    def test_merged_walls_still_near(self, parent):
        a, b = split_model(parent, box_walls(0, 4), box_walls(4, 8), (0, 1))
        merged = merge_models(a, b)
        wall_points = [s.midpoint for s in a.lines]
        assert all(query_distance(merged, p).distance <= 0.1 for p in wall_points)

    def test_set_lines_prunes_explained_points(self):
        model = select_inducing(GpEdfModel.empty(0), [Point2(0.5, 0.02), Point2(2, 2)])
        model = set_lines(model, [WALL])
        assert model.inducing_points == [Point2(2.0, 2.0)]
        assert model.lines == (WALL,)

    def test_transfer_lines(self, parent):
        src, dst = split_model(parent, box_walls(0, 4), box_walls(4, 8), (0, 1))
        moved = [src.lines[0]]
        new_src, new_dst = transfer_lines(src, dst, moved)
        assert moved[0] not in new_src.lines
        assert moved[0] in new_dst.lines
        assert new_src.n_inducing + new_dst.n_inducing == parent.n_inducing

    def test_transfer_nothing(self, parent):
        src, dst = split_model(parent, box_walls(0, 4), box_walls(4, 8), (0, 1))
        assert transfer_lines(src, dst, []) == (src, dst)


class TestSnapshots:
    def test_to_dict_keys(self):
        model = select_inducing(GpEdfModel.empty(2, lines=[WALL]), [Point2(3, 3)])
        data = model.to_dict()
        assert set(data) == {"room_id", "lines", "Z", "m_a", "hyper", "n_absorbed"}
        assert "S_a" in model.to_dict(include_cov=True)

    def test_save_and_load(self, temp_dir):
        model = update_model(
            select_inducing(GpEdfModel.empty(2, lines=[WALL]), [Point2(3, 3)]), [Point2(3, 3)]
        )
        path = save_model_snapshot(model, temp_dir / "m.json", include_cov=True)
        loaded = load_model_snapshot(path)
        assert loaded.room_id == 2
        assert loaded.lines == model.lines
        assert loaded.z == pytest.approx(model.z)
        assert loaded.cov == pytest.approx(model.cov)
        assert query_distance(loaded, Point2(3, 3)).distance == pytest.approx(
            query_distance(model, Point2(3, 3)).distance
        )

    def test_missing_covariance_is_zero(self):
        model = select_inducing(GpEdfModel.empty(2, lines=[WALL]), [Point2(3, 3)])
        loaded = GpEdfModel.from_dict(model.to_dict())
        assert loaded.cov.tolist() == [[0.0]]

    def test_missing_key(self):
        with pytest.raises(ValueError, match="missing key"):
            GpEdfModel.from_dict({"room_id": 0, "lines": []})

    def test_invalid_json(self, temp_dir):
        path = temp_dir / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ValueError, match="invalid JSON"):
            load_model_snapshot(path)

    def test_snapshot_is_plain_json(self):
        model = select_inducing(GpEdfModel.empty(2, lines=[WALL]), [Point2(3, 3)])
        assert json.loads(json.dumps(model.to_dict()))["Z"] == [[3.0, 3.0]]
