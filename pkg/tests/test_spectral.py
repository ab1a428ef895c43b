"""Tests for spectral clustering of the visibility graph."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from pyroomgp.config import SegConfig
from pyroomgp.geometry import LineSegment, Point2
from pyroomgp.segmentation import (
    EdgeKind,
    VisibilityGraph,
    cpqr_assign,
    estimate_k_eigengap,
    fiedler_value,
    normalized_laplacian,
    spectral_cluster,
)
from pyroomgp.segmentation.spectral import laplacian_spectrum

CFG = SegConfig()


def clique(n: int) -> np.ndarray:
    return np.ones((n, n)) - np.eye(n)


def two_cliques(n: int = 4, bridge: float = 0.0) -> np.ndarray:
    a = np.zeros((2 * n, 2 * n))
    a[:n, :n] = clique(n)
    a[n:, n:] = clique(n)
    a[n - 1, n] = a[n, n - 1] = bridge
    return a


def graph_from(adjacency: np.ndarray, extra_nodes: int = 0) -> VisibilityGraph:
    """A visibility graph with one short wall per node laid out along the x axis."""
    n = adjacency.shape[0] + extra_nodes
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


def partition(labels) -> set[frozenset]:
    groups: dict[int, set] = {}
    for node, label in labels.items() if isinstance(labels, dict) else enumerate(labels):
        groups.setdefault(int(label), set()).add(node)
    return {frozenset(g) for g in groups.values()}


def best_ncut(a: np.ndarray) -> set[frozenset]:
    """Brute-force minimum normalized cut over all bipartitions."""
    n = a.shape[0]
    deg = a.sum(axis=1)
    best, best_cost = None, np.inf
    for size in range(1, n // 2 + 1):
        for side in itertools.combinations(range(n), size):
            s = np.zeros(n, dtype=bool)
            s[list(side)] = True
            cut = a[s][:, ~s].sum()
            cost = cut / deg[s].sum() + cut / deg[~s].sum()
            if cost < best_cost:
                best_cost = cost
                best = {frozenset(np.flatnonzero(s)), frozenset(np.flatnonzero(~s))}
    return best


class TestNormalizedLaplacian:
    def test_clique(self):
        lap = normalized_laplacian(clique(3))
        assert np.allclose(np.diag(lap), 1.0)
        assert np.allclose(lap[0, 1], -0.5)

    def test_isolated_node_zero_row(self):
        a = np.zeros((3, 3))
        a[0, 1] = a[1, 0] = 1.0
        lap = normalized_laplacian(a)
        assert np.all(lap[2] == 0.0)

    def test_zero_multiplicity_counts_components(self):
        vals, _ = laplacian_spectrum(two_cliques())
        assert np.sum(vals < 1e-9) == 2


class TestEstimateK:
    @pytest.mark.parametrize(
        "vals,expected",
        [
            ([0.0, 0.0, 0.0, 0.8, 0.9], 3),
            ([0.0, 1.0, 1.1, 1.2], 1),
            ([0.0, 0.5, 1.0], 1),
        ],
    )
    def test_largest_gap(self, vals, expected):
        assert estimate_k_eigengap(np.array(vals), 12) == expected

    def test_k_max_bounds_search(self):
        assert estimate_k_eigengap(np.array([0.0, 0.0, 0.0, 0.8]), 2) == 1

    def test_needs_two_values(self):
        with pytest.raises(ValueError, match="at least 2"):
            estimate_k_eigengap(np.array([0.0]), 12)


class TestCpqrAssign:
    def test_disjoint_cliques(self):
        _, vecs = laplacian_spectrum(two_cliques())
        result = cpqr_assign(vecs, 2)
        assert not result.singular
        assert partition(result.labels) == {frozenset(range(4)), frozenset(range(4, 8))}

    def test_single_cluster(self):
        _, vecs = laplacian_spectrum(clique(4))
        assert cpqr_assign(vecs, 1).labels.tolist() == [0, 0, 0, 0]

    def test_permutation_equivariant(self):
        a = two_cliques(bridge=0.01)
        perm = np.random.default_rng(3).permutation(8)
        _, vecs = laplacian_spectrum(a)
        _, vecs_p = laplacian_spectrum(a[np.ix_(perm, perm)])
        base = partition(cpqr_assign(vecs, 2).labels)
        permuted = partition(cpqr_assign(vecs_p, 2).labels)
        mapped = {frozenset(int(perm[i]) for i in group) for group in permuted}
        assert mapped == base

    def test_weight_scaling_invariant(self):
        a = two_cliques(bridge=0.01)
        _, vecs = laplacian_spectrum(a)
        _, vecs_s = laplacian_spectrum(0.37 * a)
        assert partition(cpqr_assign(vecs, 2).labels) == partition(cpqr_assign(vecs_s, 2).labels)


class TestFiedlerValue:
    def test_disconnected(self):
        assert fiedler_value(two_cliques()) == pytest.approx(0.0, abs=1e-9)

    def test_two_nodes(self):
        assert fiedler_value(clique(2)) == pytest.approx(2.0)

    @pytest.mark.parametrize("n", [3, 4, 6])
    def test_complete_graph(self, n):
        assert fiedler_value(clique(n)) == pytest.approx(n / (n - 1))

    def test_accepts_visibility_graph(self):
        assert fiedler_value(graph_from(clique(4))) == pytest.approx(4 / 3)

    def test_needs_two_nodes(self):
        with pytest.raises(ValueError, match="at least 2 nodes"):
            fiedler_value(np.zeros((1, 1)))


class TestSpectralCluster:
    def test_two_rooms(self):
        result = spectral_cluster(graph_from(two_cliques()), CFG)
        assert result.k == 2
        assert partition(result.labels) == {
            frozenset((i, 0) for i in range(4)),
            frozenset((i, 0) for i in range(4, 8)),
        }

    def test_one_room(self):
        result = spectral_cluster(graph_from(clique(4)), CFG)
        assert result.k == 1
        assert set(result.labels.values()) == {0}

    def test_weak_bridge_matches_min_ncut(self):
        a = two_cliques(bridge=0.01)
        result = spectral_cluster(graph_from(a), CFG)
        assert result.k == 2
        labels = {i: result.labels[(i, 0)] for i in range(8)}
        assert partition(labels) == best_ncut(a)

    def test_labels_numbered_in_key_order(self):
        result = spectral_cluster(graph_from(two_cliques()), CFG)
        assert result.labels[(0, 0)] == 0
        assert result.labels[(7, 0)] == 1

    def test_fixed_k(self):
        result = spectral_cluster(graph_from(two_cliques()), CFG, k=1)
        assert result.k == 1
        assert set(result.labels.values()) == {0}

    def test_isolated_node_joins_nearest(self, logger):
        gv = graph_from(two_cliques(), extra_nodes=1)
        result = spectral_cluster(gv, CFG, logger=logger)
        assert result.labels[(8, 0)] == result.labels[(7, 0)]

    def test_too_few_connected_nodes(self):
        result = spectral_cluster(graph_from(np.zeros((3, 3))), CFG)
        assert result.k == 1
        assert result.labels == {(0, 0): 0, (1, 0): 0, (2, 0): 0}
