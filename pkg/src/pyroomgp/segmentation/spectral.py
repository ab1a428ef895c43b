"""
Spectral clustering of the visibility graph.

The normalized symmetric Laplacian is decomposed densely, the cluster count
comes from the largest eigengap, and nodes are labelled deterministically with
a column-pivoted QR of the leading eigenvectors instead of k-means.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, NamedTuple

import numpy as np
import scipy.linalg

from ..config import SegConfig
from ..geometry import segment_segment_distance
from .processing import NodeKey
from .visibility import VisibilityGraph

if TYPE_CHECKING:
    from ..logger import MapLogger


class CpqrResult(NamedTuple):
    labels: np.ndarray
    pivots: np.ndarray
    singular: bool


class SpectralResult(NamedTuple):
    labels: dict[NodeKey, int]
    k: int
    eigenvalues: np.ndarray
    singular: bool


def normalized_laplacian(adjacency: np.ndarray) -> np.ndarray:
    """
    ``I - D^-1/2 A D^-1/2``.

    Isolated nodes get a zero row and column, so the multiplicity of the
    zero eigenvalue equals the number of connected components.
    """
    a = np.asarray(adjacency, dtype=float)
    deg = a.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    np.divide(1.0, np.sqrt(deg), out=inv_sqrt, where=deg > 0.0)
    lap = -(inv_sqrt[:, None] * a * inv_sqrt[None, :])
    lap[np.diag_indices_from(lap)] += (deg > 0.0).astype(float)
    return 0.5 * (lap + lap.T)


def laplacian_spectrum(adjacency: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues (clipped to [0, 2]) and eigenvectors of the normalized Laplacian."""
    vals, vecs = scipy.linalg.eigh(normalized_laplacian(adjacency))
    return np.clip(vals, 0.0, 2.0), vecs


def estimate_k_eigengap(eigenvalues: np.ndarray, k_max: int) -> int:
    """
    Number of clusters at the largest eigengap.

    ``k = argmax_i (lambda_{i+1} - lambda_i)`` over ``1 <= i < min(n, k_max)``;
    ties go to the smallest ``i``.

    :param eigenvalues: Ascending eigenvalues
    :type eigenvalues: np.ndarray
    :param k_max: Upper bound of the search
    :type k_max: int
    :return: Cluster count
    :rtype: int
    :raises ValueError: If fewer than two eigenvalues are given
    """
    vals = np.asarray(eigenvalues, dtype=float)
    if vals.size < 2:
        raise ValueError(f"estimate_k_eigengap needs at least 2 eigenvalues (got {vals.size})")
    m = min(vals.size, k_max)
    if m < 2:
        return 1
    gaps = np.diff(vals[:m])
    return int(np.argmax(gaps)) + 1


def cpqr_assign(u: np.ndarray, k: int) -> CpqrResult:
    """
    Label nodes from the first ``k`` eigenvectors.

    A column-pivoted QR of ``U^T`` picks ``k`` pivot nodes ``J``; node ``i``
    gets the column of the largest ``|(U U_J^-1)_ij|`` (lowest ``j`` on ties).
    When ``U_J`` is singular, nodes go to the nearest pivot row instead and
    the result is flagged.

    :param u: ``(n, >=k)`` eigenvector matrix
    :type u: np.ndarray
    :param k: Number of clusters
    :type k: int
    :return: Labels in ``[0, k)``, pivot node indices, singular flag
    :rtype: CpqrResult
    """
    u = np.asarray(u, dtype=float)[:, :k]
    n = u.shape[0]
    if k <= 1 or n == 0:
        return CpqrResult(np.zeros(n, dtype=int), np.zeros(min(n, 1), dtype=int), False)

    _, _, perm = scipy.linalg.qr(u.T, mode="economic", pivoting=True)
    pivots = np.asarray(perm[:k])
    u_j = u[pivots, :]
    singular = np.linalg.cond(u_j) > 1.0 / np.finfo(float).eps
    if not singular:
        try:
            coeff = np.linalg.solve(u_j.T, u.T).T
        except np.linalg.LinAlgError:
            singular = True
    if singular:
        dist = np.linalg.norm(u[:, None, :] - u_j[None, :, :], axis=2)
        return CpqrResult(np.argmin(dist, axis=1), pivots, True)
    return CpqrResult(np.argmax(np.abs(coeff), axis=1), pivots, False)


def fiedler_value(graph: VisibilityGraph | np.ndarray) -> float:
    """
    Second-smallest eigenvalue of the normalized Laplacian.

    :param graph: Visibility (sub)graph or its weight matrix
    :type graph: VisibilityGraph | np.ndarray
    :return: Fiedler value; 0 for a disconnected graph
    :rtype: float
    :raises ValueError: If the graph has fewer than two nodes
    """
    adjacency = graph.adjacency() if isinstance(graph, VisibilityGraph) else np.asarray(graph)
    if adjacency.shape[0] < 2:
        raise ValueError(f"fiedler_value needs at least 2 nodes (got {adjacency.shape[0]})")
    vals = scipy.linalg.eigh(normalized_laplacian(adjacency), eigvals_only=True)
    return float(np.clip(vals[1], 0.0, 2.0))


def label_by_nearest(
    gv: VisibilityGraph, labels: dict[NodeKey, int], unlabelled: list[NodeKey]
) -> None:
    """Give each node in ``unlabelled`` the label of its nearest labelled segment."""
    if not labels:
        for key in unlabelled:
            labels[key] = 0
        return
    labelled = list(labels.items())
    for key in unlabelled:
        seg = gv.segments[key]
        nearest = min(
            labelled,
            key=lambda kv: (segment_segment_distance(seg, gv.segments[kv[0]]), kv[0]),
        )
        labels[key] = nearest[1]


def spectral_cluster(
    gv: VisibilityGraph, cfg: SegConfig, k: int | None = None, logger: MapLogger | None = None
) -> SpectralResult:
    """
    Cluster the visibility graph.

    Nodes without edges are left out of the decomposition and take the label
    of the nearest clustered segment. With fewer than two connected nodes
    everything lands in one cluster.

    :param gv: Visibility graph
    :type gv: VisibilityGraph
    :param cfg: Segmentation parameters (``k_max``)
    :type cfg: SegConfig
    :param k: Fixed cluster count, overriding the eigengap estimate
    :type k: int | None, optional
    :param logger: Optional logger for the singular fallback
    :type logger: MapLogger | None, optional
    :return: Labels per node key, cluster count, spectrum, singular flag
    :rtype: SpectralResult
    """
    usable = [key for key in gv.nodes if gv.neighbors(key)]
    isolated = [key for key in gv.nodes if not gv.neighbors(key)]
    if len(usable) < 2:
        labels = {key: 0 for key in gv.nodes}
        return SpectralResult(labels, 1, np.zeros(len(usable)), False)

    vals, vecs = laplacian_spectrum(gv.adjacency(usable))
    if k is None:
        k = estimate_k_eigengap(vals, cfg.k_max)
    k = max(1, min(k, len(usable)))
    result = cpqr_assign(vecs, k)
    if result.singular and logger:
        logger.debug(f"CPQR pivot block singular for k={k}; assigned by nearest pivot")

    # relabel by first appearance so labels are 0..k'-1 and stable in key order
    remap: dict[int, int] = {}
    labels: dict[NodeKey, int] = {}
    for key, raw in zip(usable, result.labels):
        labels[key] = remap.setdefault(int(raw), len(remap))
    label_by_nearest(gv, labels, isolated)
    return SpectralResult(labels, len(remap), vals, result.singular)
