"""
pyroomgp.segmentation - Room segmentation from wall segments.

Builds the directed segment graph, the weighted visibility graph, and
maintains an incrementally updated room labelling over it.
"""

from .processing import (
    NodeKey,
    SegmentGraph,
    connect_corners,
    process_segments,
    split_at_corner,
    split_at_doorway,
)
from .rooms import (
    RoomSegmenter,
    RoomSet,
    RoomTransitions,
    SegmentationResult,
    evaluate_split,
    incremental_update,
    room_transitions,
)
from .spectral import (
    cpqr_assign,
    estimate_k_eigengap,
    fiedler_value,
    normalized_laplacian,
    spectral_cluster,
)
from .visibility import EdgeKind, VisibilityGraph, build_visibility_graph, edge_weight

__all__ = [
    "EdgeKind",
    "NodeKey",
    "RoomSegmenter",
    "RoomSet",
    "RoomTransitions",
    "SegmentGraph",
    "SegmentationResult",
    "VisibilityGraph",
    "build_visibility_graph",
    "connect_corners",
    "cpqr_assign",
    "edge_weight",
    "estimate_k_eigengap",
    "evaluate_split",
    "fiedler_value",
    "incremental_update",
    "normalized_laplacian",
    "process_segments",
    "room_transitions",
    "spectral_cluster",
    "split_at_corner",
    "split_at_doorway",
]
