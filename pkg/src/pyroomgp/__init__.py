"""
pyroomgp - Room segmentation and room-local GP distance fields for 2D indoor mapping.

Extracts wall line segments from lidar scans, segments them into rooms by
spectral clustering of a visibility graph, and keeps one Gaussian-process
Euclidean distance field per room with the room's walls as prior. Ships a
deterministic lidar simulator and a benchmark comparing room-based and
global models.
"""

__title__ = "pyroomgp"
__version__ = "0.1.0"


from .config import GpHyper, LineParams, RunConfig, ScanParams, SegConfig, Variant, load_run_config
from .geometry import LineSegment, Point2
from .gpedf import GpEdfModel, query_distance, query_gradient
from .harness import (
    FrameMetrics,
    MapState,
    bench_models,
    run_pipeline,
    segmentation_quality,
)
from .logger import MapLogger
from .models import MapModel, get_map_model
from .segmentation import RoomSegmenter, RoomSet
from .svg_export import SvgOptions, export_svg
from .world_sim import FloorPlan, Pose, ScanFrame, grid_plan, loop_trajectory

__all__ = [
    "FloorPlan",
    "FrameMetrics",
    "GpEdfModel",
    "GpHyper",
    "LineParams",
    "LineSegment",
    "MapLogger",
    "MapModel",
    "MapState",
    "Point2",
    "Pose",
    "RoomSegmenter",
    "RoomSet",
    "RunConfig",
    "ScanFrame",
    "ScanParams",
    "SegConfig",
    "SvgOptions",
    "Variant",
    "bench_models",
    "export_svg",
    "get_map_model",
    "grid_plan",
    "load_run_config",
    "loop_trajectory",
    "query_distance",
    "query_gradient",
    "run_pipeline",
    "segmentation_quality",
    "__version__",
]
