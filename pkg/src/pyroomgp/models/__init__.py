"""
pyroomgp.models - The three map model variants compared by the benchmark.

``standard_global`` fits one zero-mean GP-EDF to every scan point,
``line_global`` adds all wall segments as a line prior to one GP-EDF, and
``room_based`` segments rooms and keeps one GP-EDF per room.
"""

from ._base import FrameObservations, MapModel, UpdateTiming, observe_frame
from ._factory import clear_model_cache, get_map_model, get_model_class
from .line_global import LineGlobalModel
from .room_based import RoomBasedModel, reconcile_models
from .standard_global import StandardGlobalModel

__all__ = [
    "FrameObservations",
    "LineGlobalModel",
    "MapModel",
    "RoomBasedModel",
    "StandardGlobalModel",
    "UpdateTiming",
    "clear_model_cache",
    "get_map_model",
    "get_model_class",
    "observe_frame",
    "reconcile_models",
]
