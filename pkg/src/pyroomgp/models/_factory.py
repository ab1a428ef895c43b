"""
Model variant factory.

Resolves the variant (explicit argument, then the PYROOMGP_VARIANT
environment variable, then ``room_based``) and builds the matching
:class:`MapModel` from a run configuration.
"""

from __future__ import annotations

from functools import lru_cache
from typing import TYPE_CHECKING

from ..config import GpHyper, LineParams, ScanParams, SegConfig, Variant, resolve_variant
from ._base import MapModel

if TYPE_CHECKING:
    from ..config import RunConfig
    from ..logger import MapLogger


@lru_cache(maxsize=None)
def get_model_class(variant: Variant) -> type:
    """
    Implementation class of a variant, imported on first use.

    :param variant: Resolved variant
    :type variant: Variant
    :return: Class implementing :class:`MapModel`
    :rtype: type
    """
    if variant is Variant.standard_global:
        from .standard_global import StandardGlobalModel

        return StandardGlobalModel

    if variant is Variant.line_global:
        from .line_global import LineGlobalModel

        return LineGlobalModel

    from .room_based import RoomBasedModel

    return RoomBasedModel


def get_map_model(
    variant: str | Variant | None = None,
    cfg: RunConfig | None = None,
    logger: MapLogger | None = None,
) -> MapModel:
    """
    Build a fresh map model.

    The detection order is:
    1. ``variant`` argument
    2. ``PYROOMGP_VARIANT`` environment variable
       (values: "standard_global", "line_global", "room_based")
    3. ``cfg.variant`` when a config is given, ``room_based`` otherwise

    :param variant: Variant name or enum member
    :type variant: str | Variant | None, optional
    :param cfg: Run configuration supplying the parameter groups; defaults when omitted
    :type cfg: RunConfig | None, optional
    :param logger: Logger handed to the model
    :type logger: MapLogger | None, optional
    :return: Model with no data
    :rtype: MapModel
    :raises ValueError: If the variant is not supported
    """
    resolved = resolve_variant(variant, default=cfg.variant if cfg else None)
    hyper = cfg.gp if cfg else GpHyper()
    lines = cfg.lines if cfg else LineParams()
    seg = cfg.seg if cfg else SegConfig()
    scan = cfg.scan if cfg else ScanParams()

    cls = get_model_class(resolved)
    if resolved is Variant.standard_global:
        return cls(hyper, logger=logger)
    if resolved is Variant.line_global:
        return cls(hyper, lines, logger=logger)
    return cls(hyper, lines, seg, max_range=scan.max_range, logger=logger)


def clear_model_cache() -> None:
    """
    Forget the imported variant classes.

    Useful in tests that patch a variant module between cases.
    """
    get_model_class.cache_clear()
