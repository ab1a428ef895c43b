"""
Parameter groups and run configuration.

Every tunable constant of the pipeline lives in one of the dataclasses below,
with defaults taken from the reference experiment (corner threshold 0.4 m,
doorway interval [0.8, 3.0] m, visibility radius 8 m, ...). ``load_run_config``
reads the JSON config file used by the command line; the
``PYROOMGP_VARIANT`` and ``PYROOMGP_SEED`` environment variables override the
file.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import Any


class Variant(str, Enum):
    """Map model variants compared by the benchmark."""

    standard_global = "standard_global"
    line_global = "line_global"
    room_based = "room_based"


@dataclass(frozen=True)
class ScanParams:
    """
    Simulated 2D lidar.

    :param n_beams: Number of beams per scan
    :type n_beams: int
    :param fov: Field of view in radians, centered on the robot heading
    :type fov: float
    :param max_range: Returns beyond this range (m) are dropped
    :type max_range: float
    :param noise_sigma: Standard deviation (m) of the range noise
    :type noise_sigma: float
    :param seed: Seed of the per-frame noise streams
    :type seed: int
    """

    n_beams: int = 360
    fov: float = 2.0 * math.pi
    max_range: float = 8.0
    noise_sigma: float = 0.01
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_beams < 1:
            raise ValueError(f"n_beams must be >= 1 (got {self.n_beams})")
        if self.max_range <= 0.0:
            raise ValueError(f"max_range must be > 0 (got {self.max_range})")
        if self.noise_sigma < 0.0:
            raise ValueError(f"noise_sigma must be >= 0 (got {self.noise_sigma})")


@dataclass(frozen=True)
class LineParams:
    """Scan clustering, split-and-merge, and segment merging thresholds."""

    gap_threshold: float = 0.2
    split_deviation: float = 0.05
    min_points_per_segment: int = 8
    min_length: float = 0.3
    merge_angle_deg: float = 5.0
    merge_offset: float = 0.1
    merge_gap: float = 0.15

    def __post_init__(self) -> None:
        for name in ("gap_threshold", "split_deviation", "min_length", "merge_offset"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"LineParams.{name} must be > 0 (got {getattr(self, name)})")
        if self.min_points_per_segment < 2:
            raise ValueError("LineParams.min_points_per_segment must be >= 2")


@dataclass(frozen=True)
class SegConfig:
    """
    Room segmentation.

    :param corner_dist: Endpoint distance below which corners form (D_c)
    :param door_min: Lower bound of the doorway width interval (d_min)
    :param door_max: Upper bound of the doorway width interval (d_max)
    :param visibility_radius: Maximum segment distance for visibility edges (D_v)
    :param gamma_d: Rate of the segment-distance weight factor
    :param gamma_r: Rate of the robot-position weight factor
    :param fiedler_threshold: Split test threshold on the Fiedler value (T_lambda)
    :param edge_ratio_threshold: Split acceptance threshold on the edge ratio (T_e)
    :param k_max: Upper bound of the eigengap search
    :param min_length: Minimum segment length (L_min)
    :param parallel_angle_deg: Lines closer than this angle count as parallel
    :param eig_zero_tol: Eigenvalues below this count as zero
    :param collinear_offset: Lateral offset (m) under which parallel segments count as collinear
    :param min_room_segments: Fewest segments either half of an accepted split may hold
    """

    corner_dist: float = 0.4
    door_min: float = 0.8
    door_max: float = 3.0
    visibility_radius: float = 8.0
    gamma_d: float = 0.02
    gamma_r: float = 0.005
    fiedler_threshold: float = 0.18
    edge_ratio_threshold: float = 0.5
    k_max: int = 12
    min_length: float = 0.3
    parallel_angle_deg: float = 10.0
    eig_zero_tol: float = 1e-8
    collinear_offset: float = 0.1
    min_room_segments: int = 4

    def __post_init__(self) -> None:
        if not 0.0 < self.door_min < self.door_max:
            raise ValueError(
                f"Doorway interval must satisfy 0 < door_min < door_max "
                f"(got [{self.door_min}, {self.door_max}])"
            )
        if self.gamma_d < 0.0 or self.gamma_r < 0.0:
            raise ValueError("gamma_d and gamma_r must be >= 0")
        if self.k_max < 1:
            raise ValueError(f"k_max must be >= 1 (got {self.k_max})")
        if self.min_room_segments < 1:
            raise ValueError(f"min_room_segments must be >= 1 (got {self.min_room_segments})")


@dataclass(frozen=True)
class GpHyper:
    """
    GP-EDF hyperparameters (fixed, never learned).

    :param decay: Matérn decay rate lambda (1/m); also the prior and log-reversion rate
    :param signal_var: Kernel variance sigma^2
    :param noise_var: Observation noise variance sigma_n^2
    :param inducing_threshold: Max kernel value below which a point becomes inducing (T_Z)
    :param f_min: Lower clamp of the predictive mean before the log transform
    :param fd_step: Central-difference step (m) of gradient queries
    :param prune_radius: Inducing points this close to a new prior line are dropped
    :param jitter: Relative diagonal jitter added before factorisations
    :param reversion: ``"log"`` (d = -ln f / lambda) or ``"matern"`` (exact kernel inverse)
    """

    decay: float = 100.0
    signal_var: float = 1.0
    noise_var: float = 1e-4
    inducing_threshold: float = 1e-6
    f_min: float = 1e-300
    fd_step: float = 1e-3
    prune_radius: float = 0.05
    jitter: float = 1e-8
    reversion: str = "log"

    def __post_init__(self) -> None:
        for name in ("decay", "signal_var", "noise_var", "inducing_threshold", "f_min"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"GpHyper.{name} must be > 0 (got {getattr(self, name)})")
        if self.inducing_threshold >= self.signal_var:
            raise ValueError(
                f"inducing_threshold ({self.inducing_threshold}) must be below "
                f"signal_var ({self.signal_var})"
            )
        if self.reversion not in ("log", "matern"):
            raise ValueError(f"Unknown reversion '{self.reversion}'. Supported: log, matern")

    @property
    def d_cap(self) -> float:
        """Largest distance the clamp can report, ``-ln(f_min) / decay``."""
        return -math.log(self.f_min) / self.decay


# Symbolic parameter names accepted in config files.
_ALIASES = {
    "D_c": "corner_dist",
    "T_c": "corner_dist",
    "d_min": "door_min",
    "d_max": "door_max",
    "D_v": "visibility_radius",
    "T_lambda": "fiedler_threshold",
    "T_e": "edge_ratio_threshold",
    "L_min": "min_length",
    "lambda": "decay",
    "sigma2": "signal_var",
    "sigma_n2": "noise_var",
    "T_Z": "inducing_threshold",
}


@dataclass(frozen=True)
class RunConfig:
    """
    Everything one pipeline run needs.

    :param plan_path: Floor plan JSON file
    :param trajectory_path: Trajectory JSON file
    :param variant: Map model variant
    :param seed: Seed for scan noise and prediction probes
    :param output_dir: Directory for metrics / SVG output
    :param predict_batch: Number of free-space probes timed per frame
    """

    plan_path: Path
    trajectory_path: Path
    scan: ScanParams = field(default_factory=ScanParams)
    lines: LineParams = field(default_factory=LineParams)
    seg: SegConfig = field(default_factory=SegConfig)
    gp: GpHyper = field(default_factory=GpHyper)
    variant: Variant = Variant.room_based
    seed: int = 0
    output_dir: Path = Path("out")
    predict_batch: int = 100

    def validate_paths(self) -> None:
        """
        :raises FileNotFoundError: If the plan or trajectory file is missing
        """
        for path in (self.plan_path, self.trajectory_path):
            if not Path(path).exists():
                raise FileNotFoundError(f"Referenced file does not exist: {path}")


def _build_section(cls: type, data: dict[str, Any] | None, section: str) -> Any:
    """Instantiate a parameter dataclass from a (possibly aliased) mapping."""
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ValueError(f"Config section '{section}' must be an object")
    known = {f.name for f in fields(cls)}
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        name = _ALIASES.get(key, key)
        if name not in known:
            raise ValueError(
                f"Unknown key '{key}' in config section '{section}'. "
                f"Known keys: {', '.join(sorted(known))}"
            )
        kwargs[name] = value
    return cls(**kwargs)


def resolve_variant(
    variant: str | Variant | None = None, default: Variant | None = None
) -> Variant:
    """
    Resolve the model variant.

    Detection order:
    1. Explicit ``variant`` argument
    2. ``PYROOMGP_VARIANT`` environment variable
    3. ``default`` (``room_based`` when not given)

    :raises ValueError: If the name is not a known variant
    """
    if variant is None:
        variant = os.environ.get("PYROOMGP_VARIANT")
    if variant is None:
        return default or Variant.room_based
    if isinstance(variant, Variant):
        return variant
    name = variant.lower().strip()
    try:
        return Variant(name)
    except ValueError:
        raise ValueError(
            f"Unknown model variant '{variant}'. "
            f"Supported variants: {', '.join(v.value for v in Variant)}. "
            f"Set the PYROOMGP_VARIANT environment variable to override the config."
        ) from None


def load_run_config(path: Path | str, variant: str | None = None) -> RunConfig:
    """
    Read a run configuration file.

    Missing sections and keys take their defaults. ``plan`` and ``trajectory``
    are resolved relative to the config file.

    :param path: JSON config file
    :type path: Path | str
    :param variant: Explicit variant, overriding environment and file
    :type variant: str | None, optional
    :return: Parsed configuration
    :rtype: RunConfig
    :raises ValueError: On malformed content
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    for key in ("plan", "trajectory"):
        if key not in data:
            raise ValueError(f"{path}: missing required key '{key}'")

    base = path.parent
    seed = int(os.environ.get("PYROOMGP_SEED", data.get("seed", 0)))
    file_variant = resolve_variant(data["variant"]) if "variant" in data else None

    scan_data = dict(data.get("scan") or {})
    scan_data.setdefault("seed", seed)

    return RunConfig(
        plan_path=base / data["plan"],
        trajectory_path=base / data["trajectory"],
        scan=_build_section(ScanParams, scan_data, "scan"),
        lines=_build_section(LineParams, data.get("lines"), "lines"),
        seg=_build_section(SegConfig, data.get("segmentation"), "segmentation"),
        gp=_build_section(GpHyper, data.get("gp"), "gp"),
        variant=resolve_variant(variant, default=file_variant),
        seed=seed,
        output_dir=base / data.get("output_dir", "out"),
        predict_batch=int(data.get("predict_batch", 100)),
    )
