"""
Room-local Gaussian process distance fields.

Each model regresses an occupancy-like field ``f`` with value 1 on surfaces.
Walls enter analytically through the line prior ``m_L(x) = exp(-lambda *
min_i d(x, l_i))``; the GP only models the residual ``1 - m_L`` at the
remaining (obstacle) points, summarised by a Gaussian ``q(u) = N(m, S)`` over
adaptively selected inducing points. Distance is read back as
``d = -ln(f) / lambda``.

Hyperparameters are fixed. Every operation returns a new model and leaves its
input untouched, so a model can be queried while the next one is built.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import TYPE_CHECKING, Any, NamedTuple, Sequence

import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist

from .config import GpHyper
from .geometry import (
    Aabb,
    LineSegment,
    Point2,
    bounding_box,
    min_segment_distance,
    segment_point_distance,
    segments_arrays,
    signed_offset,
)

if TYPE_CHECKING:
    from .logger import MapLogger

PointsLike = Sequence[Point2] | np.ndarray


class DistanceResult(NamedTuple):
    distance: float
    variance: float


class GradientResult(NamedTuple):
    gradient: np.ndarray
    clamped: bool


def _as_array(points: PointsLike | Point2) -> np.ndarray:
    if isinstance(points, Point2):
        return np.array([[points.x, points.y]])
    if isinstance(points, np.ndarray):
        return np.atleast_2d(points.astype(float)).reshape(-1, 2)
    if len(points) == 0:
        return np.zeros((0, 2))
    return np.array([p.as_tuple() for p in points], dtype=float)


def matern32(
    x: Point2 | np.ndarray, x2: Point2 | np.ndarray, hyper: GpHyper
) -> float | np.ndarray:
    """
    Matérn 3/2 covariance with ``lambda`` as a decay rate.

    ``k(r) = sigma^2 (1 + lambda r) exp(-lambda r)``. Two points give a float,
    point arrays a ``(N, M)`` matrix.
    """
    a, b = _as_array(x), _as_array(x2)
    lr = hyper.decay * cdist(a, b)
    k = hyper.signal_var * (1.0 + lr) * np.exp(-lr)
    if isinstance(x, Point2) and isinstance(x2, Point2):
        return float(k[0, 0])
    return k


def log_line_prior(
    points: PointsLike | Point2, lines: Sequence[LineSegment], decay: float
) -> np.ndarray:
    """``-lambda * min_i d(x, l_i)``; ``-inf`` without lines."""
    starts, ends = segments_arrays(lines)
    return -decay * min_segment_distance(_as_array(points), starts, ends)


def line_prior_mean(
    x: Point2 | PointsLike, lines: Sequence[LineSegment], decay: float
) -> float | np.ndarray:
    """
    Line segment prior ``exp(-lambda * min_i d(x, l_i))``.

    :param x: Query point or points
    :param lines: Prior line set; empty gives 0
    :param decay: Rate ``lambda`` (1/m)
    :return: Prior value(s) in [0, 1]
    """
    values = np.exp(log_line_prior(x, lines, decay))
    return float(values[0]) if isinstance(x, Point2) else values


@dataclass(frozen=True, eq=False)
class GpEdfModel:
    """
    One room's distance field.

    :param room_id: Room the model belongs to
    :param lines: Prior wall segments
    :param z: ``(M, 2)`` inducing points
    :param mean: Variational mean over the inducing values
    :param cov: Variational covariance over the inducing values
    :param hyper: Fixed hyperparameters
    :param n_absorbed: Number of measurements the state summarises
    """

    room_id: int
    lines: tuple[LineSegment, ...] = ()
    z: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    mean: np.ndarray = field(default_factory=lambda: np.zeros(0))
    cov: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    hyper: GpHyper = field(default_factory=GpHyper)
    n_absorbed: int = 0

    def __post_init__(self) -> None:
        m = self.z.shape[0]
        if self.z.shape != (m, 2) or self.mean.shape != (m,) or self.cov.shape != (m, m):
            raise ValueError(
                f"Inconsistent model state: z {self.z.shape}, mean {self.mean.shape}, "
                f"cov {self.cov.shape}"
            )

    @property
    def n_inducing(self) -> int:
        return self.z.shape[0]

    @property
    def inducing_points(self) -> list[Point2]:
        return [Point2(float(x), float(y)) for x, y in self.z]

    @property
    def is_empty(self) -> bool:
        return not self.lines and self.n_inducing == 0

    @cached_property
    def _line_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return segments_arrays(self.lines)

    @cached_property
    def _kzz_factor(self) -> tuple[np.ndarray, bool]:
        kzz = matern32(self.z, self.z, self.hyper)
        kzz[np.diag_indices_from(kzz)] += self.hyper.jitter * self.hyper.signal_var
        return scipy.linalg.cho_factor(kzz, lower=True)

    @cached_property
    def _alpha(self) -> np.ndarray:
        """``K_zz^-1 m``."""
        return scipy.linalg.cho_solve(self._kzz_factor, self.mean)

    @cached_property
    def _var_core(self) -> np.ndarray:
        """``K_zz^-1 S K_zz^-1 - K_zz^-1``."""
        kinv = scipy.linalg.cho_solve(self._kzz_factor, np.eye(self.n_inducing))
        return kinv @ self.cov @ kinv - kinv

    @classmethod
    def empty(
        cls, room_id: int, hyper: GpHyper | None = None, lines: Sequence[LineSegment] = ()
    ) -> GpEdfModel:
        return cls(room_id=room_id, lines=tuple(lines), hyper=hyper or GpHyper())

    def to_dict(self, include_cov: bool = False) -> dict[str, Any]:
        """
        JSON-ready snapshot.

        :param include_cov: Also export the variational covariance ``S_a``
        :type include_cov: bool, optional
        """
        out: dict[str, Any] = {
            "room_id": self.room_id,
            "lines": [
                {
                    "id": s.id,
                    "p1": list(s.p1.as_tuple()),
                    "p2": list(s.p2.as_tuple()),
                    "normal": list(s.normal),
                    "last_robot_pos": list(s.last_robot_pos.as_tuple()),
                }
                for s in self.lines
            ],
            "Z": self.z.tolist(),
            "m_a": self.mean.tolist(),
            "hyper": asdict(self.hyper),
            "n_absorbed": self.n_absorbed,
        }
        if include_cov:
            out["S_a"] = self.cov.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> GpEdfModel:
        """
        Rebuild a model from :meth:`to_dict` output.

        Without ``S_a`` the covariance is taken as zero, so variances only
        reflect the prior term.

        :raises ValueError: On missing keys or inconsistent shapes
        """
        try:
            lines = tuple(
                LineSegment(
                    Point2(*line["p1"]),
                    Point2(*line["p2"]),
                    (float(line["normal"][0]), float(line["normal"][1])),
                    Point2(*line.get("last_robot_pos", line["p1"])),
                    int(line.get("id", -1)),
                )
                for line in data["lines"]
            )
            z = np.asarray(data["Z"], dtype=float).reshape(-1, 2)
            mean = np.asarray(data["m_a"], dtype=float)
            room_id = int(data["room_id"])
        except KeyError as e:
            raise ValueError(f"Model snapshot is missing key {e}") from e
        m = len(mean)
        cov = np.asarray(data["S_a"], dtype=float) if "S_a" in data else np.zeros((m, m))
        hyper = GpHyper(**data["hyper"]) if "hyper" in data else GpHyper()
        return cls(room_id, lines, z, mean, cov, hyper, int(data.get("n_absorbed", 0)))


def save_model_snapshot(model: GpEdfModel, path: Path | str, include_cov: bool = False) -> Path:
    """Write :meth:`GpEdfModel.to_dict` as JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(model.to_dict(include_cov), indent=2))
    return path


def load_model_snapshot(path: Path | str) -> GpEdfModel:
    """
    Read a model snapshot.

    :raises ValueError: If the file is not valid JSON or misses required keys
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e
    return GpEdfModel.from_dict(data)


def _marginal(model: GpEdfModel, keep: np.ndarray, **changes: Any) -> GpEdfModel:
    """Model restricted to the inducing points ``keep`` (indices or mask)."""
    idx = np.flatnonzero(keep) if keep.dtype == bool else np.asarray(keep, dtype=int)
    return replace(
        model,
        z=model.z[idx],
        mean=model.mean[idx],
        cov=model.cov[np.ix_(idx, idx)],
        **changes,
    )


def select_inducing(model: GpEdfModel, new_points: PointsLike) -> GpEdfModel:
    """
    Grow the inducing set with points the current set does not cover.

    Points are visited in order; a point joins ``Z`` when its largest kernel
    value against ``Z`` (including points added before it) is below
    ``inducing_threshold``. New inducing values enter ``q(u)`` with their
    prior conditional given the existing ones.

    :param model: Model to extend
    :type model: GpEdfModel
    :param new_points: Candidate points, already assigned to this room
    :type new_points: Sequence[Point2] | np.ndarray
    :return: Model with the grown inducing set
    :rtype: GpEdfModel
    """
    pts = _as_array(new_points)
    if pts.shape[0] == 0:
        return model
    hyper = model.hyper
    added: list[np.ndarray] = []
    z_all = model.z
    for x in pts:
        if z_all.shape[0]:
            kmax = float(matern32(x[None, :], z_all, hyper).max())
            if kmax >= hyper.inducing_threshold:
                continue
        added.append(x)
        z_all = np.vstack([z_all, x[None, :]])
    if not added:
        return model

    zc = np.array(added)
    kcc = matern32(zc, zc, hyper)
    if model.n_inducing == 0:
        return replace(model, z=zc, mean=np.zeros(len(zc)), cov=kcc)

    kca = matern32(zc, model.z, hyper)
    proj = scipy.linalg.cho_solve(model._kzz_factor, kca.T).T
    cross = model.cov @ proj.T
    cov_cc = kcc - proj @ kca.T + proj @ cross
    cov = np.block([[model.cov, cross], [cross.T, cov_cc]])
    return replace(
        model,
        z=np.vstack([model.z, zc]),
        mean=np.concatenate([model.mean, proj @ model.mean]),
        cov=0.5 * (cov + cov.T),
    )


def update_model(
    model: GpEdfModel, points: PointsLike, targets: Sequence[float] | np.ndarray | None = None
) -> GpEdfModel:
    """
    Absorb a batch of surface measurements.

    The GP regresses the residual ``y - m_L(x)`` (``y = 1`` by default)
    through the projection ``f = K_xz K_zz^-1 u``; the Gaussian ``q(u)`` is
    updated in closed form, carrying the previous posterior as the prior of
    the new batch. On a fixed inducing set any split of the data into
    batches gives the same posterior as one batch fit.

    :param model: Model to update
    :type model: GpEdfModel
    :param points: Measurement positions
    :type points: Sequence[Point2] | np.ndarray
    :param targets: Target values, all 1 when omitted
    :type targets: Sequence[float] | np.ndarray | None, optional
    :return: Updated model
    :rtype: GpEdfModel
    :raises ValueError: On non-finite targets or a length mismatch
    """
    x = _as_array(points)
    n = x.shape[0]
    if n == 0:
        return model
    y = np.ones(n) if targets is None else np.asarray(targets, dtype=float).reshape(-1)
    if y.shape[0] != n:
        raise ValueError(f"Got {n} points but {y.shape[0]} targets")
    if not np.all(np.isfinite(y)):
        raise ValueError("update_model received non-finite targets")
    if model.n_inducing == 0:
        return replace(model, n_absorbed=model.n_absorbed + n)

    hyper = model.hyper
    resid = y - np.exp(log_line_prior(x, model.lines, hyper.decay))
    proj = scipy.linalg.cho_solve(model._kzz_factor, matern32(x, model.z, hyper).T).T
    s_proj = model.cov @ proj.T
    innovation = proj @ s_proj
    innovation[np.diag_indices_from(innovation)] += hyper.noise_var
    gain = scipy.linalg.cho_solve(scipy.linalg.cho_factor(innovation, lower=True), s_proj.T).T
    mean = model.mean + gain @ (resid - proj @ model.mean)
    cov = model.cov - gain @ s_proj.T
    return replace(model, mean=mean, cov=0.5 * (cov + cov.T), n_absorbed=model.n_absorbed + n)


def fit_batch(
    model: GpEdfModel, points: PointsLike, targets: Sequence[float] | np.ndarray | None = None
) -> GpEdfModel:
    """
    Fit ``q(u)`` from scratch on the model's inducing points.

    The optimal Gaussian for all measurements at once,
    ``S = K (K + K_zx K_xz / sigma_n^2)^-1 K`` and
    ``m = S K^-1 K_zx r / sigma_n^2`` with ``r`` the residual targets.
    Any previous ``(m, S)`` is discarded.

    :raises ValueError: On non-finite targets or a length mismatch
    """
    x = _as_array(points)
    n = x.shape[0]
    y = np.ones(n) if targets is None else np.asarray(targets, dtype=float).reshape(-1)
    if y.shape[0] != n:
        raise ValueError(f"Got {n} points but {y.shape[0]} targets")
    if not np.all(np.isfinite(y)):
        raise ValueError("fit_batch received non-finite targets")
    if model.n_inducing == 0:
        return replace(model, n_absorbed=n)

    hyper = model.hyper
    resid = y - np.exp(log_line_prior(x, model.lines, hyper.decay))
    kzz = matern32(model.z, model.z, hyper)
    kzx = matern32(model.z, x, hyper)
    sigma = kzz + (kzx @ kzx.T) / hyper.noise_var
    sigma[np.diag_indices_from(sigma)] += hyper.jitter * hyper.signal_var
    factor = scipy.linalg.cho_factor(sigma, lower=True)
    mean = kzz @ scipy.linalg.cho_solve(factor, kzx @ resid) / hyper.noise_var
    cov = kzz @ scipy.linalg.cho_solve(factor, kzz)
    return replace(model, mean=mean, cov=0.5 * (cov + cov.T), n_absorbed=n)


def predict_residual(model: GpEdfModel, points: PointsLike) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance of the residual field."""
    x = _as_array(points)
    prior_var = np.full(x.shape[0], model.hyper.signal_var)
    if model.n_inducing == 0:
        return np.zeros(x.shape[0]), prior_var
    kxz = matern32(x, model.z, model.hyper)
    mean = kxz @ model._alpha
    var = prior_var + np.einsum("ij,jk,ik->i", kxz, model._var_core, kxz)
    return mean, np.maximum(var, 0.0)


def _matern_inverse(f: np.ndarray, decay: float) -> np.ndarray:
    """Solve ``(1 + lambda r) exp(-lambda r) = f`` for ``r`` by Newton steps."""
    log_f = np.log(f)
    r = -log_f / decay
    for _ in range(50):
        lr = decay * r
        g = np.log1p(lr) - lr - log_f
        slope = -decay * lr / (1.0 + lr)
        step = np.divide(g, slope, out=np.zeros_like(g), where=slope < 0.0)
        r = r - step
        if np.all(np.abs(step) <= 1e-12):
            break
    return np.maximum(r, 0.0)


def query_distances(
    model: GpEdfModel, points: PointsLike, reversion: str | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """
    Distances and residual variances at many points.

    The prior term stays in log form, so with no residual data the distance
    to the nearest prior line is returned unchanged up to ``d_cap``.

    :param model: Distance field
    :type model: GpEdfModel
    :param points: Query points
    :type points: Sequence[Point2] | np.ndarray
    :param reversion: ``"log"`` or ``"matern"``; the model's setting when omitted
    :type reversion: str | None, optional
    :return: Distances in ``[0, d_cap]`` and residual variances
    :rtype: tuple[np.ndarray, np.ndarray]
    """
    hyper = model.hyper
    reversion = reversion or hyper.reversion
    if reversion not in ("log", "matern"):
        raise ValueError(f"Unknown reversion '{reversion}'. Supported: log, matern")

    x = _as_array(points)
    log_prior = log_line_prior(x, model.lines, hyper.decay)
    resid, var = predict_residual(model, x)

    log_f = log_prior.copy()
    pos = resid > 0.0
    log_f[pos] = np.logaddexp(log_prior[pos], np.log(resid[pos]))
    neg = resid < 0.0
    if np.any(neg):
        total = np.exp(log_prior[neg]) + resid[neg]
        log_f[neg] = np.log(np.maximum(total, hyper.f_min))
    log_f = np.clip(log_f, math.log(hyper.f_min), 0.0)

    if reversion == "log":
        dist = -log_f / hyper.decay
    else:
        dist = np.minimum(_matern_inverse(np.exp(log_f), hyper.decay), hyper.d_cap)
    return dist, var


def query_distance(model: GpEdfModel, x: Point2, reversion: str | None = None) -> DistanceResult:
    """
    Distance to the nearest surface at ``x`` and the residual variance there.

    ``d = -ln(clamp(f, f_min, 1)) / lambda`` with ``f`` the prior plus the
    residual posterior mean.
    """
    dist, var = query_distances(model, x, reversion)
    return DistanceResult(float(dist[0]), float(var[0]))


def query_gradient(model: GpEdfModel, x: Point2, reversion: str | None = None) -> GradientResult:
    """
    Central-difference gradient of the distance field.

    Inside the clamp region (``d = d_cap``) the field is flat; a zero vector
    is returned with ``clamped=True``.
    """
    h = model.hyper.fd_step
    probes = np.array(
        [[x.x, x.y], [x.x + h, x.y], [x.x - h, x.y], [x.x, x.y + h], [x.x, x.y - h]]
    )
    dist, _ = query_distances(model, probes, reversion)
    if dist[0] >= model.hyper.d_cap - 1e-12:
        return GradientResult(np.zeros(2), True)
    grad = np.array([dist[1] - dist[2], dist[3] - dist[4]]) / (2.0 * h)
    return GradientResult(grad, False)


def _owners(z: np.ndarray, groups: Sequence[Sequence[LineSegment]]) -> np.ndarray:
    """
    Index of the line group owning each inducing point.

    Box containment first; when a point is in several boxes or none, the
    positive-side test against each group's nearest segment; when that is
    still ambiguous, the group with the closest segment.
    """
    boxes: list[Aabb] = [bounding_box(g) for g in groups]
    owners = np.zeros(z.shape[0], dtype=int)
    for n, (px, py) in enumerate(z):
        p = Point2(float(px), float(py))
        inside = [i for i, box in enumerate(boxes) if box.contains(p)]
        if len(inside) == 1:
            owners[n] = inside[0]
            continue
        pool = inside or list(range(len(groups)))
        nearest = {}
        for i in pool:
            dist, seg = min(
                ((segment_point_distance(p, s), s) for s in groups[i]), key=lambda t: t[0]
            )
            nearest[i] = (dist, signed_offset(p, seg) > 0.0)
        positive = [i for i in pool if nearest[i][1]]
        if len(positive) == 1:
            owners[n] = positive[0]
        else:
            owners[n] = min(positive or pool, key=lambda i: (nearest[i][0], i))
    return owners


def partition_model(
    parent: GpEdfModel, groups: Sequence[tuple[int, Sequence[LineSegment]]]
) -> list[GpEdfModel]:
    """
    Cut a model into one child per ``(room_id, lines)`` group.

    Every inducing point goes to exactly one child together with its block
    of the variational state. Children inherit ``n_absorbed``.

    :raises ValueError: If a group has no lines
    """
    for room_id, lines in groups:
        if not lines:
            raise ValueError(f"Cannot hand inducing points to room {room_id}: it has no lines")
    owners = _owners(parent.z, [lines for _, lines in groups])
    return [
        _marginal(parent, owners == i, room_id=room_id, lines=tuple(lines))
        for i, (room_id, lines) in enumerate(groups)
    ]


def split_model(
    parent: GpEdfModel,
    lines_1: Sequence[LineSegment],
    lines_2: Sequence[LineSegment],
    room_ids: tuple[int, int] | None = None,
) -> tuple[GpEdfModel, GpEdfModel]:
    """
    Split a room model along a partition of its lines.

    :param parent: Model to split
    :type parent: GpEdfModel
    :param lines_1: Lines of the first child
    :type lines_1: Sequence[LineSegment]
    :param lines_2: Lines of the second child
    :type lines_2: Sequence[LineSegment]
    :param room_ids: Room ids of the children, ``(parent.room_id, parent.room_id)`` by default
    :type room_ids: tuple[int, int] | None, optional
    :return: The two children; their inducing sets partition the parent's
    :rtype: tuple[GpEdfModel, GpEdfModel]
    :raises ValueError: If either line set is empty
    """
    if not lines_1 or not lines_2:
        raise ValueError("split_model needs two non-empty line sets")
    a, b = room_ids or (parent.room_id, parent.room_id)
    child_1, child_2 = partition_model(parent, [(a, lines_1), (b, lines_2)])
    return child_1, child_2


def merge_models(m1: GpEdfModel, m2: GpEdfModel, logger: MapLogger | None = None) -> GpEdfModel:
    """
    Combine two room models into one with ``m1``'s room id.

    Lines and inducing points are pooled. Inducing points of the smaller set
    already covered by the larger one (kernel at or above the threshold) are
    dropped. The variational state is joined block-diagonally, so
    correlations between the two former rooms start at zero.

    :raises ValueError: If the hyperparameters differ
    """
    if m1.hyper != m2.hyper:
        raise ValueError(
            f"Cannot merge models with different hyperparameters: {m1.hyper} vs {m2.hyper}"
        )
    if m2.is_empty:
        return m1
    if m1.is_empty:
        return replace(m2, room_id=m1.room_id)

    lines = list(m1.lines)
    lines.extend(s for s in m2.lines if s not in m1.lines)

    big, small = (m1, m2) if m1.n_inducing >= m2.n_inducing else (m2, m1)
    if big.n_inducing and small.n_inducing:
        covered = matern32(small.z, big.z, m1.hyper).max(axis=1) >= m1.hyper.inducing_threshold
        if np.any(covered) and logger:
            logger.debug(f"Merge dropped {int(covered.sum())} redundant inducing points")
        small = _marginal(small, ~covered)
    first, second = (big, small) if big is m1 else (small, big)
    return replace(
        m1,
        lines=tuple(lines),
        z=np.vstack([first.z, second.z]),
        mean=np.concatenate([first.mean, second.mean]),
        cov=scipy.linalg.block_diag(first.cov, second.cov),
        n_absorbed=m1.n_absorbed + m2.n_absorbed,
    )


def set_lines(model: GpEdfModel, lines: Sequence[LineSegment]) -> GpEdfModel:
    """
    Replace the prior line set.

    Inducing points within ``prune_radius`` of a line that was not in the
    previous set are dropped, since the prior now explains them.
    """
    lines = tuple(lines)
    added = [s for s in lines if s not in model.lines]
    if not added or model.n_inducing == 0:
        return replace(model, lines=lines)
    starts, ends = segments_arrays(added)
    near = min_segment_distance(model.z, starts, ends) <= model.hyper.prune_radius
    return _marginal(model, ~near, lines=lines)


def transfer_lines(
    src: GpEdfModel, dst: GpEdfModel, moved: Sequence[LineSegment]
) -> tuple[GpEdfModel, GpEdfModel]:
    """
    Move lines, and the inducing points they own, from one room model to another.

    The source is split into its kept and moved lines and the moved part is
    merged into the destination.

    :return: Updated source and destination
    :rtype: tuple[GpEdfModel, GpEdfModel]
    """
    moved_set = set(moved)
    kept = [s for s in src.lines if s not in moved_set]
    moving = [s for s in src.lines if s in moved_set]
    if not moving:
        return src, dst
    if not kept:
        emptied = _marginal(src, np.zeros(src.n_inducing, dtype=bool), lines=())
        return emptied, merge_models(dst, src)
    stay, go = split_model(src, kept, moving, (src.room_id, dst.room_id))
    return stay, merge_models(dst, go)
