"""
Deterministic 2D lidar simulation over ground-truth floor plans.

Floor plans are plain wall segments (optionally labelled with the room each wall
face bounds). Scans are cast analytically against every wall; range noise comes
from a counter-based generator keyed on ``(seed, frame)`` so a frame can be
regenerated on its own and two runs with the same seed are bitwise identical.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .config import ScanParams
from .geometry import Point2

__all__ = [
    "FloorPlan",
    "Pose",
    "ScanFrame",
    "ScanParams",
    "grid_plan",
    "load_floor_plan",
    "load_scan_log",
    "load_trajectory",
    "loop_trajectory",
    "playback",
    "save_floor_plan",
    "save_scan_log",
    "save_trajectory",
    "simulate_scan",
]


@dataclass(frozen=True)
class FloorPlan:
    """
    Ground-truth world.

    :param walls: Wall segments as endpoint pairs
    :type walls: list[tuple[Point2, Point2]]
    :param room_labels: Room id per wall, None entries for walls that bound no room
    :type room_labels: list[int | None] | None, optional
    :param name: Plan name
    :type name: str, optional
    """

    walls: list[tuple[Point2, Point2]]
    room_labels: list[int | None] | None = None
    name: str = "plan"
    _starts: np.ndarray = field(init=False, repr=False, compare=False)
    _ends: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.walls) < 3:
            raise ValueError(f"A floor plan needs at least 3 walls (got {len(self.walls)})")
        if self.room_labels is not None and len(self.room_labels) != len(self.walls):
            raise ValueError(
                f"room_labels has {len(self.room_labels)} entries for {len(self.walls)} walls"
            )
        for i, (a, b) in enumerate(self.walls):
            if a.distance_to(b) == 0.0:
                raise ValueError(f"wall[{i}] has zero length")
        object.__setattr__(self, "_starts", np.array([a.as_tuple() for a, _ in self.walls]))
        object.__setattr__(self, "_ends", np.array([b.as_tuple() for _, b in self.walls]))

    @property
    def wall_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """``(starts, ends)`` endpoint arrays, each ``(W, 2)``."""
        return self._starts, self._ends

    @property
    def has_labels(self) -> bool:
        return self.room_labels is not None and any(x is not None for x in self.room_labels)

    def room_ids(self) -> list[int]:
        if not self.room_labels:
            return []
        return sorted({x for x in self.room_labels if x is not None})


@dataclass(frozen=True)
class Pose:
    """Robot pose at time ``t`` (s); position in meters, heading in radians."""

    t: float
    x: float
    y: float
    theta: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.t, self.x, self.y, self.theta)):
            raise ValueError(f"Pose fields must be finite (got {self})")

    @property
    def position(self) -> Point2:
        return Point2(self.x, self.y)


@dataclass(frozen=True)
class ScanFrame:
    """
    One lidar sweep.

    :param pose: Robot pose the scan was taken from
    :type pose: Pose
    :param points: World-frame hit points, in beam order, for beams with a return
    :type points: list[Point2]
    :param ranges: Per-beam range, None where the beam had no return
    :type ranges: list[float | None]
    :param index: Frame index within its stream
    :type index: int
    """

    pose: Pose
    points: list[Point2]
    ranges: list[float | None]
    index: int = 0

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "pose": {
                "t": self.pose.t,
                "x": self.pose.x,
                "y": self.pose.y,
                "theta": self.pose.theta,
            },
            "ranges": self.ranges,
            "points": [[p.x, p.y] for p in self.points],
        }

    @classmethod
    def from_dict(cls, data: dict) -> ScanFrame:
        return cls(
            pose=Pose(**data["pose"]),
            points=[Point2(float(x), float(y)) for x, y in data["points"]],
            ranges=[None if r is None else float(r) for r in data["ranges"]],
            index=int(data.get("index", 0)),
        )


def _parse_wall(entry: object, i: int) -> tuple[tuple[Point2, Point2], int | None]:
    if not isinstance(entry, dict):
        raise ValueError(f"wall[{i}]: expected an object, got {type(entry).__name__}")
    coords = []
    for key in ("x1", "y1", "x2", "y2"):
        if key not in entry:
            raise ValueError(f"wall[{i}].{key}: missing")
        value = entry[key]
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ValueError(f"wall[{i}].{key}: expected a finite number, got {value!r}")
        coords.append(float(value))
    a, b = Point2(coords[0], coords[1]), Point2(coords[2], coords[3])
    if a.distance_to(b) == 0.0:
        raise ValueError(f"wall[{i}]: zero-length wall at ({a.x}, {a.y})")
    room = entry.get("room")
    if room is not None and not isinstance(room, int):
        raise ValueError(f"wall[{i}].room: expected an integer, got {room!r}")
    return (a, b), room


def load_floor_plan(path: Path | str) -> FloorPlan:
    """
    Read a floor plan file.

    Format: ``{"name": str, "walls": [{"x1", "y1", "x2", "y2", "room"?}, ...]}``.
    Room labels are attached when at least one wall carries ``room``.

    :param path: Plan file
    :type path: Path | str
    :return: Parsed plan
    :rtype: FloorPlan
    :raises ValueError: On malformed content, with ``wall[i].field`` context
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e
    if not isinstance(data, dict) or not isinstance(data.get("walls"), list):
        raise ValueError(f"{path}: expected an object with a 'walls' list")

    walls: list[tuple[Point2, Point2]] = []
    labels: list[int | None] = []
    for i, entry in enumerate(data["walls"]):
        wall, room = _parse_wall(entry, i)
        walls.append(wall)
        labels.append(room)
    if len(walls) < 3:
        raise ValueError(f"{path}: a floor plan needs at least 3 walls (got {len(walls)})")

    has_labels = any(x is not None for x in labels)
    return FloorPlan(walls, labels if has_labels else None, str(data.get("name", path.stem)))


def save_floor_plan(plan: FloorPlan, path: Path | str) -> None:
    walls = []
    for i, (a, b) in enumerate(plan.walls):
        entry: dict = {"x1": a.x, "y1": a.y, "x2": b.x, "y2": b.y}
        if plan.room_labels is not None and plan.room_labels[i] is not None:
            entry["room"] = plan.room_labels[i]
        walls.append(entry)
    Path(path).write_text(json.dumps({"name": plan.name, "walls": walls}, indent=2))


def load_trajectory(path: Path | str) -> list[Pose]:
    """
    Read a trajectory file (JSON array of ``{"t", "x", "y", "theta"}``).

    :raises ValueError: On missing fields or non-increasing timestamps
    """
    path = Path(path)
    data = json.loads(Path(path).read_text())
    if not isinstance(data, list):
        raise ValueError(f"{path}: expected a JSON array of poses")
    poses = []
    for i, entry in enumerate(data):
        try:
            poses.append(Pose(*(float(entry[k]) for k in ("t", "x", "y", "theta"))))
        except (KeyError, TypeError) as e:
            raise ValueError(f"{path}: pose[{i}] is missing field {e}") from e
    _check_timestamps(poses)
    return poses


def save_trajectory(poses: Sequence[Pose], path: Path | str) -> None:
    payload = [{"t": p.t, "x": p.x, "y": p.y, "theta": p.theta} for p in poses]
    Path(path).write_text(json.dumps(payload, indent=2))


def _check_timestamps(poses: Sequence[Pose]) -> None:
    for i in range(1, len(poses)):
        if poses[i].t <= poses[i - 1].t:
            raise ValueError(
                f"Trajectory timestamps must be strictly increasing "
                f"(pose[{i}].t={poses[i].t} <= pose[{i - 1}].t={poses[i - 1].t})"
            )


def beam_angles(pose: Pose, params: ScanParams) -> np.ndarray:
    """Beam headings, counter-clockwise from ``theta - fov/2``."""
    return pose.theta - 0.5 * params.fov + np.arange(params.n_beams) * (params.fov / params.n_beams)


def _noise(params: ScanParams, frame_index: int) -> np.ndarray:
    if params.noise_sigma == 0.0:
        return np.zeros(params.n_beams)
    seq = np.random.SeedSequence([params.seed, frame_index])
    rng = np.random.Generator(np.random.Philox(seq))
    return params.noise_sigma * rng.standard_normal(params.n_beams)


def cast_rays(plan: FloorPlan, origin: Point2, angles: np.ndarray) -> np.ndarray:
    """Distance along each ray to the nearest wall, ``inf`` where nothing is hit."""
    starts, ends = plan.wall_arrays
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)  # (B, 2)
    seg = ends - starts  # (W, 2)
    rel = starts - np.array([origin.x, origin.y])  # (W, 2)

    denom = dirs[:, None, 0] * seg[None, :, 1] - dirs[:, None, 1] * seg[None, :, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (rel[None, :, 0] * seg[None, :, 1] - rel[None, :, 1] * seg[None, :, 0]) / denom
        u = (rel[None, :, 0] * dirs[:, None, 1] - rel[None, :, 1] * dirs[:, None, 0]) / denom
    hit = (np.abs(denom) > 1e-15) & (t > 1e-12) & (u >= 0.0) & (u <= 1.0)
    return np.where(hit, t, np.inf).min(axis=1)


def simulate_scan(
    plan: FloorPlan, pose: Pose, params: ScanParams, frame_index: int = 0
) -> ScanFrame:
    """
    Simulate one lidar sweep.

    Each beam returns the nearest wall intersection along its ray plus
    N(0, noise_sigma^2) noise along the ray. Beams without a wall within
    ``max_range`` (before or after noise) return nothing.

    :param plan: World to scan
    :type plan: FloorPlan
    :param pose: Sensor pose
    :type pose: Pose
    :param params: Sensor parameters
    :type params: ScanParams
    :param frame_index: Index keying the noise stream together with ``params.seed``
    :type frame_index: int, optional
    :return: The scan
    :rtype: ScanFrame
    """
    angles = beam_angles(pose, params)
    true_ranges = cast_rays(plan, pose.position, angles)
    noisy = np.maximum(true_ranges + _noise(params, frame_index), 0.0)

    points: list[Point2] = []
    ranges: list[float | None] = []
    for angle, r_true, r in zip(angles, true_ranges, noisy):
        if not math.isfinite(r_true) or r > params.max_range:
            ranges.append(None)
            continue
        r = float(r)
        ranges.append(r)
        points.append(Point2(pose.x + r * math.cos(angle), pose.y + r * math.sin(angle)))
    return ScanFrame(pose, points, ranges, frame_index)


def playback(
    plan: FloorPlan, trajectory: Sequence[Pose], params: ScanParams
) -> Iterator[ScanFrame]:
    """
    Scan every pose of a trajectory, in order.

    :raises ValueError: If the trajectory is empty or timestamps do not increase
    """
    if not trajectory:
        raise ValueError("playback requires a non-empty trajectory")
    _check_timestamps(trajectory)

    def _frames() -> Iterator[ScanFrame]:
        for i, pose in enumerate(trajectory):
            yield simulate_scan(plan, pose, params, frame_index=i)

    return _frames()


def save_scan_log(frames: Iterable[ScanFrame], path: Path | str) -> int:
    """Write frames as JSON lines. Returns the number of frames written."""
    count = 0
    with open(path, "w") as fh:
        for frame in frames:
            fh.write(json.dumps(frame.to_dict()) + "\n")
            count += 1
    return count


def load_scan_log(path: Path | str) -> list[ScanFrame]:
    frames = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                frames.append(ScanFrame.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise ValueError(f"{path}:{lineno}: malformed scan frame ({e})") from e
    return frames


# Reference plans ------------------------------------------------------------


def _room_origin(
    col: int, row: int, room_w: float, room_h: float, wall: float
) -> tuple[float, float]:
    return col * (room_w + wall), row * (room_h + wall)


def _door_center(lo: float, length: float) -> float:
    # Doors sit off-center so opposite walls do not see each other through them.
    return lo + 0.3 * length


def _door_span(lo: float, length: float, door: float) -> tuple[float, float]:
    center = _door_center(lo, length)
    return center - 0.5 * door, center + 0.5 * door


def grid_plan(
    cols: int,
    rows: int,
    room_w: float = 5.0,
    room_h: float = 4.0,
    wall: float = 0.25,
    door: float = 0.9,
) -> FloorPlan:
    """
    A grid of rectangular rooms separated by ``wall``-thick walls.

    Every pair of adjacent rooms is joined by a ``door``-wide doorway. Each wall
    face is labelled with the room it faces (``row * cols + col``); the door
    jambs closing the wall cavities carry no label.

    :raises ValueError: If the grid is empty or the door does not fit
    """
    if cols < 1 or rows < 1:
        raise ValueError(f"grid_plan needs at least one room (got {cols}x{rows})")
    if door >= 0.6 * min(room_w, room_h):
        raise ValueError(f"door width {door} does not fit rooms of {room_w}x{room_h}")

    walls: list[tuple[Point2, Point2]] = []
    labels: list[int | None] = []

    def add(x1: float, y1: float, x2: float, y2: float, label: int | None) -> None:
        walls.append((Point2(x1, y1), Point2(x2, y2)))
        labels.append(label)

    for row in range(rows):
        for col in range(cols):
            room = row * cols + col
            x0, y0 = _room_origin(col, row, room_w, room_h, wall)
            x1, y1 = x0 + room_w, y0 + room_h

            # bottom / top faces, split where a vertical neighbour has a door
            for y, has_door in ((y0, row > 0), (y1, row < rows - 1)):
                if has_door:
                    a, b = _door_span(x0, room_w, door)
                    add(x0, y, a, y, room)
                    add(b, y, x1, y, room)
                else:
                    add(x0, y, x1, y, room)
            # left / right faces
            for x, has_door in ((x0, col > 0), (x1, col < cols - 1)):
                if has_door:
                    a, b = _door_span(y0, room_h, door)
                    add(x, y0, x, a, room)
                    add(x, b, x, y1, room)
                else:
                    add(x, y0, x, y1, room)

            # jambs on the right and top walls (shared with the next room)
            if col < cols - 1:
                a, b = _door_span(y0, room_h, door)
                add(x1, a, x1 + wall, a, None)
                add(x1, b, x1 + wall, b, None)
            if row < rows - 1:
                a, b = _door_span(x0, room_w, door)
                add(a, y1, a, y1 + wall, None)
                add(b, y1, b, y1 + wall, None)

    return FloorPlan(walls, labels, f"grid_{cols}x{rows}")


def _serpentine(cols: int, rows: int) -> list[tuple[int, int]]:
    order = []
    for row in range(rows):
        cs = range(cols) if row % 2 == 0 else range(cols - 1, -1, -1)
        order.extend((c, row) for c in cs)
    return order


def _door_waypoints(
    a: tuple[int, int], b: tuple[int, int], room_w: float, room_h: float, wall: float, inset: float
) -> list[tuple[float, float]]:
    """Waypoints from in front of the doorway in room ``a`` to inside room ``b``."""
    (ca, ra), (cb, rb) = a, b
    xa, ya = _room_origin(ca, ra, room_w, room_h, wall)
    if ra == rb:  # horizontal move through a vertical wall
        yd = _door_center(ya, room_h)
        step = 1 if cb > ca else -1
        x_wall = xa + room_w + 0.5 * wall if step > 0 else xa - 0.5 * wall
        reach = 0.5 * wall + inset
        return [(x_wall - step * reach, yd), (x_wall, yd), (x_wall + step * reach, yd)]
    xd = _door_center(xa, room_w)
    step = 1 if rb > ra else -1
    y_wall = ya + room_h + 0.5 * wall if step > 0 else ya - 0.5 * wall
    reach = 0.5 * wall + inset
    return [(xd, y_wall - step * reach), (xd, y_wall), (xd, y_wall + step * reach)]


def loop_trajectory(
    cols: int,
    rows: int,
    room_w: float = 5.0,
    room_h: float = 4.0,
    wall: float = 0.25,
    step: float = 0.25,
    dt: float = 0.5,
    inset: float = 0.8,
) -> list[Pose]:
    """
    A tour of a :func:`grid_plan` that visits every room through its doorways.

    Rooms are visited in serpentine order; the tour closes through a doorway
    when the last room neighbours the first, and retraces its path otherwise.
    Poses are sampled every ``step`` meters, heading along the direction of motion.
    """
    order = _serpentine(cols, rows)
    if len(order) > 1:
        last, first = order[-1], order[0]
        if abs(last[0] - first[0]) + abs(last[1] - first[1]) == 1:
            order.append(first)
        else:
            order.extend(reversed(order[:-1]))

    def center(c: int, r: int) -> tuple[float, float]:
        x0, y0 = _room_origin(c, r, room_w, room_h, wall)
        return x0 + 0.5 * room_w, y0 + 0.5 * room_h

    waypoints = [center(*order[0])]
    for a, b in zip(order, order[1:]):
        waypoints.extend(_door_waypoints(a, b, room_w, room_h, wall, inset))
        waypoints.append(center(*b))

    poses: list[Pose] = []
    heading = 0.0
    carry = 0.0
    for (xa, ya), (xb, yb) in zip(waypoints, waypoints[1:]):
        length = math.hypot(xb - xa, yb - ya)
        if length == 0.0:
            continue
        heading = math.atan2(yb - ya, xb - xa)
        s = carry
        while s < length:
            f = s / length
            poses.append(Pose(len(poses) * dt, xa + f * (xb - xa), ya + f * (yb - ya), heading))
            s += step
        carry = s - length
    xe, ye = waypoints[-1]
    poses.append(Pose(len(poses) * dt, xe, ye, heading))
    return poses
