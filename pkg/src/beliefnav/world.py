"""Geometric ground truth: occupancy maps, landmarks, poses and the odometry model.

The map is an occupancy grid whose cells are free, occupied or unknown. Unknown
cells block motion but not sensing. The robot is a disc.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

FREE = 0
OCCUPIED = 1
UNKNOWN = 2

_CELL_CHARS = {".": FREE, "#": OCCUPIED, "?": UNKNOWN}
_CHAR_OF = {v: k for k, v in _CELL_CHARS.items()}


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    r = math.fmod(a + math.pi, 2.0 * math.pi)
    if r < 0.0:
        r += 2.0 * math.pi
    r -= math.pi
    if r <= -math.pi:
        r = math.pi
    return r


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])

    def distance_to(self, other) -> float:
        ox, oy = (other.x, other.y) if hasattr(other, "x") else other
        return math.hypot(ox - self.x, oy - self.y)


@dataclass(frozen=True)
class Landmark:
    id: int
    position: tuple[float, float]

    @property
    def x(self) -> float:
        return self.position[0]

    @property
    def y(self) -> float:
        return self.position[1]


@dataclass(frozen=True)
class Control:
    """Odometry control: rotate, translate, rotate."""

    delta_rot1: float
    delta_trans: float
    delta_rot2: float

    def __post_init__(self):
        if self.delta_trans < 0:
            raise ValueError("delta_trans must be non-negative")


@dataclass(frozen=True, eq=False)
class GridMap:
    """Occupancy grid.

    ``occupancy[row, col]`` holds the state of the cell whose lower-left corner
    is at ``origin + (col, row) * resolution``; row 0 is the lowest ``y``.
    """

    resolution: float
    width: int
    height: int
    occupancy: np.ndarray
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        occ = np.array(self.occupancy, dtype=np.uint8).reshape(self.height, self.width)
        occ.setflags(write=False)
        object.__setattr__(self, "occupancy", occ)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    # -- construction -------------------------------------------------------
    @classmethod
    def empty(cls, width_m: float, height_m: float, resolution: float = 0.05,
              origin=(0.0, 0.0), fill: int = FREE) -> "GridMap":
        w = int(round(width_m / resolution))
        h = int(round(height_m / resolution))
        return cls(resolution, w, h, np.full((h, w), fill, dtype=np.uint8), origin)

    def with_boxes(self, boxes: Iterable[tuple[float, float, float, float]],
                   value: int = OCCUPIED) -> "GridMap":
        """Copy of the map with axis-aligned boxes ``(x0, y0, x1, y1)`` set to ``value``."""
        occ = self.occupancy.copy()
        for x0, y0, x1, y1 in boxes:
            c0 = max(int(math.floor((x0 - self.origin[0]) / self.resolution)), 0)
            c1 = min(int(math.ceil((x1 - self.origin[0]) / self.resolution)), self.width)
            r0 = max(int(math.floor((y0 - self.origin[1]) / self.resolution)), 0)
            r1 = min(int(math.ceil((y1 - self.origin[1]) / self.resolution)), self.height)
            occ[r0:r1, c0:c1] = value
        return GridMap(self.resolution, self.width, self.height, occ, self.origin)

    # -- geometry -----------------------------------------------------------
    @property
    def bounds(self) -> tuple[float, float, float, float]:
        ox, oy = self.origin
        return ox, oy, ox + self.width * self.resolution, oy + self.height * self.resolution

    def in_bounds(self, x: float, y: float) -> bool:
        x0, y0, x1, y1 = self.bounds
        return x0 <= x <= x1 and y0 <= y <= y1

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """(row, col) of the cell containing a world point; the upper map edge maps inward."""
        col = int(math.floor((x - self.origin[0]) / self.resolution))
        row = int(math.floor((y - self.origin[1]) / self.resolution))
        return min(max(row, 0), self.height - 1), min(max(col, 0), self.width - 1)

    def _cells_of(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        cols = np.floor((pts[:, 0] - self.origin[0]) / self.resolution).astype(np.int64)
        rows = np.floor((pts[:, 1] - self.origin[1]) / self.resolution).astype(np.int64)
        return np.clip(rows, 0, self.height - 1), np.clip(cols, 0, self.width - 1)

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        return (self.origin[0] + (col + 0.5) * self.resolution,
                self.origin[1] + (row + 0.5) * self.resolution)

    @cached_property
    def _collision_tree(self):
        return self._tree(self.occupancy != FREE)

    @cached_property
    def _opaque(self) -> np.ndarray:
        return self.occupancy == OCCUPIED

    def _tree(self, mask: np.ndarray):
        rows, cols = np.nonzero(mask)
        if rows.size == 0:
            return None
        centers = np.column_stack([
            self.origin[0] + (cols + 0.5) * self.resolution,
            self.origin[1] + (rows + 0.5) * self.resolution,
        ])
        return cKDTree(centers)

    def points_free(self, pts: np.ndarray, robot_radius: float) -> bool:
        """True iff a disc of ``robot_radius`` at every point touches no blocking cell."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x0, y0, x1, y1 = self.bounds
        r = robot_radius
        if (np.any(pts[:, 0] - r < x0) or np.any(pts[:, 0] + r > x1)
                or np.any(pts[:, 1] - r < y0) or np.any(pts[:, 1] + r > y1)):
            return False
        rows, cols = self._cells_of(pts)
        if np.any(self.occupancy[rows, cols] != FREE):
            return False
        tree = self._collision_tree
        if tree is None or r <= 0:
            return True
        half = 0.5 * self.resolution
        reach = r + half * math.sqrt(2.0)
        dist, _ = tree.query(pts, k=1, distance_upper_bound=reach)
        near = np.isfinite(dist)
        if not np.any(near):
            return True
        centers = tree.data
        for p, idx in zip(pts[near], tree.query_ball_point(pts[near], reach)):
            c = centers[idx]
            dx = np.maximum(np.abs(c[:, 0] - p[0]) - half, 0.0)
            dy = np.maximum(np.abs(c[:, 1] - p[1]) - half, 0.0)
            if np.any(dx * dx + dy * dy < r * r):
                return False
        return True

    def line_of_sight(self, a: tuple[float, float], b: tuple[float, float]) -> bool:
        """True iff no occupied cell lies strictly between ``a`` and the cell holding ``b``."""
        pts = _interpolate(a, b, self.resolution / 2.0)
        rows, cols = self._cells_of(pts)
        end = self.cell_of(*b)
        keep = ~((rows == end[0]) & (cols == end[1]))
        return not np.any(self._opaque[rows[keep], cols[keep]])

    # -- io -----------------------------------------------------------------
    def to_text(self) -> str:
        lines = [
            "# occupancy map v1",
            f"resolution {self.resolution!r}",
            f"width {self.width}",
            f"height {self.height}",
            f"origin {self.origin[0]!r} {self.origin[1]!r}",
            "grid",
        ]
        for row in range(self.height - 1, -1, -1):
            lines.append("".join(_CHAR_OF[int(v)] for v in self.occupancy[row]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "GridMap":
        header: dict[str, list[str]] = {}
        grid_rows: list[str] = []
        in_grid = False
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#") and not in_grid:
                continue
            if in_grid:
                grid_rows.append(line)
                continue
            key, *vals = line.split()
            if key == "grid":
                in_grid = True
            else:
                header[key] = vals
        try:
            res = float(header["resolution"][0])
            w = int(header["width"][0])
            h = int(header["height"][0])
            origin = tuple(float(v) for v in header.get("origin", ["0", "0"]))
        except (KeyError, IndexError, ValueError) as exc:
            raise ValueError(f"bad map header: {exc}") from None
        if len(grid_rows) != h or any(len(r) != w for r in grid_rows):
            raise ValueError(f"map grid must be {h} rows of {w} cells")
        try:
            occ = np.array([[_CELL_CHARS[c] for c in r] for r in reversed(grid_rows)],
                           dtype=np.uint8)
        except KeyError as exc:
            raise ValueError(f"bad map cell character {exc}") from None
        return cls(res, w, h, occ, origin)

    @classmethod
    def load(cls, path) -> "GridMap":
        return cls.from_text(Path(path).read_text())


def _interpolate(a, b, max_step: float) -> np.ndarray:
    ax, ay = a
    bx, by = b
    n = max(1, int(math.ceil(math.hypot(bx - ax, by - ay) / max_step)))
    t = np.linspace(0.0, 1.0, n + 1)
    return np.column_stack([ax + (bx - ax) * t, ay + (by - ay) * t])


def _check_inside(m: GridMap, p) -> None:
    if not m.in_bounds(p.x, p.y):
        raise ValueError(f"pose outside map: ({p.x}, {p.y})")


def is_free(m: GridMap, p: Pose, robot_radius: float) -> bool:
    """Whether a disc robot at ``p`` overlaps no occupied or unknown cell."""
    _check_inside(m, p)
    return m.points_free(np.array([[p.x, p.y]]), robot_radius)


def segment_free(m: GridMap, a: Pose, b: Pose, robot_radius: float) -> bool:
    """Collision check of the straight segment ``a -> b`` at half-cell steps."""
    _check_inside(m, a)
    _check_inside(m, b)
    return m.points_free(_interpolate((a.x, a.y), (b.x, b.y), m.resolution / 2.0), robot_radius)


def visible_landmarks(m: GridMap, p: Pose, lms: Sequence[Landmark],
                      sensor_range: float) -> list[Landmark]:
    """Landmarks within ``sensor_range`` of ``p`` with an unobstructed line of sight.

    The cell holding the landmark itself does not block its own visibility.
    """
    if sensor_range <= 0:
        raise ValueError("sensor_range must be positive")
    _check_inside(m, p)
    out = []
    for lm in lms:
        if math.hypot(lm.x - p.x, lm.y - p.y) <= sensor_range and \
                m.line_of_sight((p.x, p.y), lm.position):
            out.append(lm)
    return out


def apply_control(p: Pose, u: Control) -> Pose:
    """Noise-free odometry motion model."""
    heading = p.theta + u.delta_rot1
    return Pose(p.x + u.delta_trans * math.cos(heading),
                p.y + u.delta_trans * math.sin(heading),
                heading + u.delta_rot2)


def load_landmarks(path) -> list[Landmark]:
    return parse_landmarks(Path(path).read_text())


def parse_landmarks(text: str) -> list[Landmark]:
    lms = []
    seen = set()
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"landmark line {n}: expected 'id x y'")
        lid = int(parts[0])
        if lid in seen:
            raise ValueError(f"landmark line {n}: duplicate id {lid}")
        seen.add(lid)
        lms.append(Landmark(lid, (float(parts[1]), float(parts[2]))))
    return lms


def landmarks_to_text(lms: Sequence[Landmark]) -> str:
    return "".join(f"{lm.id} {lm.x!r} {lm.y!r}\n" for lm in lms)
