"""Occupancy grids, sensing, frontiers and grid path planning.

Coordinates are ``(x, y)`` cell indices; arrays are indexed ``[y, x]``.
Cell sets are boolean masks shaped like the grid.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from . import _kernels

log = logging.getLogger(__name__)

Pose = tuple[int, int]
Path = list[Pose]

FOUR = ndimage.generate_binary_structure(2, 1)
EIGHT = ndimage.generate_binary_structure(2, 2)


class CellState(IntEnum):
    UNKNOWN = _kernels.UNKNOWN
    FREE = _kernels.FREE
    OCCUPIED = _kernels.OCCUPIED


GLYPHS = {".": CellState.FREE, "#": CellState.OCCUPIED, "?": CellState.UNKNOWN}
GLYPH_OF = {v: k for k, v in GLYPHS.items()}


class MapFormatError(ValueError):
    def __init__(self, message: str, line: int, column: int = 0):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class InvalidOrigin(ValueError):
    pass


class Unreachable(Exception):
    pass


@dataclass(eq=False)
class OccupancyGrid:
    cells: np.ndarray
    resolution: float = 1.0

    def __post_init__(self):
        self.cells = np.ascontiguousarray(self.cells, dtype=np.int8)
        if self.cells.ndim != 2:
            raise ValueError("cells must be 2-D")
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")

    @classmethod
    def unknown(cls, width: int, height: int, resolution: float = 1.0) -> "OccupancyGrid":
        return cls(np.zeros((height, width), dtype=np.int8), resolution)

    @classmethod
    def unknown_like(cls, other: "OccupancyGrid") -> "OccupancyGrid":
        return cls(np.zeros_like(other.cells), other.resolution)

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.cells.copy(), self.resolution)

    def known(self) -> np.ndarray:
        return self.cells != CellState.UNKNOWN

    def free(self) -> np.ndarray:
        return self.cells == CellState.FREE

    def occupied(self) -> np.ndarray:
        return self.cells == CellState.OCCUPIED

    def in_bounds(self, pose: Pose) -> bool:
        x, y = pose
        return 0 <= x < self.width and 0 <= y < self.height

    def __getitem__(self, pose: Pose) -> CellState:
        x, y = pose
        return CellState(int(self.cells[y, x]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return (self.resolution == other.resolution
                and self.cells.shape == other.cells.shape
                and bool(np.array_equal(self.cells, other.cells)))

    def to_text(self) -> str:
        return dump_map(self)


def cells_of(mask: np.ndarray) -> set[Pose]:
    ys, xs = np.nonzero(mask)
    return {(int(x), int(y)) for x, y in zip(xs, ys)}


def mask_of(cells: Iterable[Pose], shape: tuple[int, int]) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    for x, y in cells:
        mask[y, x] = True
    return mask


def load_map(text: str, allow_unknown: bool = False) -> OccupancyGrid:
    """Parse the text map format: a ``width height resolution`` header, then rows of glyphs."""
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise MapFormatError("empty map", 1)
    parts = lines[0].split()
    if len(parts) != 3:
        raise MapFormatError("header must be 'width height resolution'", 1)
    try:
        width, height = int(parts[0]), int(parts[1])
        resolution = float(parts[2])
    except ValueError:
        raise MapFormatError("non-numeric header field", 1) from None
    if width <= 0 or height <= 0 or not resolution > 0:
        raise MapFormatError("header values must be positive", 1)
    body = lines[1:]
    if len(body) != height:
        raise MapFormatError(f"expected {height} rows, found {len(body)}", len(lines) + 1)
    allowed = GLYPHS if allow_unknown else {k: v for k, v in GLYPHS.items() if k != "?"}
    cells = np.empty((height, width), dtype=np.int8)
    for y, row in enumerate(body):
        row = row.rstrip("\r")
        if len(row) != width:
            raise MapFormatError(f"row has {len(row)} cells, expected {width}", y + 2, len(row) + 1)
        for x, ch in enumerate(row):
            state = allowed.get(ch)
            if state is None:
                raise MapFormatError(f"unknown glyph {ch!r}", y + 2, x + 1)
            cells[y, x] = state
    grid = OccupancyGrid(cells, resolution)
    if not grid.free().any():
        raise MapFormatError("map has no free cells", 2)
    return grid


def dump_map(grid: OccupancyGrid) -> str:
    rows = ["".join(GLYPH_OF[CellState(int(v))] for v in row) for row in grid.cells]
    res = f"{grid.resolution:g}"
    return f"{grid.width} {grid.height} {res}\n" + "\n".join(rows) + "\n"


def bresenham(x0: int, y0: int, x1: int, y1: int) -> list[Pose]:
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    out = []
    while True:
        out.append((x0, y0))
        if x0 == x1 and y0 == y1:
            return out
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


@lru_cache(maxsize=16)
def _sight_table(range_: float, n_rays: int):
    """Offsets in range that some beam crosses, with the line cells strictly between."""
    r = int(math.floor(range_))
    offs = [(dx, dy) for dy in range(-r, r + 1) for dx in range(-r, r + 1)
            if (dx or dy) and dx * dx + dy * dy <= range_ * range_]
    if not offs:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros((0, 1), np.int64), np.zeros((0, 1), np.int64), empty
    off = np.array(offs, dtype=np.float64)
    centre = np.arctan2(off[:, 1], off[:, 0])
    corners = np.stack([np.arctan2(off[:, 1] + cy, off[:, 0] + cx)
                        for cx in (-0.5, 0.5) for cy in (-0.5, 0.5)], axis=1)
    rel = np.angle(np.exp(1j * (corners - centre[:, None])))
    lo, hi = rel.min(axis=1), rel.max(axis=1)
    beams = 2 * np.pi * np.arange(n_rays) / n_rays
    brel = np.angle(np.exp(1j * (beams[None, :] - centre[:, None])))
    hit = ((brel >= lo[:, None] - 1e-12) & (brel <= hi[:, None] + 1e-12)).any(axis=1)
    kept = [o for o, h in zip(offs, hit) if h]
    lines = [bresenham(0, 0, dx, dy)[1:-1] for dx, dy in kept]
    longest = max((len(l) for l in lines), default=0) or 1
    lx = np.zeros((len(kept), longest), dtype=np.int64)
    ly = np.zeros((len(kept), longest), dtype=np.int64)
    ln = np.zeros(len(kept), dtype=np.int64)
    for k, line in enumerate(lines):
        ln[k] = len(line)
        for j, (x, y) in enumerate(line):
            lx[k, j], ly[k, j] = x, y
    tx = np.array([o[0] for o in kept], dtype=np.int64)
    ty = np.array([o[1] for o in kept], dtype=np.int64)
    return tx, ty, lx, ly, ln


def raycast(world: OccupancyGrid, origin: Pose, range_: float, n_rays: int = 250) -> np.ndarray:
    """Cells visible from ``origin`` within Euclidean ``range_``.

    A cell counts when one of ``n_rays`` evenly spaced beams crosses it and every
    cell strictly between it and the origin on the Bresenham line is Free.
    Occupied cells end the line but are themselves seen; Unknown cells are opaque
    and never reported.
    """
    if not world.in_bounds(origin) or world[origin] != CellState.FREE:
        raise InvalidOrigin(f"origin {origin} is not a free in-bounds cell")
    if range_ < 0 or n_rays < 1:
        raise ValueError("range must be >= 0 and n_rays >= 1")
    tx, ty, lx, ly, ln = _sight_table(float(range_), int(n_rays))
    return _kernels.los_mask(world.cells, origin[0], origin[1], tx, ty, lx, ly, ln)


def observe(local: OccupancyGrid, world: OccupancyGrid, pose: Pose, range_: float,
            n_rays: int = 250) -> tuple[OccupancyGrid, np.ndarray]:
    """Copy ground truth into ``local`` (in place) for every visible cell.

    Returns the map and the mask of cells that were Unknown before.
    """
    seen = raycast(world, pose, range_, n_rays)
    new = seen & (local.cells == CellState.UNKNOWN)
    local.cells[seen] = world.cells[seen]
    return local, new


def fuse(a: OccupancyGrid, b: OccupancyGrid) -> OccupancyGrid:
    if a.shape != b.shape or a.resolution != b.resolution:
        raise ValueError(f"cannot fuse {a.shape}@{a.resolution} with {b.shape}@{b.resolution}")
    out = np.maximum(a.cells, b.cells)
    conflict = ((a.cells == CellState.FREE) & (b.cells == CellState.OCCUPIED)) | \
               ((a.cells == CellState.OCCUPIED) & (b.cells == CellState.FREE))
    if conflict.any():
        log.warning("fuse: %d free/occupied conflicts resolved to occupied", int(conflict.sum()))
    return OccupancyGrid(out, a.resolution)


def flood_fill(seed: np.ndarray, domain: OccupancyGrid) -> np.ndarray:
    """4-connected closure of ``seed`` within the non-Occupied cells of ``domain``."""
    open_ = domain.cells != CellState.OCCUPIED
    start = seed & open_
    if not start.any():
        return np.zeros(domain.shape, dtype=bool)
    labels, n = ndimage.label(open_, structure=FOUR)
    keep = np.zeros(n + 1, dtype=bool)
    keep[labels[start]] = True
    keep[0] = False
    return keep[labels]


@dataclass(frozen=True)
class Frontier:
    centroid: Pose
    cells: np.ndarray  # (k, 2) array of x, y

    @property
    def size(self) -> int:
        return len(self.cells)


def frontier_cells(local: OccupancyGrid) -> np.ndarray:
    unknown = local.cells == CellState.UNKNOWN
    near = ndimage.binary_dilation(unknown, structure=FOUR)
    return near & local.free()


def extract_frontiers(local: OccupancyGrid, min_region: int = 1) -> list[Frontier]:
    if min_region < 1:
        raise ValueError("min_region must be >= 1")
    mask = frontier_cells(local)
    labels, n = ndimage.label(mask, structure=EIGHT)
    out = []
    for idx, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is None:
            continue
        ys, xs = np.nonzero(labels[sl] == idx)
        if len(xs) < min_region:
            continue
        xs = xs + sl[1].start
        ys = ys + sl[0].start
        mx, my = xs.mean(), ys.mean()
        d2 = (xs - mx) ** 2 + (ys - my) ** 2
        # nearest to the mean, then smallest (y, x)
        best = np.lexsort((xs, ys, d2))[0]
        out.append(Frontier((int(xs[best]), int(ys[best])), np.stack([xs, ys], axis=1)))
    out.sort(key=lambda f: (f.centroid[1], f.centroid[0]))
    return out


def passable(plan_map: OccupancyGrid, unknown_ok: bool = True) -> np.ndarray:
    if unknown_ok:
        return plan_map.cells != CellState.OCCUPIED
    return plan_map.cells == CellState.FREE


def astar(plan_map: OccupancyGrid, start: Pose, goal: Pose, unknown_ok: bool = True) -> Path:
    """Minimum-step 4-connected path; Unknown cells are traversable unless ``unknown_ok`` is off."""
    ok = passable(plan_map, unknown_ok)
    for p in (start, goal):
        if not plan_map.in_bounds(p) or not ok[p[1], p[0]]:
            raise ValueError(f"{p} is not traversable")
    h, w = ok.shape
    gx, gy = goal
    g = {start: 0}
    came: dict[Pose, Pose] = {}
    tie = 0
    heap = [(abs(start[0] - gx) + abs(start[1] - gy), 0, tie, start)]
    closed = set()
    while heap:
        _, cost, _, cur = heapq.heappop(heap)
        if cur in closed:
            continue
        if cur == goal:
            path = [cur]
            while cur in came:
                cur = came[cur]
                path.append(cur)
            return path[::-1]
        closed.add(cur)
        x, y = cur
        for nx, ny in ((x + 1, y), (x, y + 1), (x - 1, y), (x, y - 1)):
            if not (0 <= nx < w and 0 <= ny < h) or not ok[ny, nx]:
                continue
            nc = cost + 1
            if nc < g.get((nx, ny), 1 << 60):
                g[(nx, ny)] = nc
                came[(nx, ny)] = cur
                tie += 1
                heapq.heappush(heap, (nc + abs(nx - gx) + abs(ny - gy), nc, tie, (nx, ny)))
    raise Unreachable(f"no path from {start} to {goal}")


def distance_field(ok: np.ndarray, source: Pose) -> np.ndarray:
    """BFS step counts from ``source`` over the passable mask; -1 where unreachable."""
    return _kernels.bfs_field(ok, source[0], source[1])


def path_from_field(dist: np.ndarray, target: Pose) -> Path:
    """Path from the field's source to ``target`` (source first)."""
    if dist[target[1], target[0]] < 0:
        raise Unreachable(f"{target} not reachable in field")
    xs, ys = _kernels.descend(dist, target[0], target[1])
    return list(zip(xs.tolist(), ys.tolist()))


def travel_time(path: Sequence[Pose] | int, v: float = 1) -> int:
    if v <= 0:
        raise ValueError("speed must be positive")
    steps = path if isinstance(path, (int, np.integer)) else len(path) - 1
    return math.ceil(max(int(steps), 0) / v)


def path_sample(path: Sequence[Pose], interval: int) -> list[Pose]:
    if interval < 1:
        raise ValueError("interval must be >= 1")
    if not path:
        return []
    idx = sample_indices(len(path), interval)
    return [path[i] for i in idx]


def sample_indices(n: int, interval: int) -> list[int]:
    idx = list(range(0, n, interval))
    if idx[-1] != n - 1:
        idx.append(n - 1)
    return idx
