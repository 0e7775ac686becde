"""Seeded synthetic indoor floorplans: rectangular rooms, corridors and doors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..grid import CellState, OccupancyGrid, flood_fill


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class RoomParams:
    min_room: int = 8
    max_room: int = 24
    corridor_width: int = 2
    corridor_span: int = 40  # regions longer than this get a corridor through them
    extra_door_prob: float = 0.15
    resolution: float = 1.0


@dataclass(frozen=True)
class Leaf:
    x0: int
    y0: int
    x1: int  # exclusive
    y1: int
    corridor: bool = False


@dataclass
class Floorplan:
    grid: OccupancyGrid
    leaves: list[Leaf]
    doors: list[tuple[int, int, int, int]]  # x, y, length, horizontal(0/1)

    @property
    def n_rooms(self) -> int:
        return sum(not leaf.corridor for leaf in self.leaves)


def _split(rng, x0, y0, x1, y1, p: RoomParams, out: list[Leaf]) -> None:
    w, h = x1 - x0, y1 - y0
    vertical = w >= h  # split across x
    span = w if vertical else h
    lo = x0 if vertical else y0
    cw = p.corridor_width
    if span > p.corridor_span and span >= 2 * p.min_room + cw + 2:
        q = int(rng.integers(lo + p.min_room, lo + span - p.min_room - cw - 1 + 1))
        if vertical:
            _split(rng, x0, y0, q, y1, p, out)
            out.append(Leaf(q + 1, y0, q + 1 + cw, y1, corridor=True))
            _split(rng, q + 2 + cw, y0, x1, y1, p, out)
        else:
            _split(rng, x0, y0, x1, q, p, out)
            out.append(Leaf(x0, q + 1, x1, q + 1 + cw, corridor=True))
            _split(rng, x0, q + 2 + cw, x1, y1, p, out)
        return
    if span > p.max_room and span >= 2 * p.min_room + 1:
        q = int(rng.integers(lo + p.min_room, lo + span - p.min_room + 1))
        if vertical:
            _split(rng, x0, y0, q, y1, p, out)
            _split(rng, q + 1, y0, x1, y1, p, out)
        else:
            _split(rng, x0, y0, x1, q, p, out)
            _split(rng, x0, q + 1, x1, y1, p, out)
        return
    out.append(Leaf(x0, y0, x1, y1))


def _shared_wall(a: Leaf, b: Leaf):
    """(fixed coord, lo, hi, wall-is-vertical) of the one-cell wall between a and b."""
    if a.x1 + 1 == b.x0 or b.x1 + 1 == a.x0:
        x = a.x1 if a.x1 + 1 == b.x0 else b.x1
        lo, hi = max(a.y0, b.y0), min(a.y1, b.y1)
        return (x, lo, hi, True) if hi - lo >= 3 else None
    if a.y1 + 1 == b.y0 or b.y1 + 1 == a.y0:
        y = a.y1 if a.y1 + 1 == b.y0 else b.y1
        lo, hi = max(a.x0, b.x0), min(a.x1, b.x1)
        return (y, lo, hi, False) if hi - lo >= 3 else None
    return None


def generate_floorplan(seed: int, width: int = 60, height: int = 40,
                       params: RoomParams | None = None) -> Floorplan:
    p = params or RoomParams()
    if width < 20 or height < 20:
        raise GenerationError("width and height must be >= 20")
    if p.min_room < 3 or p.max_room < p.min_room:
        raise GenerationError("room size bounds are inconsistent")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xF100]))
    leaves: list[Leaf] = []
    _split(rng, 1, 1, width - 1, height - 1, p, leaves)
    cells = np.full((height, width), CellState.OCCUPIED, dtype=np.int8)
    for leaf in leaves:
        cells[leaf.y0:leaf.y1, leaf.x0:leaf.x1] = CellState.FREE

    edges = []
    for i in range(len(leaves)):
        for j in range(i + 1, len(leaves)):
            wall = _shared_wall(leaves[i], leaves[j])
            if wall is not None:
                edges.append((i, j, wall))
    order = rng.permutation(len(edges))
    # corridor links first so rooms open onto corridors where they can
    ranked = sorted(order.tolist(), key=lambda e: not (leaves[edges[e][0]].corridor
                                                       or leaves[edges[e][1]].corridor))
    parent = list(range(len(leaves)))

    def root(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    doors = []
    for e in ranked:
        i, j, (fixed, lo, hi, vert) = edges[e]
        ri, rj = root(i), root(j)
        both_corr = leaves[i].corridor and leaves[j].corridor
        if ri == rj and not both_corr and rng.random() >= p.extra_door_prob:
            continue
        parent[ri] = rj
        if both_corr:
            start, length = lo, hi - lo
        else:
            length = int(rng.integers(1, 3)) if hi - lo >= 4 else 1
            start = int(rng.integers(lo + 1, hi - length))
        if vert:
            cells[start:start + length, fixed] = CellState.FREE
        else:
            cells[fixed, start:start + length] = CellState.FREE
        doors.append((fixed, start, length, int(not vert)))

    grid = OccupancyGrid(cells, p.resolution)
    free = grid.free()
    ys, xs = np.nonzero(free)
    seed_mask = np.zeros_like(free)
    seed_mask[ys[0], xs[0]] = True
    if not np.array_equal(flood_fill(seed_mask, grid), free):
        raise GenerationError(f"seed {seed}: layout is not connected")
    return Floorplan(grid, leaves, doors)


def generate_map(seed: int, width: int = 60, height: int = 40,
                 params: RoomParams | None = None) -> OccupancyGrid:
    return generate_floorplan(seed, width, height, params).grid
