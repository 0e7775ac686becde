"""Map-completion predictors and ensemble visibility voting.

Three stand-ins for a learned completion model:

* ``null``: no completion, members are copies of the input map.
* ``oracle``: ground truth revealed within ``reveal_radius`` of known space,
  each member independently relabels a small fraction of the revealed cells.
* ``heuristic``: observed straight walls are continued into unknown space and
  rooms whose remaining side is missing get closed; the rest of the envelope
  is predicted Free.

Every member keeps the input's known cells exactly.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from . import _kernels
from .grid import CellState, InvalidOrigin, OccupancyGrid, Pose, raycast


class PredictionConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PredictorKind:
    name: str = "null"
    reveal_radius: float = 0.0
    flip_fraction: float = 0.05
    wall_extension: int = 10
    envelope: float = 10.0

    def __post_init__(self):
        if self.name not in ("null", "oracle", "heuristic"):
            raise PredictionConfigError(f"unknown predictor {self.name!r}")
        if self.reveal_radius < 0:
            raise PredictionConfigError("reveal_radius must be >= 0")
        if not 0 <= self.flip_fraction <= 1:
            raise PredictionConfigError("flip_fraction must lie in [0, 1]")

    @classmethod
    def null(cls) -> "PredictorKind":
        return cls("null")

    @classmethod
    def oracle(cls, reveal_radius: float, flip_fraction: float = 0.05) -> "PredictorKind":
        return cls("oracle", reveal_radius=reveal_radius, flip_fraction=flip_fraction)

    @classmethod
    def heuristic(cls, wall_extension: int = 10, envelope: float = 10.0) -> "PredictorKind":
        return cls("heuristic", wall_extension=wall_extension, envelope=envelope)


@dataclass
class PredictedMap:
    grid: OccupancyGrid
    tag: str


@dataclass
class PredictionEnsemble:
    members: list[PredictedMap]
    fingerprint: str
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.members:
            raise ValueError("ensemble needs at least one member")

    def __len__(self) -> int:
        return len(self.members)

    @property
    def shape(self) -> tuple[int, int]:
        return self.members[0].grid.shape

    def visible(self, member: int, pose: Pose, range_: float, n_rays: int) -> np.ndarray | None:
        """Cached raycast over one member; None where the member has the pose blocked."""
        key = (member, pose, range_, n_rays)
        if key not in self._cache:
            try:
                self._cache[key] = raycast(self.members[member].grid, pose, range_, n_rays)
            except InvalidOrigin:
                self._cache[key] = None
        return self._cache[key]

    def member_mask(self, member: int, waypoints: Sequence[Pose], range_: float,
                    n_rays: int) -> np.ndarray:
        raw = np.zeros(self.shape, dtype=bool)
        for p in waypoints:
            seen = self.visible(member, p, range_, n_rays)
            if seen is not None:
                raw |= seen
        return fill_gaps(raw, self.members[member].grid)

    def planning_map(self, threshold: float = 0.5) -> OccupancyGrid:
        """Per-cell label vote: Occupied/Free where at least ``threshold`` of members agree."""
        stack = np.stack([m.grid.cells for m in self.members])
        need = threshold * len(self.members) - 1e-9
        occ = (stack == CellState.OCCUPIED).sum(axis=0) >= need
        free = (stack == CellState.FREE).sum(axis=0) >= need
        cells = np.full(self.shape, CellState.UNKNOWN, dtype=np.int8)
        cells[free] = CellState.FREE
        cells[occ] = CellState.OCCUPIED
        return OccupancyGrid(cells, self.members[0].grid.resolution)


def fill_gaps(raw: np.ndarray, member: OccupancyGrid) -> np.ndarray:
    """Flood-fill the raw ray union, confined to its one-cell neighbourhood.

    Equivalent to ``flood_fill`` over ``member`` with Unknown cells and cells
    outside the neighbourhood turned into walls, plus the seen walls themselves.
    The fill closes holes between beams without leaking into unseen rooms.
    """
    if not raw.any():
        return raw
    return _kernels.fill_gaps(raw, member.cells)


def _fingerprint(local: OccupancyGrid) -> str:
    return hashlib.sha1(local.cells.tobytes()).hexdigest()[:16]


def _member_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFF, index, 0xC0DE]))


def predict(kind: PredictorKind, local: OccupancyGrid, world: OccupancyGrid | None = None,
            ensemble_size: int = 3, rng_seed: int = 0) -> PredictionEnsemble:
    if ensemble_size < 1:
        raise PredictionConfigError("ensemble_size must be >= 1")
    if kind.name == "oracle" and world is None:
        raise PredictionConfigError("oracle predictor needs the ground-truth map")
    members = []
    band = reveal_band(local, kind.reveal_radius) if kind.name == "oracle" else None
    for m in range(ensemble_size):
        rng = _member_rng(rng_seed, m)
        if kind.name == "null":
            grid = local.copy()
        elif kind.name == "oracle":
            grid = _oracle_member(local, world, kind, rng, band)
        else:
            grid = _heuristic_member(local, kind, rng)
        members.append(PredictedMap(grid, f"{kind.name}:{rng_seed}:{m}"))
    return PredictionEnsemble(members, _fingerprint(local))


def reveal_band(local: OccupancyGrid, radius: float) -> np.ndarray:
    """Unknown cells within Euclidean ``radius`` of some known cell."""
    known = local.known()
    if radius <= 0 or not known.any():
        return np.zeros(local.shape, dtype=bool)
    dist = ndimage.distance_transform_edt(~known)
    return ~known & (dist <= radius)


def _oracle_member(local, world, kind, rng, band=None):
    grid = local.copy()
    if band is None:
        band = reveal_band(local, kind.reveal_radius)
    grid.cells[band] = world.cells[band]
    ys, xs = np.nonzero(band)
    n_flip = int(round(kind.flip_fraction * len(xs)))
    if n_flip:
        pick = rng.choice(len(xs), size=n_flip, replace=False)
        fy, fx = ys[pick], xs[pick]
        grid.cells[fy, fx] = np.where(grid.cells[fy, fx] == CellState.FREE,
                                      CellState.OCCUPIED, CellState.FREE)
    return grid


_DIRS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def _heuristic_member(local, kind, rng):
    cells = local.cells.copy()
    h, w = cells.shape
    unknown0 = cells == CellState.UNKNOWN
    occ = cells == CellState.OCCUPIED
    reach = int(rng.integers(max(1, kind.wall_extension // 2), kind.wall_extension + 1))
    ends: dict[tuple[int, int], list[tuple[int, int]]] = {}
    ys, xs = np.nonzero(occ)
    for x, y in zip(xs.tolist(), ys.tolist()):
        for dx, dy in _DIRS:
            bx, by = x - dx, y - dy
            if not (0 <= bx < w and 0 <= by < h) or not occ[by, bx]:
                continue  # not the tip of a straight segment
            cx, cy, n = x + dx, y + dy, 0
            while n < reach and 0 <= cx < w and 0 <= cy < h and unknown0[cy, cx]:
                cells[cy, cx] = CellState.OCCUPIED
                cx, cy, n = cx + dx, cy + dy, n + 1
            if n:
                ends.setdefault((dx, dy), []).append((cx - dx, cy - dy))
    # close rooms: two parallel extensions ending level with each other
    for (dx, dy), tips in ends.items():
        if dx:
            by_col: dict[int, list[int]] = {}
            for tx, ty in tips:
                by_col.setdefault(tx, []).append(ty)
            for tx, rows in by_col.items():
                rows.sort()
                for a, b in zip(rows, rows[1:]):
                    span = unknown0[a + 1:b, tx]
                    if 1 < b - a <= 2 * kind.wall_extension and span.all():
                        cells[a + 1:b, tx] = CellState.OCCUPIED
        else:
            by_row: dict[int, list[int]] = {}
            for tx, ty in tips:
                by_row.setdefault(ty, []).append(tx)
            for ty, cols in by_row.items():
                cols.sort()
                for a, b in zip(cols, cols[1:]):
                    span = unknown0[ty, a + 1:b]
                    if 1 < b - a <= 2 * kind.wall_extension and span.all():
                        cells[ty, a + 1:b] = CellState.OCCUPIED
    env = reveal_band(local, kind.envelope)
    rest = env & (cells == CellState.UNKNOWN)
    cells[rest] = CellState.FREE
    return OccupancyGrid(cells, local.resolution)


def probabilistic_visibility(ensemble: PredictionEnsemble, waypoints: Sequence[Pose],
                             range_: float, n_rays: int = 250,
                             threshold: float = 0.5) -> np.ndarray:
    """Cells seen along ``waypoints`` in at least ``threshold`` of the members."""
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    votes = np.zeros(ensemble.shape, dtype=np.int32)
    if not waypoints:
        return votes.astype(bool)
    for m in range(len(ensemble)):
        votes += ensemble.member_mask(m, waypoints, range_, n_rays)
    return votes >= threshold * len(ensemble) - 1e-9


def votable(ensemble: PredictionEnsemble, threshold: float = 0.5) -> np.ndarray:
    """Cells labelled (not Unknown) in at least ``threshold`` of the members.

    Only these can pass the visibility vote, since members never see their Unknown cells.
    """
    labelled = sum((m.grid.cells != CellState.UNKNOWN).astype(np.int32) for m in ensemble.members)
    return labelled >= threshold * len(ensemble) - 1e-9


def gain_upper_bound(candidates: np.ndarray, waypoints: Sequence[Pose], range_: float) -> int:
    """Candidate cells near some waypoint; bounds ``expected_info_gain``.

    Gap filling can add cells one diagonal step past the last ray cell, so the
    disk radius is the sensing range plus sqrt(2).
    """
    if not waypoints:
        return 0
    xs = np.array([p[0] for p in waypoints], dtype=np.int64)
    ys = np.array([p[1] for p in waypoints], dtype=np.int64)
    return int(_kernels.disk_union_count(candidates, xs, ys, float(range_) + math.sqrt(2)))


def expected_info_gain(ensemble: PredictionEnsemble, waypoints: Sequence[Pose], range_: float,
                       n_rays: int, threshold: float, already_known: np.ndarray) -> int:
    vis = probabilistic_visibility(ensemble, waypoints, range_, n_rays, threshold)
    return int(np.count_nonzero(vis & ~already_known))
