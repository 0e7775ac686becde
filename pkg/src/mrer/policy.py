"""Frontier scoring and the relay decision rules."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import grid
from .comms import Commitments
from .failure import WeibullParams
from .grid import Frontier, OccupancyGrid, Pose
from .prediction import PredictionEnsemble, expected_info_gain, gain_upper_bound, votable
from .state import RobotMode

log = logging.getLogger(__name__)

STRATEGIES = ("proid", "proid_safe", "periodic", "final_only")


@dataclass(frozen=True)
class RelayStrategy:
    kind: str
    alpha: float = 2.0
    period: int = 100
    weibull: WeibullParams | None = None

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.kind!r}; expected one of {STRATEGIES}")
        if self.alpha < 1:
            raise ValueError("alpha must be >= 1")
        if self.period < 1:
            raise ValueError("period must be >= 1")
        if self.kind == "proid_safe" and self.weibull is None:
            raise ValueError("proid_safe needs Weibull parameters")

    @property
    def uses_rates(self) -> bool:
        return self.kind in ("proid", "proid_safe")


@dataclass
class ScoredFrontier:
    frontier: Frontier
    path: list
    travel_time: int
    gain: int
    score: float
    penalized: bool = False

    @property
    def centroid(self) -> Pose:
        return self.frontier.centroid


def commitment_penalty(point: Pose, commitments: Commitments, eps_traj: float,
                       eps_plan: float, gamma: float) -> float:
    if not len(commitments):
        return 0.0
    d2 = ((commitments.points - np.asarray(point)) ** 2).sum(axis=1)
    eps = np.where(commitments.is_plan, eps_plan, eps_traj)
    return gamma if bool((d2 <= eps * eps).any()) else 0.0


def score_frontiers(frontiers: Sequence[Frontier], ensemble: PredictionEnsemble,
                    plan_map: OccupancyGrid, pose: Pose, commitments: Commitments,
                    eps_traj: float = 5.0, eps_plan: float = 10.0, gamma: float = 1e6, *,
                    known: np.ndarray | None = None, sensor_range: float = 20.0,
                    n_rays: int = 250, threshold: float = 0.5, sample_interval: int = 3,
                    speed: float = 1.0) -> list[ScoredFrontier]:
    """Predicted path coverage per unit travel time, minus commitment penalties.

    Frontiers the planner cannot reach are dropped.
    """
    if not frontiers:
        raise ValueError("no frontiers to score")
    if known is None:
        known = plan_map.known()
    field = grid.distance_field(grid.passable(plan_map), pose)
    out = []
    for f in frontiers:
        cx, cy = f.centroid
        if field[cy, cx] < 0:
            log.debug("frontier %s unreachable from %s, skipped", f.centroid, pose)
            continue
        path = grid.path_from_field(field, f.centroid)
        tt = grid.travel_time(path, speed)
        samples = grid.path_sample(path, sample_interval)
        gain = expected_info_gain(ensemble, samples, sensor_range, n_rays, threshold, known)
        pen = commitment_penalty(f.centroid, commitments, eps_traj, eps_plan, gamma)
        out.append(ScoredFrontier(f, path, tt, gain, gain / (1 + tt) - pen, pen > 0))
    return out


def best_frontier(frontiers: Sequence[Frontier], ensemble: PredictionEnsemble,
                  plan_map: OccupancyGrid, pose: Pose, commitments: Commitments,
                  eps_traj: float = 5.0, eps_plan: float = 10.0, gamma: float = 1e6, *,
                  known: np.ndarray | None = None, sensor_range: float = 20.0,
                  n_rays: int = 250, threshold: float = 0.5, sample_interval: int = 3,
                  speed: float = 1.0) -> ScoredFrontier | None:
    """Same choice as ``select_frontier(score_frontiers(...))``, scoring fewer candidates.

    Candidates are visited by an optimistic score built from a cheap gain bound;
    the exact gain is only computed while the bound can still beat the incumbent.
    """
    if not frontiers:
        return None
    if known is None:
        known = plan_map.known()
    field = grid.distance_field(grid.passable(plan_map), pose)
    candidates = votable(ensemble, threshold) & ~known
    pending = []
    for f in frontiers:
        cx, cy = f.centroid
        if field[cy, cx] < 0:
            continue
        path = grid.path_from_field(field, f.centroid)
        tt = grid.travel_time(path, speed)
        samples = grid.path_sample(path, sample_interval)
        pen = commitment_penalty(f.centroid, commitments, eps_traj, eps_plan, gamma)
        bound = gain_upper_bound(candidates, samples, sensor_range) / (1 + tt) - pen
        pending.append((bound, f, path, tt, samples, pen))
    pending.sort(key=lambda e: (-e[0], e[3], e[1].centroid[1], e[1].centroid[0]))
    best = None
    for bound, f, path, tt, samples, pen in pending:
        if best is not None and bound < best.score:
            break
        gain = expected_info_gain(ensemble, samples, sensor_range, n_rays, threshold, known)
        cand = ScoredFrontier(f, path, tt, gain, gain / (1 + tt) - pen, pen > 0)
        if best is None or _rank(cand) < _rank(best):
            best = cand
    return best


def _rank(s: ScoredFrontier):
    return (-s.score, s.travel_time, s.centroid[1], s.centroid[0])


def select_frontier(scored: Sequence[ScoredFrontier]) -> ScoredFrontier | None:
    """Highest score; ties go to the shorter trip, then the smaller (y, x) centroid."""
    if not scored:
        return None
    return min(scored, key=_rank)


def roid_now(unreported: int, t_to_base: float) -> float:
    if unreported < 0 or t_to_base < 0:
        raise ValueError("counts and times must be non-negative")
    if t_to_base == 0:
        return math.inf if unreported > 0 else 0.0
    return unreported / t_to_base


def proid(unreported: int, expected_gain: int, t_to_front: float, t_front_to_base: float) -> float:
    total = t_to_front + t_front_to_base
    if total <= 0:
        raise ValueError("exploring-first delivery time must be positive")
    return (unreported + expected_gain) / total


def relay_decision(rate_now: float, rate_pred: float, alpha: float) -> bool:
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    return rate_now > alpha * rate_pred


def relay_decision_safe(rate_now: float, rate_pred: float, s_now: float, s_pred: float,
                        alpha: float) -> bool:
    """Relay when the survival-weighted immediate rate beats the weighted detour rate."""
    if not 0 <= s_pred <= s_now <= 1:
        raise ValueError(f"need 0 <= s_pred <= s_now <= 1, got s_now={s_now} s_pred={s_pred}")
    if s_now == s_pred:
        return relay_decision(rate_now, rate_pred, alpha)
    # s_now > 0 here; dividing it out keeps the rule invariant to a common factor
    return rate_now > alpha * rate_pred * (s_pred / s_now)


def final_return_due(t: int, horizon: int, t_to_base: int, margin: int = 2) -> bool:
    return horizon - t <= t_to_base + margin


def periodic_due(t: int, period: int, last_relay_start: int,
                 mode: RobotMode = RobotMode.EXPLORE) -> bool:
    if period < 1:
        raise ValueError("period must be >= 1")
    return mode == RobotMode.EXPLORE and t - last_relay_start >= period
