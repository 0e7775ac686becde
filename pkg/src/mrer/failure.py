"""Weibull lifetime model used for robot failures and survival-weighted relaying."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class WeibullParams:
    lam: float  # scale, ticks
    k: float  # shape

    def __post_init__(self):
        if not (self.lam > 0 and self.k > 0):
            raise ValueError(f"Weibull parameters must be positive, got lam={self.lam} k={self.k}")


def _check(t: float) -> None:
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")


def cdf(params: WeibullParams, t: float) -> float:
    _check(t)
    return -math.expm1(-((t / params.lam) ** params.k))


def survival(params: WeibullParams, t: float) -> float:
    _check(t)
    return math.exp(-((t / params.lam) ** params.k))


def hazard(params: WeibullParams, t: float) -> float:
    """Instantaneous failure rate. At t=0 with k<1 this is +inf."""
    _check(t)
    k, lam = params.k, params.lam
    if t == 0:
        if k < 1:
            return math.inf
        return 1 / lam if k == 1 else 0.0
    return (k / lam) * (t / lam) ** (k - 1)


def sample_failure_time(params: WeibullParams, u: float) -> float:
    """Inverse-transform draw for a uniform ``u`` in (0, 1)."""
    if not 0 < u < 1:
        raise ValueError(f"u must lie in (0, 1), got {u}")
    return params.lam * (-math.log1p(-u)) ** (1 / params.k)


def failure_schedule(params: WeibullParams | None, n_robots: int, seed: int,
                     enabled: bool = True) -> list[float]:
    """One lifetime per robot, each from its own substream of ``seed``.

    Disabled or parameterless schedules give ``inf`` for everyone.
    """
    if params is None or not enabled:
        return [math.inf] * n_robots
    out = []
    for i in range(n_robots):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i, 0x5EED]))
        u = rng.random()
        while u == 0.0:
            u = rng.random()
        out.append(sample_failure_time(params, u))
    return out


def survival_weights(params: WeibullParams, t: float, t_to_base: float, t_to_front: float,
                     t_front_to_base: float) -> tuple[float, float]:
    """Survival to the end of an immediate relay vs. a relay after the next frontier.

    The detour horizon is never shorter than the direct one: the two travel-time
    estimates come from different maps and could otherwise invert.
    """
    for x in (t, t_to_base, t_to_front, t_front_to_base):
        _check(x)
    detour = max(t_to_front + t_front_to_base, t_to_base)
    return survival(params, t + t_to_base), survival(params, t + detour)
