"""Cross-product experiment sweeps with deterministic CSV output."""

from __future__ import annotations

import csv
import io
import itertools
import logging
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Sequence

from .. import sim
from ..config import ConfigError, MissionConfig, coerce, parse_flat
from ..grid import OccupancyGrid, load_map
from .floorplan import generate_map

log = logging.getLogger(__name__)

MapRef = int | str  # generator seed or map file path


@dataclass
class SweepSpec:
    strategies: list[str] = field(default_factory=lambda: ["proid"])
    n_robots: list[int] = field(default_factory=lambda: [3])
    weibull: list[tuple[float, float] | None] = field(default_factory=lambda: [None])
    alphas: list[float] = field(default_factory=lambda: [2.0])
    periods: list[int] = field(default_factory=lambda: [100])
    seeds: list[int] = field(default_factory=lambda: [0])
    maps: list[MapRef] = field(default_factory=lambda: [0])
    ticks: int = 1000
    handoff: list[bool] = field(default_factory=lambda: [True])
    sharing: list[bool] = field(default_factory=lambda: [True])
    base: dict[str, Any] = field(default_factory=dict)  # other MissionConfig keys
    record_timing: bool = True

    def validate(self) -> "SweepSpec":
        for name in ("strategies", "n_robots", "weibull", "alphas", "periods", "seeds",
                     "maps", "handoff", "sharing"):
            if not getattr(self, name):
                raise ConfigError(f"sweep list {name!r} is empty")
        for cfg in self.configs():
            cfg.validate()
        return self

    def cells(self):
        """(map, config, seed) for every point of the cross product, in a fixed order."""
        for m, strategy, n, wb, alpha, period, ho, sh, seed in itertools.product(
                self.maps, self.strategies, self.n_robots, self.weibull, self.alphas,
                self.periods, self.handoff, self.sharing, self.seeds):
            yield m, self._config(strategy, n, wb, alpha, period, ho, sh, seed), seed

    def _config(self, strategy, n, wb, alpha, period, ho, sh, seed) -> MissionConfig:
        extra = dict(self.base)
        if wb is None:
            extra["failures_enabled"] = False
        else:
            extra.update(failures_enabled=True, weibull_lambda=wb[0], weibull_k=wb[1])
        return MissionConfig(**{**extra, "strategy": strategy, "n_robots": n, "alpha": alpha,
                                "period": period, "handoff": ho, "sharing": sh, "seed": seed,
                                "ticks": self.ticks})

    def configs(self):
        return [cfg for _, cfg, _ in self.cells()]

    def size(self) -> int:
        return (len(self.maps) * len(self.strategies) * len(self.n_robots) * len(self.weibull)
                * len(self.alphas) * len(self.periods) * len(self.handoff) * len(self.sharing)
                * len(self.seeds))


@dataclass
class ResultRow:
    run_id: int
    strategy: str
    n: int
    lam: float | None
    k: float | None
    alpha: float
    period: int
    handoff: bool
    sharing: bool
    seed: int
    map_id: str
    coverage_ratio: float | None
    relay_count: int | None
    voluntary_relays: int | None
    handoff_count: int | None
    failure_count: int | None
    wall_time: float
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


COLUMNS = [f.name for f in fields(ResultRow)]


def map_id(ref: MapRef) -> str:
    return f"gen:{ref}" if isinstance(ref, int) else str(ref)


def resolve_map(ref: MapRef, width: int = 60, height: int = 40) -> OccupancyGrid:
    if isinstance(ref, int):
        return generate_map(ref, width, height)
    return load_map(Path(ref).read_text(encoding="utf-8"))


def _run_cell(args) -> ResultRow:
    run_id, ref, cfg, seed, record_timing = args
    t0 = time.perf_counter()
    row = ResultRow(run_id, cfg.strategy, cfg.n_robots,
                    cfg.weibull_lambda if cfg.failures_enabled else None,
                    cfg.weibull_k if cfg.failures_enabled else None,
                    cfg.alpha, cfg.period, cfg.handoff, cfg.sharing, seed, map_id(ref),
                    None, None, None, None, None, 0.0)
    try:
        world = resolve_map(ref, cfg.width, cfg.height)
        res = sim.run(cfg, seed=seed, world=world)
        row.coverage_ratio = res.coverage_ratio
        row.relay_count = res.relay_count
        row.voluntary_relays = res.voluntary_relays
        row.handoff_count = res.handoff_count
        row.failure_count = res.failure_count
    except Exception as exc:  # recorded, the sweep carries on
        row.error = f"{type(exc).__name__}: {exc}"
        log.warning("run %d failed:\n%s", run_id, traceback.format_exc())
    if record_timing:
        row.wall_time = round(time.perf_counter() - t0, 3)
    return row


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[ResultRow]:
    spec.validate()
    log.info("sweep of %d runs", spec.size())
    jobs = [(i, ref, cfg, seed, spec.record_timing)
            for i, (ref, cfg, seed) in enumerate(spec.cells())]
    if workers <= 1:
        return [_run_cell(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map() yields in submission order, so the CSV does not depend on scheduling
        return list(pool.map(_run_cell, jobs))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in rows:
        w.writerow([_fmt(getattr(row, c)) for c in COLUMNS])
    return buf.getvalue()


_TYPES = {f.name: f.type for f in fields(ResultRow)}


def _parse_cell(name: str, text: str):
    kind = _TYPES[name]
    if text == "" and "None" in kind:
        return None
    if kind.startswith("int"):
        return int(text)
    if kind.startswith("float"):
        return float(text)
    if kind == "bool":
        return text == "True"
    return text


def rows_from_csv(text: str) -> list[ResultRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != COLUMNS:
        raise ValueError(f"unexpected CSV header {header}")
    return [ResultRow(**{c: _parse_cell(c, v) for c, v in zip(header, rec)}) for rec in reader]


def write_csv(rows: Sequence[ResultRow], path: str | Path) -> None:
    Path(path).write_text(rows_to_csv(rows), encoding="utf-8")


# -- spec files ---------------------------------------------------------------

_LIST_KEYS = {"strategies", "n_robots", "weibull", "alphas", "periods", "seeds", "maps",
              "handoff", "sharing"}


def _expand(item: str) -> list[str]:
    """``a..b`` integer ranges (inclusive), optionally prefixed like ``gen:0..9``."""
    prefix, _, body = item.rpartition(":") if item.startswith("gen:") else ("", "", item)
    if ".." in body:
        lo, hi = body.split("..", 1)
        return [f"{prefix}:{v}" if prefix else str(v) for v in range(int(lo), int(hi) + 1)]
    return [item]


def _items(raw: str) -> list[str]:
    return [x for part in raw.split(",") if part.strip() for x in _expand(part.strip())]


def _bool(key: str, text: str) -> bool:
    return coerce(key, text, "bool")


def parse_spec(text: str) -> SweepSpec:
    """Flat ``key = value`` file; list keys take comma-separated values.

    Keys that are not sweep axes are passed through as mission config keys.
    """
    values = parse_flat(text)
    spec = SweepSpec()
    mission_fields = {f.name: f for f in fields(MissionConfig)}
    try:
        for key, raw in values.items():
            if key in _LIST_KEYS:
                items = _items(raw)
                if key == "strategies":
                    spec.strategies = items
                elif key in ("n_robots", "seeds", "periods"):
                    setattr(spec, key, [int(x) for x in items])
                elif key == "alphas":
                    spec.alphas = [float(x) for x in items]
                elif key == "weibull":
                    spec.weibull = [None if x.lower() == "none"
                                    else tuple(float(v) for v in x.split(":")) for x in items]
                elif key == "maps":
                    spec.maps = [int(x[4:]) if x.startswith("gen:") else int(x) if x.isdigit() else x
                                 for x in items]
                else:
                    setattr(spec, key, [_bool(key, x) for x in items])
            elif key == "ticks":
                spec.ticks = int(raw)
            elif key == "record_timing":
                spec.record_timing = _bool(key, raw)
            elif key in mission_fields:
                spec.base[key] = coerce(key, raw, mission_fields[key].type)
            else:
                raise ConfigError(f"unknown sweep key {key!r}")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad sweep value: {exc}") from None
    if any(w is not None and len(w) != 2 for w in spec.weibull):
        raise ConfigError("weibull entries are 'lambda:k' or 'none'")
    return spec.validate()


def load_spec(path: str | Path) -> SweepSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read sweep spec {path}: {exc}") from None
    return parse_spec(text)


def spec_to_dict(spec: SweepSpec) -> dict:
    return asdict(spec)
