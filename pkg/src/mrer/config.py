"""Mission configuration and the flat ``key = value`` file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

from .failure import WeibullParams
from .policy import STRATEGIES, RelayStrategy
from .prediction import PredictorKind


class ConfigError(ValueError):
    pass


@dataclass
class MissionConfig:
    # map source: a map file, or a generated floorplan
    map: str | None = None
    gen_seed: int = 0
    width: int = 60
    height: int = 40

    strategy: str = "proid"
    n_robots: int = 3
    alpha: float = 2.0
    period: int = 100
    final_margin: int = 2

    weibull_lambda: float = 1100.0
    weibull_k: float = 1.5
    failures_enabled: bool = False

    seed: int = 0
    ticks: int = 1000
    speed: float = 1.0  # cells per tick

    # distances in metres, converted through the map resolution
    comm_range: float = 10.0
    sensor_range: float = 20.0
    eps_traj: float = 5.0
    eps_plan: float = 10.0
    penalty: float = 1e6

    n_rays: int = 250
    predictor: str = "oracle"
    reveal_radius: float = 8.0  # cells
    flip_fraction: float = 0.05
    ensemble_size: int = 3
    vis_threshold: float = 0.5
    sample_interval: int = 3  # cells along the path
    min_frontier: int = 1  # cells

    handoff: bool = True
    sharing: bool = True

    def validate(self) -> "MissionConfig":
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.n_robots < 1:
            raise ConfigError("n_robots must be >= 1")
        if self.ticks < 0:
            raise ConfigError("ticks must be >= 0")
        if self.final_margin < 0:
            raise ConfigError("final_margin must be >= 0")
        if self.map is None and (self.width < 20 or self.height < 20):
            raise ConfigError("generated maps need width and height >= 20")
        for name in ("comm_range", "sensor_range", "speed"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if not 0 < self.vis_threshold <= 1:
            raise ConfigError("vis_threshold must lie in (0, 1]")
        try:
            self.relay_strategy()
            self.predictor_kind()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def weibull(self) -> WeibullParams:
        return WeibullParams(self.weibull_lambda, self.weibull_k)

    def relay_strategy(self) -> RelayStrategy:
        return RelayStrategy(self.strategy, alpha=self.alpha, period=self.period,
                             weibull=self.weibull() if self.strategy == "proid_safe" else None)

    def predictor_kind(self) -> PredictorKind:
        if self.predictor == "oracle":
            return PredictorKind.oracle(self.reveal_radius, self.flip_fraction)
        if self.predictor == "heuristic":
            return PredictorKind.heuristic()
        return PredictorKind(self.predictor)

    def replace(self, **changes) -> "MissionConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "MissionConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[key] = coerce(key, raw, known[key].type)
        return cls(**kwargs).validate()


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def coerce(key: str, raw: Any, type_name: str) -> Any:
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if type_name == "bool":
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(text)
        if type_name == "int":
            return int(text)
        if type_name == "float":
            return float(text)
        if text.lower() in ("", "none"):
            return None
        return text
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r} (expected {type_name})") from None


def parse_flat(text: str) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_config(path: str | Path | None = None, **overrides) -> MissionConfig:
    values: dict[str, Any] = {}
    if path is not None:
        try:
            values.update(parse_flat(Path(path).read_text(encoding="utf-8")))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    values.update({k: v for k, v in overrides.items() if v is not None})
    return MissionConfig.from_mapping(values)
