"""Mutable per-robot and base-station state shared by comms, policy and sim."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from .grid import OccupancyGrid, Pose


class RobotMode(str, Enum):
    EXPLORE = "explore"
    RELAY = "relay"


@dataclass
class RobotState:
    id: int
    pose: Pose
    local: OccupancyGrid
    mode: RobotMode = RobotMode.EXPLORE
    unreported: np.ndarray = None
    reported: np.ndarray = None
    delegated: np.ndarray = None
    plan: list = field(default_factory=list)
    trajectory: list = field(default_factory=list)
    # last trajectory/plan received from each teammate: id -> (traj xy, plan xy)
    shared: dict = field(default_factory=dict)
    alive: bool = True
    failure_time: float = math.inf
    last_relay_start: int = 0
    final: bool = False
    goal: Pose | None = None
    lookahead: Any = None

    def __post_init__(self):
        shape = self.local.shape
        for name in ("unreported", "reported", "delegated"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(shape, dtype=bool))
        if not self.trajectory:
            self.trajectory = [self.pose]

    @property
    def payload(self) -> int:
        return int(np.count_nonzero(self.unreported))

    def trajectory_xy(self) -> np.ndarray:
        return np.asarray(self.trajectory, dtype=np.int64).reshape(-1, 2)

    def plan_xy(self) -> np.ndarray:
        return np.asarray(self.plan, dtype=np.int64).reshape(-1, 2)


@dataclass
class BaseStation:
    pose: Pose
    map: OccupancyGrid


def distance(a: Pose, b: Pose) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])
