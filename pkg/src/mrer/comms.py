"""Range-gated exchange between robots and with the base station."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Pose, fuse
from .state import BaseStation, RobotMode, RobotState, distance


class ProtocolError(RuntimeError):
    pass


def in_range(a: Pose, b: Pose, d: float) -> bool:
    dx, dy = a[0] - b[0], a[1] - b[1]
    return dx * dx + dy * dy < d * d


def _require(i: RobotState, j: RobotState, d: float) -> None:
    if not (i.alive and j.alive):
        raise ProtocolError(f"robot {i.id if not i.alive else j.id} is not alive")
    if not in_range(i.pose, j.pose, d):
        raise ProtocolError(f"robots {i.id} and {j.id} are out of range")


def exchange(i: RobotState, j: RobotState, d: float, base_pose: Pose,
             sharing: bool = True) -> dict:
    """Fuse maps, merge reported/delegated views and swap commitments.

    Cells both robots still carry stay with whichever is nearer the base
    (lower id on ties); the other marks them delegated.
    """
    _require(i, j, d)
    fused = fuse(i.local, j.local)
    i.local = fused
    j.local = fused.copy()

    reported = i.reported | j.reported
    both = i.unreported & j.unreported
    dropped = 0
    if both.any():
        di, dj = distance(i.pose, base_pose), distance(j.pose, base_pose)
        keeper, other = (i, j) if (di, i.id) <= (dj, j.id) else (j, i)
        other.unreported &= ~both
        other.delegated |= both
        dropped = int(both.sum())
    di_old, dj_old = i.delegated.copy(), j.delegated
    i.delegated = (i.delegated | dj_old) & ~i.unreported
    j.delegated = (dj_old | di_old) & ~j.unreported
    for r in (i, j):
        r.unreported &= ~reported
        r.reported = reported.copy()
    if sharing:
        i.shared[j.id] = (j.trajectory_xy(), j.plan_xy())
        j.shared[i.id] = (i.trajectory_xy(), i.plan_xy())
    return {"type": "exchange", "robots": [i.id, j.id], "deduplicated": dropped}


def handoff_possible(i: RobotState, j: RobotState, base_pose: Pose) -> bool:
    """``i`` is relaying something and ``j`` is strictly nearer the base."""
    if i.mode != RobotMode.RELAY or not i.unreported.any():
        return False
    return distance(j.pose, base_pose) < distance(i.pose, base_pose)


def try_handoff(i: RobotState, j: RobotState, base_pose: Pose, d: float) -> dict | None:
    """Hand ``i``'s relay payload to ``j`` if ``j`` is strictly nearer the base.

    An empty payload is not handed over: there is no relay task to delegate.
    """
    _require(i, j, d)
    if not handoff_possible(i, j, base_pose):
        return None
    payload = int(i.unreported.sum())
    j.unreported |= i.unreported
    j.delegated &= ~j.unreported
    i.delegated |= i.unreported
    i.unreported = np.zeros_like(i.unreported)
    j.mode = RobotMode.RELAY
    j.plan = []
    j.goal = None
    if not i.final:
        i.mode = RobotMode.EXPLORE
    return {"type": "handoff", "robots": [i.id, j.id], "payload": payload}


def report_to_base(i: RobotState, base: BaseStation, d: float) -> dict:
    """Upload to the base, receive its map, clear the payload."""
    if not i.alive:
        raise ProtocolError(f"robot {i.id} is not alive")
    if not in_range(i.pose, base.pose, d):
        raise ProtocolError(f"robot {i.id} is out of base range")
    before = int(base.map.known().sum())
    payload = i.payload
    base.map = fuse(base.map, i.local)
    i.local = fuse(i.local, base.map)
    i.reported = base.map.known()
    i.unreported = np.zeros_like(i.unreported)
    i.delegated &= ~i.reported
    if not i.final:
        i.mode = RobotMode.EXPLORE
    return {"type": "report", "robots": [i.id], "payload": payload,
            "base_new": int(base.map.known().sum()) - before}


@dataclass
class Commitments:
    points: np.ndarray  # (k, 2) x, y
    is_plan: np.ndarray  # (k,) bool

    def __len__(self) -> int:
        return len(self.points)


def commitments_of(i: RobotState) -> Commitments:
    """Union of the trajectories and plans last received from teammates."""
    pts, tags = [], []
    for jid in sorted(i.shared):
        if jid == i.id:
            continue
        traj, plan = i.shared[jid]
        pts += [traj, plan]
        tags += [np.zeros(len(traj), bool), np.ones(len(plan), bool)]
    if not pts:
        return Commitments(np.zeros((0, 2), np.int64), np.zeros(0, bool))
    return Commitments(np.concatenate(pts), np.concatenate(tags))
