"""Deterministic tick engine for the multi-robot exploration-and-relay mission.

Each tick runs, in this order: failures, observation, pairwise communication
(exchange then handoff, ascending id pairs), the final-return guard, exploring
robots' waypoint and relay decisions, movement, and reporting to the base.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy import ndimage

from . import comms, grid, policy
from .config import MissionConfig
from .failure import failure_schedule, survival_weights
from .grid import FOUR, CellState, OccupancyGrid, Pose
from .prediction import PredictionEnsemble, predict
from .state import BaseStation, RobotMode, RobotState


class InvariantError(RuntimeError):
    pass


def observable_cells(world: OccupancyGrid) -> np.ndarray:
    """Free cells plus the walls that touch them."""
    free = world.free()
    return free | (world.occupied() & ndimage.binary_dilation(free, structure=FOUR))


def coverage_ratio(base_map: OccupancyGrid, world: OccupancyGrid) -> float:
    if base_map.shape != world.shape:
        raise ValueError("base map and ground truth differ in shape")
    obs = observable_cells(world)
    return float(np.count_nonzero(base_map.known() & obs) / np.count_nonzero(obs))


def _mask_hash(mask: np.ndarray) -> str:
    return hashlib.sha1(np.packbits(mask).tobytes()).hexdigest()[:16]


@dataclass
class Lookahead:
    """What a robot knows about its current waypoint, refreshed on selection."""
    ensemble: PredictionEnsemble
    path: list
    samples: list[int]
    t_front_to_base: int


@dataclass
class MissionResult:
    coverage_ratio: float
    relay_count: int
    voluntary_relays: int
    handoff_count: int
    failure_count: int
    coverage_series: list[float]
    events: list[dict]
    ticks: int
    unreported_at_end: dict[int, int] = field(default_factory=dict)

    def event_lines(self) -> Iterator[str]:
        for ev in self.events:
            yield json.dumps(ev, separators=(",", ":"))

    def event_log(self) -> str:
        return "".join(line + "\n" for line in self.event_lines())

    def log_hash(self) -> str:
        return hashlib.sha256(self.event_log().encode()).hexdigest()


class Mission:
    def __init__(self, config: MissionConfig, world: OccupancyGrid, seed: int | None = None):
        self.cfg = config.validate()
        self.world = world
        self.seed = config.seed if seed is None else seed
        res = world.resolution
        self.d = config.comm_range / res
        self.range = config.sensor_range / res
        self.eps_traj = config.eps_traj / res
        self.eps_plan = config.eps_plan / res
        self.strategy = config.relay_strategy()
        self.predictor = config.predictor_kind()
        self.horizon = config.ticks
        self.t = 0

        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 0x57A7]))
        ys, xs = np.nonzero(world.free())
        k = int(rng.integers(len(xs)))
        start = (int(xs[k]), int(ys[k]))
        self.base = BaseStation(start, OccupancyGrid.unknown_like(world))
        lifetimes = failure_schedule(config.weibull(), config.n_robots, self.seed,
                                     config.failures_enabled)
        self.robots = [RobotState(i, start, OccupancyGrid.unknown_like(world),
                                  failure_time=lifetimes[i]) for i in range(config.n_robots)]
        self.events: list[dict] = []
        self.observable = observable_cells(world)
        self._n_observable = int(self.observable.sum())
        self.coverage_series: list[float] = []
        self._home: dict[int, np.ndarray] = {}
        self._emit("mission_start", robots=list(range(config.n_robots)),
                   pose=list(start), width=world.width, height=world.height,
                   map=grid.dump_map(world), strategy=config.strategy,
                   failure_times=[None if math.isinf(f) else round(f, 6) for f in lifetimes])

    # -- bookkeeping -------------------------------------------------------

    def _emit(self, type_: str, **fields) -> dict:
        ev = {"tick": self.t, "type": type_, **fields}
        self.events.append(ev)
        return ev

    def coverage(self) -> float:
        return float(np.count_nonzero(self.base.map.known() & self.observable) / self._n_observable)

    def alive(self) -> list[RobotState]:
        return [r for r in self.robots if r.alive]

    def _set_mode(self, r: RobotState, mode: RobotMode, cause: str, **detail) -> None:
        if r.mode == mode:
            return
        self._emit("mode_change", robots=[r.id], mode=mode.value, cause=cause)
        if mode == RobotMode.RELAY:
            r.last_relay_start = self.t
            self._emit("relay_start", robots=[r.id], cause=cause, payload=r.payload,
                       pos=list(r.pose), **detail)
            r.plan, r.goal, r.lookahead = [], None, None
        else:
            r.goal, r.lookahead = None, None
        r.mode = mode

    def _home_field(self, r: RobotState) -> np.ndarray:
        """Steps to the base over the robot's known free cells."""
        f = self._home.get(r.id)
        if f is None:
            f = grid.distance_field(r.local.free(), self.base.pose)
            self._home[r.id] = f
        return f

    def t_to_base(self, r: RobotState) -> int:
        steps = int(self._home_field(r)[r.pose[1], r.pose[0]])
        if steps < 0:
            raise InvariantError(f"robot {r.id} has no known route home at tick {self.t}")
        return grid.travel_time(steps, self.cfg.speed)

    def _union_payload(self) -> np.ndarray:
        u = self.base.map.known().copy()
        for r in self.alive():
            u |= r.unreported
        return u

    # -- tick phases -------------------------------------------------------

    def step(self) -> None:
        if self.t >= self.horizon:
            raise InvariantError("mission horizon already reached")
        self._home.clear()
        self._phase_failures()
        alive = self.alive()
        for r in alive:
            self._phase_observe(r)
        for a in range(len(alive)):
            for b in range(a + 1, len(alive)):
                self._phase_comms(alive[a], alive[b])
        for r in alive:
            self._phase_final(r)
        for r in alive:
            if r.mode == RobotMode.EXPLORE:
                self._phase_decide(r)
        for r in alive:
            self._phase_move(r)
        for r in alive:
            if comms.in_range(r.pose, self.base.pose, self.d):
                was = r.mode
                ev = comms.report_to_base(r, self.base, self.d)
                self._home.pop(r.id, None)
                if ev["payload"] or ev["base_new"]:
                    self._emit("report", robots=[r.id], payload=ev["payload"],
                               base_new=ev["base_new"], coverage=round(self.coverage(), 6))
                if was != r.mode:
                    r.mode = was
                    self._set_mode(r, RobotMode.EXPLORE, "report")
        self.coverage_series.append(self.coverage())
        self.t += 1

    def _phase_failures(self) -> None:
        for r in self.robots:
            if r.alive and r.failure_time <= self.t:
                r.alive = False
                self._emit("failure", robots=[r.id], lost=r.payload, pos=list(r.pose))

    def _phase_observe(self, r: RobotState) -> None:
        _, new = grid.observe(r.local, self.world, r.pose, self.range, self.cfg.n_rays)
        r.unreported |= new & ~r.reported & ~r.delegated
        self._emit("observe_summary", robots=[r.id], pos=list(r.pose), new=int(new.sum()),
                   payload=r.payload, mode=r.mode.value)

    def _phase_comms(self, a: RobotState, b: RobotState) -> None:
        if not comms.in_range(a.pose, b.pose, self.d):
            return
        ev = comms.exchange(a, b, self.d, self.base.pose, sharing=self.cfg.sharing)
        self._home.pop(a.id, None)
        self._home.pop(b.id, None)
        self._emit("exchange", robots=[a.id, b.id], deduplicated=ev["deduplicated"],
                   pos=[list(a.pose), list(b.pose)])
        if self.cfg.sharing:
            self._yield_goal(a, b)
        if not self.cfg.handoff:
            return
        for giver, taker in ((a, b), (b, a)):
            if not comms.handoff_possible(giver, taker, self.base.pose):
                continue
            before = self._union_payload()
            taker_mode = taker.mode
            giver_final = giver.final
            ho = comms.try_handoff(giver, taker, self.base.pose, self.d)
            if ho is None:
                continue
            after = self._union_payload()
            self._emit("handoff", robots=[giver.id, taker.id], payload=ho["payload"],
                       pos=[list(giver.pose), list(taker.pose)],
                       union_before=_mask_hash(before), union_after=_mask_hash(after))
            if not np.array_equal(before, after):
                raise InvariantError(f"handoff {giver.id}->{taker.id} changed the payload union")
            # try_handoff flips modes directly; replay them through the event path
            taker.mode = taker_mode
            self._set_mode(taker, RobotMode.RELAY, "handoff")
            taker.plan, taker.goal, taker.lookahead = [], None, None
            if not giver_final:
                giver.mode = RobotMode.RELAY
                self._set_mode(giver, RobotMode.EXPLORE, "handoff")
            break

    def _yield_goal(self, a: RobotState, b: RobotState) -> None:
        # the higher id gives way when its goal sits on the other's plan
        lo, hi = (a, b) if a.id < b.id else (b, a)
        if hi.goal is None or lo.goal is None or hi.mode != RobotMode.EXPLORE:
            return
        if comms.in_range(hi.goal, lo.goal, self.eps_plan + 1e-9):
            hi.goal = None

    def _phase_final(self, r: RobotState) -> None:
        if r.final:
            return
        if policy.final_return_due(self.t, self.horizon, self.t_to_base(r), self.cfg.final_margin):
            r.final = True
            self._set_mode(r, RobotMode.RELAY, "final")

    def _goal_valid(self, r: RobotState) -> bool:
        if r.goal is None or not r.plan or r.pose == r.goal:
            return False
        gx, gy = r.goal
        cells = r.local.cells
        if cells[gy, gx] != CellState.FREE:
            return False
        h, w = cells.shape
        if not any(0 <= gx + dx < w and 0 <= gy + dy < h and cells[gy + dy, gx + dx] == CellState.UNKNOWN
                   for dx, dy in ((1, 0), (0, 1), (-1, 0), (0, -1))):
            return False
        if len(r.plan) > 1:
            nx, ny = r.plan[1]
            if cells[ny, nx] == CellState.OCCUPIED:
                return False
        return True

    def _select_waypoint(self, r: RobotState) -> None:
        cfg = self.cfg
        r.goal, r.plan, r.lookahead = None, [], None
        frontiers = grid.extract_frontiers(r.local, cfg.min_frontier)
        if not frontiers:
            return
        ens = predict(self.predictor, r.local, self.world, cfg.ensemble_size,
                      rng_seed=(self.seed * 1_000_003 + r.id * 7919 + self.t) & 0x7FFFFFFF)
        commits = comms.commitments_of(r)
        known = r.local.known()
        best = policy.best_frontier(
            frontiers, ens, r.local, r.pose, commits, self.eps_traj, self.eps_plan, cfg.penalty,
            known=known, sensor_range=self.range, n_rays=cfg.n_rays,
            threshold=cfg.vis_threshold, sample_interval=cfg.sample_interval, speed=cfg.speed)
        if best is None:
            return
        r.goal, r.plan = best.centroid, list(best.path)
        t_fb = 0
        if self.strategy.uses_rates:
            pm = ens.planning_map(cfg.vis_threshold)
            fb = grid.distance_field(grid.passable(pm), self.base.pose)
            steps = int(fb[best.centroid[1], best.centroid[0]])
            if steps < 0:
                fb = grid.distance_field(grid.passable(r.local), self.base.pose)
                steps = int(fb[best.centroid[1], best.centroid[0]])
            t_fb = grid.travel_time(max(steps, 0), cfg.speed)
        r.lookahead = Lookahead(ens, list(best.path),
                                grid.sample_indices(len(best.path), cfg.sample_interval), t_fb)
        self._emit("waypoint", robots=[r.id], pos=list(r.pose), goal=list(best.centroid),
                   gain=best.gain, steps=best.travel_time, penalized=best.penalized)

    def _predicted_gain(self, r: RobotState, la: Lookahead) -> int:
        progress = len(la.path) - len(r.plan)
        waypoints = [r.pose] + [la.path[i] for i in la.samples if i > progress]
        votes = np.zeros(r.local.shape, dtype=np.int32)
        for m in range(len(la.ensemble)):
            votes += la.ensemble.member_mask(m, waypoints, self.range, self.cfg.n_rays)
        vis = votes >= self.cfg.vis_threshold * len(la.ensemble) - 1e-9
        return int(np.count_nonzero(vis & ~r.local.known()))

    def _phase_decide(self, r: RobotState) -> None:
        s = self.strategy
        if s.kind == "periodic" and policy.periodic_due(self.t, s.period, r.last_relay_start, r.mode):
            self._set_mode(r, RobotMode.RELAY, "criterion")
            return
        if not self._goal_valid(r):
            self._select_waypoint(r)
        relay = False
        if s.uses_rates and r.goal is not None and r.lookahead is not None:
            if comms.in_range(r.pose, self.base.pose, self.d):
                return  # reports this tick anyway
            payload = r.payload
            if payload == 0:
                return
            t_base = self.t_to_base(r)
            t_front = grid.travel_time(r.plan, self.cfg.speed)
            t_fb = r.lookahead.t_front_to_base
            if t_front + t_fb <= 0:
                return
            gain = self._predicted_gain(r, r.lookahead)
            now = policy.roid_now(payload, t_base)
            pred = policy.proid(payload, gain, t_front, t_fb)
            if s.kind == "proid":
                relay = policy.relay_decision(now, pred, s.alpha)
            else:
                s_now, s_pred = survival_weights(s.weibull, self.t, t_base, t_front, t_fb)
                relay = policy.relay_decision_safe(now, pred, s_now, s_pred, s.alpha)
            if relay:
                self._set_mode(r, RobotMode.RELAY, "criterion", gain=gain, t_base=t_base,
                               t_front=t_front, t_fb=t_fb, rate_now=now, rate_pred=pred)

    def _phase_move(self, r: RobotState) -> None:
        steps = int(self.cfg.speed) if self.cfg.speed >= 1 else 1
        if r.mode == RobotMode.RELAY:
            home = self._home_field(r)
            route = grid.path_from_field(home, r.pose)[::-1]
            for p in route[1:1 + steps]:
                r.pose = p
                r.trajectory.append(p)
            return
        if not r.plan:
            return
        moved = 0
        while moved < steps and len(r.plan) > 1:
            nx, ny = r.plan[1]
            if r.local.cells[ny, nx] != CellState.FREE:
                r.goal = None  # blocked or unseen; replan next tick
                break
            r.plan.pop(0)
            r.pose = (nx, ny)
            r.trajectory.append(r.pose)
            moved += 1

    # -- driver ------------------------------------------------------------

    def run(self) -> MissionResult:
        while self.t < self.horizon:
            if not self.alive():
                self._emit("mission_end", reason="no robots alive")
                break
            self.step()
        else:
            self._emit("mission_end", reason="horizon")
        return self.result()

    def result(self) -> MissionResult:
        types = [e["type"] for e in self.events]
        return MissionResult(
            coverage_ratio=self.coverage(),
            relay_count=types.count("relay_start"),
            voluntary_relays=sum(1 for e in self.events
                                 if e["type"] == "relay_start" and e["cause"] == "criterion"),
            handoff_count=types.count("handoff"),
            failure_count=types.count("failure"),
            coverage_series=list(self.coverage_series),
            events=self.events,
            ticks=self.t,
            unreported_at_end={r.id: r.payload for r in self.robots if r.alive},
        )


def load_world(cfg: MissionConfig) -> OccupancyGrid:
    if cfg.map:
        with open(cfg.map, encoding="utf-8") as fh:
            return grid.load_map(fh.read())
    from .harness.floorplan import generate_map
    return generate_map(cfg.gen_seed, cfg.width, cfg.height)


def run(config: MissionConfig, seed: int | None = None,
        world: OccupancyGrid | None = None) -> MissionResult:
    if world is None:
        world = load_world(config)
    return Mission(config, world, seed).run()
