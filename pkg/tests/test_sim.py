import numpy as np
import pytest

from conftest import grid_from
from mrer import sim
from mrer.config import ConfigError, MissionConfig
from mrer.grid import OccupancyGrid
from mrer.harness.floorplan import generate_map
from mrer.state import RobotMode

SMALL = dict(width=60, height=40, ticks=200)


def _room(w=10, h=10):
    return grid_from("\n".join(["#" * w] + ["#" + "." * (w - 2) + "#"] * (h - 2) + ["#" * w]))


# -- coverage metric ---------------------------------------------------------

def test_observable_and_ratio():
    world = grid_from("""
        ....#
        #####
        #####
        #####
        #####""")
    assert sim.observable_cells(world).sum() == 9  # 4 free + 5 walls touching them
    base = OccupancyGrid.unknown_like(world)
    assert sim.coverage_ratio(base, world) == 0
    base.cells[0, :3] = world.cells[0, :3]
    assert sim.coverage_ratio(base, world) == pytest.approx(1 / 3)
    assert sim.coverage_ratio(OccupancyGrid(world.cells.copy()), world) == 1.0
    with pytest.raises(ValueError):
        sim.coverage_ratio(OccupancyGrid(np.zeros((2, 2), np.int8)), world)


# -- whole runs --------------------------------------------------------------

def test_zero_ticks():
    r = sim.run(MissionConfig(ticks=0, **{k: v for k, v in SMALL.items() if k != "ticks"}))
    assert r.coverage_ratio == 0 and r.ticks == 0 and r.coverage_series == []


def test_deterministic_log():
    cfg = MissionConfig(strategy="proid_safe", failures_enabled=True, weibull_lambda=150, **SMALL)
    a, b = sim.run(cfg, seed=3), sim.run(cfg, seed=3)
    assert a.log_hash() == b.log_hash() and a.coverage_ratio == b.coverage_ratio
    assert sim.run(cfg, seed=4).log_hash() != a.log_hash()


@pytest.mark.parametrize("strategy", ["proid", "final_only", "periodic"])
def test_series_monotone_and_delivery(strategy):
    r = sim.run(MissionConfig(strategy=strategy, period=40, **SMALL), seed=1)
    s = r.coverage_series
    assert len(s) == SMALL["ticks"]
    assert all(0 <= x <= 1 for x in s)
    assert all(a <= b for a, b in zip(s, s[1:]))
    assert s[-1] == r.coverage_ratio
    assert not any(r.unreported_at_end.values())


def test_single_robot_room_final_only():
    world = _room()
    m = sim.Mission(MissionConfig(strategy="final_only", n_robots=1, ticks=80, sensor_range=4,
                                  comm_range=3), world, seed=0)
    res = m.run()
    r = m.robots[0]
    obs = sim.observable_cells(world)
    assert r.final and r.payload == 0
    assert np.array_equal(m.base.map.known() & obs, r.local.known() & obs)
    assert res.coverage_ratio == 1.0
    assert [e["cause"] for e in res.events if e["type"] == "relay_start"] == ["final"]


def test_first_tick_exchange_identical_maps():
    world = generate_map(2, 60, 40)
    m = sim.Mission(MissionConfig(n_robots=3, **SMALL), world, seed=0)
    m.step()
    maps = [r.local.cells for r in m.robots]
    assert all(np.array_equal(maps[0], x) for x in maps[1:])
    assert any(e["type"] == "exchange" and e["tick"] == 0 for e in m.events)


def test_failed_robot_is_frozen():
    world = generate_map(5, 60, 40)
    m = sim.Mission(MissionConfig(n_robots=2, **SMALL), world, seed=0)
    m.robots[1].failure_time = 30
    for _ in range(30):
        m.step()
    dead = m.robots[1]
    snap = (dead.pose, dead.local.cells.copy(), dead.unreported.copy(), len(dead.trajectory))
    for _ in range(40):
        m.step()
    assert not dead.alive
    assert (dead.pose, len(dead.trajectory)) == (snap[0], snap[3])
    assert np.array_equal(dead.local.cells, snap[1]) and np.array_equal(dead.unreported, snap[2])
    late = [e for e in m.events if e["tick"] >= 30 and 1 in e.get("robots", [])]
    assert [e["type"] for e in late] == ["failure"]


def test_all_failed_early_final_only():
    world = generate_map(6, 60, 40)
    m = sim.Mission(MissionConfig(strategy="final_only", **SMALL), world, seed=0)
    for r in m.robots:
        r.failure_time = 1
    res = m.run()
    # tick 1 runs only its failure phase; only the start view reaches the base
    assert res.ticks == 2 and res.failure_count == 3
    assert res.coverage_ratio == res.coverage_series[0] < 0.2
    assert res.events[-1] == {"tick": 2, "type": "mission_end", "reason": "no robots alive"}


def test_huge_alpha_never_relays_voluntarily():
    world = generate_map(8, 60, 40)
    big = sim.run(MissionConfig(strategy="proid", alpha=1e9, **SMALL), seed=2, world=world)
    fin = sim.run(MissionConfig(strategy="final_only", **SMALL), seed=2, world=world)
    assert big.voluntary_relays == 0
    assert big.relay_count == fin.relay_count


def test_relay_robots_head_home():
    world = generate_map(3, 60, 40)
    m = sim.Mission(MissionConfig(strategy="periodic", period=30, **SMALL), world, seed=0)
    for _ in range(120):
        m.step()
        for r in m.alive():
            if r.mode == RobotMode.RELAY:
                assert r.goal is None and r.plan == []
    assert any(e["type"] == "relay_start" for e in m.events)


def test_log_records_are_well_formed():
    r = sim.run(MissionConfig(**SMALL), seed=0)
    kinds = {"mission_start", "mission_end", "observe_summary", "exchange", "handoff", "relay_start",
             "report", "failure", "waypoint", "mode_change"}
    ticks = [e["tick"] for e in r.events]
    assert ticks == sorted(ticks)
    assert {e["type"] for e in r.events} <= kinds
    for e in r.events:
        if e["type"] == "exchange":
            (ax, ay), (bx, by) = e["pos"]
            assert (ax - bx) ** 2 + (ay - by) ** 2 < 10 ** 2
    assert r.event_log().count("\n") == len(r.events)


def test_config_errors_before_start():
    with pytest.raises(ConfigError):
        sim.run(MissionConfig(strategy="random", **SMALL))
    with pytest.raises(ConfigError):
        sim.run(MissionConfig(n_robots=0, **SMALL))


def test_step_past_horizon():
    m = sim.Mission(MissionConfig(ticks=1, width=60, height=40), generate_map(0, 60, 40))
    m.step()
    with pytest.raises(sim.InvariantError):
        m.step()
