"""Replay an event log into per-tick text and SVG frames."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from ..grid import CellState, OccupancyGrid, load_map

COLOURS = ("#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2",
           "#17becf")


@dataclass
class Frame:
    tick: int
    poses: dict[int, tuple[int, int]]
    modes: dict[int, str]
    alive: dict[int, bool]
    trails: dict[int, list[tuple[int, int]]]
    coverage: float


@dataclass
class Replay:
    world: OccupancyGrid
    base: tuple[int, int]
    frames: list[Frame] = field(default_factory=list)


class LogFormatError(ValueError):
    pass


def read_events(lines: Iterable[str]) -> list[dict]:
    out = []
    for n, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            out.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise LogFormatError(f"line {n}: {exc.msg}") from None
    return out


def replay(events: list[dict]) -> Replay:
    if not events or events[0].get("type") != "mission_start":
        raise LogFormatError("event log must begin with a mission_start record")
    start = events[0]
    world = load_map(start["map"])
    base = tuple(start["pose"])
    ids = start["robots"]
    poses = {i: base for i in ids}
    modes = {i: "explore" for i in ids}
    alive = {i: True for i in ids}
    trails: dict[int, list] = {i: [base] for i in ids}
    coverage = 0.0
    rep = Replay(world, base)
    tick = None

    def snapshot(t):
        rep.frames.append(Frame(t, dict(poses), dict(modes), dict(alive),
                                {i: list(v) for i, v in trails.items()}, coverage))

    for ev in events[1:]:
        if tick is not None and ev["tick"] != tick:
            snapshot(tick)
        tick = ev["tick"]
        kind = ev["type"]
        rid = ev.get("robots", [None])[0]
        if kind == "observe_summary":
            p = tuple(ev["pos"])
            if poses[rid] != p:
                trails[rid].append(p)
            poses[rid] = p
            modes[rid] = ev["mode"]
        elif kind == "mode_change":
            modes[rid] = ev["mode"]
        elif kind == "failure":
            alive[rid] = False
        elif kind == "report":
            coverage = ev.get("coverage", coverage)
    if tick is not None:
        snapshot(tick)
    return rep


def text_frame(rep: Replay, frame: Frame) -> str:
    rows = [[{CellState.FREE: ".", CellState.OCCUPIED: "#"}.get(CellState(int(v)), "?")
             for v in row] for row in rep.world.cells]
    for trail in frame.trails.values():
        for x, y in trail:
            rows[y][x] = ":"
    bx, by = rep.base
    rows[by][bx] = "B"
    for i, (x, y) in frame.poses.items():
        glyph = str(i % 10) if frame.alive[i] else "x"
        rows[y][x] = glyph
    status = " ".join(f"r{i}:{frame.modes[i] if frame.alive[i] else 'dead'}" for i in frame.poses)
    head = f"tick {frame.tick}  coverage {100 * frame.coverage:.1f}%  {status}"
    return head + "\n" + "\n".join("".join(r) for r in rows) + "\n"


def svg_frame(rep: Replay, frame: Frame, cell: int = 6) -> str:
    w, h = rep.world.width, rep.world.height
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w * cell}" '
             f'height="{h * cell + 16}" viewBox="0 0 {w * cell} {h * cell + 16}">',
             f'<rect width="{w * cell}" height="{h * cell + 16}" fill="white"/>',
             f'<text x="2" y="12" font-family="monospace" font-size="11">tick {frame.tick} '
             f'coverage {100 * frame.coverage:.1f}%</text>',
             '<g transform="translate(0,16)">']
    for y in range(h):
        x = 0
        while x < w:  # one rect per horizontal run of wall
            if rep.world.cells[y, x] == CellState.OCCUPIED:
                x0 = x
                while x < w and rep.world.cells[y, x] == CellState.OCCUPIED:
                    x += 1
                parts.append(f'<rect x="{x0 * cell}" y="{y * cell}" width="{(x - x0) * cell}" '
                             f'height="{cell}" fill="#444"/>')
            else:
                x += 1
    half = cell / 2
    for i, trail in frame.trails.items():
        colour = COLOURS[i % len(COLOURS)]
        pts = " ".join(f"{x * cell + half:g},{y * cell + half:g}" for x, y in trail)
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{colour}" '
                     f'stroke-width="1" stroke-opacity="0.5"/>')
    bx, by = rep.base
    parts.append(f'<rect x="{bx * cell - cell}" y="{by * cell - cell}" width="{3 * cell}" '
                 f'height="{3 * cell}" fill="none" stroke="black" stroke-width="2"/>')
    for i, (x, y) in frame.poses.items():
        colour = COLOURS[i % len(COLOURS)] if frame.alive[i] else "#999"
        stroke = "black" if frame.modes[i] == "relay" else "none"
        parts.append(f'<circle cx="{x * cell + half:g}" cy="{y * cell + half:g}" r="{cell:g}" '
                     f'fill="{colour}" stroke="{stroke}" stroke-width="2"/>')
    parts.append("</g></svg>")
    return "\n".join(parts) + "\n"


def render_log(log_path: str | Path, out_dir: str | Path, every: int = 10) -> list[Path]:
    if every < 1:
        raise ValueError("every must be >= 1")
    with open(log_path, encoding="utf-8") as fh:
        rep = replay(read_events(fh))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    frames = rep.frames
    for k, frame in enumerate(frames):
        if frame.tick % every and k != len(frames) - 1:
            continue
        stem = out / f"frame_{frame.tick:05d}"
        stem.with_suffix(".txt").write_text(text_frame(rep, frame), encoding="utf-8")
        stem.with_suffix(".svg").write_text(svg_frame(rep, frame), encoding="utf-8")
        written += [stem.with_suffix(".txt"), stem.with_suffix(".svg")]
    return written
