import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mrer.grid import GLYPHS, OccupancyGrid  # noqa: E402


def grid_from(rows: str, resolution: float = 1.0) -> OccupancyGrid:
    """Build a grid from glyph rows (``.`` free, ``#`` wall, ``?`` unknown)."""
    lines = [r for r in rows.strip("\n").split("\n")]
    cells = np.array([[GLYPHS[c] for c in line.strip()] for line in lines], dtype=np.int8)
    return OccupancyGrid(cells, resolution)


def random_world(rng: np.random.Generator, w: int, h: int, density: float = 0.25) -> OccupancyGrid:
    cells = np.where(rng.random((h, w)) < density, 2, 1).astype(np.int8)
    return OccupancyGrid(cells)


@pytest.fixture
def open_room():
    return grid_from("\n".join(["#" * 12] + ["#" + "." * 10 + "#"] * 8 + ["#" * 12]))


_VERDICTS: dict[int, str] = {}


def record_verdict(n: int, line: str) -> None:
    _VERDICTS[n] = line


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_VERDICTS):
        terminalreporter.write_line(_VERDICTS[n])
