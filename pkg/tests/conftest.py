import json
from pathlib import Path

import numpy as np
import pytest

from navmix.trajectory import OccupancyGrid, Pose, Trajectory

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def ascii_grid(rows: list[str], resolution: float = 1.0) -> OccupancyGrid:
    """Build a grid from ASCII art; '#' is occupied. Row 0 is y = 0."""
    height = len(rows)
    width = len(rows[0])
    occ = np.zeros((height, width), dtype=bool)
    for y, row in enumerate(rows):
        assert len(row) == width, "ragged ascii grid"
        for x, ch in enumerate(row):
            occ[y, x] = ch == "#"
    return OccupancyGrid(width, height, resolution, occ)


def straight(n: int, dt: float = 1.0, origin=(0.0, 0.0), step=(1.0, 0.0)) -> Trajectory:
    ox, oy = origin
    sx, sy = step
    return Trajectory(tuple(Pose(ox + sx * i, oy + sy * i) for i in range(n)), dt=dt)


def load_scenario_doc(name: str) -> dict:
    return json.loads((SCENARIO_DIR / f"{name}.json").read_text())


@pytest.fixture
def empty5() -> OccupancyGrid:
    return OccupancyGrid.empty(5, 5, 1.0)
