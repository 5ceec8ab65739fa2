import dataclasses

import pytest

from shelfmem.belief import GridSpec
from shelfmem.planner import PlannerConfig
from shelfmem.scene import Shelf, generate_scene
from shelfmem.views import ActionBoxes, ViewPlanningConfig

# a coarse grid keeps episode-level unit tests fast
SMALL_GRID = GridSpec(40, 60, 30, 0.01)
SMALL_BOXES = ActionBoxes.for_grid(SMALL_GRID, cam_size=(0.5, 0.2, 0.2))


def small_config(method: str = "informed-push", **kw) -> PlannerConfig:
    cfg = PlannerConfig(grid=SMALL_GRID, view=ViewPlanningConfig(SMALL_BOXES, n_candidates=16), method=method, budget=6)
    return dataclasses.replace(cfg, **kw)


def small_scene(seed: int, n: int = 15, walls: int = 0):
    return generate_scene(seed, n, Shelf.from_grid(SMALL_GRID), n_walls=walls, wall_front=(0.1, 0.12))


@pytest.fixture
def small_cfg():
    return small_config


# one line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
