"""Versioned experiment configuration (JSON) and its translation to planner settings."""

from __future__ import annotations

import json
import math
import os
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .belief import GridSpec
from .metrics import METHODS
from .planner import PlannerConfig
from .push import PushConfig
from .scene import DEFAULT_CATALOG, CatalogEntry, PushPhysics, Scene, Shelf, generate_scene
from .sensor import CameraModel
from .views import ActionBoxes, RewardConfig, ViewPlanningConfig

CONFIG_VERSION = 1
CONFIG_ENV = "SHELFMEM_CONFIG"
N_OBJECTS_RANGE = (15, 30)


class ConfigError(ValueError):
    """A config file that cannot be read or fails validation."""


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class CatalogItem(_Block):
    name: str
    cls: int = Field(ge=1)
    shape: Literal["box", "cylinder"]
    size_x: tuple[float, float]
    size_y: tuple[float, float] = (0.0, 0.0)
    height: tuple[float, float] = (0.05, 0.2)

    @field_validator("size_x", "height")
    @classmethod
    def _range(cls, v):
        if not 0 < v[0] <= v[1]:
            raise ValueError("must be an increasing pair of positive numbers")
        return v

    def entry(self) -> CatalogEntry:
        return CatalogEntry(self.name, self.cls, self.shape, self.size_x, self.size_y, self.height)


class SceneBlock(_Block):
    seed_start: int = 0
    n_scenes: int = Field(25, ge=1)
    n_objects: tuple[int, int] = (15, 30)
    n_walls: int = Field(0, ge=0)
    shelf: tuple[float, float, float] | None = None  # width, depth, height in metres; defaults to the grid extent
    catalog: list[CatalogItem] | None = None

    @field_validator("n_objects")
    @classmethod
    def _n_objects(cls, v):
        lo, hi = N_OBJECTS_RANGE
        if not lo <= v[0] <= v[1] <= hi:
            raise ValueError(f"must satisfy {lo} <= min <= max <= {hi}, got {list(v)}")
        return v

    def objects_for(self, seed: int) -> int:
        lo, hi = self.n_objects
        return lo + seed % (hi - lo + 1)


class GridBlock(_Block):
    H: int = Field(82, ge=8)
    W: int = Field(157, ge=8)
    D: int = Field(66, ge=8)
    resolution: float = Field(0.005, gt=0)

    def spec(self) -> GridSpec:
        return GridSpec(self.H, self.W, self.D, self.resolution)


class CameraBlock(_Block):
    hfov_deg: float = Field(70.0, gt=0, lt=180)
    vfov_deg: float = Field(55.0, gt=0, lt=180)
    nx: int = Field(64, ge=8)
    ny: int = Field(48, ge=8)
    max_range: float = Field(1.5, gt=0)

    def model(self, nx: int | None = None, ny: int | None = None) -> CameraModel:
        return CameraModel(math.radians(self.hfov_deg), math.radians(self.vfov_deg), nx or self.nx, ny or self.ny, self.max_range)


class ViewBlock(_Block):
    """Next-best-view search; the VIG camera is a coarser copy of the sensor."""

    n_candidates: int = Field(64, ge=1)
    vig_nx: int = Field(24, ge=8)
    vig_ny: int = Field(18, ge=8)
    theta_occ: float = Field(0.87, gt=0, lt=1)
    measure: Literal["variance", "entropy"] = "variance"
    info_floor: float = Field(0.02, ge=0)
    target_bias: float = Field(0.5, ge=0, le=1)
    top_q: float = Field(0.1, gt=0, le=1)


class PlannerBlock(_Block):
    delta_view: float = Field(2.0, ge=1)
    budget: int = Field(40, ge=1)
    completion_certainty: float = Field(0.99, gt=0, lt=1)
    tof_enabled: bool = False
    occ_weight: float = Field(6.0, gt=0)
    sem_weight: float = Field(120.0, gt=0)
    occ_cap: float | None = Field(60.0, gt=2)
    sem_cap: float | None = Field(360.0, gt=0)
    occ_certainty_floor: float = Field(0.02, gt=0)
    n_hist: int = Field(4, ge=1)


class OutputBlock(_Block):
    out_dir: str = "runs"
    pgm_maps: bool = False


class ExperimentConfig(_Block):
    version: Literal[1] = CONFIG_VERSION
    scenes: SceneBlock = SceneBlock()
    grid: GridBlock = GridBlock()
    camera: CameraBlock = CameraBlock()
    view: ViewBlock = ViewBlock()
    planner: PlannerBlock = PlannerBlock()
    reward: RewardConfig = RewardConfig()
    push: PushConfig = PushConfig()
    physics: PushPhysics = PushPhysics()
    method: str = "informed-push"
    methods: list[str] = ["informed-push", "random-push"]
    planner_seed: int = 0
    workers: int = Field(1, ge=1)
    output: OutputBlock = OutputBlock()

    @field_validator("method")
    @classmethod
    def _method(cls, v):
        if v not in METHODS:
            raise ValueError(f"unknown method {v!r}; choose from {list(METHODS)}")
        return v

    @field_validator("methods")
    @classmethod
    def _methods(cls, v):
        bad = [m for m in v if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; choose from {list(METHODS)}")
        if len(set(v)) != len(v):
            raise ValueError("methods must be distinct")
        return v

    @model_validator(mode="after")
    def _shelf_fits(self):
        if self.scenes.shelf is not None:
            g = self.grid.spec()
            w, d, h = self.scenes.shelf
            if w > g.width_m + 1e-9 or d > g.depth_m + 1e-9 or h > g.height_m + 1e-9:
                raise ValueError("scenes.shelf must fit inside the grid extent")
        return self

    # -- derived objects ------------------------------------------------------

    def planner_config(self, method: str | None = None) -> PlannerConfig:
        grid = self.grid.spec()
        v = self.view
        view = ViewPlanningConfig(
            ActionBoxes.for_grid(grid),
            camera=self.camera.model(v.vig_nx, v.vig_ny),
            theta_occ=v.theta_occ,
            n_candidates=v.n_candidates,
            measure=v.measure,
            info_floor=v.info_floor,
            target_bias=v.target_bias,
            top_q=v.top_q,
        )
        p = self.planner
        return PlannerConfig(
            grid=grid,
            view=view,
            push=self.push,
            camera=self.camera.model(),
            reward=self.reward,
            physics=self.physics,
            delta_view=p.delta_view,
            budget=p.budget,
            completion_certainty=p.completion_certainty,
            tof_enabled=p.tof_enabled,
            method=method or self.method,
            occ_weight=p.occ_weight,
            sem_weight=p.sem_weight,
            occ_cap=p.occ_cap,
            sem_cap=p.sem_cap,
            occ_certainty_floor=p.occ_certainty_floor,
            n_hist=p.n_hist,
        )

    def scene_seeds(self, offset: int = 0) -> list[int]:
        s0 = self.scenes.seed_start + offset
        return list(range(s0, s0 + self.scenes.n_scenes))

    def make_scene(self, seed: int) -> Scene:
        sb = self.scenes
        shelf = Shelf(*sb.shelf) if sb.shelf is not None else Shelf.from_grid(self.grid.spec())
        catalog = tuple(c.entry() for c in sb.catalog) if sb.catalog else DEFAULT_CATALOG
        return generate_scene(seed, sb.objects_for(seed), shelf, catalog, n_walls=sb.n_walls)

    # -- serialisation --------------------------------------------------------

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from e
        if isinstance(data, dict) and data.get("version", CONFIG_VERSION) != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {data.get('version')!r}; expected {CONFIG_VERSION}")
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise ConfigError(_describe(e)) from e


def _describe(e: ValidationError) -> str:
    lines = []
    for err in e.errors():
        loc = ".".join(str(x) for x in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "invalid config: " + "; ".join(lines)


def load_config(path: str | Path | None = None) -> ExperimentConfig:
    """Read a config file; with no path, fall back to ``$SHELFMEM_CONFIG`` and then the defaults."""
    if path is None:
        path = os.environ.get(CONFIG_ENV)
        if not path:
            return ExperimentConfig()
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {p}: {e.strerror or e}") from e
    return ExperimentConfig.from_json(text)


def save_config(cfg: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(cfg.to_json())


__all__ = [
    "CONFIG_ENV",
    "CONFIG_VERSION",
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "save_config",
]
