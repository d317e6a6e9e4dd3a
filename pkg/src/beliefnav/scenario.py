"""Scenario configuration and the map → graph → model → plan pipeline.

Config files are flat ``key = value`` text; units are part of the key name.
Relative paths resolve against the config file's directory.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .belief import GaussianBelief
from .engine import (
    DEFAULT_REFINEMENT,
    BeliefConfig,
    SearchParams,
    SearchResult,
    ValidationReport,
    default_registry,
    plan,
    validate,
)
from .pddlplus import DomainModel, GroundedModel, ProblemModel, ground, parse_domain, parse_problem
from .sampler import SamplerParams, WaypointGraph, sample_graph
from .world import GridMap, Landmark, Pose, load_landmarks

BUNDLED = ("corridor", "battery80", "battery40")


class ConfigError(ValueError):
    pass


def _opt_float(v: str):
    return None if v.lower() in ("none", "") else float(v)


# scalar key -> converter; path keys are listed separately
_KEYS = {
    "start_x_m": float, "start_y_m": float, "start_theta_rad": float,
    "goal_x_m": float, "goal_y_m": float, "goal_theta_rad": float,
    "init_var_x_m2": float, "init_var_y_m2": float, "init_var_theta_rad2": float,
    "motion_var_x_m2_per_s": float, "motion_var_y_m2_per_s": float,
    "motion_var_theta_rad2_per_s": float,
    "range_var_m2": float, "bearing_var_rad2": float,
    "sensor_range_m": float, "robot_radius_m": float,
    "initial_charge_pct": _opt_float,
    "delta_s": float, "d_factor": int, "horizon_s": float, "weight": float,
    "cost_alpha": float, "cost_beta": float, "trace_bound": _opt_float,
    "max_expansions": int, "quantum": float, "observation_mode": str,
    "rng_seed": int, "validate_refinement": int,
    "sampler_max_nodes": int, "sampler_steer_step_m": float,
    "sampler_attraction_radius_m": float, "sampler_quota_per_landmark": int,
    "sampler_connect_radius_m": float, "sampler_goal_bias": float,
    "sampler_landmark_bias": float,
}
_PATH_KEYS = ("map", "landmarks", "domain", "problem", "graph")


@dataclass(frozen=True)
class ScenarioConfig:
    map: Path
    landmarks: Path
    domain: Path
    problem: Path
    graph: Path | None = None
    start_x_m: float = 1.0
    start_y_m: float = 1.0
    start_theta_rad: float = 0.0
    goal_x_m: float = 2.0
    goal_y_m: float = 1.0
    goal_theta_rad: float = 0.0
    init_var_x_m2: float = 0.1
    init_var_y_m2: float = 0.1
    init_var_theta_rad2: float = 0.05
    motion_var_x_m2_per_s: float = 1e-4
    motion_var_y_m2_per_s: float = 1e-4
    motion_var_theta_rad2_per_s: float = 1e-5
    range_var_m2: float = 1e-2
    bearing_var_rad2: float = 1e-3
    sensor_range_m: float = 2.0
    robot_radius_m: float = 0.2
    initial_charge_pct: float | None = None
    delta_s: float = 1.0
    d_factor: int = 2
    horizon_s: float = 20.0
    weight: float = 1.5
    cost_alpha: float = 1.0
    cost_beta: float = 1.0
    trace_bound: float | None = None
    max_expansions: int = 200_000
    quantum: float = 1e-3
    observation_mode: str = "nominal"
    rng_seed: int = 0
    validate_refinement: int = DEFAULT_REFINEMENT
    sampler_max_nodes: int = 40
    sampler_steer_step_m: float = 1.5
    sampler_attraction_radius_m: float = 1.5
    sampler_quota_per_landmark: int = 3
    sampler_connect_radius_m: float = 2.5
    sampler_goal_bias: float = 0.1
    sampler_landmark_bias: float = 0.3
    source: Path | None = field(default=None, compare=False)

    # -- derived parameter objects ------------------------------------------
    @property
    def start(self) -> Pose:
        return Pose(self.start_x_m, self.start_y_m, self.start_theta_rad)

    @property
    def goal(self) -> Pose:
        return Pose(self.goal_x_m, self.goal_y_m, self.goal_theta_rad)

    @property
    def initial_cov(self) -> np.ndarray:
        return np.diag([self.init_var_x_m2, self.init_var_y_m2, self.init_var_theta_rad2])

    def sampler_params(self) -> SamplerParams:
        return SamplerParams(
            max_nodes=self.sampler_max_nodes, steer_step=self.sampler_steer_step_m,
            attraction_radius=self.sampler_attraction_radius_m,
            quota_per_landmark=self.sampler_quota_per_landmark,
            connect_radius=self.sampler_connect_radius_m, rng_seed=self.rng_seed,
            goal_bias=self.sampler_goal_bias, landmark_bias=self.sampler_landmark_bias,
            robot_radius=self.robot_radius_m,
        )

    def search_params(self) -> SearchParams:
        return SearchParams(
            delta=self.delta_s, d_factor=self.d_factor, horizon=self.horizon_s,
            weight=self.weight, alpha=self.cost_alpha, beta=self.cost_beta,
            eta=self.trace_bound, max_expansions=self.max_expansions, quantum=self.quantum,
        )

    def belief_config(self) -> BeliefConfig:
        return BeliefConfig(
            R=np.diag([self.motion_var_x_m2_per_s, self.motion_var_y_m2_per_s,
                       self.motion_var_theta_rad2_per_s]),
            Q=np.diag([self.range_var_m2, self.bearing_var_rad2]),
            sensor_range=self.sensor_range_m, observation_mode=self.observation_mode,
            seed=self.rng_seed,
        )

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    # -- text form ----------------------------------------------------------
    def to_text(self) -> str:
        """Canonical rendering: every key, sorted, paths absolute."""
        lines = []
        for f in dataclasses.fields(self):
            if f.name == "source":
                continue
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {'none' if v is None else _fmt(v)}")
        return "\n".join(sorted(lines)) + "\n"

    def hash(self) -> str:
        """Digest of the canonical config plus the contents of every referenced file."""
        h = hashlib.sha256()
        for line in self.to_text().splitlines():
            key = line.split(" = ", 1)[0]
            if key in _PATH_KEYS:
                continue  # location does not matter, content does
            h.update(line.encode() + b"\n")
        for key in _PATH_KEYS:
            p = getattr(self, key)
            h.update(key.encode() + b"=")
            h.update(hashlib.sha256(p.read_bytes()).digest() if p is not None else b"none")
        return h.hexdigest()[:16]


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_config(text: str, base_dir: Path | str = ".", source: Path | None = None) -> ScenarioConfig:
    base = Path(base_dir)
    values: dict = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {n}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key in values:
            raise ConfigError(f"config line {n}: duplicate key {key}")
        if key in _PATH_KEYS:
            values[key] = None if val.lower() == "none" else (base / val).resolve()
        elif key in _KEYS:
            try:
                values[key] = _KEYS[key](val)
            except ValueError:
                raise ConfigError(f"config line {n}: bad value for {key}: {val!r}") from None
        else:
            raise ConfigError(f"config line {n}: unknown key {key}")
    missing = [k for k in ("map", "landmarks", "domain", "problem") if values.get(k) is None]
    if missing:
        raise ConfigError(f"config lacks required keys: {', '.join(missing)}")
    for key in _PATH_KEYS:
        p = values.get(key)
        if p is not None and not p.is_file():
            raise ConfigError(f"{key} file not found: {p}")
    cfg = ScenarioConfig(source=source, **values)
    try:  # surface invalid numbers as config errors, not deep in the pipeline
        cfg.sampler_params()
        cfg.search_params()
        cfg.belief_config()
        GaussianBelief(cfg.start, cfg.initial_cov).check()
    except (ValueError, AssertionError) as exc:
        raise ConfigError(str(exc)) from None
    if cfg.validate_refinement < 2:
        raise ConfigError("validate_refinement must be at least 2")
    return cfg


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("beliefnav.data").joinpath(name)))


def load_config(path: str | Path) -> ScenarioConfig:
    """Load a config file; a bare bundled scenario name (e.g. ``corridor``) also works."""
    p = Path(path)
    if not p.is_file() and str(path) in BUNDLED:
        p = bundled_path(f"{path}.cfg")
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config(p.read_text(), p.parent, source=p)


@dataclass
class Scenario:
    """Loaded inputs of a config; models are grounded per motion discretization."""

    config: ScenarioConfig
    grid: GridMap
    landmarks: list[Landmark]
    domain: DomainModel
    problem: ProblemModel
    graph: WaypointGraph
    _models: dict = field(default_factory=dict, repr=False)

    @classmethod
    def load(cls, cfg: ScenarioConfig, graph: WaypointGraph | None = None) -> "Scenario":
        grid = GridMap.load(cfg.map)
        lms = load_landmarks(cfg.landmarks)
        domain = parse_domain(cfg.domain.read_text(), str(cfg.domain))
        problem = parse_problem(cfg.problem.read_text(), domain, str(cfg.problem))
        if graph is None:
            if cfg.graph is not None:
                graph = WaypointGraph.load(cfg.graph)
            else:
                graph = sample_graph(grid, lms, cfg.start, cfg.goal, cfg.sampler_params())
        return cls(cfg, grid, lms, domain, problem, graph)

    def initial_belief(self) -> GaussianBelief:
        return GaussianBelief(self.graph[self.graph.start_id].pose, self.config.initial_cov)

    def model(self, d_factor: int) -> GroundedModel:
        if d_factor not in self._models:
            reg = default_registry(self.grid, self.landmarks, self.graph,
                                   self.config.belief_config())
            overrides = {}
            if self.domain.function("dfactor") is not None:
                overrides["dfactor"] = d_factor
            if self.config.initial_charge_pct is not None:
                overrides["charge"] = self.config.initial_charge_pct
            self._models[d_factor] = ground(self.domain, self.problem, self.graph, reg, overrides)
        return self._models[d_factor]

    def plan(self, params: SearchParams | None = None) -> SearchResult:
        params = params or self.config.search_params()
        return plan(self.model(params.d_factor), self.graph, params, self.initial_belief())

    def validate(self, steps, params: SearchParams | None = None,
                 refinement: int | None = None) -> ValidationReport:
        params = params or self.config.search_params()
        return validate(self.model(params.d_factor), steps, params, self.initial_belief(),
                        refinement or self.config.validate_refinement)
