"""The ``belief_update`` semantic attachment: EKF over the travelled distance."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..belief import (
    DEFAULT_Q,
    DEFAULT_R,
    GaussianBelief,
    predict,
    predict_measurement,
    simulate_observation,
    trace_of,
    update,
)
from ..pddlplus.grounding import AttachmentRegistry
from ..sampler import WaypointGraph
from ..world import Control, GridMap, Landmark, Pose, visible_landmarks, wrap_angle
from .state import AttachmentContext, AttachmentResult

OBSERVATION_MODES = ("nominal", "sampled")


@dataclass(frozen=True)
class BeliefConfig:
    """Noise and sensing parameters of the belief update.

    ``R`` is motion noise per second of travel; ``Q`` is per observation.
    In ``nominal`` mode every observation equals its prediction, so only the
    covariance is corrected and plans do not depend on random draws.
    """

    R: np.ndarray = field(default_factory=lambda: DEFAULT_R.copy())
    Q: np.ndarray = field(default_factory=lambda: DEFAULT_Q.copy())
    sensor_range: float = 2.0
    observation_mode: str = "nominal"
    seed: int = 0

    def __post_init__(self):
        if self.observation_mode not in OBSERVATION_MODES:
            raise ValueError(f"observation_mode must be one of {OBSERVATION_MODES}")
        if self.sensor_range <= 0:
            raise ValueError("sensor_range must be positive")
        for name in ("R", "Q"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)


def _observation_seed(seed: int, ticks: int, lm_id: int, a: int, b: int) -> int:
    return (seed * 1_000_003 + ticks * 7919 + lm_id * 131 + a * 31 + b) % (2**32)


def make_belief_update(m: GridMap, landmarks: Sequence[Landmark], graph: WaypointGraph,
                       cfg: BeliefConfig):
    """Build the attachment for ``(belief_update ?from ?to)`` events.

    The travelled distance is the drop of ``(d ?from ?to)`` over the tick,
    applied as a control that first turns the mean toward ``?to``.
    """
    lms = sorted(landmarks, key=lambda lm: lm.id)
    visible_cache: dict[tuple[float, float], tuple[Landmark, ...]] = {}

    def visible(x: float, y: float) -> tuple[Landmark, ...]:
        key = (round(x, 9), round(y, 9))
        hit = visible_cache.get(key)
        if hit is None:
            if not m.in_bounds(x, y):
                hit = ()
            else:
                hit = tuple(visible_landmarks(m, Pose(x, y, 0.0), lms, cfg.sensor_range))
            visible_cache[key] = hit
        return hit

    def belief_update(ctx: AttachmentContext) -> AttachmentResult:
        frm, to = ctx.op.args
        slot = ctx.model.fluent_slot("d", frm, to)
        travelled = 0.0
        if slot >= 0:
            travelled = max(0.0, max(ctx.prev_fluents[slot], 0.0) - max(ctx.fluents[slot], 0.0))
        b = ctx.belief
        mu = b.mean
        rot1 = 0.0
        if travelled > 0:
            target = graph[ctx.model.waypoint_ids[to]].pose
            if math.hypot(target.x - mu.x, target.y - mu.y) > 1e-12:
                rot1 = wrap_angle(math.atan2(target.y - mu.y, target.x - mu.x) - mu.theta)
        b = predict(b, Control(rot1, travelled, 0.0), cfg.R * ctx.delta)
        for lm in visible(b.mean.x, b.mean.y):
            if math.hypot(lm.x - b.mean.x, lm.y - b.mean.y) < 1e-6:
                continue  # bearing undefined on top of the landmark
            if cfg.observation_mode == "nominal":
                z = predict_measurement(b.mean, lm)
            else:
                seed = _observation_seed(cfg.seed, ctx.ticks, lm.id,
                                         ctx.model.waypoint_ids[frm], ctx.model.waypoint_ids[to])
                z = simulate_observation(b, lm, cfg.Q, seed)
            b = update(b, z, lm, cfg.Q)
        return AttachmentResult((trace_of(b),), b, travelled)

    return belief_update


def default_registry(m: GridMap, landmarks: Sequence[Landmark], graph: WaypointGraph,
                     cfg: BeliefConfig | None = None) -> AttachmentRegistry:
    reg = AttachmentRegistry()
    reg.register("belief_update", make_belief_update(m, landmarks, graph, cfg or BeliefConfig()))
    return reg


def initial_belief(graph: WaypointGraph, cov) -> GaussianBelief:
    return GaussianBelief(graph[graph.start_id].pose, np.asarray(cov, dtype=float))
