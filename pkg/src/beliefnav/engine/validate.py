"""Plan replay and validation at a finer clock.

A plan found with tick ``delta`` is replayed with tick ``delta / refinement``;
each action is applied at the same wall-clock time as in the plan. The plan
is valid if every precondition holds when its action is applied, the goal
holds at the end, no event fired in the fine replay that did not fire at the
coarse resolution, and no fluent crosses its physical bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from ..belief import GaussianBelief, trace_of
from ..pddlplus.grounding import GroundedModel
from .search import PlanStep
from .state import (
    HybridState,
    ModelIndex,
    SearchParams,
    apply_action,
    goal_reached,
    initial_state,
    step_cost,
    tick,
)

DEFAULT_REFINEMENT = 10


@dataclass(frozen=True)
class TickRecord:
    ticks: int
    clock: float
    x: float
    y: float
    theta: float
    trace: float
    charge: float | None
    cost: float
    events: tuple[str, ...]
    action: str = ""


@dataclass
class Replay:
    final: HybridState
    records: list[TickRecord]
    events: list[tuple[float, str]]  # (clock, label) of every event firing
    failures: list[str]
    minima: list[float] = field(default_factory=list)  # per fluent, over all visited states
    distance_cost: float = 0.0
    uncertainty_cost: float = 0.0

    @property
    def cost(self) -> float:
        return self.distance_cost + self.uncertainty_cost


def _record(model: GroundedModel, s: HybridState, cost: float, action: str = "") -> TickRecord:
    slot = ModelIndex.of(model).charge_slot
    m = s.belief.mean
    return TickRecord(s.ticks, s.clock, m.x, m.y, m.theta, trace_of(s.belief),
                      s.fluents[slot] if slot >= 0 else None, cost,
                      tuple(e.label for e in s.fired), action)


def replay(model: GroundedModel, steps: Sequence[PlanStep], params: SearchParams,
           belief: GaussianBelief, refinement: int = 1) -> Replay:
    """Execute ``steps`` with tick ``params.delta / refinement``.

    Stops at the first inapplicable action and records the failure.
    """
    if refinement < 1 or int(refinement) != refinement:
        raise ValueError("refinement must be a positive integer")
    dt = params.delta / refinement
    fine = SearchParams(delta=dt, d_factor=params.d_factor, horizon=params.horizon,
                        weight=params.weight, alpha=params.alpha, beta=params.beta,
                        eta=params.eta, max_expansions=params.max_expansions,
                        quantum=params.quantum, idle_wait=params.idle_wait,
                        event_bound=params.event_bound)
    index = ModelIndex.of(model)
    s = initial_state(model, belief, fine)
    out = Replay(s, [_record(model, s, 0.0)], [(0.0, e.label) for e in s.fired], [],
                 list(s.fluents))

    def note(s: HybridState) -> None:
        out.minima = [min(a, b) for a, b in zip(out.minima, s.fluents)]

    def advance(s: HybridState) -> HybridState:
        s2 = tick(s, model, fine)
        c = step_cost(s, s2, fine)
        out.distance_cost += fine.alpha * (s2.odometer - s.odometer)
        out.uncertainty_cost += c - fine.alpha * (s2.odometer - s.odometer)
        out.records.append(_record(model, s2, out.cost))
        out.events.extend((s2.clock, e.label) for e in s2.fired)
        note(s2)
        return s2

    for step in steps:
        target = step.tick * refinement
        while s.ticks < target:
            s = advance(s)
        op = index.action_by_label.get(step.label)
        if op is None:
            out.failures.append(f"unknown action ({step.label})")
            break
        if not op.applicable(s.lits, s.fluents):
            out.failures.append(f"precondition of ({step.label}) fails at t={s.clock:g}")
            break
        s2 = apply_action(s, op, model, fine)
        out.records.append(_record(model, s2, out.cost, step.label))
        out.events.extend((s2.clock, e.label) for e in s2.fired)
        note(s2)
        s = s2
    out.final = s
    return out


@dataclass
class ValidationReport:
    valid: bool
    refinement: int
    delta: float
    violations: list[str] = field(default_factory=list)
    violated_events: list[str] = field(default_factory=list)
    coarse_cost: float = 0.0
    fine_cost: float = 0.0
    fine_final_trace: float = math.nan
    max_trace_divergence: float = 0.0

    def to_text(self) -> str:
        lines = [
            "validation v1",
            f"status {'valid' if self.valid else 'invalid'}",
            f"delta {self.delta!r}",
            f"refinement {self.refinement}",
            f"fine_delta {self.delta / self.refinement!r}",
            f"coarse_cost {self.coarse_cost!r}",
            f"fine_cost {self.fine_cost!r}",
            f"fine_final_trace {self.fine_final_trace!r}",
            f"max_trace_divergence {self.max_trace_divergence!r}",
        ]
        lines += [f"violated_event {e}" for e in self.violated_events]
        lines += [f"violation {v}" for v in self.violations]
        return "\n".join(lines) + "\n"


def _default_bounds(params: SearchParams) -> dict[str, float]:
    # d may overshoot zero by at most one coarse translation step
    return {"charge": 0.0, "d": -params.delta_trans - 1e-9}


def _first_order(events: list[tuple[float, str]]) -> list[str]:
    seen: dict[str, None] = {}
    for _, label in events:
        seen.setdefault(label, None)
    return list(seen)


def _trace_divergence(coarse: Replay, fine: Replay, refinement: int) -> float:
    # compare the last record of each coarse tick with the fine record at the same time
    fine_at = {r.ticks: r.trace for r in fine.records}
    worst = 0.0
    for r in coarse.records:
        other = fine_at.get(r.ticks * refinement)
        if other is not None:
            worst = max(worst, abs(r.trace - other))
    return worst


def validate(model: GroundedModel, steps: Sequence[PlanStep], params: SearchParams,
             belief: GaussianBelief, refinement: int = DEFAULT_REFINEMENT,
             bounds: Mapping[str, float] | None = None) -> ValidationReport:
    """Replay ``steps`` at ``params.delta`` and at ``params.delta / refinement``.

    ``bounds`` maps fluent names to lower bounds checked over every fine state.
    """
    if refinement < 2 or int(refinement) != refinement:
        raise ValueError("refinement must be an integer >= 2")
    bounds = _default_bounds(params) if bounds is None else dict(bounds)
    coarse = replay(model, steps, params, belief, 1)
    fine = replay(model, steps, params, belief, refinement)
    rep = ValidationReport(True, refinement, params.delta, coarse_cost=coarse.cost,
                           fine_cost=fine.cost, fine_final_trace=trace_of(fine.final.belief))
    rep.violations += [f"coarse replay: {f}" for f in coarse.failures]
    rep.violations += [f"fine replay: {f}" for f in fine.failures]
    coarse_labels = {label for _, label in coarse.events}
    for clock, label in fine.events:
        if label not in coarse_labels and label not in rep.violated_events:
            rep.violated_events.append(label)
            rep.violations.append(f"event ({label}) fires at t={clock:g} only at the fine "
                                  f"resolution")
    shared = set(_first_order(coarse.events)) & set(_first_order(fine.events))
    c_order = [e for e in _first_order(coarse.events) if e in shared]
    f_order = [e for e in _first_order(fine.events) if e in shared]
    if c_order != f_order:
        rep.violations.append("events first fire in a different order at the fine resolution")
    rep.max_trace_divergence = _trace_divergence(coarse, fine, refinement)
    if not fine.failures and not goal_reached(model, fine.final, params):
        rep.violations.append("goal not satisfied at the fine resolution")
    for name, low in sorted(bounds.items()):
        for i, f in enumerate(model.fluents):
            if f.name != name:
                continue
            if fine.minima[i] < low:
                label = " ".join((f.name,) + f.args)
                rep.violations.append(f"fluent ({label}) reaches {fine.minima[i]!r} "
                                      f"below {low!r}")
    rep.valid = not rep.violations
    return rep

