"""Hybrid states and the discretized PDDL+ transition semantics.

A tick advances the clock by ``delta``: every active process integrates its
rates over the tick (explicit Euler, rates read at the start of the tick),
then enabled events fire to a fixpoint in declaration order. Actions are
instantaneous and are followed by the same event fixpoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from ..belief import GaussianBelief, trace_of
from ..pddlplus.grounding import GroundedModel, GroundedOperator


SNAP_DIGITS = 9


class EventLoop(RuntimeError):
    pass


class PreconditionViolated(ValueError):
    pass


@dataclass(frozen=True)
class SearchParams:
    delta: float = 1.0
    d_factor: int = 2
    horizon: float = 20.0
    weight: float = 1.5
    alpha: float = 1.0
    beta: float = 1.0
    eta: float | None = None
    max_expansions: int = 200_000
    quantum: float = 1e-3
    idle_wait: bool = False
    event_bound: int = 100

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if int(self.d_factor) != self.d_factor or self.d_factor < 1:
            raise ValueError("d_factor must be an integer >= 1")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.weight < 1:
            raise ValueError("weight must be >= 1")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("cost weights must be non-negative")

    @property
    def delta_trans(self) -> float:
        return self.delta * self.d_factor

    @property
    def max_ticks(self) -> int:
        return int(math.floor(self.horizon / self.delta + 1e-9))


class HybridState:
    __slots__ = ("lits", "fluents", "belief", "ticks", "clock", "g", "odometer", "fired")

    def __init__(self, lits: int, fluents: tuple, belief: GaussianBelief, ticks: int,
                 clock: float, g: float = 0.0, odometer: float = 0.0, fired: tuple = ()):
        self.lits = lits
        self.fluents = fluents
        self.belief = belief
        self.ticks = ticks
        self.clock = clock
        self.g = g
        self.odometer = odometer
        self.fired = fired

    def key(self, quantum: float) -> tuple:
        """Closed-list identity: fluents, mean and trace quantized to ``quantum``.

        The key holds only integers, so its hash is stable across runs.
        """
        q = 1.0 / quantum
        m = self.belief.mean
        return (self.lits, self.ticks, tuple([round(v * q) for v in self.fluents]),
                round(m.x * q), round(m.y * q), round(m.theta * q),
                round(trace_of(self.belief) * q))

    def __repr__(self) -> str:
        m = self.belief.mean
        return (f"HybridState(t={self.clock:g}, lits={self.lits:#x}, "
                f"mean=({m.x:.3f}, {m.y:.3f}, {m.theta:.3f}), g={self.g:.4f})")


@dataclass
class AttachmentContext:
    """What an attachment function may read while an event fires."""

    model: GroundedModel
    op: GroundedOperator
    prev_fluents: tuple  # at the start of the current tick
    fluents: list  # current values, already updated by processes
    lits: int
    belief: GaussianBelief
    delta: float
    ticks: int


@dataclass
class AttachmentResult:
    values: tuple
    belief: GaussianBelief
    travelled: float = 0.0


def _set_bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


@dataclass
class _OpIndex:
    by_bit: dict = field(default_factory=dict)
    free: list = field(default_factory=list)

    def add(self, op: GroundedOperator) -> None:
        if op.trigger < 0:
            self.free.append(op)
        else:
            self.by_bit.setdefault(op.trigger, []).append(op)

    def candidates(self, lits: int) -> list[GroundedOperator]:
        out = list(self.free)
        by_bit = self.by_bit
        for b in _set_bits(lits):
            ops = by_bit.get(b)
            if ops:
                out.extend(ops)
        return out


class ModelIndex:
    """Lookup tables over a grounded model, built once and cached on it."""

    def __init__(self, model: GroundedModel):
        self.actions = _OpIndex()
        self.processes = _OpIndex()
        self.events = _OpIndex()
        for op in model.actions:
            self.actions.add(op)
        for op in model.processes:
            self.processes.add(op)
        for op in model.events:
            self.events.add(op)
        self.action_by_label = {op.label: op for op in model.actions}
        self.charge_slot = model.fluent_slot("charge")

    @staticmethod
    def of(model: GroundedModel) -> "ModelIndex":
        idx = model.__dict__.get("_engine_index")
        if idx is None:
            idx = ModelIndex(model)
            model.__dict__["_engine_index"] = idx
        return idx


def _apply_effects(model, op: GroundedOperator, lits: int, fl: list, belief, odometer,
                   prev_fluents, delta, ticks):
    snap = tuple(fl)
    for slot, kind, expr in op.assigns:
        v = expr(snap)
        if kind == "assign":
            fl[slot] = v
        elif kind == "increase":
            fl[slot] += v
        else:
            fl[slot] -= v
    lits = (lits & ~op.delete) | op.add
    for name, fn, slots in op.attachments:
        ctx = AttachmentContext(model, op, prev_fluents, fl, lits, belief, delta, ticks)
        res: AttachmentResult = fn(ctx)
        if len(res.values) != len(slots):
            raise ValueError(f"attachment {name} returned {len(res.values)} values "
                             f"for {len(slots)} fluents")
        for slot, v in zip(slots, res.values):
            fl[slot] = float(v)
        belief = res.belief
        odometer += res.travelled
    return lits, belief, odometer


def fire_events(model: GroundedModel, lits: int, fl: list, belief, odometer: float,
                prev_fluents: tuple, delta: float, ticks: int, bound: int = 100):
    """Fire enabled events until none is enabled; returns the new parts and fired labels."""
    index = ModelIndex.of(model).events
    fired = []
    while True:
        progressed = False
        for ev in sorted(index.candidates(lits), key=lambda o: o.order):
            if ev.applicable(lits, fl):
                lits, belief, odometer = _apply_effects(model, ev, lits, fl, belief, odometer,
                                                        prev_fluents, delta, ticks)
                fired.append(ev)
                if len(fired) > bound:
                    raise EventLoop(f"event loop: more than {bound} firings in one step "
                                    f"(last {ev.label})")
                progressed = True
        if not progressed:
            return lits, belief, odometer, tuple(fired)


def _check_finite(fl, where: str) -> None:
    for v in fl:
        if not math.isfinite(v):
            raise FloatingPointError(f"non-finite fluent value after {where}")


def initial_state(model: GroundedModel, belief: GaussianBelief,
                  params: SearchParams) -> HybridState:
    fl = list(model.init_fluents)
    slot = model.fluent_slot("trace_sigma")
    if slot >= 0:
        fl[slot] = trace_of(belief)
    f0 = tuple(fl)
    lits, belief, odo, fired = fire_events(model, model.init_lits, fl, belief, 0.0, f0,
                                           params.delta, 0, params.event_bound)
    return HybridState(lits, tuple(fl), belief, 0, 0.0, 0.0, odo, fired)


def active_processes(model: GroundedModel, s: HybridState) -> list[GroundedOperator]:
    return [p for p in ModelIndex.of(model).processes.candidates(s.lits)
            if p.applicable(s.lits, s.fluents)]


def tick(s: HybridState, model: GroundedModel, params: SearchParams,
         delta: float | None = None) -> HybridState:
    """Advance one clock tick. ``g`` of the result is left equal to ``s.g``."""
    dt = params.delta if delta is None else delta
    f0 = s.fluents
    fl = list(f0)
    changed = set()
    for p in active_processes(model, s):
        for slot, sign, rate in p.rates:
            fl[slot] += sign * rate(f0) * dt
            changed.add(slot)
    # drop Euler round-off so an exact arrival (d = 0) reads as one at every delta
    for slot in changed:
        fl[slot] = round(fl[slot], SNAP_DIGITS) + 0.0
    ticks = s.ticks + 1
    lits, belief, odo, fired = fire_events(model, s.lits, fl, s.belief, s.odometer, f0, dt,
                                           ticks, params.event_bound)
    _check_finite(fl, "tick")
    return HybridState(lits, tuple(fl), belief, ticks, ticks * dt, s.g, odo, fired)


def applicable_actions(model: GroundedModel, s: HybridState) -> list[GroundedOperator]:
    ops = [a for a in ModelIndex.of(model).actions.candidates(s.lits)
           if a.applicable(s.lits, s.fluents)]
    ops.sort(key=lambda o: o.order)
    return ops


def apply_action(s: HybridState, a: GroundedOperator, model: GroundedModel,
                 params: SearchParams, delta: float | None = None) -> HybridState:
    dt = params.delta if delta is None else delta
    if not a.applicable(s.lits, s.fluents):
        raise PreconditionViolated(f"precondition of ({a.label}) does not hold")
    fl = list(s.fluents)
    lits, belief, odo = _apply_effects(model, a, s.lits, fl, s.belief, s.odometer, s.fluents,
                                       dt, s.ticks)
    lits, belief, odo, fired = fire_events(model, lits, fl, belief, odo, s.fluents, dt,
                                           s.ticks, params.event_bound)
    _check_finite(fl, a.label)
    return HybridState(lits, tuple(fl), belief, s.ticks, s.clock, s.g, odo, fired)


def step_cost(prev: HybridState, nxt: HybridState, params: SearchParams,
              delta: float | None = None) -> float:
    """Distance travelled plus uncertainty accrued over the elapsed tick."""
    dt = params.delta if delta is None else delta
    cost = params.alpha * (nxt.odometer - prev.odometer)
    if nxt.ticks > prev.ticks:
        cost += params.beta * trace_of(nxt.belief) * dt * (nxt.ticks - prev.ticks)
    return cost


def goal_reached(model: GroundedModel, s: HybridState, params: SearchParams) -> bool:
    if not model.goal_satisfied(s.lits, s.fluents):
        return False
    return params.eta is None or trace_of(s.belief) < params.eta


def labels(ops: Sequence[GroundedOperator]) -> tuple[str, ...]:
    return tuple(o.label for o in ops)


AttachmentFn = Callable[[AttachmentContext], AttachmentResult]
