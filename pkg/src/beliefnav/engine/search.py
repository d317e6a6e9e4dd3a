"""Weighted A* over discretized hybrid states."""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass

from ..belief import GaussianBelief
from ..pddlplus.grounding import GroundedModel
from ..sampler import WaypointGraph
from .state import (
    HybridState,
    SearchParams,
    applicable_actions,
    apply_action,
    goal_reached,
    initial_state,
    step_cost,
    tick,
)

# reasons reported when no plan is returned
EXHAUSTED = "exhausted"  # open list emptied, or the expansion bound was hit
HORIZON = "horizon"  # open list emptied after pruning states at the horizon


@dataclass(frozen=True)
class PlanStep:
    """An action applied at clock tick ``tick`` (time ``tick * delta``)."""

    tick: int
    name: str
    args: tuple[str, ...]

    @property
    def label(self) -> str:
        return " ".join((self.name,) + self.args)


@dataclass
class SearchStats:
    expansions: int = 0
    generations: int = 0
    duplicates: int = 0
    peak_open: int = 0
    planning_time: float = 0.0

    @property
    def states_explored(self) -> int:
        return self.expansions


@dataclass
class SearchResult:
    status: str  # "plan" | "infeasible"
    steps: tuple[PlanStep, ...]
    final: HybridState | None
    cost: float
    stats: SearchStats
    reason: str = ""
    detail: str = ""

    @property
    def found(self) -> bool:
        return self.status == "plan"


class GraphHeuristic:
    """Remaining graph distance to the goal waypoint, times ``alpha``.

    Admissible for the distance term; the uncertainty term is not estimated.
    """

    def __init__(self, model: GroundedModel, graph: WaypointGraph | None, alpha: float):
        self.alpha = alpha
        self.at_bits: dict[int, float] = {}
        self.moving_bits: dict[int, tuple[int, float]] = {}
        self.at_mask = self.moving_mask = 0
        goal_wp = None
        for a in model.true_atoms(model.goal_pos):
            if a.predicate == "robot_at" and len(a.args) == 1:
                goal_wp = a.args[0]
        if graph is None or goal_wp is None or goal_wp not in model.waypoint_ids:
            return
        dist = graph.shortest_distances_to(model.waypoint_ids[goal_wp])

        def rest(name: str) -> float:
            return dist.get(model.waypoint_ids.get(name, -1), math.inf)

        for i, a in enumerate(model.atoms):
            if a.predicate == "robot_at" and len(a.args) == 1:
                self.at_bits[i] = rest(a.args[0])
                self.at_mask |= 1 << i
            elif a.predicate == "moving" and len(a.args) == 2:
                self.moving_bits[i] = (model.fluent_slot("d", *a.args), rest(a.args[1]))
                self.moving_mask |= 1 << i

    def __call__(self, s: HybridState) -> float:
        m = s.lits & self.moving_mask
        if m:
            slot, rest = self.moving_bits[(m & -m).bit_length() - 1]
            left = max(s.fluents[slot], 0.0) if slot >= 0 else 0.0
            return self.alpha * (left + rest)
        m = s.lits & self.at_mask
        if m:
            return self.alpha * self.at_bits[(m & -m).bit_length() - 1]
        return 0.0


def _dead_masks(model: GroundedModel) -> tuple[int, int]:
    """Goal literals no operator can ever repair once violated."""
    adds = deletes = 0
    for op in model.actions + model.processes + model.events:
        adds |= op.add
        deletes |= op.delete
    return model.goal_neg & ~deletes, model.goal_pos & ~adds


def _check_dfactor(model: GroundedModel, params: SearchParams) -> None:
    for f, v in model.static_fluents.items():
        if f.name == "dfactor" and not f.args and v != params.d_factor:
            raise ValueError(f"model grounded with dfactor {v:g}, params say {params.d_factor}")


def plan(model: GroundedModel, graph: WaypointGraph | None, params: SearchParams,
         belief: GaussianBelief) -> SearchResult:
    """Weighted A* from the initial state; ``f = g + weight * h``.

    Successors of a state are its applicable actions (instantaneous) and, when
    no action applies or ``params.idle_wait`` is set, one clock tick. States
    later than the horizon are discarded.
    """
    _check_dfactor(model, params)
    started = time.perf_counter()
    stats = SearchStats()
    h = GraphHeuristic(model, graph, params.alpha)
    neg_dead, pos_dead = _dead_masks(model)
    max_ticks = params.max_ticks
    w = params.weight
    q = params.quantum

    def dead(s: HybridState) -> bool:
        return bool(s.lits & neg_dead) or (~s.lits & pos_dead) != 0

    def finish(status, node, reason="", detail=""):
        stats.planning_time = time.perf_counter() - started
        if node is None:
            return SearchResult(status, (), None, math.inf, stats, reason, detail)
        steps = []
        n = node
        while n[1] is not None:
            if n[2] is not None:
                steps.append(n[2])
            n = n[1]
        steps.reverse()
        return SearchResult(status, tuple(steps), node[0], node[0].g, stats, reason)

    s0 = initial_state(model, belief, params)
    h0 = h(s0)
    if math.isinf(h0):
        return finish("infeasible", None, EXHAUSTED, "goal waypoint unreachable in graph")
    k0 = s0.key(q)
    # entries (f, key hash, insertion seq, node); node = (state, parent, PlanStep or None)
    open_heap = [(w * h0, hash(k0), 0, (s0, None, None))]
    seq = 0
    best_g = {k0: 0.0}
    closed = set()
    horizon_hit = False
    while open_heap:
        stats.peak_open = max(stats.peak_open, len(open_heap))
        _, _, _, node = heapq.heappop(open_heap)
        s = node[0]
        k = s.key(q)
        if k in closed:
            continue
        closed.add(k)
        if goal_reached(model, s, params):
            return finish("plan", node)
        if stats.expansions >= params.max_expansions:
            return finish("infeasible", None, EXHAUSTED,
                          f"expansion bound {params.max_expansions} reached")
        stats.expansions += 1
        succ = []
        acts = applicable_actions(model, s)
        for a in acts:
            succ.append((apply_action(s, a, model, params), PlanStep(s.ticks, a.name, a.args)))
        if not acts or params.idle_wait:
            if s.ticks < max_ticks:
                succ.append((tick(s, model, params), None))
            else:
                horizon_hit = True
        for s2, step in succ:
            stats.generations += 1
            if dead(s2):
                continue
            hv = h(s2)
            if math.isinf(hv):
                continue
            s2.g = s.g + step_cost(s, s2, params)
            k2 = s2.key(q)
            if k2 in closed or best_g.get(k2, math.inf) <= s2.g:
                stats.duplicates += 1
                continue
            best_g[k2] = s2.g
            seq += 1
            heapq.heappush(open_heap, (s2.g + w * hv, hash(k2), seq, (s2, node, step)))
    if horizon_hit:
        return finish("infeasible", None, HORIZON, f"no plan within {params.horizon:g} s")
    return finish("infeasible", None, EXHAUSTED, "open list exhausted")
