"""Discretized hybrid search over PDDL+ models with belief attachments."""

from .attachments import BeliefConfig, default_registry, initial_belief, make_belief_update
from .search import (
    EXHAUSTED,
    HORIZON,
    GraphHeuristic,
    PlanStep,
    SearchResult,
    SearchStats,
    plan,
)
from .state import (
    AttachmentContext,
    AttachmentResult,
    EventLoop,
    HybridState,
    PreconditionViolated,
    SearchParams,
    active_processes,
    applicable_actions,
    apply_action,
    goal_reached,
    initial_state,
    step_cost,
    tick,
)
from .trace import PLAN_FORMAT, PlanFile, PlanTrace, read_plan_text
from .validate import DEFAULT_REFINEMENT, Replay, TickRecord, ValidationReport, replay, validate

__all__ = [
    "AttachmentContext", "AttachmentResult", "BeliefConfig", "DEFAULT_REFINEMENT", "EXHAUSTED",
    "EventLoop", "GraphHeuristic", "HORIZON", "HybridState", "PLAN_FORMAT", "PlanFile",
    "PlanStep", "PlanTrace", "PreconditionViolated", "Replay", "SearchParams", "SearchResult",
    "SearchStats", "TickRecord", "ValidationReport", "active_processes", "applicable_actions",
    "apply_action", "default_registry", "goal_reached", "initial_belief", "initial_state",
    "make_belief_update", "plan", "read_plan_text", "replay", "step_cost", "tick", "validate",
]
