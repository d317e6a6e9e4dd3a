"""Plan traces: steps, per-tick trajectory, totals, and their text forms."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

from ..belief import GaussianBelief
from ..pddlplus.grounding import GroundedModel
from .search import PlanStep, SearchResult
from .state import SearchParams
from .validate import TickRecord, replay

PLAN_FORMAT = "plan-trace v1"
TICKS_COLUMNS = ("clock", "x", "y", "theta", "trace", "charge", "events", "action")


@dataclass
class PlanTrace:
    status: str
    reason: str
    detail: str
    params: SearchParams
    steps: tuple[PlanStep, ...]
    records: list[TickRecord] = field(default_factory=list)
    cost: float = math.nan
    distance_cost: float = math.nan
    uncertainty_cost: float = math.nan
    states_explored: int = 0
    generations: int = 0
    peak_open: int = 0
    planning_time: float = math.nan
    final_trace: float = math.nan
    final_clock: float = math.nan

    @classmethod
    def from_search(cls, result: SearchResult, model: GroundedModel, params: SearchParams,
                    belief: GaussianBelief) -> "PlanTrace":
        st = result.stats
        tr = cls(result.status, result.reason, result.detail, params, result.steps,
                 states_explored=st.expansions, generations=st.generations,
                 peak_open=st.peak_open, planning_time=st.planning_time)
        if result.found:
            rp = replay(model, result.steps, params, belief, 1)
            tr.records = rp.records
            tr.cost = result.cost
            tr.distance_cost = rp.distance_cost
            tr.uncertainty_cost = rp.uncertainty_cost
            tr.final_trace = rp.records[-1].trace
            tr.final_clock = rp.final.clock
        return tr

    @property
    def found(self) -> bool:
        return self.status == "plan"

    def to_text(self, config_hash: str = "", timing: bool = False) -> str:
        """Field-per-line rendering; wall time only with ``timing`` to keep reruns identical."""
        p = self.params
        lines = [
            PLAN_FORMAT,
            f"config_hash {config_hash or 'none'}",
            f"status {self.status}",
            f"reason {self.reason or 'none'}",
            f"detail {self.detail or 'none'}",
            f"delta_s {p.delta!r}",
            f"d_factor {p.d_factor}",
            f"horizon_s {p.horizon!r}",
            f"weight {p.weight!r}",
            f"cost_alpha {p.alpha!r}",
            f"cost_beta {p.beta!r}",
            f"trace_bound {'none' if p.eta is None else repr(p.eta)}",
            f"steps {len(self.steps)}",
        ]
        for s in self.steps:
            lines.append(f"step {s.tick} {s.tick * p.delta!r} {s.label}")
        lines += [
            f"cost {self.cost!r}",
            f"distance_cost {self.distance_cost!r}",
            f"uncertainty_cost {self.uncertainty_cost!r}",
            f"final_trace {self.final_trace!r}",
            f"final_clock_s {self.final_clock!r}",
            f"states_explored {self.states_explored}",
            f"generations {self.generations}",
            f"peak_open {self.peak_open}",
        ]
        if timing:
            lines.append(f"planning_time_s {self.planning_time!r}")
        return "\n".join(lines) + "\n"

    def ticks_csv(self, config_hash: str = "") -> str:
        out = io.StringIO()
        out.write(f"# config_hash {config_hash or 'none'}\n")
        out.write(",".join(TICKS_COLUMNS) + "\n")
        for r in self.records:
            charge = "" if r.charge is None else repr(r.charge)
            out.write(f"{r.clock!r},{r.x!r},{r.y!r},{r.theta!r},{r.trace!r},{charge},"
                      f"{';'.join(r.events)},{r.action}\n")
        return out.getvalue()


@dataclass(frozen=True)
class PlanFile:
    """What ``validate`` needs back from a plan file."""

    config_hash: str
    status: str
    delta: float
    d_factor: int
    steps: tuple[PlanStep, ...]


def read_plan_text(text: str) -> PlanFile:
    lines = [ln.rstrip("\n") for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != PLAN_FORMAT:
        raise ValueError(f"not a {PLAN_FORMAT} file")
    fields: dict[str, str] = {}
    steps = []
    for ln in lines[1:]:
        tag, _, rest = ln.partition(" ")
        if tag == "step":
            tick, _time, name, *args = rest.split()
            steps.append(PlanStep(int(tick), name, tuple(args)))
        else:
            fields[tag] = rest
    try:
        pf = PlanFile(fields["config_hash"], fields["status"], float(fields["delta_s"]),
                      int(fields["d_factor"]), tuple(steps))
    except (KeyError, ValueError) as exc:
        raise ValueError(f"malformed plan file: {exc}") from None
    if int(fields.get("steps", len(steps))) != len(steps):
        raise ValueError("malformed plan file: step count mismatch")
    return pf
