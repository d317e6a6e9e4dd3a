"""Grounding of a domain/problem pair over a sampled waypoint graph.

Static facts (predicates no effect ever changes) and static fluents are folded
away at grounding time; the runtime state keeps only the dynamic part:
a bitmask over dynamic atoms and a vector of dynamic fluent values.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Mapping

from .model import (
    Atom,
    AttachedEffect,
    BinOp,
    Comparison,
    ContinuousEffect,
    DomainModel,
    FluentRef,
    Literal,
    LiteralEffect,
    Neg,
    Num,
    NumericEffect,
    Operator,
    ProblemModel,
)
from .printer import fmt_condition, fmt_effect, fmt_number

WAYPOINT_TYPE = "waypoint"


class GroundingError(Exception):
    pass


class UnresolvedAttachment(GroundingError):
    pass


class AttachmentRegistry:
    """Named external functions that compute event effects."""

    def __init__(self):
        self._fns: dict[str, Callable] = {}

    def register(self, name: str, fn: Callable) -> None:
        if name in self._fns:
            raise ValueError(f"attachment {name} already registered")
        self._fns[name] = fn

    def resolve(self, name: str) -> Callable:
        try:
            return self._fns[name]
        except KeyError:
            raise UnresolvedAttachment(f"unresolved attachment: {name}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._fns

    def names(self) -> list[str]:
        return sorted(self._fns)


@dataclass(eq=False)
class GroundedOperator:
    kind: str
    name: str
    args: tuple[str, ...]
    order: int
    pos: int
    neg: int
    numeric_pre: Callable | None
    add: int
    delete: int
    assigns: tuple  # (fluent index, kind, compiled expr)
    rates: tuple  # (fluent index, sign, compiled rate)
    attachments: tuple  # (name, fn, fluent indices)
    precondition: tuple  # grounded AST, for printing
    effects: tuple
    trigger: int = -1

    @property
    def label(self) -> str:
        return " ".join((self.name,) + self.args)

    def applicable(self, lits: int, fluents) -> bool:
        if lits & self.pos != self.pos or lits & self.neg:
            return False
        return self.numeric_pre is None or self.numeric_pre(fluents)


@dataclass(eq=False)
class GroundedModel:
    domain: DomainModel
    problem: ProblemModel
    atoms: list[Atom]
    atom_index: dict[Atom, int]
    fluents: list[FluentRef]
    fluent_index: dict[FluentRef, int]
    static_fluents: dict[FluentRef, float]
    actions: list[GroundedOperator]
    processes: list[GroundedOperator]
    events: list[GroundedOperator]
    init_lits: int
    init_fluents: tuple[float, ...]
    goal_pos: int
    goal_neg: int
    goal_numeric: Callable | None
    goal_static_ok: bool
    goal: tuple
    objects: dict[str, str]
    waypoint_ids: dict[str, int] = field(default_factory=dict)
    registry: AttachmentRegistry | None = None

    def atom_bit(self, predicate: str, *args: str) -> int:
        idx = self.atom_index.get(Atom(predicate, tuple(args)))
        return -1 if idx is None else idx

    def fluent_slot(self, name: str, *args: str) -> int:
        idx = self.fluent_index.get(FluentRef(name, tuple(args)))
        return -1 if idx is None else idx

    def find_action(self, name: str, *args: str) -> GroundedOperator:
        for a in self.actions:
            if a.name == name and a.args == tuple(args):
                return a
        raise KeyError(f"no grounded action ({' '.join((name,) + args)})")

    def true_atoms(self, lits: int) -> list[Atom]:
        out = []
        while lits:
            low = lits & -lits
            out.append(self.atoms[low.bit_length() - 1])
            lits ^= low
        return out

    def goal_satisfied(self, lits: int, fluents) -> bool:
        if not self.goal_static_ok:
            return False
        if lits & self.goal_pos != self.goal_pos or lits & self.goal_neg:
            return False
        return self.goal_numeric is None or self.goal_numeric(fluents)


# -- substitution -------------------------------------------------------------
def _sub_expr(e, b):
    if isinstance(e, FluentRef):
        return FluentRef(e.name, tuple(b.get(a, a) for a in e.args))
    if isinstance(e, BinOp):
        return BinOp(e.op, _sub_expr(e.left, b), _sub_expr(e.right, b))
    if isinstance(e, Neg):
        return Neg(_sub_expr(e.operand, b))
    return e


def _sub_atom(a: Atom, b) -> Atom:
    return Atom(a.predicate, tuple(b.get(x, x) for x in a.args))


def _sub_cond(c, b):
    if isinstance(c, Literal):
        return Literal(_sub_atom(c.atom, b), c.positive)
    return Comparison(c.op, _sub_expr(c.left, b), _sub_expr(c.right, b))


def _sub_effect(e, b):
    if isinstance(e, LiteralEffect):
        return LiteralEffect(_sub_cond(e.literal, b))
    if isinstance(e, NumericEffect):
        return NumericEffect(e.kind, _sub_expr(e.fluent, b), _sub_expr(e.expr, b))
    if isinstance(e, ContinuousEffect):
        return ContinuousEffect(e.kind, _sub_expr(e.fluent, b), _sub_expr(e.rate, b))
    return AttachedEffect(e.name, tuple(_sub_expr(f, b) for f in e.fluents))


class _Compiler:
    """Turns grounded expressions into Python lambdas over the fluent vector."""

    def __init__(self, dynamic_names, fluent_id, static_values):
        self.dynamic_names = dynamic_names
        self.slot = fluent_id
        self.static = static_values

    def src(self, e) -> str:
        if isinstance(e, Num):
            return repr(e.value)
        if isinstance(e, FluentRef):
            if e.name in self.dynamic_names:
                return f"f[{self.slot(e)}]"
            return repr(float(self.static.get(e, 0.0)))
        if isinstance(e, BinOp):
            return f"({self.src(e.left)} {e.op} {self.src(e.right)})"
        if isinstance(e, Neg):
            return f"(-{self.src(e.operand)})"
        raise TypeError(e)

    def is_dynamic(self, e) -> bool:
        if isinstance(e, FluentRef):
            return e.name in self.dynamic_names
        if isinstance(e, BinOp):
            return self.is_dynamic(e.left) or self.is_dynamic(e.right)
        if isinstance(e, Neg):
            return self.is_dynamic(e.operand)
        return False

    def cmp_src(self, c: Comparison) -> str:
        op = "==" if c.op == "=" else c.op
        return f"({self.src(c.left)} {op} {self.src(c.right)})"

    def expr(self, e) -> Callable:
        return eval(f"lambda f: {self.src(e)}")  # noqa: S307 - generated from parsed numbers only

    def conjunction(self, cmps) -> Callable | None:
        if not cmps:
            return None
        return eval("lambda f: " + " and ".join(self.cmp_src(c) for c in cmps))  # noqa: S307


def _changed_symbols(domain: DomainModel) -> tuple[set[str], set[str]]:
    preds, funcs = set(), set()
    for op in domain.operators():
        for e in op.effects:
            if isinstance(e, LiteralEffect):
                preds.add(e.literal.atom.predicate)
            elif isinstance(e, (NumericEffect, ContinuousEffect)):
                funcs.add(e.fluent.name)
            elif isinstance(e, AttachedEffect):
                funcs.update(f.name for f in e.fluents)
    return preds, funcs


def _waypoint_problem(domain: DomainModel, problem: ProblemModel, graph) -> ProblemModel:
    if graph is None:
        return problem
    if WAYPOINT_TYPE not in domain.type_names():
        raise GroundingError("waypoint/object mismatch: domain declares no waypoint type")
    objs = list(problem.objects)
    existing = dict(objs)
    atoms = list(problem.init_atoms)
    fluents = list(problem.init_fluents)
    goal = list(problem.goal)
    for w in graph.waypoints:
        name = f"wp{w.id}"
        if name in existing and existing[name] != WAYPOINT_TYPE:
            raise GroundingError(f"waypoint/object mismatch: {name} declared as {existing[name]}")
        if name not in existing:
            objs.append((name, WAYPOINT_TYPE))
    has_conn = (p := domain.predicate("connected")) is not None and p.arity == 2
    has_dist = (f := domain.function("distance")) is not None and f.arity == 2
    for (i, j), length in sorted(graph.edges.items()):
        for a, b in ((i, j), (j, i)):
            if has_conn:
                atoms.append(Atom("connected", (f"wp{a}", f"wp{b}")))
            if has_dist:
                fluents.append((FluentRef("distance", (f"wp{a}", f"wp{b}")), float(length)))
    robot_at = domain.predicate("robot_at")
    if robot_at is not None and robot_at.arity == 1:
        atoms.append(Atom("robot_at", (f"wp{graph.start_id}",)))
        goal.append(Literal(Atom("robot_at", (f"wp{graph.goal_id}",)), True))
    return ProblemModel(problem.name, problem.domain_name, tuple(objs), tuple(atoms),
                        tuple(fluents), tuple(goal))


def ground(domain: DomainModel, problem: ProblemModel, graph=None,
           registry: AttachmentRegistry | None = None,
           fluent_overrides: Mapping[str, float] | None = None) -> GroundedModel:
    """Ground every operator over the problem objects plus generated waypoints.

    ``fluent_overrides`` sets the initial value of 0-ary fluents by name (for
    example the motion discretization ``dfactor`` or the starting ``charge``).
    """
    overrides = dict(fluent_overrides or {})
    problem = _waypoint_problem(domain, problem, graph)
    objects = problem.object_types()
    for name, t in objects.items():
        if t not in domain.type_names():
            raise GroundingError(f"object {name} has undeclared type {t}")
    changed_preds, changed_funcs = _changed_symbols(domain)

    init_values: dict[FluentRef, float] = {}
    for fl, v in problem.init_fluents:
        init_values[fl] = v
    for name, v in overrides.items():
        decl = domain.function(name)
        if decl is None or decl.arity != 0:
            raise GroundingError(f"cannot override unknown 0-ary fluent {name}")
        init_values[FluentRef(name, ())] = float(v)
    static_atoms = {a for a in problem.init_atoms if a.predicate not in changed_preds}
    init_dynamic_atoms = [a for a in problem.init_atoms if a.predicate in changed_preds]

    by_type: dict[str, list[str]] = {}
    for t in domain.type_names():
        by_type[t] = sorted(o for o, ot in objects.items() if t in domain.supertypes(ot))

    atoms: list[Atom] = []
    atom_index: dict[Atom, int] = {}
    fluents: list[FluentRef] = []
    fluent_index: dict[FluentRef, int] = {}

    def atom_id(a: Atom) -> int:
        if a not in atom_index:
            atom_index[a] = len(atoms)
            atoms.append(a)
        return atom_index[a]

    def fluent_id(f: FluentRef) -> int:
        if f not in fluent_index:
            fluent_index[f] = len(fluents)
            fluents.append(f)
        return fluent_index[f]

    # 0-ary dynamic fluents first, then the rest as grounded operators touch them
    for decl in domain.functions:
        if decl.name in changed_funcs and decl.arity == 0:
            fluent_id(FluentRef(decl.name, ()))
    static_values = {f: v for f, v in init_values.items() if f.name not in changed_funcs}
    comp = _Compiler(changed_funcs, fluent_id, static_values)

    for a in init_dynamic_atoms:
        atom_id(a)

    grounded: dict[str, list[GroundedOperator]] = {"action": [], "process": [], "event": []}
    order = 0
    for op in domain.operators():
        for binding in _bindings(op, by_type, static_atoms, changed_preds):
            g = _ground_operator(op, binding, order, comp, static_atoms, changed_preds,
                                 atom_id, registry)
            if g is not None:
                grounded[op.kind].append(g)
                order += 1

    goal_pos = goal_neg = 0
    goal_static_ok = True
    goal_cmps = []
    for c in problem.goal:
        if isinstance(c, Literal):
            if c.atom.predicate in changed_preds:
                bit = 1 << atom_id(c.atom)
                if c.positive:
                    goal_pos |= bit
                else:
                    goal_neg |= bit
            elif (c.atom in static_atoms) != c.positive:
                goal_static_ok = False
        else:
            goal_cmps.append(c)

    init_lits = 0
    for a in init_dynamic_atoms:
        init_lits |= 1 << atom_index[a]
    init_fl = tuple(float(init_values.get(f, 0.0)) for f in fluents)

    for kind, ops in grounded.items():
        counts = Counter()
        for g in ops:
            counts.update(_bits(g.pos))
        for g in ops:
            bits = _bits(g.pos)
            g.trigger = min(bits, key=lambda b: (counts[b], b)) if bits else -1

    waypoint_ids = {}
    if graph is not None:
        waypoint_ids = {f"wp{w.id}": w.id for w in graph.waypoints}
    return GroundedModel(
        domain=domain, problem=problem, atoms=atoms, atom_index=atom_index,
        fluents=fluents, fluent_index=fluent_index, static_fluents=static_values,
        actions=grounded["action"], processes=grounded["process"], events=grounded["event"],
        init_lits=init_lits, init_fluents=init_fl, goal_pos=goal_pos, goal_neg=goal_neg,
        goal_numeric=comp.conjunction(goal_cmps), goal_static_ok=goal_static_ok,
        goal=problem.goal, objects=objects, waypoint_ids=waypoint_ids, registry=registry,
    )


def _bits(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def _bindings(op: Operator, by_type, static_atoms, changed_preds):
    """Parameter bindings consistent with the operator's static literals."""
    params = op.parameters
    statics = [c for c in op.precondition
               if isinstance(c, Literal) and c.atom.predicate not in changed_preds]
    names = [p.name for p in params]
    # check each static literal as soon as its last variable is bound
    checks_at: dict[int, list[Literal]] = {}
    for lit in statics:
        depth = max((names.index(a) for a in lit.atom.args if a in names), default=-1)
        checks_at.setdefault(depth, []).append(lit)

    def ok(lits, b):
        return all((_sub_atom(l.atom, b) in static_atoms) == l.positive for l in lits)

    def rec(i, b):
        if i == len(params):
            yield dict(b)
            return
        for obj in by_type.get(params[i].type, []):
            b[params[i].name] = obj
            if ok(checks_at.get(i, ()), b):
                yield from rec(i + 1, b)
            del b[params[i].name]

    if not ok(checks_at.get(-1, ()), {}):
        return
    yield from rec(0, {})


def _ground_operator(op, b, order, comp: _Compiler, static_atoms, changed_preds, atom_id,
                     registry):
    pre = tuple(_sub_cond(c, b) for c in op.precondition)
    pos = neg = 0
    cmps = []
    kept_pre = []
    for c in pre:
        if isinstance(c, Literal):
            if c.atom.predicate not in changed_preds:
                if (c.atom in static_atoms) != c.positive:
                    return None
                continue
            bit = 1 << atom_id(c.atom)
            if c.positive:
                pos |= bit
            else:
                neg |= bit
            kept_pre.append(c)
        else:
            if not (comp.is_dynamic(c.left) or comp.is_dynamic(c.right)):
                if not eval("lambda f: " + comp.cmp_src(c))(()):  # noqa: S307
                    return None
                continue
            cmps.append(c)
            kept_pre.append(c)
    effects = tuple(_sub_effect(e, b) for e in op.effects)
    add = delete = 0
    assigns, rates, attachments = [], [], []
    for e in effects:
        if isinstance(e, LiteralEffect):
            bit = 1 << atom_id(e.literal.atom)
            if e.literal.positive:
                add |= bit
            else:
                delete |= bit
        elif isinstance(e, NumericEffect):
            assigns.append((comp.slot(e.fluent), e.kind, comp.expr(e.expr)))
        elif isinstance(e, ContinuousEffect):
            sign = 1.0 if e.kind == "increase" else -1.0
            rates.append((comp.slot(e.fluent), sign, comp.expr(e.rate)))
        elif isinstance(e, AttachedEffect):
            if registry is None:
                raise UnresolvedAttachment(f"unresolved attachment: {e.name}")
            fn = registry.resolve(e.name)
            attachments.append((e.name, fn, tuple(comp.slot(f) for f in e.fluents)))
    args = tuple(b[p.name] for p in op.parameters)
    return GroundedOperator(
        kind=op.kind, name=op.name, args=args, order=order, pos=pos, neg=neg,
        numeric_pre=comp.conjunction(cmps), add=add, delete=delete & ~add,
        assigns=tuple(assigns), rates=tuple(rates), attachments=tuple(attachments),
        precondition=tuple(kept_pre), effects=effects,
    )


def print_model(gm: GroundedModel) -> str:
    """Deterministic listing of a grounded model, for debugging and golden files."""
    lines = [
        f";; grounded {gm.domain.name} / {gm.problem.name}",
        f";; atoms {len(gm.atoms)} fluents {len(gm.fluents)} actions {len(gm.actions)} "
        f"processes {len(gm.processes)} events {len(gm.events)}",
        "(:atoms",
    ]
    lines += [f"  {i} ({' '.join((a.predicate,) + a.args)})" for i, a in enumerate(gm.atoms)]
    lines.append(")")
    lines.append("(:fluents")
    for i, f in enumerate(gm.fluents):
        lines.append(f"  {i} ({' '.join((f.name,) + f.args)}) = {fmt_number(gm.init_fluents[i])}")
    lines.append(")")
    lines.append("(:static-fluents")
    for f in sorted(gm.static_fluents, key=lambda f: (f.name, f.args)):
        lines.append(f"  ({' '.join((f.name,) + f.args)}) = {fmt_number(gm.static_fluents[f])}")
    lines.append(")")
    init = " ".join(f"({' '.join((a.predicate,) + a.args)})" for a in gm.true_atoms(gm.init_lits))
    lines.append(f"(:init {init})")
    lines.append(f"(:goal {fmt_condition(gm.goal)})")
    for g in gm.actions + gm.processes + gm.events:
        lines.append(f"(:{g.kind} {g.label}")
        lines.append(f"  :precondition {fmt_condition(g.precondition)}")
        eff = " ".join(fmt_effect(e) for e in g.effects)
        lines.append(f"  :effect (and {eff}))")
    return "\n".join(lines) + "\n"
