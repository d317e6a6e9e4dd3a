"""Canonical text rendering of domain and problem models.

Output is deterministic: identical models always render to identical bytes,
and reparsing the text yields an equal model.
"""

from __future__ import annotations

from .model import (
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
    Parameter,
    ProblemModel,
)


def fmt_number(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def fmt_expr(e) -> str:
    if isinstance(e, Num):
        return fmt_number(e.value)
    if isinstance(e, FluentRef):
        return "(" + " ".join((e.name,) + e.args) + ")"
    if isinstance(e, BinOp):
        return f"({e.op} {fmt_expr(e.left)} {fmt_expr(e.right)})"
    if isinstance(e, Neg):
        return f"(- {fmt_expr(e.operand)})"
    raise TypeError(f"not an expression: {e!r}")


def fmt_literal(lit: Literal) -> str:
    a = "(" + " ".join((lit.atom.predicate,) + lit.atom.args) + ")"
    return a if lit.positive else f"(not {a})"


def fmt_condition_item(c) -> str:
    if isinstance(c, Literal):
        return fmt_literal(c)
    if isinstance(c, Comparison):
        return f"({c.op} {fmt_expr(c.left)} {fmt_expr(c.right)})"
    raise TypeError(f"not a condition: {c!r}")


def fmt_condition(items) -> str:
    if not items:
        return "()"
    return "(and " + " ".join(fmt_condition_item(c) for c in items) + ")"


def fmt_effect(e) -> str:
    if isinstance(e, LiteralEffect):
        return fmt_literal(e.literal)
    if isinstance(e, NumericEffect):
        return f"({e.kind} {fmt_expr(e.fluent)} {fmt_expr(e.expr)})"
    if isinstance(e, ContinuousEffect):
        return f"({e.kind} {fmt_expr(e.fluent)} (* #t {fmt_expr(e.rate)}))"
    if isinstance(e, AttachedEffect):
        return "(attached " + e.name + " " + " ".join(fmt_expr(f) for f in e.fluents) + ")"
    raise TypeError(f"not an effect: {e!r}")


def fmt_params(params: tuple[Parameter, ...]) -> str:
    return " ".join(f"{p.name} - {p.type}" for p in params)


def _operator(op: Operator) -> list[str]:
    lines = [f"  (:{op.kind} {op.name}", f"    :parameters ({fmt_params(op.parameters)})"]
    lines.append(f"    :precondition {fmt_condition(op.precondition)}")
    if op.effects:
        lines.append("    :effect (and")
        lines.extend(f"      {fmt_effect(e)}" for e in op.effects)
        lines.append("    )")
    else:
        lines.append("    :effect ()")
    lines.append("  )")
    return lines


def print_domain(d: DomainModel) -> str:
    lines = [f"(define (domain {d.name})"]
    if d.requirements:
        lines.append("  (:requirements " + " ".join(d.requirements) + ")")
    if d.types:
        lines.append("  (:types " + " ".join(f"{t} - {p}" for t, p in d.types) + ")")
    if d.predicates:
        lines.append("  (:predicates")
        for p in d.predicates:
            inner = " ".join(filter(None, (p.name, fmt_params(p.parameters))))
            lines.append(f"    ({inner})")
        lines.append("  )")
    if d.functions:
        lines.append("  (:functions")
        for f in d.functions:
            inner = " ".join(filter(None, (f.name, fmt_params(f.parameters))))
            lines.append(f"    ({inner})")
        lines.append("  )")
    for op in d.actions + d.processes + d.events:
        lines.extend(_operator(op))
    lines.append(")")
    return "\n".join(lines) + "\n"


def print_problem(p: ProblemModel) -> str:
    lines = [f"(define (problem {p.name})", f"  (:domain {p.domain_name})"]
    if p.objects:
        lines.append("  (:objects " + " ".join(f"{o} - {t}" for o, t in p.objects) + ")")
    lines.append("  (:init")
    for a in p.init_atoms:
        lines.append("    (" + " ".join((a.predicate,) + a.args) + ")")
    for fl, v in p.init_fluents:
        lines.append(f"    (= {fmt_expr(fl)} {fmt_number(v)})")
    lines.append("  )")
    lines.append(f"  (:goal {fmt_condition(p.goal)})")
    lines.append(")")
    return "\n".join(lines) + "\n"
