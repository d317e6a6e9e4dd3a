"""Syntax tree for the supported PDDL+ subset.

Nodes are frozen dataclasses so two parses of equivalent text compare equal.
Source positions are not part of node identity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union


# -- numeric expressions ----------------------------------------------------
@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class FluentRef:
    name: str
    args: tuple[str, ...] = ()


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


Expr = Union[Num, FluentRef, BinOp, Neg]


# -- conditions -------------------------------------------------------------
@dataclass(frozen=True)
class Atom:
    predicate: str
    args: tuple[str, ...] = ()


@dataclass(frozen=True)
class Literal:
    atom: Atom
    positive: bool = True


@dataclass(frozen=True)
class Comparison:
    op: str  # one of < <= > >= =
    left: Expr
    right: Expr


Condition = tuple  # conjunction of Literal | Comparison


# -- effects ----------------------------------------------------------------
@dataclass(frozen=True)
class LiteralEffect:
    literal: Literal


@dataclass(frozen=True)
class NumericEffect:
    kind: str  # assign | increase | decrease
    fluent: FluentRef
    expr: Expr


@dataclass(frozen=True)
class ContinuousEffect:
    """``(increase|decrease fluent (* #t rate))`` inside a process."""

    kind: str  # increase | decrease
    fluent: FluentRef
    rate: Expr


@dataclass(frozen=True)
class AttachedEffect:
    """Fluents whose values are computed by a registered external function."""

    name: str
    fluents: tuple[FluentRef, ...]


Effect = Union[LiteralEffect, NumericEffect, ContinuousEffect, AttachedEffect]


# -- declarations -----------------------------------------------------------
@dataclass(frozen=True)
class Parameter:
    name: str  # includes the leading '?'
    type: str = "object"


@dataclass(frozen=True)
class PredicateDecl:
    name: str
    parameters: tuple[Parameter, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.parameters)


@dataclass(frozen=True)
class FunctionDecl:
    name: str
    parameters: tuple[Parameter, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.parameters)


@dataclass(frozen=True)
class Operator:
    kind: str  # action | process | event
    name: str
    parameters: tuple[Parameter, ...] = ()
    precondition: Condition = ()
    effects: tuple[Effect, ...] = ()


@dataclass(frozen=True)
class DomainModel:
    name: str
    requirements: tuple[str, ...] = ()
    types: tuple[tuple[str, str], ...] = ()  # (type, parent)
    predicates: tuple[PredicateDecl, ...] = ()
    functions: tuple[FunctionDecl, ...] = ()
    actions: tuple[Operator, ...] = ()
    processes: tuple[Operator, ...] = ()
    events: tuple[Operator, ...] = ()

    def predicate(self, name: str) -> PredicateDecl | None:
        return next((p for p in self.predicates if p.name == name), None)

    def function(self, name: str) -> FunctionDecl | None:
        return next((f for f in self.functions if f.name == name), None)

    def type_names(self) -> set[str]:
        return {"object"} | {t for t, _ in self.types} | {p for _, p in self.types}

    def supertypes(self, t: str) -> set[str]:
        parents = dict(self.types)
        out = {t, "object"}
        while t in parents and parents[t] not in out:
            t = parents[t]
            out.add(t)
        return out

    def operators(self) -> tuple[Operator, ...]:
        return self.actions + self.processes + self.events


@dataclass(frozen=True)
class ProblemModel:
    name: str
    domain_name: str
    objects: tuple[tuple[str, str], ...] = ()  # (object, type)
    init_atoms: tuple[Atom, ...] = ()
    init_fluents: tuple[tuple[FluentRef, float], ...] = ()
    goal: Condition = ()

    def object_types(self) -> dict[str, str]:
        return dict(self.objects)
