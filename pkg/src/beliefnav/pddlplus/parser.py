"""Reader for the supported PDDL+ subset.

Anything outside the subset is rejected with a positioned diagnostic rather
than silently ignored.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import (
    Atom,
    AttachedEffect,
    BinOp,
    Comparison,
    ContinuousEffect,
    DomainModel,
    FluentRef,
    FunctionDecl,
    Literal,
    LiteralEffect,
    Neg,
    Num,
    NumericEffect,
    Operator,
    Parameter,
    PredicateDecl,
    ProblemModel,
)

SUPPORTED_REQUIREMENTS = {
    ":strips", ":typing", ":negative-preconditions", ":fluents", ":numeric-fluents", ":time",
}
COMPARATORS = {"<", "<=", ">", ">=", "="}
ARITHMETIC = {"+", "-", "*", "/"}
ASSIGN_OPS = {"assign", "increase", "decrease"}
# constructs that are valid PDDL but deliberately outside the subset
UNSUPPORTED = {
    ":durative-action": "durative-actions", ":durative-actions": "durative-actions",
    ":derived": "derived-predicates", ":derived-predicates": "derived-predicates",
    ":constants": "constants", ":constraints": "constraints", ":metric": "metric",
    ":timed-initial-literals": "timed-initial-literals", ":preferences": "preferences",
    ":conditional-effects": "conditional-effects", ":disjunctive-preconditions": "disjunctive-preconditions",
    ":existential-preconditions": "existential-preconditions",
    ":universal-preconditions": "universal-preconditions",
    ":quantified-preconditions": "quantified-preconditions", ":adl": "adl",
    ":equality": "equality", ":duration-inequalities": "duration-inequalities",
    ":continuous-effects": "continuous-effects", ":action-costs": "action-costs",
    ":object-fluents": "object-fluents", ":length": "length",
    "or": "disjunctive-preconditions", "imply": "disjunctive-preconditions",
    "exists": "existential-preconditions", "forall": "universal-preconditions",
    "when": "conditional-effects", "scale-up": "scale-up effects",
    "scale-down": "scale-down effects", "at": "timed literals", "over": "timed literals",
    "either": "either types",
}


class PddlError(Exception):
    """Diagnostic with a source position; ``str()`` gives ``file:line:col: message``."""

    def __init__(self, message: str, line: int = 0, col: int = 0, filename: str = "<input>"):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col
        self.filename = filename

    def __str__(self) -> str:
        return f"{self.filename}:{self.line}:{self.col}: {self.message}"


class PddlSyntaxError(PddlError):
    pass


class UndeclaredSymbol(PddlError):
    pass


class ArityMismatch(PddlError):
    pass


class UnsupportedFeature(PddlError):
    pass


@dataclass
class Token:
    value: str
    line: int
    col: int


@dataclass
class SList:
    items: list
    line: int
    col: int


def tokenize(text: str, filename: str = "<input>") -> list[Token]:
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
        elif c.isspace():
            i += 1
            col += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            tokens.append(Token(c, line, col))
            i += 1
            col += 1
        else:
            start, scol = i, col
            while i < n and not text[i].isspace() and text[i] not in "();":
                i += 1
                col += 1
            tokens.append(Token(text[start:i].lower(), line, scol))
    return tokens


def read_sexpr(text: str, filename: str = "<input>") -> SList:
    tokens = tokenize(text, filename)
    if not tokens:
        raise PddlSyntaxError("empty input, expected '('", 1, 1, filename)
    stack: list[SList] = []
    root = None
    for tok in tokens:
        if tok.value == "(":
            node = SList([], tok.line, tok.col)
            if stack:
                stack[-1].items.append(node)
            elif root is not None:
                raise PddlSyntaxError("unexpected content after end of definition",
                                      tok.line, tok.col, filename)
            else:
                root = node
            stack.append(node)
        elif tok.value == ")":
            if not stack:
                raise PddlSyntaxError("unbalanced ')'", tok.line, tok.col, filename)
            stack.pop()
        else:
            if not stack:
                raise PddlSyntaxError(f"unexpected token {tok.value!r}, expected '('",
                                      tok.line, tok.col, filename)
            stack[-1].items.append(tok)
    if stack:
        s = stack[-1]
        raise PddlSyntaxError("unclosed '(' (expected ')')", s.line, s.col, filename)
    return root


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return s not in ("nan", "inf", "-inf", "+inf", "infinity")


class _Reader:
    def __init__(self, filename: str):
        self.filename = filename

    def err(self, cls, msg, node):
        return cls(msg, node.line, node.col, self.filename)

    def sym(self, node, what: str) -> str:
        if not isinstance(node, Token) or node.value in "()":
            raise self.err(PddlSyntaxError, f"expected {what}", node)
        return node.value

    def lst(self, node, what: str) -> SList:
        if not isinstance(node, SList):
            raise self.err(PddlSyntaxError, f"expected {what}", node)
        return node

    def head(self, node: SList) -> str | None:
        if node.items and isinstance(node.items[0], Token):
            return node.items[0].value
        return None

    def unsupported_check(self, name: str, node) -> None:
        if name in UNSUPPORTED:
            raise self.err(UnsupportedFeature, f"unsupported PDDL feature: {UNSUPPORTED[name]}", node)

    def typed_list(self, items, what: str) -> list[tuple[str, str, Token]]:
        """Parse ``a b - t c`` style lists into (name, type, token)."""
        out: list[tuple[str, str, Token]] = []
        pending: list[Token] = []
        i = 0
        while i < len(items):
            it = items[i]
            if isinstance(it, SList):
                h = self.head(it)
                if h:
                    self.unsupported_check(h, it)
                raise self.err(PddlSyntaxError, f"expected {what} name", it)
            if it.value == "-":
                if not pending or i + 1 >= len(items):
                    raise self.err(PddlSyntaxError, f"misplaced '-' in {what} list", it)
                t = items[i + 1]
                if isinstance(t, SList):
                    h = self.head(t)
                    if h:
                        self.unsupported_check(h, t)
                    raise self.err(PddlSyntaxError, "expected type name", t)
                out.extend((p.value, t.value, p) for p in pending)
                pending = []
                i += 2
                continue
            pending.append(it)
            i += 1
        out.extend((p.value, "object", p) for p in pending)
        return out


class _DomainReader(_Reader):
    def read(self, text: str) -> DomainModel:
        root = read_sexpr(text, self.filename)
        items = root.items
        if self.head(root) != "define":
            raise self.err(PddlSyntaxError, "expected (define ...)", root)
        if len(items) < 2:
            raise self.err(PddlSyntaxError, "expected (domain <name>)", root)
        dnode = self.lst(items[1], "(domain <name>)")
        if self.head(dnode) != "domain" or len(dnode.items) != 2:
            raise self.err(PddlSyntaxError, "expected (domain <name>)", dnode)
        name = self.sym(dnode.items[1], "domain name")

        self.requirements: list[str] = []
        self.types: list[tuple[str, str]] = []
        self.predicates: dict[str, PredicateDecl] = {}
        self.functions: dict[str, FunctionDecl] = {}
        op_nodes: list[tuple[str, SList]] = []
        seen_sections: set[str] = set()

        for sec in items[2:]:
            sec = self.lst(sec, "domain section")
            key = self.head(sec)
            if key is None:
                raise self.err(PddlSyntaxError, "expected section keyword", sec)
            self.unsupported_check(key, sec.items[0])
            body = sec.items[1:]
            if key in (":requirements", ":types", ":predicates", ":functions"):
                if key in seen_sections:
                    raise self.err(PddlSyntaxError, f"duplicate {key} section", sec)
                seen_sections.add(key)
            if key == ":requirements":
                for r in body:
                    req = self.sym(r, "requirement flag")
                    self.unsupported_check(req, r)
                    if req not in SUPPORTED_REQUIREMENTS:
                        raise self.err(PddlSyntaxError, f"unknown requirement {req}", r)
                    self.requirements.append(req)
            elif key == ":types":
                for tname, parent, tok in self.typed_list(body, "type"):
                    if tname == "object":
                        raise self.err(PddlSyntaxError, "cannot redeclare type object", tok)
                    self.types.append((tname, parent))
            elif key == ":predicates":
                for p in body:
                    p = self.lst(p, "predicate declaration")
                    pname = self.sym(p.items[0], "predicate name") if p.items else None
                    if pname is None:
                        raise self.err(PddlSyntaxError, "expected predicate name", p)
                    if pname in self.predicates:
                        raise self.err(PddlSyntaxError, f"duplicate predicate {pname}", p)
                    self.predicates[pname] = PredicateDecl(pname, self.params(p.items[1:]))
            elif key == ":functions":
                body = list(body)
                i = 0
                while i < len(body):
                    f = body[i]
                    if isinstance(f, Token) and f.value == "-":
                        if i + 1 >= len(body) or self.sym(body[i + 1], "number") != "number":
                            raise self.err(PddlSyntaxError, "only numeric functions are supported", f)
                        i += 2
                        continue
                    f = self.lst(f, "function declaration")
                    fname = self.sym(f.items[0], "function name") if f.items else None
                    if fname is None:
                        raise self.err(PddlSyntaxError, "expected function name", f)
                    if fname in self.functions:
                        raise self.err(PddlSyntaxError, f"duplicate function {fname}", f)
                    self.functions[fname] = FunctionDecl(fname, self.params(f.items[1:]))
                    i += 1
            elif key in (":action", ":process", ":event"):
                op_nodes.append((key[1:], sec))
            else:
                raise self.err(PddlSyntaxError, f"unknown domain section {key}", sec)

        self.declared_types = {"object"} | {t for t, _ in self.types}
        for t, parent in self.types:
            if parent not in self.declared_types:
                raise self.err(UndeclaredSymbol, f"undeclared type {parent}", root)
        self.parents = dict(self.types)
        for decl in list(self.predicates.values()) + list(self.functions.values()):
            for prm in decl.parameters:
                if prm.type not in self.declared_types:
                    raise self.err(UndeclaredSymbol, f"undeclared type {prm.type}", root)
        ops = {"action": [], "process": [], "event": []}
        names: set[str] = set()
        for kind, node in op_nodes:
            op = self.operator(kind, node)
            if op.name in names:
                raise self.err(PddlSyntaxError, f"duplicate operator {op.name}", node)
            names.add(op.name)
            ops[kind].append(op)
        return DomainModel(
            name=name,
            requirements=tuple(self.requirements),
            types=tuple(self.types),
            predicates=tuple(self.predicates.values()),
            functions=tuple(self.functions.values()),
            actions=tuple(ops["action"]),
            processes=tuple(ops["process"]),
            events=tuple(ops["event"]),
        )

    def params(self, items) -> tuple[Parameter, ...]:
        out = []
        for pname, ptype, tok in self.typed_list(items, "parameter"):
            if not pname.startswith("?") or len(pname) < 2:
                raise self.err(PddlSyntaxError, f"expected variable, got {pname!r}", tok)
            if hasattr(self, "declared_types") and ptype not in self.declared_types:
                raise self.err(UndeclaredSymbol, f"undeclared type {ptype}", tok)
            out.append(Parameter(pname, ptype))
        return tuple(out)

    def subtype(self, t: str, of: str) -> bool:
        seen = set()
        while True:
            if t == of or of == "object":
                return True
            if t in seen or t not in self.parents:
                return False
            seen.add(t)
            t = self.parents[t]

    def operator(self, kind: str, node: SList) -> Operator:
        items = node.items
        if len(items) < 2:
            raise self.err(PddlSyntaxError, f"expected {kind} name", node)
        name = self.sym(items[1], f"{kind} name")
        fields: dict[str, object] = {}
        i = 2
        while i < len(items):
            key = self.sym(items[i], "operator keyword")
            if key not in (":parameters", ":precondition", ":effect"):
                self.unsupported_check(key, items[i])
                raise self.err(PddlSyntaxError, f"unknown operator keyword {key}", items[i])
            if key in fields:
                raise self.err(PddlSyntaxError, f"duplicate {key}", items[i])
            if i + 1 >= len(items):
                raise self.err(PddlSyntaxError, f"missing value for {key}", items[i])
            fields[key] = items[i + 1]
            i += 2
        params = ()
        if ":parameters" in fields:
            params = self.params(self.lst(fields[":parameters"], "parameter list").items)
        scope = {}
        for p in params:
            if p.name in scope:
                raise self.err(PddlSyntaxError, f"duplicate parameter {p.name}", node)
            scope[p.name] = p.type
        pre = ()
        if ":precondition" in fields:
            pre = tuple(self.condition(fields[":precondition"], scope))
        effects = ()
        if ":effect" in fields:
            effects = tuple(self.effects(fields[":effect"], scope, kind))
        if kind == "process" and not any(isinstance(e, ContinuousEffect) for e in effects):
            raise self.err(PddlSyntaxError,
                           f"process {name} needs at least one continuous effect", node)
        return Operator(kind, name, params, pre, effects)

    # -- terms --------------------------------------------------------------
    def args(self, toks, decl, scope, what: str, node) -> tuple[str, ...]:
        if len(toks) != decl.arity:
            raise self.err(ArityMismatch,
                           f"{what} {decl.name} expects {decl.arity} arguments, got {len(toks)}",
                           node)
        out = []
        for tok, prm in zip(toks, decl.parameters):
            v = self.sym(tok, "argument")
            if v not in scope:
                raise self.err(UndeclaredSymbol, f"unbound variable or unknown object {v}", tok)
            if not self.subtype(scope[v], prm.type):
                raise self.err(PddlSyntaxError,
                               f"argument {v} of type {scope[v]} does not match {prm.type}", tok)
            out.append(v)
        return tuple(out)

    def atom(self, node: SList, scope) -> Atom:
        pname = self.sym(node.items[0], "predicate")
        decl = self.predicates.get(pname)
        if decl is None:
            self.unsupported_check(pname, node.items[0])
            if pname in self.functions:
                raise self.err(PddlSyntaxError, f"function {pname} used as a predicate", node.items[0])
            raise self.err(UndeclaredSymbol, f"undeclared predicate {pname}", node.items[0])
        return Atom(pname, self.args(node.items[1:], decl, scope, "predicate", node))

    def fluent(self, node, scope) -> FluentRef:
        node = self.lst(node, "function term")
        if not node.items:
            raise self.err(PddlSyntaxError, "expected function term", node)
        fname = self.sym(node.items[0], "function name")
        decl = self.functions.get(fname)
        if decl is None:
            raise self.err(UndeclaredSymbol, f"undeclared function {fname}", node.items[0])
        return FluentRef(fname, self.args(node.items[1:], decl, scope, "function", node))

    def expr(self, node, scope, allow_t: bool = False):
        if isinstance(node, Token):
            if node.value == "#t":
                raise self.err(PddlSyntaxError, "#t only allowed as a process rate factor", node)
            if _is_number(node.value):
                return Num(float(node.value))
            raise self.err(PddlSyntaxError, f"expected numeric expression, got {node.value!r}", node)
        if not node.items:
            raise self.err(PddlSyntaxError, "expected numeric expression", node)
        h = self.head(node)
        if h in ARITHMETIC:
            operands = [self.expr(x, scope) for x in node.items[1:]]
            if h == "-" and len(operands) == 1:
                return Neg(operands[0])
            if len(operands) < 2 or (h in "-/" and len(operands) != 2):
                raise self.err(PddlSyntaxError, f"wrong operand count for {h}", node)
            out = operands[0]
            for o in operands[1:]:
                out = BinOp(h, out, o)
            return out
        if h is not None:
            self.unsupported_check(h, node.items[0])
        return self.fluent(node, scope)

    # -- conditions ---------------------------------------------------------
    def condition(self, node, scope):
        node = self.lst(node, "condition")
        if not node.items:
            return []
        h = self.head(node)
        if h == "and":
            out = []
            for sub in node.items[1:]:
                out.extend(self.condition(sub, scope))
            return out
        if h == "not":
            if len(node.items) != 2:
                raise self.err(PddlSyntaxError, "not takes one argument", node)
            inner = self.lst(node.items[1], "atom")
            ih = self.head(inner)
            if ih in COMPARATORS or ih in ("and", "not"):
                raise self.err(UnsupportedFeature,
                               "unsupported PDDL feature: negation of non-atomic conditions", inner)
            return [Literal(self.atom(inner, scope), False)]
        if h in COMPARATORS:
            if len(node.items) != 3:
                raise self.err(PddlSyntaxError, f"comparison {h} takes two arguments", node)
            return [Comparison(h, self.expr(node.items[1], scope), self.expr(node.items[2], scope))]
        if h is None:
            raise self.err(PddlSyntaxError, "expected condition", node)
        self.unsupported_check(h, node.items[0])
        return [Literal(self.atom(node, scope), True)]

    # -- effects ------------------------------------------------------------
    def effects(self, node, scope, kind: str):
        node = self.lst(node, "effect")
        if not node.items:
            return []
        h = self.head(node)
        if h == "and":
            out = []
            for sub in node.items[1:]:
                out.extend(self.effects(sub, scope, kind))
            return out
        if h == "not":
            if len(node.items) != 2:
                raise self.err(PddlSyntaxError, "not takes one argument", node)
            self._no_literal_in_process(kind, node)
            return [LiteralEffect(Literal(self.atom(self.lst(node.items[1], "atom"), scope), False))]
        if h in ASSIGN_OPS:
            if len(node.items) != 3:
                raise self.err(PddlSyntaxError, f"{h} takes a function and an expression", node)
            fl = self.fluent(node.items[1], scope)
            rhs = node.items[2]
            rate = self._rate(rhs, scope)
            if kind == "process":
                if h == "assign" or rate is None:
                    raise self.err(PddlSyntaxError,
                                   "process effects must be (increase|decrease f (* #t rate))", node)
                return [ContinuousEffect(h, fl, rate)]
            if rate is not None:
                raise self.err(PddlSyntaxError, "#t only allowed in process effects", rhs)
            return [NumericEffect(h, fl, self.expr(rhs, scope))]
        if h == "attached":
            if kind != "event":
                raise self.err(PddlSyntaxError, "attached effects are only allowed in events", node)
            if len(node.items) < 3:
                raise self.err(PddlSyntaxError, "expected (attached <name> <fluent>...)", node)
            aname = self.sym(node.items[1], "attachment name")
            return [AttachedEffect(aname, tuple(self.fluent(f, scope) for f in node.items[2:]))]
        if h is None:
            raise self.err(PddlSyntaxError, "expected effect", node)
        self.unsupported_check(h, node.items[0])
        self._no_literal_in_process(kind, node)
        return [LiteralEffect(Literal(self.atom(node, scope), True))]

    def _no_literal_in_process(self, kind, node):
        if kind == "process":
            raise self.err(PddlSyntaxError, "process effects must be continuous", node)

    def _rate(self, node, scope):
        if not isinstance(node, SList) or self.head(node) != "*" or len(node.items) != 3:
            return None
        a, b = node.items[1], node.items[2]
        if isinstance(a, Token) and a.value == "#t":
            return self.expr(b, scope)
        if isinstance(b, Token) and b.value == "#t":
            return self.expr(a, scope)
        return None


class _ProblemReader(_Reader):
    def __init__(self, filename: str, domain: DomainModel):
        super().__init__(filename)
        self.domain = domain
        self.dom = _DomainReader(filename)
        self.dom.predicates = {p.name: p for p in domain.predicates}
        self.dom.functions = {f.name: f for f in domain.functions}
        self.dom.parents = dict(domain.types)
        self.dom.declared_types = domain.type_names()

    def read(self, text: str) -> ProblemModel:
        root = read_sexpr(text, self.filename)
        items = root.items
        if self.head(root) != "define" or len(items) < 2:
            raise self.err(PddlSyntaxError, "expected (define (problem <name>) ...)", root)
        pnode = self.lst(items[1], "(problem <name>)")
        if self.head(pnode) != "problem" or len(pnode.items) != 2:
            raise self.err(PddlSyntaxError, "expected (problem <name>)", pnode)
        name = self.sym(pnode.items[1], "problem name")
        domain_name = None
        objects: list[tuple[str, str]] = []
        init_atoms = []
        init_fluents = []
        goal = ()
        scope: dict[str, str] = {}
        sections = {}
        for sec in items[2:]:
            sec = self.lst(sec, "problem section")
            key = self.head(sec)
            if key is None:
                raise self.err(PddlSyntaxError, "expected section keyword", sec)
            self.unsupported_check(key, sec.items[0])
            if key not in (":domain", ":objects", ":init", ":goal", ":requirements"):
                raise self.err(PddlSyntaxError, f"unknown problem section {key}", sec)
            if key in sections:
                raise self.err(PddlSyntaxError, f"duplicate {key} section", sec)
            sections[key] = sec
        if ":domain" in sections:
            sec = sections[":domain"]
            if len(sec.items) != 2:
                raise self.err(PddlSyntaxError, "expected (:domain <name>)", sec)
            domain_name = self.sym(sec.items[1], "domain name")
            if domain_name != self.domain.name:
                raise self.err(PddlSyntaxError,
                               f"problem is for domain {domain_name}, not {self.domain.name}", sec)
        else:
            raise self.err(PddlSyntaxError, "missing (:domain ...)", root)
        if ":objects" in sections:
            for oname, otype, tok in self.typed_list(sections[":objects"].items[1:], "object"):
                if otype not in self.dom.declared_types:
                    raise self.err(UndeclaredSymbol, f"undeclared type {otype}", tok)
                if oname in scope:
                    raise self.err(PddlSyntaxError, f"duplicate object {oname}", tok)
                scope[oname] = otype
                objects.append((oname, otype))
        if ":init" in sections:
            for it in sections[":init"].items[1:]:
                it = self.lst(it, "initial fact")
                if self.head(it) == "=":
                    if len(it.items) != 3:
                        raise self.err(PddlSyntaxError, "expected (= (f ...) <number>)", it)
                    fl = self.dom.fluent(it.items[1], scope)
                    val = self.sym(it.items[2], "number")
                    if not _is_number(val):
                        raise self.err(PddlSyntaxError, f"expected number, got {val!r}", it.items[2])
                    init_fluents.append((fl, float(val)))
                else:
                    if self.head(it) is not None:
                        self.unsupported_check(self.head(it), it.items[0])
                    init_atoms.append(self.dom.atom(it, scope))
        if ":goal" in sections:
            sec = sections[":goal"]
            if len(sec.items) != 2:
                raise self.err(PddlSyntaxError, "expected (:goal <condition>)", sec)
            goal = tuple(self.dom.condition(sec.items[1], scope))
        return ProblemModel(name, domain_name, tuple(objects), tuple(init_atoms),
                            tuple(init_fluents), goal)


def parse_domain(text: str, filename: str = "<domain>") -> DomainModel:
    return _DomainReader(filename).read(text)


def parse_problem(text: str, domain: DomainModel, filename: str = "<problem>") -> ProblemModel:
    return _ProblemReader(filename, domain).read(text)
