"""ATL formulas: AST, parser, printer, subformulas, syntax DAGs and rewrites.

Formula nodes are hash-consed, so structurally equal formulas are the very
same object.  That makes equality and hashing O(1) and gives maximal sharing
for free when a formula is turned into a DAG.
"""

from __future__ import annotations

import re
import weakref
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

Coalition = frozenset[int]


class FormulaError(ValueError):
    """Syntax errors, out-of-range agents and unsupported operators."""


# -- AST -------------------------------------------------------------------

class Formula:
    """Base class of all formula nodes.  Instances are interned and immutable."""

    __slots__ = ("_key", "_hash", "__weakref__")
    _table: "weakref.WeakValueDictionary[tuple, Formula]" = weakref.WeakValueDictionary()
    kind: str = ""
    arity: int = 0

    def __new__(cls, *args):
        key = (cls,) + cls._normalize(*args)
        node = Formula._table.get(key)
        if node is None:
            node = object.__new__(cls)
            object.__setattr__(node, "_key", key)
            object.__setattr__(node, "_hash", hash(key))
            Formula._table[key] = node
        return node

    @staticmethod
    def _normalize(*args) -> tuple:
        return args

    def __setattr__(self, name, value):
        raise AttributeError("formulas are immutable")

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        return self is other

    def __reduce__(self):
        return (self.__class__, self._key[1:])

    def children(self) -> tuple["Formula", ...]:
        return ()

    def __repr__(self) -> str:
        return f"parse_formula({render_formula(self)!r})"

    def __str__(self) -> str:
        return render_formula(self)


class Prop(Formula):
    __slots__ = ()
    kind = "prop"

    @staticmethod
    def _normalize(name):
        return (str(name),)

    @property
    def name(self) -> str:
        return self._key[1]


class Const(Formula):
    __slots__ = ()
    kind = "const"

    @staticmethod
    def _normalize(value):
        return (bool(value),)

    @property
    def value(self) -> bool:
        return self._key[1]


class _Unary(Formula):
    __slots__ = ()
    arity = 1

    @property
    def arg(self) -> Formula:
        return self._key[1]

    def children(self):
        return (self._key[1],)


class _Binary(Formula):
    __slots__ = ()
    arity = 2

    @property
    def left(self) -> Formula:
        return self._key[1]

    @property
    def right(self) -> Formula:
        return self._key[2]

    def children(self):
        return (self._key[1], self._key[2])


class Not(_Unary):
    __slots__ = ()
    kind = "not"


class And(_Binary):
    __slots__ = ()
    kind = "and"


class Or(_Binary):
    __slots__ = ()
    kind = "or"


class Implies(_Binary):
    __slots__ = ()
    kind = "implies"


class _Temporal(Formula):
    __slots__ = ()

    @property
    def coalition(self) -> Coalition:
        return self._key[1]


class _UnaryTemporal(_Temporal):
    __slots__ = ()
    arity = 1

    @staticmethod
    def _normalize(coalition, arg):
        return (frozenset(coalition), arg)

    @property
    def arg(self) -> Formula:
        return self._key[2]

    def children(self):
        return (self._key[2],)


class Next(_UnaryTemporal):
    __slots__ = ()
    kind = "X"


class Globally(_UnaryTemporal):
    __slots__ = ()
    kind = "G"


class Finally(_UnaryTemporal):
    __slots__ = ()
    kind = "F"


class Until(_Temporal):
    __slots__ = ()
    kind = "U"
    arity = 2

    @staticmethod
    def _normalize(coalition, left, right):
        return (frozenset(coalition), left, right)

    @property
    def left(self) -> Formula:
        return self._key[2]

    @property
    def right(self) -> Formula:
        return self._key[3]

    def children(self):
        return (self._key[2], self._key[3])


TRUE = Const(True)
FALSE = Const(False)

TEMPORAL_KINDS = frozenset({"X", "G", "U", "F"})
BINARY_KINDS = frozenset({"and", "or", "implies", "U"})
CORE_OPERATORS = frozenset({"not", "and", "X", "G", "U"})
ALL_OPERATORS = frozenset({"not", "and", "or", "X", "G", "U", "F"})


def is_temporal(phi: Formula) -> bool:
    return phi.kind in TEMPORAL_KINDS


def make(kind: str, coalition: Iterable[int] = (), *children: Formula) -> Formula:
    """Build a node from its kind; used by DAG decoding and enumeration."""
    if kind == "not":
        return Not(*children)
    if kind == "and":
        return And(*children)
    if kind == "or":
        return Or(*children)
    if kind == "implies":
        return Implies(*children)
    if kind == "X":
        return Next(coalition, *children)
    if kind == "G":
        return Globally(coalition, *children)
    if kind == "F":
        return Finally(coalition, *children)
    if kind == "U":
        return Until(coalition, *children)
    raise FormulaError(f"unknown operator {kind!r}")


def rebuild(phi: Formula, children: Sequence[Formula]) -> Formula:
    if phi.arity == 0:
        return phi
    coalition = phi.coalition if is_temporal(phi) else ()
    return make(phi.kind, coalition, *children)


# -- traversal -------------------------------------------------------------

def postorder(phi: Formula) -> list[Formula]:
    """Distinct subformulas, children before parents, first-visit order."""
    seen: set[Formula] = set()
    order: list[Formula] = []
    stack: list[tuple[Formula, bool]] = [(phi, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if node in seen:
            continue
        seen.add(node)
        stack.append((node, True))
        for child in reversed(node.children()):
            if child not in seen:
                stack.append((child, False))
    return order


def subformulas(phi: Formula) -> frozenset[Formula]:
    return frozenset(postorder(phi))


def size(phi: Formula) -> int:
    """Number of distinct subformulas (equal subterms counted once)."""
    return len(postorder(phi))


def core_size(phi: Formula, true_prop: str | None = None) -> int:
    return size(desugar(phi, true_prop))


def propositions(phi: Formula) -> frozenset[str]:
    return frozenset(f.name for f in postorder(phi) if isinstance(f, Prop))


def operators(phi: Formula) -> frozenset[str]:
    return frozenset(f.kind for f in postorder(phi) if f.arity)


def agents(phi: Formula) -> frozenset[int]:
    out: set[int] = set()
    for f in postorder(phi):
        if is_temporal(f):
            out |= f.coalition
    return frozenset(out)


def check_agents(phi: Formula, agent_count: int) -> None:
    for a in sorted(agents(phi)):
        if not 1 <= a <= agent_count:
            raise FormulaError(f"agent {a} out of range [1,{agent_count}]")


def depth(phi: Formula) -> int:
    memo: dict[Formula, int] = {}
    for f in postorder(phi):
        memo[f] = 1 + max((memo[c] for c in f.children()), default=-1)
    return memo[phi]


# -- parser ----------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(->)|([()<>,!&|~])|(\d+)|([A-Za-z_][A-Za-z0-9_]*))")
_QUANT_LETTERS = set("EAXGFU")


@dataclass(frozen=True)
class _Tok:
    kind: str   # 'sym', 'int', 'ident', 'kw', 'end'
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise FormulaError(f"unexpected character {text[pos]!r} at position {pos}")
        start = m.start(m.lastindex)
        if m.group(1):
            toks.append(_Tok("sym", "->", start))
        elif m.group(2):
            sym = m.group(2)
            toks.append(_Tok("sym", "!" if sym == "~" else sym, start))
        elif m.group(3):
            toks.append(_Tok("int", m.group(3), start))
        else:
            word = m.group(4)
            if word in ("true", "false"):
                toks.append(_Tok("kw", word, start))
            elif set(word) <= _QUANT_LETTERS:
                # runs like "AG" or "EX" are sequences of operator letters
                toks.extend(_Tok("kw", ch, start + i) for i, ch in enumerate(word))
            else:
                toks.append(_Tok("ident", word, start))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str, agent_count: int):
        self.text = text
        self.k = agent_count
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def error(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.peek()
        found = tok.text or "end of input"
        raise FormulaError(f"{msg} at position {tok.pos} (found {found!r})")

    def expect(self, text: str) -> _Tok:
        tok = self.peek()
        if tok.kind in ("sym", "kw") and tok.text == text:
            return self.next()
        self.error(f"expected {text!r}")

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok.kind in ("sym", "kw") and tok.text == text

    def parse(self) -> Formula:
        phi = self.impl()
        if self.peek().kind != "end":
            self.error("unexpected token")
        return phi

    def impl(self) -> Formula:
        left = self.disj()
        if self.at("->"):
            self.next()
            return Implies(left, self.impl())
        return left

    def disj(self) -> Formula:
        left = self.conj()
        while self.at("|"):
            self.next()
            left = Or(left, self.conj())
        return left

    def conj(self) -> Formula:
        left = self.unary()
        while self.at("&"):
            self.next()
            left = And(left, self.unary())
        return left

    def unary(self) -> Formula:
        if self.at("!"):
            self.next()
            return Not(self.unary())
        return self.atom()

    def atom(self) -> Formula:
        tok = self.peek()
        if tok.kind == "kw" and tok.text in ("true", "false"):
            self.next()
            return TRUE if tok.text == "true" else FALSE
        if tok.kind == "ident":
            self.next()
            return Prop(tok.text)
        if self.at("("):
            self.next()
            phi = self.impl()
            self.expect(")")
            return phi
        if self.at("<"):
            return self.temporal(self.coalition())
        if tok.kind == "kw" and tok.text in ("E", "A"):
            if self.k != 1:
                self.error("path quantifiers E/A need exactly one agent")
            self.next()
            return self.temporal(frozenset({1}) if tok.text == "E" else frozenset())
        self.error("expected a formula")

    def coalition(self) -> Coalition:
        self.expect("<")
        members: set[int] = set()
        if not self.at(">"):
            while True:
                tok = self.next()
                if tok.kind != "int":
                    self.error("expected an agent index", tok)
                a = int(tok.text)
                if not 1 <= a <= self.k:
                    raise FormulaError(f"agent {a} out of range [1,{self.k}] at position {tok.pos}")
                members.add(a)
                if self.at(","):
                    self.next()
                    continue
                break
        self.expect(">")
        return frozenset(members)

    def temporal(self, coalition: Coalition) -> Formula:
        tok = self.peek()
        if tok.kind == "kw" and tok.text in ("X", "G", "F"):
            self.next()
            return make(tok.text, coalition, self.unary())
        if self.at("("):
            self.next()
            left = self.impl()
            self.expect("U")
            right = self.impl()
            self.expect(")")
            return Until(coalition, left, right)
        self.error("expected X, G, F or an until")


def parse_formula(text: str, agent_count: int = 1) -> Formula:
    """Parse concrete syntax such as ``<2>X p | <1>(p U <1,3>G q)``.

    ``E``/``A`` stand for ``<1>``/``<>`` and are only accepted when
    ``agent_count`` is 1.
    """
    if agent_count < 1:
        raise FormulaError("agent count must be positive")
    return _Parser(text, agent_count).parse()


# -- printer ---------------------------------------------------------------

_PREC = {"implies": 1, "or": 2, "and": 3}


def _coalition_text(coalition: Coalition, ctl: bool) -> str:
    if ctl:
        if not coalition:
            return "A"
        if coalition == frozenset({1}):
            return "E"
    return "<" + ",".join(map(str, sorted(coalition))) + ">"


def render_formula(phi: Formula, ctl: bool = False) -> str:
    """Canonical text; with ``ctl=True`` one-agent coalitions print as E/A."""
    memo: dict[tuple[Formula, int], str] = {}

    def go(f: Formula, prec: int) -> str:
        key = (f, prec)
        if key in memo:
            return memo[key]
        kind = f.kind
        if kind == "prop":
            out = f.name
        elif kind == "const":
            out = "true" if f.value else "false"
        elif kind == "not":
            out = "!" + go(f.arg, 4)
        elif kind in _PREC:
            p = _PREC[kind]
            sym = {"implies": "->", "or": "|", "and": "&"}[kind]
            if kind == "implies":
                out = f"{go(f.left, p + 1)} {sym} {go(f.right, p)}"
            else:
                out = f"{go(f.left, p)} {sym} {go(f.right, p + 1)}"
            if p < prec:
                out = f"({out})"
        elif kind == "U":
            q = _coalition_text(f.coalition, ctl)
            out = f"{q}({go(f.left, 0)} U {go(f.right, 0)})"
        else:
            q = _coalition_text(f.coalition, ctl)
            body = go(f.arg, 4)
            sep = "" if body.startswith("(") else " "
            out = f"{q}{kind}{sep}{body}"
        memo[key] = out
        return out

    return go(phi, 0)


# -- rewriting -------------------------------------------------------------

def desugar(phi: Formula, true_prop: str | None = None, keep: Iterable[str] = ()) -> Formula:
    """Rewrite into the core operators {not, and, X, G, U}.

    ``keep`` may list extended operators ("or", "F") that stay native.  When
    ``true_prop`` is given, the constant true becomes ``!(p & !p)`` over that
    proposition (or ``p | !p`` if "or" is kept); otherwise constants stay.
    """
    keep = frozenset(keep)
    bad = keep - {"or", "F"}
    if bad:
        raise FormulaError(f"cannot keep operators {sorted(bad)}")

    if true_prop is None:
        top = TRUE
    else:
        p = Prop(true_prop)
        top = Or(p, Not(p)) if "or" in keep else Not(And(p, Not(p)))

    memo: dict[Formula, Formula] = {}
    for f in postorder(phi):
        ch = [memo[c] for c in f.children()]
        kind = f.kind
        if kind == "const":
            out = top if f.value else Not(top)
            if true_prop is None:
                out = f
        elif kind == "or" and "or" not in keep:
            out = Not(And(Not(ch[0]), Not(ch[1])))
        elif kind == "implies":
            out = Not(And(ch[0], Not(ch[1])))
        elif kind == "F" and "F" not in keep:
            out = Until(f.coalition, top, ch[0])
        else:
            out = rebuild(f, ch)
        memo[f] = out
    return memo[phi]


def expand_until_to_x(coalition: Iterable[int], phi1: Formula, phi2: Formula, k: int) -> Formula:
    """``phi2 | (phi1 & <A>X ...)`` unrolled k times; equals the until on <= k states."""
    if k < 0:
        raise FormulaError("k must be nonnegative")
    coalition = frozenset(coalition)
    out = phi2
    for _ in range(k):
        out = Or(out, And(phi1, Next(coalition, out)))
    return out


def expand_globally_to_x(coalition: Iterable[int], phi: Formula, k: int) -> Formula:
    """``phi & <A>X ...`` unrolled k times; equals the globally on <= k states."""
    if k < 0:
        raise FormulaError("k must be nonnegative")
    coalition = frozenset(coalition)
    out = phi
    for _ in range(k):
        out = And(out, Next(coalition, out))
    return out


def substitute(phi: Formula, mapping: dict[Formula, Formula]) -> Formula:
    memo: dict[Formula, Formula] = {}
    for f in postorder(phi):
        if f in mapping:
            memo[f] = mapping[f]
        else:
            memo[f] = rebuild(f, [memo[c] for c in f.children()])
    return memo[phi]


# -- syntax DAGs -----------------------------------------------------------

_KIND_ORDER = {"prop": 0, "not": 1, "and": 2, "or": 3, "X": 4, "G": 5, "U": 6, "F": 7}


@dataclass(frozen=True)
class DagNode:
    kind: str                      # "prop" or an operator name
    name: str | None = None        # proposition name
    coalition: Coalition = frozenset()
    left: int | None = None
    right: int | None = None

    def sort_key(self) -> tuple:
        return (_KIND_ORDER[self.kind], self.name or "", tuple(sorted(self.coalition)),
                self.left or 0, self.right or 0)


@dataclass(frozen=True)
class SyntaxDag:
    """Nodes are numbered 1..n, children have smaller ids, the root is n."""

    nodes: tuple[DagNode, ...]

    @property
    def n(self) -> int:
        return len(self.nodes)

    def node(self, i: int) -> DagNode:
        return self.nodes[i - 1]

    def validate(self) -> list[str]:
        problems = []
        if not self.nodes:
            return ["empty DAG"]
        if self.nodes[0].kind != "prop":
            problems.append("node 1 is not a proposition")
        for i, nd in enumerate(self.nodes, start=1):
            want = 0 if nd.kind == "prop" else (2 if nd.kind in ("and", "or", "U") else 1)
            kids = [c for c in (nd.left, nd.right) if c is not None]
            if len(kids) != want:
                problems.append(f"node {i} ({nd.kind}) has {len(kids)} children, expected {want}")
            for c in kids:
                if not 1 <= c < i:
                    problems.append(f"node {i} has child {c} not in [1,{i - 1}]")
        return problems


def to_syntax_dag(phi: Formula, operator_set: Iterable[str] = CORE_OPERATORS) -> SyntaxDag:
    ops = frozenset(operator_set)
    order = postorder(phi)
    for f in order:
        if f.kind == "const":
            raise FormulaError("constants cannot be DAG labels; desugar with a designated proposition first")
        if f.arity and f.kind not in ops:
            raise FormulaError(f"operator {f.kind!r} outside the configured set {sorted(ops)}")

    parents: dict[Formula, list[Formula]] = {f: [] for f in order}
    pending: dict[Formula, int] = {}
    for f in order:
        kids = set(f.children())
        pending[f] = len(kids)
        for c in kids:
            parents[c].append(f)

    ids: dict[Formula, int] = {}
    nodes: list[DagNode] = []

    def label(f: Formula) -> DagNode:
        kids = [ids[c] for c in f.children()]
        return DagNode(
            kind=f.kind,
            name=f.name if isinstance(f, Prop) else None,
            coalition=f.coalition if is_temporal(f) else frozenset(),
            left=kids[0] if kids else None,
            right=kids[1] if len(kids) > 1 else None,
        )

    ready = [f for f in order if pending[f] == 0]
    while ready:
        # pick the smallest ready node by (label, children ids)
        best = min(ready, key=lambda f: label(f).sort_key())
        ready.remove(best)
        nodes.append(label(best))
        ids[best] = len(nodes)
        for par in parents[best]:
            pending[par] -= 1
            if pending[par] == 0:
                ready.append(par)
    return SyntaxDag(tuple(nodes))


def from_syntax_dag(dag: SyntaxDag, root: int | None = None) -> Formula:
    problems = dag.validate()
    if problems:
        raise FormulaError("; ".join(problems))
    built: dict[int, Formula] = {}
    for i, nd in enumerate(dag.nodes, start=1):
        if nd.kind == "prop":
            built[i] = Prop(nd.name)
        else:
            kids = [built[c] for c in (nd.left, nd.right) if c is not None]
            built[i] = make(nd.kind, nd.coalition, *kids)
    return built[root or dag.n]


def dag_size(phi: Formula, operator_set: Iterable[str] = ALL_OPERATORS) -> int:
    return to_syntax_dag(phi, operator_set).n


def iter_nodes(phi: Formula) -> Iterator[Formula]:
    yield from postorder(phi)
