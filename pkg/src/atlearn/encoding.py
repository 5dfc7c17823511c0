"""Propositional encoding of "some formula of size at most n is consistent".

The encoding has three parts: structural constraints that make the x/A/l/r
variables describe a syntax DAG with nodes 1..n (root n), semantic
constraints that make the y variables of every structure equal the SAT sets
of the DAG's nodes, and consistency constraints on the root at the initial
states.  U, G and F nodes unroll the fixed-point iteration with step
variables, one step per state of the structure.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Iterable

from pysat.formula import IDPool

from .formulas import (
    ALL_OPERATORS, CORE_OPERATORS, DagNode, Formula, SyntaxDag, from_syntax_dag,
    to_syntax_dag,
)
from .propositional import Clausifier, TermFactory
from .solvers import SolveResult, SolverSettings, solve
from .structures import CGS, Sample


class EncodingError(ValueError):
    pass


_OP_ORDER = ["not", "and", "or", "X", "G", "U", "F"]
_TEMPORAL = ("X", "G", "U", "F")
PRE_VARIANTS = ("general", "turn_based", "ctl")


@dataclass(frozen=True)
class EncodingConfig:
    """How formulas are searched.

    ``mode`` is "atl" (coalition variables per node) or "ctl" (one-agent
    structures, temporal labels carry an E or A quantifier).  ``pre`` picks
    the encoding of Pre: "general", "turn_based" or "ctl" (the only choice in
    CTL mode and the default there).
    """

    mode: str = "atl"
    operators: frozenset[str] = CORE_OPERATORS
    pre: str | None = None
    pin_coalitions: bool = False
    existential_only: bool = False

    def __post_init__(self):
        object.__setattr__(self, "operators", frozenset(self.operators))
        if self.mode not in ("atl", "ctl"):
            raise EncodingError(f"unknown mode {self.mode!r}")
        bad = self.operators - ALL_OPERATORS
        if bad:
            raise EncodingError(f"unknown operators {sorted(bad)}")
        pre = self.pre or ("ctl" if self.mode == "ctl" else "general")
        if pre not in PRE_VARIANTS:
            raise EncodingError(f"unknown Pre variant {pre!r}")
        if (self.mode == "ctl") != (pre == "ctl"):
            raise EncodingError("the ctl Pre variant goes with ctl mode and only with it")
        object.__setattr__(self, "pre", pre)

    @property
    def quantifiers(self) -> tuple[str, ...]:
        return ("E",) if self.existential_only else ("E", "A")


def labels_for(props: Iterable[str], config: EncodingConfig) -> list[tuple[str, str]]:
    """Λ: propositions first, then operators in a fixed order."""
    out = [("prop", p) for p in sorted(props)]
    for op in _OP_ORDER:
        if op not in config.operators:
            continue
        if config.mode == "ctl" and op in _TEMPORAL:
            out.extend(("op", q + op) for q in config.quantifiers)
        else:
            out.append(("op", op))
    return out


def _label_text(label: tuple[str, str]) -> str:
    return f"{label[0]}:{label[1]}"


@dataclass
class EncodingStats:
    n: int
    num_vars: int = 0
    num_clauses: int = 0
    var_counts: dict[str, int] = field(default_factory=dict)
    encode_s: float = 0.0
    cnf_s: float = 0.0

    def as_dict(self) -> dict:
        return {
            "n": self.n, "num_vars": self.num_vars, "num_clauses": self.num_clauses,
            "var_counts": dict(self.var_counts),
            "encode_s": round(self.encode_s, 6), "cnf_s": round(self.cnf_s, 6),
        }


class Encoding:
    """Variables, constraint terms and clauses of the encoding for one n."""

    def __init__(self, sample: Sample, n: int, config: EncodingConfig | None = None):
        if n < 1:
            raise EncodingError("n must be at least 1")
        config = config or EncodingConfig()
        if config.mode == "ctl" and sample.num_agents != 1:
            raise EncodingError("ctl mode needs one-agent structures")
        if config.pre == "turn_based":
            for cgs in sample.structures:
                if not cgs.is_turn_based:
                    raise EncodingError(f"structure {cgs.name!r} is not turn-based")
        if not sample.propositions:
            raise EncodingError("the sample has no propositions to label node 1 with")
        self.sample = sample
        self.n = n
        self.config = config
        self.labels = labels_for(sample.propositions, config)
        self.pool = IDPool()
        self.f = TermFactory()
        self.terms: list[tuple[str, int]] = []
        self._allocate()

    # -- variables ---------------------------------------------------------

    def _allocate(self) -> None:
        n, pool = self.n, self.pool
        counts = {k: 0 for k in ("x", "A", "l", "r", "y", "ys")}
        for i in range(1, n + 1):
            for lab in self.labels:
                pool.id(("x", i, lab))
                counts["x"] += 1
        if self.config.mode == "atl":
            for i in range(1, n + 1):
                for a in range(1, self.sample.num_agents + 1):
                    pool.id(("A", i, a))
                    counts["A"] += 1
        for kind in ("l", "r"):
            for i in range(2, n + 1):
                for j in range(1, i):
                    pool.id((kind, i, j))
                    counts[kind] += 1
        for c, cgs in enumerate(self.sample.structures):
            for i in range(1, n + 1):
                for q in cgs.states:
                    pool.id(("y", c, i, q))
                    counts["y"] += 1
        for c, cgs in enumerate(self.sample.structures):
            for i in range(1, n + 1):
                for q in cgs.states:
                    for k in range(cgs.num_states + 1):
                        pool.id(("ys", c, i, q, k))
                        counts["ys"] += 1
        self.var_counts = counts
        self.num_named = pool.top

    def var(self, *name) -> int:
        key = tuple(name)
        if key not in self.pool.obj2id:
            raise EncodingError(f"no variable {key}")
        return self.pool.obj2id[key]

    def t(self, *name) -> int:
        return self.f.lit(self.var(*name))

    def x(self, i, label):
        return self.t("x", i, label)

    def y(self, c, i, q):
        return self.t("y", c, i, q)

    def ys(self, c, i, q, k):
        return self.t("ys", c, i, q, k)

    def coalition_term(self, i, a):
        return self.t("A", i, a)

    def name_of(self, v: int) -> tuple:
        return self.pool.obj(v)

    def var_names(self) -> dict[str, int]:
        out = {}
        for v in range(1, self.pool.top + 1):
            name = self.pool.obj(v)
            parts = [_label_text(p) if isinstance(p, tuple) else str(p) for p in name[1:]]
            out[f"{name[0]}[{','.join(parts)}]"] = v
        return out

    # -- structural constraints -------------------------------------------

    def encode_structure(self) -> list[int]:
        f, n = self.f, self.n
        out = []
        for i in range(1, n + 1):
            xs = [self.x(i, lab) for lab in self.labels]
            out.append(f.disj(xs))
            for a in range(len(xs)):
                for b in range(a + 1, len(xs)):
                    out.append(f.OR(f.NOT(xs[a]), f.NOT(xs[b])))
        for kind in ("l", "r"):
            for i in range(2, n + 1):
                cs = [self.t(kind, i, j) for j in range(1, i)]
                out.append(f.disj(cs))
                for a in range(len(cs)):
                    for b in range(a + 1, len(cs)):
                        out.append(f.OR(f.NOT(cs[a]), f.NOT(cs[b])))
        out.append(f.disj(self.x(1, lab) for lab in self.labels if lab[0] == "prop"))
        if self.config.pin_coalitions and self.config.mode == "atl":
            for i in range(1, n + 1):
                for lab in self.labels:
                    if lab[0] == "op" and lab[1] in _TEMPORAL:
                        continue
                    for a in range(1, self.sample.num_agents + 1):
                        out.append(f.IMPLIES(self.x(i, lab), f.NOT(self.coalition_term(i, a))))
        return out

    # -- Pre -----------------------------------------------------------------

    def encode_pre(self, cgs: CGS, q: int, i: int, pred: Callable[[int], int], quantifier: str | None = None) -> int:
        """Term true iff the coalition of node i can force ``pred`` in one step from q."""
        f = self.f
        variant = self.config.pre
        if variant == "ctl":
            succ = sorted(cgs.successors_all(q))
            if quantifier == "E":
                return f.disj(pred(s) for s in succ)
            if quantifier == "A":
                return f.conj(pred(s) for s in succ)
            raise EncodingError("ctl Pre needs an E or A quantifier")
        if quantifier is not None:
            raise EncodingError("quantified labels only exist in ctl mode")
        moves = cgs.moves(q)
        if variant == "turn_based":
            owner = cgs.owner(q)
            if owner is None:
                raise EncodingError(f"state {cgs.state_names[q]} of {cgs.name!r} has no unique owner")
            a = self.coalition_term(i, owner)
            some = f.disj(pred(d) for _, d in moves)
            every = f.conj(pred(d) for _, d in moves)
            return f.OR(f.AND(a, some), f.AND(f.NOT(a), every))
        k = cgs.num_agents
        coal = [self.coalition_term(i, a) for a in range(1, k + 1)]
        options = []
        for alpha, _ in moves:
            forced = []
            for beta, dest in moves:
                differ = [coal[a] for a in range(k) if alpha[a] != beta[a]]
                forced.append(f.disj(differ + [pred(dest)]))
            options.append(f.conj(forced))
        return f.disj(options)

    # -- semantic constraints ---------------------------------------------

    def _quantified(self, name: str) -> tuple[str, str | None]:
        if self.config.mode == "ctl" and name[:1] in ("E", "A") and name[1:] in _TEMPORAL:
            return name[1:], name[0]
        return name, None

    def encode_semantics(self, c: int) -> list[int]:
        """Semantic constraints for structure number ``c`` of the sample."""
        f = self.f
        cgs = self.sample.structures[c]
        Q = list(cgs.states)
        out = []
        for i in range(1, self.n + 1):
            y = lambda q, i=i: self.y(c, i, q)
            for lab in self.labels:
                xi = self.x(i, lab)
                nx = f.NOT(xi)
                if lab[0] == "prop":
                    for q in Q:
                        yq = y(q)
                        out.append(f.OR(nx, yq if cgs.holds_prop(q, lab[1]) else f.NOT(yq)))
                    continue
                op, quant = self._quantified(lab[1])
                if i == 1:
                    continue  # node 1 is a proposition
                children = range(1, i)
                if op == "not":
                    for j in children:
                        g = f.OR(nx, f.NOT(self.t("l", i, j)))
                        for q in Q:
                            out.append(f.OR(g, f.IFF(y(q), f.NOT(self.y(c, j, q)))))
                elif op in ("and", "or"):
                    for j in children:
                        for j2 in children:
                            g = f.OR(nx, f.NOT(self.t("l", i, j)), f.NOT(self.t("r", i, j2)))
                            for q in Q:
                                a, b = self.y(c, j, q), self.y(c, j2, q)
                                rhs = f.AND(a, b) if op == "and" else f.OR(a, b)
                                out.append(f.OR(g, f.IFF(y(q), rhs)))
                elif op == "X":
                    for j in children:
                        g = f.OR(nx, f.NOT(self.t("l", i, j)))
                        pj = lambda s, j=j: self.y(c, j, s)
                        for q in Q:
                            out.append(f.OR(g, f.IFF(y(q), self.encode_pre(cgs, q, i, pj, quant))))
                else:
                    out.extend(self._encode_fixpoint(c, cgs, i, op, quant, xi))
        return out

    def _encode_fixpoint(self, c, cgs, i, op, quant, xi) -> list[int]:
        f = self.f
        nx = f.NOT(xi)
        Q = list(cgs.states)
        K = cgs.num_states
        out = []
        # step 0 copies the right child for U and the only child for G/F
        for j in range(1, i):
            sel = self.t("r" if op == "U" else "l", i, j)
            g = f.OR(nx, f.NOT(sel))
            for q in Q:
                out.append(f.OR(g, f.IFF(self.ys(c, i, q, 0), self.y(c, j, q))))
        for k in range(K):
            prev = lambda s, k=k: self.ys(c, i, s, k)
            for q in Q:
                pre = self.encode_pre(cgs, q, i, prev, quant)
                cur, nxt = prev(q), self.ys(c, i, q, k + 1)
                if op == "G":
                    out.append(f.OR(nx, f.IFF(nxt, f.AND(cur, pre))))
                elif op == "F":
                    out.append(f.OR(nx, f.IFF(nxt, f.OR(cur, pre))))
                else:
                    for j in range(1, i):
                        g = f.OR(nx, f.NOT(self.t("l", i, j)))
                        step = f.OR(cur, f.AND(self.y(c, j, q), pre))
                        out.append(f.OR(g, f.IFF(nxt, step)))
        for q in Q:
            out.append(f.OR(nx, f.IFF(self.y(c, i, q), self.ys(c, i, q, K))))
        return out

    # -- consistency ---------------------------------------------------------

    def encode_consistency(self) -> list[int]:
        f, n = self.f, self.n
        out = []
        for c, (cgs, positive) in enumerate(self.sample.labelled()):
            init = sorted(cgs.initial)
            if positive:
                out.append(f.conj(self.y(c, n, s) for s in init))
            else:
                out.append(f.disj(f.NOT(self.y(c, n, s)) for s in init))
        return out

    # -- assembly ----------------------------------------------------------

    def build_terms(self, consistency: bool = True) -> None:
        self.terms = [("str", t) for t in self.encode_structure()]
        for c in range(len(self.sample.structures)):
            self.terms.extend(("sem", t) for t in self.encode_semantics(c))
        if consistency:
            self.terms.extend(("con", t) for t in self.encode_consistency())

    def to_cnf(self) -> list[list[int]]:
        cl = Clausifier(self.f, self.pool)
        for _, t in self.terms:
            cl.assert_term(t)
        self.num_aux = cl.num_aux
        return cl.clauses

    # -- decoding ----------------------------------------------------------

    def extract_formula(self, model: Iterable[int]) -> Formula:
        return from_syntax_dag(self.extract_dag(model))

    def extract_dag(self, model: Iterable[int]) -> SyntaxDag:
        true = set(v for v in model if v > 0)
        nodes = []
        for i in range(1, self.n + 1):
            chosen = [lab for lab in self.labels if self.var("x", i, lab) in true]
            if len(chosen) != 1:
                raise EncodingError(f"node {i} carries {len(chosen)} labels")
            kind, name = chosen[0]
            if kind == "prop":
                nodes.append(DagNode("prop", name=name))
                continue
            op, quant = self._quantified(name)
            if quant is not None:
                coalition = frozenset({1}) if quant == "E" else frozenset()
            elif op in _TEMPORAL:
                coalition = frozenset(
                    a for a in range(1, self.sample.num_agents + 1) if self.var("A", i, a) in true
                )
            else:
                coalition = frozenset()
            lefts = [j for j in range(1, i) if self.var("l", i, j) in true]
            rights = [j for j in range(1, i) if self.var("r", i, j) in true]
            if len(lefts) != 1 or len(rights) != 1:
                raise EncodingError(f"node {i} has {len(lefts)} left and {len(rights)} right children")
            binary = op in ("and", "or", "U")
            nodes.append(DagNode(op, coalition=coalition, left=lefts[0], right=rights[0] if binary else None))
        return SyntaxDag(tuple(nodes))

    def formula_assignment(self, phi: Formula) -> dict[int, bool]:
        """Values of x/A/l/r that describe ``phi`` as nodes 1..n (padded below)."""
        cfg = self.config
        dag = to_syntax_dag(phi, cfg.operators)
        m = dag.n
        if m > self.n:
            raise EncodingError(f"formula has {m} nodes, more than n={self.n}")
        off = self.n - m
        props = [lab for lab in self.labels if lab[0] == "prop"]
        pad = ("prop", dag.node(1).name)
        if pad not in props:
            raise EncodingError(f"proposition {pad[1]!r} not in the sample")
        value: dict[int, bool] = {}
        for i in range(1, self.n + 1):
            if i <= off:
                label, coalition, left, right = pad, frozenset(), 1, 1
            else:
                nd = dag.node(i - off)
                coalition = nd.coalition
                if nd.kind == "prop":
                    label = ("prop", nd.name)
                    if label not in props:
                        raise EncodingError(f"proposition {nd.name!r} not in the sample")
                elif cfg.mode == "ctl" and nd.kind in _TEMPORAL:
                    if coalition == frozenset({1}):
                        label = ("op", "E" + nd.kind)
                    elif not coalition and "A" in cfg.quantifiers:
                        label = ("op", "A" + nd.kind)
                    else:
                        raise EncodingError(f"coalition {sorted(coalition)} has no ctl label")
                    coalition = frozenset()
                else:
                    label = ("op", nd.kind)
                left = nd.left + off if nd.left else 1
                right = nd.right + off if nd.right else 1
            for lab in self.labels:
                value[self.var("x", i, lab)] = lab == label
            if cfg.mode == "atl":
                for a in range(1, self.sample.num_agents + 1):
                    value[self.var("A", i, a)] = a in coalition
            if i >= 2:
                for j in range(1, i):
                    value[self.var("l", i, j)] = j == left
                    value[self.var("r", i, j)] = j == right
        return value


@dataclass
class EncodingContext:
    encoding: Encoding
    clauses: list[list[int]]
    stats: EncodingStats

    @property
    def nvars(self) -> int:
        return self.encoding.pool.top

    def solve(self, settings: SolverSettings | None = None, assumptions=()) -> SolveResult:
        return solve(self.nvars, self.clauses, settings, assumptions)

    def extract_formula(self, model) -> Formula:
        return self.encoding.extract_formula(model)


def build(sample: Sample, n: int, config: EncodingConfig | None = None, consistency: bool = True) -> EncodingContext:
    """Encode "a formula with at most n nodes is consistent with the sample"."""
    start = time.perf_counter()
    enc = Encoding(sample, n, config)
    enc.build_terms(consistency)
    mid = time.perf_counter()
    clauses = enc.to_cnf()
    end = time.perf_counter()
    stats = EncodingStats(
        n=n, num_vars=enc.pool.top, num_clauses=len(clauses),
        var_counts=dict(enc.var_counts, aux=enc.num_aux),
        encode_s=mid - start, cnf_s=end - mid,
    )
    return EncodingContext(enc, clauses, stats)
