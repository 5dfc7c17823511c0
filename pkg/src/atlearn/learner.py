"""Search for a minimal consistent formula, and an enumeration oracle."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterable

from .encoding import EncodingConfig, build
from .formulas import (
    CORE_OPERATORS, And, Finally, Formula, Globally, Next, Not, Or, Prop, Until, size,
)
from .modelcheck import check_consistency, globally_mask, until_mask
from .separability import (
    DEFAULT_FRAGMENT_LIMIT, coalitions, decide_fragment, decide_full_atl, global_structure,
    is_full_fragment,
)
from .solvers import SolverError, SolverSettings
from .structures import Sample


class LearnerError(RuntimeError):
    pass


class EnumerationBudgetError(LearnerError):
    pass


@dataclass(frozen=True)
class LearnConfig:
    encoding: EncodingConfig = field(default_factory=EncodingConfig)
    solver: SolverSettings = field(default_factory=SolverSettings)
    max_n: int | None = None            # largest n to try
    time_budget_s: float | None = None  # wall clock for the whole run
    precheck: bool = True
    fragment_limit: int = DEFAULT_FRAGMENT_LIMIT


@dataclass
class StepReport:
    n: int
    status: str
    encode_s: float
    cnf_s: float
    solve_s: float
    num_vars: int
    num_clauses: int

    def as_dict(self) -> dict:
        return {
            "n": self.n, "status": self.status, "encode_s": round(self.encode_s, 6),
            "cnf_s": round(self.cnf_s, 6), "solve_s": round(self.solve_s, 6),
            "num_vars": self.num_vars, "num_clauses": self.num_clauses,
        }


@dataclass
class LearnResult:
    outcome: str                        # "formula", "not_separable" or "budget_exhausted"
    formula: Formula | None = None
    size: int | None = None
    steps: list[StepReport] = field(default_factory=list)
    precheck: str | None = None         # which decider ran, if any
    message: str = ""
    total_s: float = 0.0

    @property
    def solver_calls(self) -> int:
        return len(self.steps)

    @property
    def max_n_tried(self) -> int:
        return max((s.n for s in self.steps), default=0)

    @property
    def encode_s(self) -> float:
        return sum(s.encode_s + s.cnf_s for s in self.steps)

    @property
    def solve_s(self) -> float:
        return sum(s.solve_s for s in self.steps)


def learn_minimal(sample: Sample, config: LearnConfig | None = None) -> LearnResult:
    """Try n = 1, 2, ... until the encoding is satisfiable, then verify."""
    config = config or LearnConfig()
    start = time.perf_counter()
    result = LearnResult("budget_exhausted")

    def finish(res: LearnResult) -> LearnResult:
        res.total_s = time.perf_counter() - start
        return res

    if not sample.propositions:
        result.outcome = "not_separable"
        result.message = "no propositions: no formula can be built"
        return finish(result)

    ops = config.encoding.operators
    union, _ = global_structure(sample)
    num_states = union.num_states
    if config.precheck:
        if is_full_fragment(ops):
            result.precheck = "full"
            separable = decide_full_atl(sample)
        elif num_states <= config.fragment_limit and not config.encoding.existential_only:
            result.precheck = "fragment"
            separable = decide_fragment(sample, ops, config.fragment_limit).separable
        else:
            separable = True
        if not separable:
            result.outcome = "not_separable"
            result.message = f"{result.precheck} decider found no separating formula"
            return finish(result)

    # a separable sample has a witness of size at most 2^|Q|
    cap = 2 ** num_states if num_states < 62 else None
    limit = config.max_n
    if cap is not None:
        limit = cap if limit is None else min(limit, cap)

    n = 0
    while True:
        n += 1
        if limit is not None and n > limit:
            result.message = f"no formula with at most {limit} nodes"
            return finish(result)
        settings = config.solver
        if config.time_budget_s is not None:
            left = config.time_budget_s - (time.perf_counter() - start)
            if left <= 0:
                result.message = f"time budget spent before n={n}"
                return finish(result)
            per_n = left if settings.timeout_s is None else min(settings.timeout_s, left)
            settings = SolverSettings(settings.backend, settings.name, settings.command,
                                      settings.output, per_n)
        ctx = build(sample, n, config.encoding)
        try:
            res = ctx.solve(settings)
        except SolverError as exc:
            raise LearnerError(f"solver failed at n={n}: {exc}") from exc
        result.steps.append(StepReport(
            n, res.status, ctx.stats.encode_s, ctx.stats.cnf_s, res.seconds,
            ctx.stats.num_vars, ctx.stats.num_clauses,
        ))
        if res.status == "timeout":
            result.message = f"solver timed out at n={n}"
            return finish(result)
        if res.status == "unsat":
            continue
        phi = ctx.extract_formula(res.model)
        verdict = check_consistency(sample, phi)
        if not verdict:
            raise LearnerError(
                f"extracted formula {phi} is violated by {verdict.polarity} structure {verdict.violated_by!r} at n={n}"
            )
        if size(phi) != n:
            raise LearnerError(f"extracted formula {phi} has size {size(phi)}, expected {n}")
        result.outcome = "formula"
        result.formula = phi
        result.size = n
        return finish(result)


# -- enumeration oracle ----------------------------------------------------

_UNARY = ("not", "X", "G", "F")
_BINARY = ("and", "or", "U")


def brute_force_learn(sample: Sample, operators: Iterable[str] = CORE_OPERATORS, max_size: int = 6,
                      budget: int = 3_000_000, coalition_set: Iterable[Iterable[int]] | None = None,
                      allow_large: bool = False, prune: bool = True) -> Formula | None:
    """Smallest consistent formula by exhaustive enumeration, or None.

    Formulas are enumerated by their number of distinct subformulas.  Only one
    argument order is kept for the commutative operators, which never changes
    the smallest size reached.  A candidate whose mask on the sample equals
    that of one of its own subformulas is not built upon: putting the
    subformula in its place keeps every mask and drops at least one
    subformula, so no smallest consistent formula contains such a candidate
    (``prune=False`` turns this off).
    ``budget`` bounds the number of candidates examined.
    """
    if max_size > 6 and not allow_large:
        raise EnumerationBudgetError("max_size above 6 needs allow_large=True")
    ops = frozenset(operators)
    cgs, _ = global_structure(sample)
    full = cgs.full_mask
    coals = ([frozenset(c) for c in coalition_set] if coalition_set is not None
             else coalitions(cgs.num_agents))

    offsets, off = [], 0
    for c in sample.structures:
        offsets.append(off)
        off += c.num_states
    inits = [sum(1 << (q + offsets[i]) for q in c.initial) for i, c in enumerate(sample.structures)]
    pos_inits = inits[:len(sample.positive)]
    neg_inits = inits[len(sample.positive):]

    def consistent(mask: int) -> bool:
        return all(m & ~mask == 0 for m in pos_inits) and all(m & ~mask for m in neg_inits)

    # Candidates are kept as (mask, closure, index) with the closure a set of
    # candidate indices.  Formulas are only built for the answer, and the last
    # level is never stored since nothing is built on top of it.
    nodes: list[tuple] = []
    masks: list[int] = []
    count = 0
    by_size: list[list[tuple]] = [[]]
    memo: dict[tuple, int] = {}

    def cached(key, fn):
        m = memo.get(key)
        if m is None:
            m = memo[key] = fn()
        return m

    def admit(level: list | None, node: tuple, mask: int, closure: frozenset) -> bool:
        nonlocal count
        count += 1
        if count > budget:
            raise EnumerationBudgetError(f"more than {budget} candidates")
        if level is None or (prune and any(masks[j] == mask for j in closure)):
            # a pruned candidate is never consistent: its subformula would
            # have been returned already
            if consistent(mask):
                nodes.append(node)
                masks.append(mask)
                return True
            return False
        idx = len(nodes)
        nodes.append(node)
        masks.append(mask)
        level.append((mask, closure | {idx}, idx))
        return consistent(mask)

    def build(idx: int) -> Formula:
        op, A, kids = nodes[idx]
        args = [build(k) for k in kids]
        if op == "prop":
            return Prop(A)
        if op == "not":
            return Not(args[0])
        if op == "and":
            return And(*args)
        if op == "or":
            return Or(*args)
        return {"X": Next, "G": Globally, "F": Finally, "U": Until}[op](A, *args)

    level1: list[tuple] = []
    for p in sorted(sample.propositions):
        if admit(level1, ("prop", p, ()), cgs.label_mask(p), frozenset()):
            return build(len(nodes) - 1)
    by_size.append(level1)
    item_of = {item[2]: item for item in level1}

    unary = [op for op in _UNARY if op in ops]
    binary = [op for op in _BINARY if op in ops]
    for s in range(2, max_size + 1):
        level: list[tuple] = []
        store = level if s < max_size else None
        for mask, cl, i in by_size[s - 1]:
            for op in unary:
                if op == "not":
                    if admit(store, ("not", None, (i,)), full & ~mask, cl):
                        return build(len(nodes) - 1)
                    continue
                for A in coals:
                    if op == "X":
                        m = cached(("X", A, mask), lambda: cgs.pre_mask(A, mask))
                    elif op == "G":
                        m = cached(("G", A, mask), lambda: globally_mask(cgs, A, mask))
                    else:
                        m = cached(("U", A, full, mask), lambda: until_mask(cgs, A, full, mask))
                    if admit(store, (op, A, (i,)), m, cl):
                        return build(len(nodes) - 1)
        if binary:
            # a is the child with the larger closure; b adds t new subformulas
            for sa in range(1, s):
                t = s - 1 - sa
                wide = [item for sb in range(t, sa + 1) for item in by_size[sb]] if t else None
                for ma, ca, ia in by_size[sa]:
                    if t == 0:
                        pool = [item_of[j] for j in sorted(ca)]
                    else:
                        pool = wide
                    for mb, cb, ib in pool:
                        cl = ca | cb
                        if t:
                            if len(cl) != s - 1:
                                continue
                            if len(cb) == sa and ib < ia:
                                continue  # equal closures: produced from the other side
                        for op in binary:
                            if op == "and":
                                cands = ((("and", None, (ia, ib)), ma & mb),)
                            elif op == "or":
                                cands = ((("or", None, (ia, ib)), ma | mb),)
                            else:
                                cands = []
                                for A in coals:
                                    cands.append((("U", A, (ia, ib)),
                                                  cached(("U", A, ma, mb), lambda: until_mask(cgs, A, ma, mb))))
                                    if ia != ib:
                                        cands.append((("U", A, (ib, ia)),
                                                      cached(("U", A, mb, ma), lambda: until_mask(cgs, A, mb, ma))))
                            for node, m in cands:
                                if admit(store, node, m, cl):
                                    return build(len(nodes) - 1)
        for item in level:
            item_of[item[2]] = item
        by_size.append(level)
    return None
