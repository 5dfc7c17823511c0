"""Deciding whether any formula separates a sample.

All structures of a sample are glued into one global state space.  For full
ATL, separability reduces to the least relation of pairs told apart by a
next-only formula (computed from label differences upwards).  For operator
fragments the family of definable state sets is saturated explicitly, which
is exponential in the number of states but yields a witness formula.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable

from .formulas import (
    ALL_OPERATORS, And, Finally, Formula, Globally, Next, Not, Or, Prop, Until, size,
)
from .modelcheck import globally_mask, until_mask
from .structures import CGS, Sample, disjoint_union


class SeparabilityError(ValueError):
    pass


DEFAULT_FRAGMENT_LIMIT = 14
FULL_FRAGMENT = frozenset({"not", "and", "X", "G", "U"})


def is_full_fragment(operators: Iterable[str]) -> bool:
    """Negation, a Boolean connective and X suffice to separate every separable sample."""
    ops = frozenset(operators)
    return "not" in ops and "X" in ops and bool(ops & {"and", "or"})


def global_structure(sample: Sample) -> tuple[CGS, list[int]]:
    """Disjoint union of all sample structures (positives first)."""
    union, offsets = disjoint_union(sample.structures)
    return union.with_propositions(sample.propositions), offsets


def coalitions(num_agents: int, within: Iterable[int] | None = None) -> list[frozenset[int]]:
    """All subsets in lexicographic order of their sorted member tuples."""
    pool = sorted(within) if within is not None else list(range(1, num_agents + 1))
    subsets = [c for r in range(len(pool) + 1) for c in itertools.combinations(pool, r)]
    return [frozenset(c) for c in sorted(subsets)]


def rel_agents(cgs: CGS, q: int, q2: int) -> frozenset[int]:
    """Agents with a real choice at q or q2: d(q,a)·d(q2,a) >= 2."""
    for s in (q, q2):
        if not 0 <= s < cgs.num_states:
            raise SeparabilityError(f"unknown state {s!r}")
    return frozenset(a for a in cgs.agents if cgs.d(q, a) * cgs.d(q2, a) >= 2)


class _Rows:
    """A symmetric pair relation stored as one bitmask row per state."""

    def __init__(self, m: int):
        self.rows = [0] * m

    def add(self, q: int, q2: int) -> None:
        self.rows[q] |= 1 << q2
        self.rows[q2] |= 1 << q

    def has(self, q: int, q2: int) -> bool:
        return bool(self.rows[q] >> q2 & 1)

    def pairs(self) -> set[tuple[int, int]]:
        out = set()
        for q, row in enumerate(self.rows):
            q2 = 0
            while row:
                if row & 1:
                    out.add((q, q2))
                row >>= 1
                q2 += 1
        return out

    @classmethod
    def from_pairs(cls, m: int, pairs: Iterable[tuple[int, int]]) -> "_Rows":
        r = cls(m)
        for q, q2 in pairs:
            r.rows[q] |= 1 << q2
        return r


def _witness(cgs: CGS, rows: list[int], q: int, q2: int):
    """A coalition and tuple at q certifying the update condition for (q, q2), or None."""
    for A in coalitions(cgs.num_agents, rel_agents(cgs, q, q2)):
        groups_q = cgs.successor_groups(A)[q]
        masks_q2 = cgs.group_masks(A)[q2]
        for alpha, succ in groups_q:
            # states t2 with (t, t2) in R for every t in Succ(q, alpha)
            allowed = -1
            for t in succ:
                allowed &= rows[t]
                if not allowed:
                    break
            if not allowed:
                continue
            if all(m & allowed for m in masks_q2):
                return A, alpha
    return None


def upd(cgs: CGS, pairs: Iterable[tuple[int, int]]) -> set[tuple[int, int]]:
    """One application of the update operator to the relation ``pairs``."""
    m = cgs.num_states
    pairs = list(pairs)
    for q, q2 in pairs:
        if not (0 <= q < m and 0 <= q2 < m):
            raise SeparabilityError(f"pair {(q, q2)} outside Q")
    rows = _Rows.from_pairs(m, pairs).rows
    out: set[tuple[int, int]] = set()
    for q in range(m):
        for q2 in range(m):
            if (q, q2) in out:
                continue
            if _witness(cgs, rows, q, q2) is not None:
                out.add((q, q2))
                out.add((q2, q))
    return out


@dataclass
class DistinguishRelation:
    cgs: CGS
    pairs: set[tuple[int, int]]
    round_of: dict[tuple[int, int], int] = field(default_factory=dict)
    rounds: int = 0

    def __contains__(self, pair) -> bool:
        return tuple(pair) in self.pairs

    def as_json(self) -> list[list[str]]:
        names = self.cgs.state_names
        return [[names[a], names[b]] for a, b in sorted(self.pairs)]


def distinguish_structure(cgs: CGS) -> DistinguishRelation:
    """Least fixed point of R <- R ∪ Upd(R) from the label-differing pairs."""
    m = cgs.num_states
    rel = _Rows(m)
    round_of: dict[tuple[int, int], int] = {}
    for q in range(m):
        for q2 in range(q + 1, m):
            if cgs.labels[q] != cgs.labels[q2]:
                rel.add(q, q2)
                round_of[(q, q2)] = round_of[(q2, q)] = 0
    rounds = 0
    while True:
        snapshot = list(rel.rows)
        added = []
        for q in range(m):
            for q2 in range(q + 1, m):
                if snapshot[q] >> q2 & 1:
                    continue
                if _witness(cgs, snapshot, q, q2) or _witness(cgs, snapshot, q2, q):
                    added.append((q, q2))
        if not added:
            break
        rounds += 1
        for q, q2 in added:
            rel.add(q, q2)
            round_of[(q, q2)] = round_of[(q2, q)] = rounds
    return DistinguishRelation(cgs, rel.pairs(), round_of, rounds)


def distinguish(sample: Sample) -> DistinguishRelation:
    cgs, _ = global_structure(sample)
    return distinguish_structure(cgs)


def _initial_sets(sample: Sample) -> tuple[list[list[int]], list[list[int]]]:
    offsets, off = [], 0
    for c in sample.structures:
        offsets.append(off)
        off += c.num_states
    k = len(sample.positive)
    init = [sorted(q + offsets[i] for q in c.initial) for i, c in enumerate(sample.structures)]
    return init[:k], init[k:]


def decide_full_atl(sample: Sample, relation: DistinguishRelation | None = None) -> bool:
    """Some formula separates the sample iff every negative structure has an
    initial state told apart from all positive initial states."""
    relation = relation or distinguish(sample)
    pos_init, neg_init = _initial_sets(sample)
    all_pos = [q for qs in pos_init for q in qs]
    for qs in neg_init:
        if not any(all((qp, qn) in relation.pairs for qp in all_pos) for qn in qs):
            return False
    return True


def _distinguishing_formula(rel: DistinguishRelation, q: int, q2: int,
                            memo: dict | None = None) -> Formula:
    """A next-only formula true at q and false at q2, rebuilt from the relation."""
    if (q, q2) not in rel.pairs:
        raise SeparabilityError(f"pair {(q, q2)} is not distinguished")
    memo = {} if memo is None else memo
    if (q, q2) in memo:
        return memo[(q, q2)]
    cgs = rel.cgs
    r = rel.round_of[(q, q2)]
    if r == 0:
        diff = sorted(cgs.labels[q] - cgs.labels[q2])
        if diff:
            out = Prop(diff[0])
        else:
            out = Not(Prop(sorted(cgs.labels[q2] - cgs.labels[q])[0]))
        memo[(q, q2)] = out
        return out
    earlier = _Rows.from_pairs(cgs.num_states, [p for p, k in rel.round_of.items() if k < r]).rows
    found = _witness(cgs, earlier, q, q2)
    if found is None:
        out = Not(_distinguishing_formula(rel, q2, q, memo))
        memo[(q, q2)] = out
        return out
    A, alpha = found
    succ = sorted(dict(cgs.successor_groups(A)[q])[alpha])
    conj = []
    for _, succ2 in cgs.successor_groups(A)[q2]:
        t2 = next(t2 for t2 in sorted(succ2) if all(earlier[t] >> t2 & 1 for t in succ))
        parts = [_distinguishing_formula(rel, t, t2, memo) for t in succ]
        conj.append(_fold(Or, parts))
    out = Next(A, _fold(And, conj))
    memo[(q, q2)] = out
    return out


def _fold(op, parts: list[Formula]) -> Formula:
    out = parts[0]
    for p in parts[1:]:
        out = op(out, p)
    return out


# -- fragments -------------------------------------------------------------

@dataclass
class AprFamily:
    cgs: CGS
    operators: frozenset[str]
    members: dict[int, Formula]      # state-set bitmask -> witness, in construction order
    rounds: int = 0

    def sets(self) -> list[frozenset[int]]:
        return [frozenset(q for q in range(self.cgs.num_states) if m >> q & 1) for m in self.members]

    def __len__(self) -> int:
        return len(self.members)


def _check_fragment(operators: Iterable[str]) -> frozenset[str]:
    ops = frozenset(operators)
    bad = ops - ALL_OPERATORS
    if bad:
        raise SeparabilityError(f"unknown operators {sorted(bad)}")
    return ops


def apr(sample: Sample, operators: Iterable[str] = FULL_FRAGMENT,
        limit: int = DEFAULT_FRAGMENT_LIMIT, stop=None) -> AprFamily:
    """Saturate the family of state sets definable with the given operators.

    ``stop(mask)`` may end the construction early once a member qualifies.
    """
    ops = _check_fragment(operators)
    cgs, _ = global_structure(sample)
    if cgs.num_states > limit:
        raise SeparabilityError(f"{cgs.num_states} states exceed the fragment limit {limit}")
    full = cgs.full_mask
    coals = coalitions(cgs.num_agents)
    members: dict[int, Formula] = {}

    def offer(mask: int, phi: Formula) -> bool:
        if mask in members:
            return False
        members[mask] = phi
        return bool(stop and stop(mask))

    fresh = []
    for p in sorted(sample.propositions):
        mask = cgs.label_mask(p)
        if mask not in members:
            fresh.append(mask)
        if offer(mask, Prop(p)):
            return AprFamily(cgs, ops, members, 0)

    rounds = 0
    while fresh:
        rounds += 1
        new = list(fresh)
        new_set = set(new)
        old = [m for m in members if m not in new_set]
        fresh = []

        def emit(mask, phi) -> bool:
            if mask not in members:
                fresh.append(mask)
            return offer(mask, phi)

        done = False
        for t in new:
            f = members[t]
            if "not" in ops and emit(full & ~t, Not(f)):
                done = True
                break
            for A in coals:
                if "X" in ops and emit(cgs.pre_mask(A, t), Next(A, f)):
                    done = True
                    break
                if "G" in ops and emit(globally_mask(cgs, A, t), Globally(A, f)):
                    done = True
                    break
                if "F" in ops and emit(until_mask(cgs, A, full, t), Finally(A, f)):
                    done = True
                    break
            if done:
                break
        if not done and ops & {"and", "or", "U"}:
            everyone = old + new
            for t1 in everyone:
                for t2 in everyone:
                    if t1 not in new_set and t2 not in new_set:
                        continue
                    f1, f2 = members[t1], members[t2]
                    if "and" in ops and emit(t1 & t2, And(f1, f2)):
                        done = True
                    if not done and "or" in ops and emit(t1 | t2, Or(f1, f2)):
                        done = True
                    if not done and "U" in ops:
                        for A in coals:
                            if emit(until_mask(cgs, A, t1, t2), Until(A, f1, f2)):
                                done = True
                                break
                    if done:
                        break
                if done:
                    break
        if done:
            break
    return AprFamily(cgs, ops, members, rounds)


@dataclass(frozen=True)
class FragmentVerdict:
    separable: bool
    witness: Formula | None
    family_size: int
    num_states: int

    @property
    def witness_size(self) -> int | None:
        return None if self.witness is None else size(self.witness)


def decide_fragment(sample: Sample, operators: Iterable[str] = FULL_FRAGMENT,
                    limit: int = DEFAULT_FRAGMENT_LIMIT) -> FragmentVerdict:
    """Search the definable sets for one containing all positive initial
    states and missing an initial state of every negative structure."""
    pos_init, neg_init = _initial_sets(sample)
    need = 0
    for qs in pos_init:
        for q in qs:
            need |= 1 << q
    neg_masks = [sum(1 << q for q in qs) for qs in neg_init]

    def qualifies(mask: int) -> bool:
        return mask & need == need and all(nm & ~mask for nm in neg_masks)

    family = apr(sample, operators, limit, stop=qualifies)
    for mask, phi in family.members.items():
        if qualifies(mask):
            return FragmentVerdict(True, phi, len(family), family.cgs.num_states)
    return FragmentVerdict(False, None, len(family), family.cgs.num_states)
