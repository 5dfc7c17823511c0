"""Explicit-state ATL model checking by fixed-point iteration.

State sets are Python ints used as bitmasks internally; the public functions
return frozensets of state indices.
"""

from __future__ import annotations

from dataclasses import dataclass

from .formulas import Formula, FormulaError, is_temporal, postorder
from .structures import CGS, Sample


class ModelCheckError(ValueError):
    pass


def _mask_to_set(mask: int) -> frozenset[int]:
    out = []
    q = 0
    while mask:
        if mask & 1:
            out.append(q)
        mask >>= 1
        q += 1
    return frozenset(out)


def until_mask(cgs: CGS, coalition, s1: int, s2: int) -> int:
    """Least fixed point: start from SAT(phi2), add SAT(phi1) ∩ Pre_A(S)."""
    s = s2
    for _ in range(cgs.num_states):
        nxt = s | (s1 & cgs.pre_mask(coalition, s))
        if nxt == s:
            break
        s = nxt
    return s


def globally_mask(cgs: CGS, coalition, s1: int) -> int:
    """Greatest fixed point: start from SAT(phi), keep S ∩ Pre_A(S)."""
    s = s1
    for _ in range(cgs.num_states):
        nxt = s & cgs.pre_mask(coalition, s)
        if nxt == s:
            break
        s = nxt
    return s


def sat_masks(cgs: CGS, phi: Formula) -> dict[Formula, int]:
    """SAT sets of every subformula, each computed once."""
    full = cgs.full_mask
    memo: dict[Formula, int] = {}
    for f in postorder(phi):
        kind = f.kind
        if is_temporal(f):
            for a in f.coalition:
                if not 1 <= a <= cgs.num_agents:
                    raise ModelCheckError(f"agent {a} out of range [1,{cgs.num_agents}]")
        if kind == "prop":
            m = cgs.label_mask(f.name)
        elif kind == "const":
            m = full if f.value else 0
        elif kind == "not":
            m = full & ~memo[f.arg]
        elif kind == "and":
            m = memo[f.left] & memo[f.right]
        elif kind == "or":
            m = memo[f.left] | memo[f.right]
        elif kind == "implies":
            m = (full & ~memo[f.left]) | memo[f.right]
        elif kind == "X":
            m = cgs.pre_mask(f.coalition, memo[f.arg])
        elif kind == "G":
            m = globally_mask(cgs, f.coalition, memo[f.arg])
        elif kind == "U":
            m = until_mask(cgs, f.coalition, memo[f.left], memo[f.right])
        elif kind == "F":
            m = until_mask(cgs, f.coalition, full, memo[f.arg])
        else:  # pragma: no cover
            raise FormulaError(f"unknown node {f!r}")
        memo[f] = m
    return memo


def sat_mask(cgs: CGS, phi: Formula) -> int:
    return sat_masks(cgs, phi)[phi]


def sat_set(cgs: CGS, phi: Formula) -> frozenset[int]:
    """SAT_C(phi) as a set of state indices."""
    return _mask_to_set(sat_mask(cgs, phi))


def holds(cgs: CGS, phi: Formula) -> bool:
    """True iff every initial state satisfies ``phi``."""
    init = cgs.initial_mask
    return sat_mask(cgs, phi) & init == init


@dataclass(frozen=True)
class Consistency:
    consistent: bool
    violated_by: str | None = None
    polarity: str | None = None   # "positive" or "negative"

    def __bool__(self) -> bool:
        return self.consistent


def check_consistency(sample: Sample, phi: Formula) -> Consistency:
    """Positives must satisfy ``phi``; negatives must not.  First failure wins."""
    for cgs in sample.positive:
        if not holds(cgs, phi):
            return Consistency(False, cgs.name, "positive")
    for cgs in sample.negative:
        if holds(cgs, phi):
            return Consistency(False, cgs.name, "negative")
    return Consistency(True)

