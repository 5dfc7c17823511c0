"""Hash-consed propositional terms in negation normal form and their CNF.

Terms are small integers handed out by a :class:`TermFactory`.  Negation is
pushed to the literals on construction, so every term is monotone in its
children and a one-sided (Plaisted-Greenbaum) definition suffices when a
subterm needs an auxiliary variable.
"""

from __future__ import annotations

from typing import Iterable, Sequence

from pysat.formula import IDPool

FALSE = 0
TRUE = 1

_F, _T, _L, _A, _O = range(5)


class TermFactory:
    def __init__(self):
        self._op: list[int] = [_F, _T]
        self._args: list = [None, None]
        self._table: dict[tuple, int] = {}
        self._neg: dict[int, int] = {FALSE: TRUE, TRUE: FALSE}

    def _intern(self, op: int, args) -> int:
        key = (op, args)
        t = self._table.get(key)
        if t is None:
            t = len(self._op)
            self._op.append(op)
            self._args.append(args)
            self._table[key] = t
        return t

    def lit(self, literal: int) -> int:
        if literal == 0:
            raise ValueError("0 is not a literal")
        return self._intern(_L, literal)

    def is_lit(self, t: int) -> bool:
        return self._op[t] == _L

    def literal_of(self, t: int) -> int:
        return self._args[t]

    def _nary(self, op: int, unit: int, zero: int, children: Iterable[int]) -> int:
        kids: set[int] = set()
        lits: set[int] = set()
        for c in children:
            if c == unit:
                continue
            if c == zero:
                return zero
            cop = self._op[c]
            if cop == op:
                for g in self._args[c]:
                    kids.add(g)
                    if self._op[g] == _L:
                        lits.add(self._args[g])
            else:
                kids.add(c)
                if cop == _L:
                    lits.add(self._args[c])
        if any(-x in lits for x in lits):
            return zero
        if not kids:
            return unit
        if len(kids) == 1:
            return next(iter(kids))
        return self._intern(op, tuple(sorted(kids)))

    def conj(self, children: Iterable[int]) -> int:
        return self._nary(_A, TRUE, FALSE, children)

    def disj(self, children: Iterable[int]) -> int:
        return self._nary(_O, FALSE, TRUE, children)

    def AND(self, *children: int) -> int:
        return self.conj(children)

    def OR(self, *children: int) -> int:
        return self.disj(children)

    def NOT(self, t: int) -> int:
        out = self._neg.get(t)
        if out is not None:
            return out
        op = self._op[t]
        if op == _L:
            out = self.lit(-self._args[t])
        elif op == _A:
            out = self.disj(self.NOT(c) for c in self._args[t])
        else:
            out = self.conj(self.NOT(c) for c in self._args[t])
        self._neg[t] = out
        self._neg[out] = t
        return out

    def IMPLIES(self, a: int, b: int) -> int:
        return self.OR(self.NOT(a), b)

    def IFF(self, a: int, b: int) -> int:
        return self.AND(self.OR(self.NOT(a), b), self.OR(a, self.NOT(b)))

    def evaluate(self, t: int, value) -> bool:
        """Evaluate under ``value(var) -> bool``."""
        memo: dict[int, bool] = {}

        def go(u: int) -> bool:
            if u in memo:
                return memo[u]
            op = self._op[u]
            if op == _T:
                r = True
            elif op == _F:
                r = False
            elif op == _L:
                x = self._args[u]
                r = value(abs(x)) if x > 0 else not value(abs(x))
            elif op == _A:
                r = all(go(c) for c in self._args[u])
            else:
                r = any(go(c) for c in self._args[u])
            memo[u] = r
            return r

        return go(t)


class Clausifier:
    """Turns asserted terms into clauses, naming subterms where needed."""

    def __init__(self, factory: TermFactory, pool: IDPool):
        self.f = factory
        self.pool = pool
        self.clauses: list[list[int]] = []
        self._defs: dict[int, int] = {}
        self.num_aux = 0

    def add_clause(self, lits: Sequence[int]) -> None:
        self.clauses.append(list(lits))

    def assert_term(self, t: int) -> None:
        f = self.f
        op = f._op[t]
        if op == _T:
            return
        if op == _F:
            self.clauses.append([])
        elif op == _L:
            self.clauses.append([f._args[t]])
        elif op == _A:
            for c in f._args[t]:
                self.assert_term(c)
        else:
            self._or_clause(f._args[t], [], True)

    def _or_clause(self, kids: Sequence[int], prefix: list[int], distribute: bool) -> None:
        f = self.f
        lits = list(prefix)
        ands = []
        for c in kids:
            if f._op[c] == _L:
                lits.append(f._args[c])
            else:
                ands.append(c)
        if not ands:
            self.clauses.append(lits)
            return
        if distribute:
            # spread the widest conjunction over the clause, name the others
            spread = max(ands, key=lambda a: len(f._args[a]))
        else:
            # below the top level only a conjunction of plain literals is spread
            flat = [a for a in ands if all(f._op[g] == _L for g in f._args[a])]
            spread = flat[0] if flat else None
        rest = [a for a in ands if a != spread]
        lits.extend(self.define(a) for a in rest)
        if spread is None:
            self.clauses.append(lits)
            return
        for g in f._args[spread]:
            if f._op[g] == _L:
                self.clauses.append(lits + [f._args[g]])
            else:
                self._or_clause(f._args[g], lits, False)

    def define(self, t: int) -> int:
        """A literal that implies ``t``."""
        f = self.f
        if f._op[t] == _L:
            return f._args[t]
        v = self._defs.get(t)
        if v is not None:
            return v
        self.num_aux += 1
        v = self.pool.id(("aux", self.num_aux))
        self._defs[t] = v
        if f._op[t] == _A:
            for g in f._args[t]:
                if f._op[g] == _L:
                    self.clauses.append([-v, f._args[g]])
                else:
                    self._or_clause(f._args[g], [-v], False)
        else:
            self._or_clause(f._args[t], [-v], False)
        return v
