"""Concurrent game structures, Kripke structures and learning samples.

States are dense integer indices internally and carry stable string ids for
serialization.  A Kripke structure is simply a structure with one agent.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import jsonschema

ActionTuple = tuple[int, ...]
Coalition = frozenset[int]


class StructureError(ValueError):
    """Raised when a structure or sample document is malformed."""


class CGS:
    """A concurrent game structure ``<Q, I, k, P, pi, d, delta>``.

    Transitions are keyed by ``(state, action_tuple)`` with 1-based action
    indices, one per agent.  Instances are treated as immutable; derived
    tables (successor groups per coalition) are cached lazily.
    """

    def __init__(
        self,
        state_names: Sequence[str],
        initial: Iterable[int],
        num_agents: int,
        propositions: Iterable[str],
        labels: Sequence[Iterable[str]],
        action_counts: Sequence[Sequence[int]],
        delta: Mapping[tuple[int, ActionTuple], int],
        name: str = "",
    ):
        self.name = name
        self.state_names = tuple(state_names)
        self.initial = frozenset(initial)
        self.num_agents = num_agents
        self.propositions = frozenset(propositions)
        self.labels = tuple(frozenset(lab) for lab in labels)
        self.action_counts = tuple(tuple(d) for d in action_counts)
        self.delta = dict(delta)
        self._index = {s: i for i, s in enumerate(self.state_names)}
        self._groups: dict[Coalition, tuple[tuple[tuple[ActionTuple, frozenset[int]], ...], ...]] = {}
        self._masks: dict[Coalition, tuple[tuple[int, ...], ...]] = {}

    # -- basic accessors -------------------------------------------------

    @property
    def num_states(self) -> int:
        return len(self.state_names)

    @property
    def states(self) -> range:
        return range(self.num_states)

    @property
    def agents(self) -> range:
        return range(1, self.num_agents + 1)

    @property
    def is_kripke(self) -> bool:
        return self.num_agents == 1

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise StructureError(f"unknown state {name!r}") from None

    def holds_prop(self, q: int, p: str) -> bool:
        return p in self.labels[q]

    def d(self, q: int, a: int) -> int:
        return self.action_counts[q][a - 1]

    def action_tuples(self, q: int, coalition: Iterable[int] | None = None) -> list[ActionTuple]:
        """Act_A(q) in lexicographic order; ``None`` means the grand coalition."""
        agents = self.agents if coalition is None else sorted(coalition)
        return list(itertools.product(*(range(1, self.d(q, a) + 1) for a in agents)))

    def moves(self, q: int) -> list[tuple[ActionTuple, int]]:
        return [(act, self.delta[(q, act)]) for act in self.action_tuples(q)]

    def successors_all(self, q: int) -> frozenset[int]:
        return frozenset(self.delta[(q, act)] for act in self.action_tuples(q))

    def _check_state(self, q: int) -> None:
        if not 0 <= q < self.num_states:
            raise StructureError(f"unknown state {q!r}")

    def _check_coalition(self, coalition: Iterable[int]) -> Coalition:
        coalition = frozenset(coalition)
        for a in coalition:
            if not 1 <= a <= self.num_agents:
                raise StructureError(f"agent {a} out of range [1,{self.num_agents}]")
        return coalition

    def successors(self, q: int, coalition: Iterable[int], alpha: Sequence[int]) -> frozenset[int]:
        """Succ(q, alpha): states reachable when coalition plays ``alpha``.

        ``alpha`` lists one action per coalition member, in increasing agent
        order.  The empty coalition takes the empty tuple.
        """
        self._check_state(q)
        members = sorted(self._check_coalition(coalition))
        if len(alpha) != len(members):
            raise StructureError(f"action tuple {tuple(alpha)} does not match coalition {members}")
        for a, act in zip(members, alpha):
            if not 1 <= act <= self.d(q, a):
                raise StructureError(
                    f"action {act} of agent {a} out of range [1,{self.d(q, a)}] at state {self.state_names[q]}"
                )
        fixed = dict(zip(members, alpha))
        return frozenset(
            dest for act, dest in self.moves(q) if all(act[a - 1] == v for a, v in fixed.items())
        )

    def successor_groups(self, coalition: Iterable[int]) -> tuple[tuple[tuple[ActionTuple, frozenset[int]], ...], ...]:
        """For every state, the pairs ``(alpha, Succ(q, alpha))`` over Act_A(q)."""
        coalition = self._check_coalition(coalition)
        cached = self._groups.get(coalition)
        if cached is not None:
            return cached
        members = sorted(coalition)
        table = []
        for q in self.states:
            groups: dict[ActionTuple, set[int]] = {}
            for act, dest in self.moves(q):
                groups.setdefault(tuple(act[a - 1] for a in members), set()).add(dest)
            table.append(tuple((alpha, frozenset(groups[alpha])) for alpha in sorted(groups)))
        result = tuple(table)
        self._groups[coalition] = result
        return result

    def pre_set(self, coalition: Iterable[int], target: Iterable[int]) -> frozenset[int]:
        """Pre_A(S): states where the coalition can force the next state into S."""
        target = frozenset(target)
        for q in target:
            self._check_state(q)
        groups = self.successor_groups(coalition)
        return frozenset(
            q for q in self.states if any(succ <= target for _, succ in groups[q])
        )

    def group_masks(self, coalition: Iterable[int]) -> tuple[tuple[int, ...], ...]:
        """Per state, the successor sets of ``successor_groups`` as bitmasks."""
        coalition = self._check_coalition(coalition)
        cached = self._masks.get(coalition)
        if cached is None:
            cached = tuple(
                tuple(sorted({sum(1 << t for t in succ) for _, succ in groups}))
                for groups in self.successor_groups(coalition)
            )
            self._masks[coalition] = cached
        return cached

    def pre_mask(self, coalition: Iterable[int], target: int) -> int:
        """Bitmask version of ``pre_set``."""
        out = 0
        for q, masks in enumerate(self.group_masks(coalition)):
            for m in masks:
                if m & ~target == 0:
                    out |= 1 << q
                    break
        return out

    def label_mask(self, p: str) -> int:
        return sum(1 << q for q in self.states if p in self.labels[q])

    @property
    def full_mask(self) -> int:
        return (1 << self.num_states) - 1

    @property
    def initial_mask(self) -> int:
        return sum(1 << q for q in self.initial)

    def owner(self, q: int) -> int | None:
        """The single agent with more than one action at ``q``.

        Returns agent 1 when nobody has a choice and ``None`` when several
        agents have a choice (the state is not turn-based).
        """
        choosers = [a for a in self.agents if self.d(q, a) > 1]
        if not choosers:
            return 1
        if len(choosers) == 1:
            return choosers[0]
        return None

    @property
    def is_turn_based(self) -> bool:
        return all(self.owner(q) is not None for q in self.states)

    def size(self) -> int:
        """|C| = |Q_Act| + |P| + |Ag|."""
        return self.num_actions() + len(self.propositions) + self.num_agents

    def num_actions(self) -> int:
        total = 0
        for q in self.states:
            prod = 1
            for d in self.action_counts[q]:
                prod *= d
            total += prod
        return total

    def with_propositions(self, propositions: Iterable[str]) -> "CGS":
        return CGS(
            self.state_names, self.initial, self.num_agents, propositions,
            self.labels, self.action_counts, self.delta, self.name,
        )

    def __repr__(self) -> str:
        return f"CGS(name={self.name!r}, states={self.num_states}, agents={self.num_agents})"


def validate(cgs: CGS) -> list[str]:
    """Return the list of well-formedness violations (empty when ok)."""
    problems = []
    m = cgs.num_states
    if m == 0:
        problems.append("no states")
    if cgs.num_agents < 1:
        problems.append(f"agent count {cgs.num_agents} < 1")
    if not cgs.initial:
        problems.append("empty initial set")
    for q in sorted(cgs.initial):
        if not 0 <= q < m:
            problems.append(f"initial state {q} not in Q")
    if len(cgs.labels) != m:
        problems.append("labeling does not cover every state")
    if len(cgs.action_counts) != m:
        problems.append("action counts do not cover every state")
    if problems:
        return problems

    names = cgs.state_names
    for q in range(m):
        extra = cgs.labels[q] - cgs.propositions
        if extra:
            problems.append(f"labels {sorted(extra)} of {names[q]} not in propositions")
        counts = cgs.action_counts[q]
        if len(counts) != cgs.num_agents:
            problems.append(f"state {names[q]} lists {len(counts)} action counts for {cgs.num_agents} agents")
            continue
        for a, d in enumerate(counts, start=1):
            if d < 1:
                problems.append(f"d({names[q]},{a}) = {d} < 1")
    if problems:
        return problems

    expected = {(q, act) for q in range(m) for act in cgs.action_tuples(q)}
    for q in range(m):
        missing = [act for act in cgs.action_tuples(q) if (q, act) not in cgs.delta]
        if missing:
            problems.append(f"δ not total at {names[q]}: missing {missing}")
    for key, dest in cgs.delta.items():
        if key not in expected:
            q, act = key
            where = names[q] if isinstance(q, int) and 0 <= q < m else repr(q)
            problems.append(f"transition {act} at {where} outside Q_Act")
        elif not (isinstance(dest, int) and 0 <= dest < m):
            problems.append(f"transition {key[1]} at {names[key[0]]} leads to unknown state {dest!r}")
    return problems


@dataclass(frozen=True)
class Sample:
    positive: tuple[CGS, ...]
    negative: tuple[CGS, ...]
    num_agents: int
    propositions: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        if not self.positive and not self.negative:
            raise StructureError("sample has neither positive nor negative structures")
        for cgs in self.structures:
            if cgs.num_agents != self.num_agents:
                raise StructureError(
                    f"structure {cgs.name!r} has {cgs.num_agents} agents, sample has {self.num_agents}"
                )

    @property
    def structures(self) -> tuple[CGS, ...]:
        return self.positive + self.negative

    def labelled(self) -> list[tuple[CGS, bool]]:
        return [(c, True) for c in self.positive] + [(c, False) for c in self.negative]

    @classmethod
    def of(cls, positive: Sequence[CGS], negative: Sequence[CGS], num_agents: int | None = None) -> "Sample":
        """Build a sample whose proposition universe is the union over structures."""
        structures = list(positive) + list(negative)
        if num_agents is None:
            if not structures:
                raise StructureError("sample has neither positive nor negative structures")
            num_agents = structures[0].num_agents
        props = frozenset().union(*(c.propositions for c in structures)) if structures else frozenset()
        return cls(
            tuple(c.with_propositions(props) for c in positive),
            tuple(c.with_propositions(props) for c in negative),
            num_agents,
            props,
        )


@dataclass(frozen=True)
class SizeStats:
    sample_size: int   # |S|
    max_actions: int   # r
    num_states: int    # m
    num_actions: int   # M
    num_props: int     # p
    num_agents: int    # k
    structure_sizes: tuple[int, ...]


def size_stats(sample: Sample) -> SizeStats:
    sizes = tuple(c.size() for c in sample.structures)
    r = max((len(c.action_tuples(q)) for c in sample.structures for q in c.states), default=0)
    return SizeStats(
        sample_size=sum(sizes),
        max_actions=r,
        num_states=sum(c.num_states for c in sample.structures),
        num_actions=sum(c.num_actions() for c in sample.structures),
        num_props=len(sample.propositions),
        num_agents=sample.num_agents,
        structure_sizes=sizes,
    )


# -- JSON ----------------------------------------------------------------

_STATE_SCHEMA = {
    "type": "object",
    "required": ["id"],
    "properties": {
        "id": {"type": "string"},
        "labels": {"type": "array", "items": {"type": "string"}},
        "actions": {"type": "array", "items": {"type": "integer"}},
        "transitions": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["act", "to"],
                "properties": {
                    "act": {"type": "array", "items": {"type": "integer"}},
                    "to": {"type": "string"},
                },
            },
        },
        "succ": {"type": "array", "items": {"type": "string"}, "minItems": 1},
    },
    "oneOf": [
        {"required": ["actions", "transitions"], "not": {"required": ["succ"]}},
        {"required": ["succ"], "not": {"anyOf": [{"required": ["actions"]}, {"required": ["transitions"]}]}},
    ],
}

SAMPLE_SCHEMA = {
    "type": "object",
    "required": ["agents", "positive", "negative"],
    "properties": {
        "agents": {"type": "integer", "minimum": 1},
        "propositions": {"type": "array", "items": {"type": "string"}},
        "positive": {"type": "array", "items": {"$ref": "#/$defs/structure"}},
        "negative": {"type": "array", "items": {"$ref": "#/$defs/structure"}},
    },
    "$defs": {
        "structure": {
            "type": "object",
            "required": ["initial", "states"],
            "properties": {
                "name": {"type": "string"},
                "initial": {"type": "array", "items": {"type": "string"}},
                "states": {"type": "array", "items": _STATE_SCHEMA, "minItems": 1},
            },
        }
    },
}


def structure_from_dict(doc: dict, num_agents: int, propositions: Iterable[str] = (), name: str = "") -> CGS:
    name = doc.get("name", name)
    states = doc["states"]
    names = [s["id"] for s in states]
    if len(set(names)) != len(names):
        raise StructureError(f"{name}: duplicate state ids")
    index = {s: i for i, s in enumerate(names)}

    def lookup(sid: str) -> int:
        if sid not in index:
            raise StructureError(f"{name}: unknown state {sid!r}")
        return index[sid]

    labels, counts, delta = [], [], {}
    for q, st in enumerate(states):
        labels.append(st.get("labels", []))
        if "succ" in st:
            if num_agents != 1:
                raise StructureError(f"{name}: 'succ' shorthand at {st['id']} needs exactly one agent")
            counts.append([len(st["succ"])])
            for j, target in enumerate(st["succ"], start=1):
                delta[(q, (j,))] = lookup(target)
            continue
        d = st["actions"]
        if len(d) != num_agents:
            raise StructureError(f"{name}: state {st['id']} lists {len(d)} action counts for {num_agents} agents")
        counts.append(d)
        for tr in st["transitions"]:
            act = tuple(tr["act"])
            if len(act) != num_agents:
                raise StructureError(f"{name}: transition {list(act)} at {st['id']} needs {num_agents} actions")
            for a, (x, bound) in enumerate(zip(act, d), start=1):
                if not 1 <= x <= bound:
                    raise StructureError(
                        f"{name}: action {x} of agent {a} at state {st['id']} out of range [1,{bound}]"
                    )
            if (q, act) in delta:
                raise StructureError(f"{name}: duplicate transition {list(act)} at {st['id']}")
            delta[(q, act)] = lookup(tr["to"])
    initial = [lookup(s) for s in doc["initial"]]
    props = set(propositions).union(*map(set, labels)) if labels else set(propositions)
    cgs = CGS(names, initial, num_agents, props, labels, counts, delta, name)
    problems = validate(cgs)
    if problems:
        raise StructureError(f"{name}: " + "; ".join(problems))
    return cgs


def structure_to_dict(cgs: CGS) -> dict:
    states = []
    for q in cgs.states:
        states.append({
            "id": cgs.state_names[q],
            "labels": sorted(cgs.labels[q]),
            "actions": list(cgs.action_counts[q]),
            "transitions": [
                {"act": list(act), "to": cgs.state_names[dest]} for act, dest in cgs.moves(q)
            ],
        })
    return {
        "name": cgs.name,
        "initial": [cgs.state_names[q] for q in sorted(cgs.initial)],
        "states": states,
    }


def sample_from_dict(doc: dict) -> Sample:
    validator = jsonschema.Draft202012Validator(SAMPLE_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise StructureError(f"schema violation at {path}: {err.message}")
    k = doc["agents"]
    declared = doc.get("propositions", [])
    pos = [structure_from_dict(s, k, declared, f"pos{i}") for i, s in enumerate(doc["positive"])]
    neg = [structure_from_dict(s, k, declared, f"neg{i}") for i, s in enumerate(doc["negative"])]
    props = frozenset(declared).union(*(c.propositions for c in pos + neg))
    return Sample(
        tuple(c.with_propositions(props) for c in pos),
        tuple(c.with_propositions(props) for c in neg),
        k,
        props,
    )


def sample_to_dict(sample: Sample) -> dict:
    return {
        "agents": sample.num_agents,
        "propositions": sorted(sample.propositions),
        "positive": [structure_to_dict(c) for c in sample.positive],
        "negative": [structure_to_dict(c) for c in sample.negative],
    }


def parse_sample(data: bytes | str) -> Sample:
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise StructureError(f"invalid JSON: {exc}") from exc
    return sample_from_dict(doc)


def serialize_sample(sample: Sample) -> bytes:
    return (json.dumps(sample_to_dict(sample), indent=1) + "\n").encode("utf-8")


def load_sample(path) -> Sample:
    with open(path, "rb") as fh:
        return parse_sample(fh.read())


def kripke(succ: Mapping[str, Sequence[str]], labels: Mapping[str, Iterable[str]] | None = None,
           initial: Iterable[str] = (), name: str = "", propositions: Iterable[str] = ()) -> CGS:
    """Convenience constructor for Kripke structures from successor lists."""
    labels = labels or {}
    doc = {
        "name": name,
        "initial": list(initial) or [next(iter(succ))],
        "states": [{"id": s, "labels": sorted(labels.get(s, ())), "succ": list(t)} for s, t in succ.items()],
    }
    return structure_from_dict(doc, 1, propositions, name)


def disjoint_union(structures: Sequence[CGS], name: str = "union") -> tuple[CGS, list[int]]:
    """Glue structures side by side; returns the union and per-structure offsets."""
    if not structures:
        raise StructureError("nothing to unite")
    k = structures[0].num_agents
    names, labels, counts, delta, initial, offsets = [], [], [], {}, [], []
    props: set[str] = set()
    for ci, c in enumerate(structures):
        if c.num_agents != k:
            raise StructureError("agent counts differ")
        off = len(names)
        offsets.append(off)
        props |= c.propositions
        names.extend(f"{ci}:{s}" for s in c.state_names)
        labels.extend(c.labels)
        counts.extend(c.action_counts)
        initial.extend(q + off for q in c.initial)
        for (q, act), dest in c.delta.items():
            delta[(q + off, act)] = dest + off
    return CGS(names, initial, k, props, labels, counts, delta, name), offsets
