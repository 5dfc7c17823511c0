"""Seeded random structures, labelled samples and the benchmark suites."""

from __future__ import annotations

import json
import os
import random
from dataclasses import dataclass
from typing import Sequence

from .formulas import Formula, parse_formula
from .modelcheck import holds
from .structures import CGS, Sample, serialize_sample, size_stats, validate


class GenerationError(RuntimeError):
    pass


KINDS = ("ks", "cgs_turn", "cgs")


@dataclass(frozen=True)
class GenSpec:
    seed: str | int
    kind: str = "ks"
    max_states: int = 5
    min_states: int = 1
    num_agents: int = 1
    propositions: tuple[str, ...] = ("p", "q")
    formula: str = "p"
    num_positive: int = 1
    num_negative: int = 1
    label_prob: float = 0.5
    max_actions: int = 3
    resample_factor: int = 100

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GenerationError(f"unknown structure kind {self.kind!r}")
        if self.min_states < 1 or self.max_states < self.min_states:
            raise GenerationError(f"bad state range [{self.min_states},{self.max_states}]")
        if self.num_agents < 1:
            raise GenerationError("need at least one agent")
        if self.kind == "ks" and self.num_agents != 1:
            raise GenerationError("Kripke structures have exactly one agent")
        if self.num_positive < 0 or self.num_negative < 0:
            raise GenerationError("example counts must be nonnegative")
        if self.max_actions < 1:
            raise GenerationError("max_actions must be positive")

    def target(self) -> Formula:
        return parse_formula(self.formula, self.num_agents)


def random_structure(spec: GenSpec, index: int, name: str | None = None) -> CGS:
    """Structure number ``index`` of the stream defined by ``spec``.

    Every state is reachable from the single initial state s0: each new state
    first receives an edge from an unused action slot of an earlier state, then
    the remaining slots point to uniformly random states.
    """
    rng = random.Random(f"{spec.seed}:{index}")
    m = rng.randint(spec.min_states, spec.max_states)
    k = spec.num_agents
    labels = [[p for p in spec.propositions if rng.random() < spec.label_prob] for _ in range(m)]
    counts = []
    for _ in range(m):
        if spec.kind == "cgs_turn":
            owner = rng.randint(1, k)
            counts.append([rng.randint(1, spec.max_actions) if a == owner else 1 for a in range(1, k + 1)])
        else:
            counts.append([rng.randint(1, spec.max_actions) for _ in range(k)])
    shell = CGS([f"s{q}" for q in range(m)], [0], k, spec.propositions, labels, counts, {})
    slots = [[(q, act) for act in shell.action_tuples(q)] for q in range(m)]
    delta: dict = {}
    free: list = list(slots[0])
    for s in range(1, m):
        # earlier states always have a free slot: they own >= s slots, s-1 are used
        slot = free.pop(rng.randrange(len(free)))
        delta[slot] = s
        free.extend(slots[s])
    for q in range(m):
        for slot in slots[q]:
            if slot not in delta:
                delta[slot] = rng.randrange(m)
    cgs = CGS(shell.state_names, [0], k, spec.propositions, labels, counts, delta,
              name if name is not None else f"c{index}")
    problems = validate(cgs)
    if problems:  # pragma: no cover - generator invariant
        raise GenerationError("; ".join(problems))
    return cgs


def reachable(cgs: CGS) -> set[int]:
    seen = set(cgs.initial)
    stack = list(seen)
    while stack:
        q = stack.pop()
        for t in cgs.successors_all(q):
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return seen


def generate_sample(spec: GenSpec) -> Sample:
    """Draw structures until the requested numbers of positives and negatives exist."""
    phi = spec.target()
    pos: list[CGS] = []
    neg: list[CGS] = []
    want = spec.num_positive + spec.num_negative
    budget = max(1, spec.resample_factor * want)
    index = 0
    while len(pos) < spec.num_positive or len(neg) < spec.num_negative:
        if index >= budget:
            raise GenerationError(
                f"resample budget of {budget} structures exhausted for {spec.formula!r}: "
                f"{len(pos)}/{spec.num_positive} positive, {len(neg)}/{spec.num_negative} negative"
            )
        cgs = random_structure(spec, index)
        index += 1
        if holds(cgs, phi):
            if len(pos) < spec.num_positive:
                pos.append(cgs)
        elif len(neg) < spec.num_negative:
            neg.append(cgs)
    props = frozenset(spec.propositions)
    return Sample(tuple(pos), tuple(neg), spec.num_agents, props)


# -- benchmark suites ------------------------------------------------------

CTL_FORMULAS = (
    ("AG(AF(p))", "AG(AF(p))"),
    ("AG(EF(q))", "AG(EF(q))"),
    ("AG(!p | !q)", "AG(!p | !q)"),
    ("AG(p -> AF(q))", "AG(p -> AF(q))"),
    ("AG(p | AX(!q))", "AG(p | AX(!q))"),
    ("AG(AF(p) & AF(q))", "AG(AF(p) & AF(q))"),
)

# second entry: the formula with the source's 0-based agent names
ATL_FORMULAS = (
    ("<2>X p", "<1>X(p)"),
    ("<1>F q", "<0>F(q)"),
    ("<>G(p -> <2>X q)", "<>G(p -> <1>X(q))"),
    ("<>G(p -> <2>G p)", "<>G(p -> <1>G(p))"),
    ("<>G(p -> <1,2>F q)", "<>G(p -> <0,1>F(q))"),
    ("<>G((p & !q) -> <2>G p)", "<>G((p & !q) -> <1>G(p))"),
)

SUITES = {
    "ctl": {
        "formulas": CTL_FORMULAS, "counts": (20, 40, 60, 80, 100, 120),
        "caps": (10, 20, 30, 40), "kind": "ks", "agents": 1,
    },
    "atl": {
        "formulas": ATL_FORMULAS, "counts": (10, 20, 30, 40, 50, 60),
        "caps": (5, 10, 15, 20), "kind": "cgs_turn", "agents": 2,
    },
}


def suite_specs(kind: str, seed: int = 0, counts: Sequence[int] | None = None,
                caps: Sequence[int] | None = None) -> list[tuple[str, GenSpec, dict]]:
    """(file name, spec, manifest entry) for every grid point of a suite."""
    kind = kind.lower()
    if kind not in SUITES:
        raise GenerationError(f"unknown suite {kind!r}")
    suite = SUITES[kind]
    out = []
    for fi, (text, source) in enumerate(suite["formulas"]):
        for count in counts or suite["counts"]:
            for cap in caps or suite["caps"]:
                spec = GenSpec(
                    seed=f"{seed}:{kind}:{fi}:{count}:{cap}",
                    kind=suite["kind"], max_states=cap, num_agents=suite["agents"],
                    propositions=("p", "q"), formula=text,
                    num_positive=count // 2, num_negative=count - count // 2,
                )
                fname = f"{kind}_f{fi}_n{count}_s{cap}.json"
                entry = {
                    "file": fname, "formula": text, "formula_source": source,
                    "formula_index": fi, "num_examples": count, "size_bracket": cap,
                    "structure_kind": suite["kind"], "agents": suite["agents"],
                }
                out.append((fname, spec, entry))
    return out


def benchmark_suite(kind: str, out_dir: str, seed: int = 0, counts: Sequence[int] | None = None,
                    caps: Sequence[int] | None = None) -> dict:
    """Write every sample of a suite plus ``manifest.json``; returns the manifest."""
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for fname, spec, entry in suite_specs(kind, seed, counts, caps):
        sample = generate_sample(spec)
        with open(os.path.join(out_dir, fname), "wb") as fh:
            fh.write(serialize_sample(sample))
        stats = size_stats(sample)
        entry = dict(entry)
        entry.update({
            "seed": spec.seed,
            "num_positive": len(sample.positive),
            "num_negative": len(sample.negative),
            "state_counts": [c.num_states for c in sample.structures],
            "structure_sizes": list(stats.structure_sizes),
            "sample_size": stats.sample_size,
        })
        entries.append(entry)
    manifest = {
        "version": 1,
        "suite": kind.lower(),
        "seed": seed,
        "size_bracket_meaning": "upper bound on the number of states per structure",
        "agent_mapping": {"0": 1, "1": 2} if kind.lower() == "atl" else {},
        "samples": entries,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    return manifest

