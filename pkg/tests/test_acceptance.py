"""Acceptance criteria.  Each test adds one PASS/FAIL line to the summary."""

import csv
import json
import random
import statistics
import time
from collections import defaultdict

import pytest

from atlearn.cli import run
from atlearn.encoding import EncodingConfig, build
from atlearn.formulas import (
    ALL_OPERATORS, Globally, Next, Not, Until, expand_globally_to_x, expand_until_to_x,
    parse_formula, size,
)
from atlearn.learner import EnumerationBudgetError, brute_force_learn, learn_minimal
from atlearn.modelcheck import check_consistency, sat_set
from atlearn.samplegen import ATL_FORMULAS, CTL_FORMULAS, benchmark_suite
from atlearn.separability import FULL_FRAGMENT, coalitions, decide_fragment, decide_full_atl
from atlearn.solvers import solve
from atlearn.structures import Sample, parse_sample
import conftest
from gen_utils import (
    corpus_sample, labelled_sample, random_cgs, random_coalition, random_formula,
    random_formula_of_size, separability_sample,
)


def report(name, ok, detail):
    conftest.ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    assert ok, detail


def assume(ctx, phi):
    return [v if b else -v for v, b in ctx.encoding.formula_assignment(phi).items()]


@pytest.fixture(scope="module")
def corpus():
    start = time.perf_counter()
    samples = [corpus_sample(i) for i in range(200)]
    return samples, time.perf_counter() - start


@pytest.fixture(scope="module")
def brute_force_hits(corpus):
    """The first 50 corpus samples with a consistent formula of size <= 4."""
    hits = []
    for sample in corpus[0]:
        best = brute_force_learn(sample, max_size=4)
        if best is not None:
            hits.append((sample, best))
            if len(hits) == 50:
                break
    return hits


def test_encoding_soundness(corpus):
    samples, gen_s = corpus
    start = time.perf_counter()
    bad, extracted, separable = [], 0, 0
    for i, sample in enumerate(samples):
        res = learn_minimal(sample)
        if res.outcome != "formula":
            # nothing consistent exists, so every small encoding must be unsat
            for n in (1, 2, 3):
                if build(sample, n).solve().sat:
                    bad.append((i, n))
            continue
        separable += 1
        found = [res.formula]
        for n in range(res.size + 1, min(res.size + 2, 6) + 1):
            ctx = build(sample, n)
            out = ctx.solve()
            if not out.sat:
                bad.append((i, n, "unsat above the minimum"))
                continue
            found.append(ctx.extract_formula(out.model))
        for phi in found:
            extracted += 1
            if not check_consistency(sample, phi):
                bad.append((i, str(phi)))
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed < 300
    report("encoding soundness", ok,
           f"{extracted} extracted formulas from {separable}/200 separable samples all consistent"
           f" ({len(bad)} failures), checks {elapsed:.0f}s + corpus {gen_s:.0f}s")


def test_encoding_completeness(brute_force_hits):
    start = time.perf_counter()
    bad = []
    for i, (sample, best) in enumerate(brute_force_hits):
        ctx = build(sample, size(best))
        if not ctx.solve().sat or not ctx.solve(assumptions=assume(ctx, best)).sat:
            bad.append(i)
    elapsed = time.perf_counter() - start
    sizes = sorted(size(b) for _, b in brute_force_hits)
    report("encoding completeness", len(brute_force_hits) == 50 and not bad and elapsed < 300,
           f"{len(brute_force_hits)} samples (sizes {sizes[0]}..{sizes[-1]}), Ω_m sat and admits the"
           f" brute-force formula in all but {len(bad)}, {elapsed:.0f}s")


def test_minimality(brute_force_hits):
    bad = []
    for i, (sample, best) in enumerate(brute_force_hits):
        res = learn_minimal(sample)
        if res.outcome != "formula" or res.size != size(best) or not check_consistency(sample, res.formula):
            bad.append((i, res.size, size(best)))
    report("minimality", len(brute_force_hits) == 50 and not bad,
           f"learned size equals brute-force minimum on {len(brute_force_hits) - len(bad)}/50")


def lemma_holds(cgs, phi, n, config):
    ctx = build(Sample.of([cgs], []), n, config, consistency=False)
    enc = ctx.encoding
    assumptions = assume(ctx, phi)
    res = ctx.solve(assumptions=assumptions)
    if not res.sat or ctx.extract_formula(res.model) is not phi:
        return False
    expected = sat_set(cgs, phi)
    if {q for q in cgs.states if enc.var("y", 0, n, q) in res.model} != expected:
        return False
    differ = [-enc.var("y", 0, n, q) if q in expected else enc.var("y", 0, n, q) for q in cgs.states]
    return solve(ctx.nvars, ctx.clauses + [differ], assumptions=assumptions).status == "unsat"


def test_semantic_lemma():
    bad = []
    for i in range(200):
        rng = random.Random(f"lemma:{i}")
        kind = i % 3
        k = 1 if kind else rng.randint(1, 2)
        ops = ("not", "and", "X", "G", "U") if kind == 0 else ("not", "and", "or", "X", "G", "U", "F")
        c = random_cgs(rng, max_states=5, num_agents=k, max_actions=2)
        phi = random_formula_of_size(rng, 5, num_agents=k, ops=ops)
        n = rng.randint(size(phi), 5)
        config = [EncodingConfig(), EncodingConfig(operators=ALL_OPERATORS),
                  EncodingConfig(mode="ctl", operators=ALL_OPERATORS)][kind]
        if not lemma_holds(c, phi, n, config):
            bad.append(i)
    report("semantic lemma", not bad, f"{200 - len(bad)}/200 pairs: unique extension, root y equals SAT set")


def test_fixed_point_vs_x_expansion():
    bad = []
    for i in range(100):
        rng = random.Random(f"expand:{i}")
        k = rng.randint(1, 3)
        c = random_cgs(rng, max_states=5, num_agents=k, max_actions=2, multi_initial=True)
        A = random_coalition(rng, k)
        sub = lambda: random_formula(rng, num_agents=k, depth=2)
        if i % 2:
            phi = Globally(A, sub())
            psi = expand_globally_to_x(A, phi.arg, c.num_states)
        else:
            phi = Until(A, sub(), sub())
            psi = expand_until_to_x(A, phi.left, phi.right, c.num_states)
        if sat_set(c, phi) != sat_set(c, psi):
            bad.append(i)
    report("fixed point vs X-expansion", not bad, f"{100 - len(bad)}/100 G/U formulas agree at k=|Q|")


@pytest.fixture(scope="module")
def separability_corpus():
    return [separability_sample(i) for i in range(50)]


def test_separability_cross_validation(separability_corpus):
    bad, agree, at_budget, exhausted = [], 0, 0, 0
    for i, sample in enumerate(separability_corpus):
        full = decide_full_atl(sample)
        frag = decide_fragment(sample, FULL_FRAGMENT)
        if full != frag.separable:
            bad.append((i, "deciders differ"))
            continue
        if frag.separable and not check_consistency(sample, frag.witness):
            bad.append((i, "witness inconsistent"))
            continue
        try:
            best = brute_force_learn(sample, max_size=6, budget=10_000_000)
        except EnumerationBudgetError:
            exhausted += 1
            if full:
                at_budget += 1  # witness already checked
            else:
                bad.append((i, "inseparable verdict not confirmed within budget"))
            continue
        if (best is not None) == full:
            agree += 1
        elif best is None and full:
            at_budget += 1  # no formula of size <= 6, Apr witness already checked
        else:
            bad.append((i, "brute force found a formula for an inseparable sample"))
    report("separability cross-validation", not bad,
           f"deciders agree on {50 - sum(why == 'deciders differ' for _, why in bad)}/50"
           f" ({sum(decide_full_atl(s) for s in separability_corpus)} separable),"
           f" brute force agrees on {agree}, {at_budget} beyond size 6 with consistent witness,"
           f" {exhausted} enumerations over budget, {len(bad)} failures")


def test_witness_size_bound(separability_corpus):
    fragments = [FULL_FRAGMENT, {"not", "and", "X"}, {"not", "X", "G"}, {"and", "U"},
                 {"or", "F", "X"}, {"not"}, {"and"}]
    checked, bad, worst = 0, [], 0.0
    for i, sample in enumerate(separability_corpus):
        for ops in fragments:
            verdict = decide_fragment(sample, ops)
            if verdict.witness is None:
                continue
            checked += 1
            bound = 2 ** verdict.num_states
            worst = max(worst, verdict.witness_size / bound)
            if verdict.witness_size > bound or not check_consistency(sample, verdict.witness):
                bad.append((i, sorted(ops)))
    report("witness size bound", checked > 0 and not bad,
           f"{checked} witnesses within 2^|Q| and consistent (largest ratio {worst:.3f})")


def test_turn_based_variant_equivalence():
    bad, samples, learned = [], 0, 0
    seed = 0
    while samples < 30:
        rng = random.Random(f"turn:{seed}")
        seed += 1
        target = random_formula_of_size(rng, 5, num_agents=2)
        sample = labelled_sample(rng, target, num_agents=2, max_states=4, max_actions=2,
                                 turn_based=True, same_initial=True)
        if sample is None:
            continue
        samples += 1
        for n in range(1, 6):
            gen = build(sample, n, EncodingConfig(pre="general"))
            turn = build(sample, n, EncodingConfig(pre="turn_based"))
            general, tres = gen.solve(), turn.solve()
            if general.sat != tres.sat:
                bad.append((seed, n))
                break
            if general.sat:
                gphi = gen.extract_formula(general.model)
                tphi = turn.extract_formula(tres.model)
                learned += 1
                if not (check_consistency(sample, gphi) and check_consistency(sample, tphi)):
                    bad.append((seed, n, "inconsistent"))
                break
    report("turn-based variant equivalence", not bad,
           f"30 samples, verdicts equal for n=1..5, {learned} learned pairs consistent, {len(bad)} failures")


def test_turn_based_duality():
    bad, checks = [], 0
    for i in range(30):
        rng = random.Random(f"duality:{i}")
        k = rng.randint(2, 3)
        c = random_cgs(rng, max_states=5, num_agents=k, max_actions=3, turn_based=True)
        phi = random_formula(rng, num_agents=k, depth=3)
        everyone = frozenset(range(1, k + 1))
        for A in coalitions(k):
            checks += 1
            lhs = sat_set(c, Next(A, phi))
            rhs = sat_set(c, Not(Next(everyone - A, Not(phi))))
            if lhs != rhs:
                bad.append((i, sorted(A)))
    report("turn-based duality", not bad, f"{checks - len(bad)}/{checks} (structure, coalition) pairs agree")


def bench(kind, tmp_path, counts, caps):
    suite = tmp_path / kind
    benchmark_suite(kind, str(suite), counts=counts, caps=caps)
    out, found = tmp_path / f"{kind}.csv", tmp_path / f"{kind}.json"
    code = run(["bench", "--manifest", str(suite), "--out", str(out), "--formulas-out", str(found),
                "--jobs", "2"])
    rows = list(csv.DictReader(out.open()))
    manifest = json.loads((suite / "manifest.json").read_text())
    formulas = json.loads(found.read_text())["formulas"]
    consistent = 0
    for entry in manifest["samples"]:
        sample = parse_sample((suite / entry["file"]).read_bytes())
        text = formulas.get(entry["file"])
        if text and check_consistency(sample, parse_formula(text, sample.num_agents)):
            consistent += 1
    return code, rows, consistent, len(manifest["samples"])


def test_benchmark_reproduction(tmp_path):
    start = time.perf_counter()
    notes, ok = [], True
    for kind, table in (("ctl", CTL_FORMULAS), ("atl", ATL_FORMULAS)):
        manifest = benchmark_suite(kind, str(tmp_path / f"full-{kind}"))
        entries = manifest["samples"]
        ok &= len(entries) == 144 and {e["formula"] for e in entries} == {t for t, _ in table}
        notes.append(f"{kind} suite {len(entries)} samples")
    runs = {"ctl": ([20], [10]), "atl": ([10, 20], [5, 10])}
    trend_ok = True
    for kind, (counts, caps) in runs.items():
        code, rows, consistent, total = bench(kind, tmp_path, counts, caps)
        statuses = {r["status"] for r in rows}
        ok &= code == 0 and statuses == {"ok"} and consistent == total == len(rows)
        notes.append(f"{kind} bench {consistent}/{total} consistent")
        by = defaultdict(lambda: defaultdict(list))
        for r in rows:
            by[r["formula"]][int(r["num_examples"])].append(float(r["total_s"]))
        if len(counts) > 1:
            rising = 0
            for formula, per_count in by.items():
                means = [statistics.mean(per_count[c]) for c in sorted(per_count)]
                if all(a <= b for a, b in zip(means, means[1:])):
                    rising += 1
            trend_ok &= rising == len(by)
            notes.append(f"{kind} mean total_s nondecreasing in count for {rising}/{len(by)} formulas")
    elapsed = time.perf_counter() - start
    report("benchmark reproduction", ok and trend_ok and elapsed < 1800,
           ", ".join(notes) + f", {elapsed:.0f}s")
