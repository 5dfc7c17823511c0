import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from atlearn.formulas import Prop, size
from atlearn.learner import brute_force_learn
from atlearn.modelcheck import check_consistency, sat_mask, sat_set
from atlearn.separability import (
    FULL_FRAGMENT, SeparabilityError, _distinguishing_formula, apr, coalitions, decide_fragment,
    decide_full_atl, distinguish, distinguish_structure, global_structure, rel_agents, upd,
)
from atlearn.structures import CGS, Sample, kripke
from gen_utils import random_cgs, random_sample


def single(labels, name):
    return kripke({"s": ["s"]}, {"s": labels}, name=name, propositions=["p"])


def test_rel_agents():
    c = CGS(["q", "r"], [0], 3, [], [[], []], [[1, 1, 2], [2, 1, 1]],
            {**{(0, (1, 1, a)): 0 for a in (1, 2)}, **{(1, (a, 1, 1)): 1 for a in (1, 2)}})
    assert rel_agents(c, 0, 0) == {3}
    assert rel_agents(c, 0, 1) == {1, 3}
    assert rel_agents(c, 1, 1) == {1}
    one = kripke({"a": ["a"], "b": ["a", "b"]})
    assert rel_agents(one, 0, 0) == set()
    assert rel_agents(one, 0, 1) == {1}
    with pytest.raises(SeparabilityError):
        rel_agents(one, 0, 9)


def test_coalition_order():
    assert coalitions(2) == [frozenset(), frozenset({1}), frozenset({1, 2}), frozenset({2})]


def test_upd_extremes():
    c = kripke({"a": ["a", "b"], "b": ["a"]})
    assert upd(c, set()) == set()
    full = set(itertools.product(range(2), repeat=2))
    assert upd(c, full) == full
    with pytest.raises(SeparabilityError):
        upd(c, {(0, 5)})


def successor_labels_sample():
    # a -> c{p}, b -> d{}; a and b carry the same labels
    return kripke({"a": ["c"], "b": ["d"], "c": ["c"], "d": ["d"]}, {"c": ["p"]})


def test_upd_adds_pair_from_successor_labels():
    c = successor_labels_sample()
    r0 = {(2, 3), (3, 2), (0, 2), (2, 0), (1, 2), (2, 1)}
    assert (0, 1) in upd(c, r0)


def test_distinguish_examples():
    same = Sample.of([single([], "a")], [single([], "b")])
    rel = distinguish(same)
    assert (0, 1) not in rel and not decide_full_atl(same)
    diff = distinguish(Sample.of([single(["p"], "a")], [single([], "b")]))
    assert (0, 1) in diff and (1, 0) in diff


def test_chain_needs_two_rounds():
    three = kripke({"a0": ["a1"], "a1": ["a2"], "a2": ["a2"]}, {"a2": ["p"]}, name="three")
    two = kripke({"b0": ["b1"], "b1": ["b1"]}, name="two", propositions=["p"])
    sample = Sample.of([three], [two])
    rel = distinguish(sample)
    assert rel.round_of[(0, 3)] == 2
    assert rel.round_of[(1, 4)] == 1
    phi = _distinguishing_formula(rel, 0, 3)
    assert check_consistency(sample, phi)
    assert decide_full_atl(sample)


def test_p_sample_decisions(p_sample):
    assert decide_full_atl(p_sample)
    verdict = decide_fragment(p_sample, {"not", "and", "X"})
    assert verdict.separable and verdict.witness is Prop("p")


def test_and_only_not_separable():
    sample = Sample.of([single([], "pos")], [single(["p"], "neg")])
    verdict = decide_fragment(sample, {"and"})
    assert not verdict.separable and verdict.witness is None
    assert decide_fragment(sample, {"not"}).separable


def test_apr_small_fragments():
    c = kripke({"a": ["b"], "b": ["a"], "c": ["c"]}, {"a": ["p"], "c": ["p", "q"]})
    sample = Sample.of([c], [])
    fam = apr(sample, set())
    assert fam.sets() == [frozenset({0, 2}), frozenset({2})]
    fam = apr(sample, {"not"})
    assert set(fam.sets()) == {frozenset({0, 2}), frozenset({2}), frozenset({1}), frozenset({0, 1})}


def test_apr_limit():
    c = kripke({str(i): [str(i)] for i in range(5)}, propositions=["p"])
    with pytest.raises(SeparabilityError):
        apr(Sample.of([c], []), FULL_FRAGMENT, limit=4)
    with pytest.raises(SeparabilityError):
        apr(Sample.of([c], []), {"W"})


def test_dump_relation_names():
    rel = distinguish(Sample.of([single(["p"], "a")], [single([], "b")]))
    assert rel.as_json() == [["0:s", "1:s"], ["1:s", "0:s"]]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**9))
def test_distinguish_symmetric_and_sound(seed):
    rng = random.Random(seed)
    k = rng.randint(1, 2)
    sample = random_sample(rng, num_agents=k, max_states=3, max_actions=2)
    rel = distinguish(sample)
    cgs = rel.cgs
    assert rel.rounds <= cgs.num_states ** 2
    for q, q2 in rel.pairs:
        assert (q2, q) in rel.pairs
    for q in cgs.states:
        for q2 in cgs.states:
            if cgs.labels[q] != cgs.labels[q2]:
                assert (q, q2) in rel
    memo = {}
    for q, q2 in rel.pairs:
        sat = sat_set(cgs, _distinguishing_formula(rel, q, q2, memo))
        assert q in sat and q2 not in sat


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**9))
def test_distinguish_complete_at_desk_scale(seed):
    rng = random.Random(seed)
    k = rng.randint(1, 2)
    c = random_cgs(rng, max_states=4, num_agents=k, max_actions=2, props=("p",))
    rel = distinguish_structure(c)
    for q in c.states:
        for q2 in range(q + 1, c.num_states):
            if (q, q2) in rel:
                continue
            a = CGS(c.state_names, [q], k, c.propositions, c.labels, c.action_counts, c.delta, "a")
            b = CGS(c.state_names, [q2], k, c.propositions, c.labels, c.action_counts, c.delta, "b")
            assert brute_force_learn(Sample.of([a], [b]), {"not", "and", "X"}, max_size=5) is None


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9))
def test_apr_witnesses_define_their_sets(seed):
    rng = random.Random(seed)
    k = rng.randint(1, 2)
    sample = random_sample(rng, num_agents=k, max_states=3, max_actions=2)
    ops = rng.choice([FULL_FRAGMENT, {"not", "and"}, {"X", "G"}, {"and", "U"}, {"or", "F", "X"}])
    fam = apr(sample, ops)
    cgs, _ = global_structure(sample)
    for mask, phi in fam.members.items():
        assert sat_mask(cgs, phi) == mask
        assert size(phi) <= 2 ** cgs.num_states


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9))
def test_fragment_agrees_with_full_decider(seed):
    rng = random.Random(seed)
    k = rng.randint(1, 2)
    sample = random_sample(rng, num_agents=k, max_states=3, max_actions=2)
    verdict = decide_fragment(sample, FULL_FRAGMENT)
    assert verdict.separable == decide_full_atl(sample)
    if verdict.separable:
        assert check_consistency(sample, verdict.witness)
        assert verdict.witness_size <= 2 ** verdict.num_states
