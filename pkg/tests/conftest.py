import pytest

from atlearn.structures import CGS, Sample, kripke

# lines reported by tests/test_acceptance.py, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def single_state(labels=(), name="c", propositions=("p",)):
    return kripke({"s0": ["s0"]}, {"s0": labels}, name=name, propositions=propositions)


@pytest.fixture
def p_sample():
    return Sample.of([single_state(["p"], "pos")], [single_state([], "neg")])


@pytest.fixture
def pre_example():
    """2 agents, d(q)=(2,2); (1,1),(1,2),(2,2) -> t1 and (2,1) -> t2; g holds at t1."""
    delta = {
        (0, (1, 1)): 1, (0, (1, 2)): 1, (0, (2, 1)): 2, (0, (2, 2)): 1,
        (1, (1, 1)): 1, (2, (1, 1)): 2,
    }
    return CGS(["q", "t1", "t2"], [0], 2, ["g"], [[], ["g"], []],
               [[2, 2], [1, 1], [1, 1]], delta, "pre")
