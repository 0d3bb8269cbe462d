import itertools

import pytest

from semiham import engine as eng


def grow(st, vertices):
    """Extend the path by ``vertices`` in order; the last one ends at the head."""
    for v in vertices:
        eng.extend_path(st, v)
    return st


def brute_hamiltonian(arc_list, n):
    """Permutation search over the used arcs, ignoring loops."""
    edges = {frozenset((a.square, a.circle)) for a in arc_list
             if a.used and a.square != a.circle}
    if n < 3:
        return False
    for perm in itertools.permutations(range(2, n + 1)):
        cyc = (1, *perm)
        if all(frozenset((cyc[i], cyc[(i + 1) % n])) in edges for i in range(n)):
            return True
    return False


@pytest.fixture
def path_state():
    """Randomized state on n=40 whose path is 30, 29, ..., 1 (head 30)."""
    st = eng.new_process(40, seed=5, mode=eng.Mode.RANDOMIZED)
    return grow(st, range(1, 31))


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
