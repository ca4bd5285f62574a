import itertools
import sys

import pytest
from hypothesis import strategies as st

from subsemi.classify import SubTable
from subsemi.search import SearchOptions, enumerate_min_extensions
from subsemi.symmetry import full_action
from subsemi.table import IndexSet, closure, validate
from subsemi.transform import cached_full_table

# S3 as printed: 1=(), 2=(2,3), 3=(1,2), 4=(1,2,3), 5=(1,3,2), 6=(1,3)
S3_ROWS = [
    [1, 2, 3, 4, 5, 6],
    [2, 1, 4, 3, 6, 5],
    [3, 5, 1, 6, 2, 4],
    [4, 6, 2, 5, 1, 3],
    [5, 3, 6, 1, 4, 2],
    [6, 4, 5, 2, 3, 1],
]


@pytest.fixture(scope="session")
def s3():
    return validate(S3_ROWS)


@pytest.fixture(scope="session")
def t2():
    return cached_full_table(2)


@pytest.fixture(scope="session")
def t3():
    return cached_full_table(3)


@pytest.fixture(scope="session")
def t3_raw(t3):
    t, _ = t3
    return enumerate_min_extensions(t, t.empty(), SearchOptions())


@pytest.fixture(scope="session")
def t3_classes(t3):
    t, idx = t3
    return enumerate_min_extensions(t, t.empty(), SearchOptions(strategy="bfs", symmetry=full_action(idx)))


def all_closed_sets(t):
    """Oracle: test every subset directly against the definition."""
    out = set()
    rows = t.rows
    for r in range(t.n + 1):
        for combo in itertools.combinations(range(t.n), r):
            s = set(combo)
            if all(rows[a][b] in s for a in combo for b in combo):
                out.add(IndexSet(t.n, (x + 1 for x in combo)))
    return out


@st.composite
def small_semigroups(draw, max_gens=3):
    """A standalone table: the subsemigroup of T3 generated by a few elements."""
    t, _ = cached_full_table(3)
    gens = draw(st.lists(st.integers(1, 27), min_size=1, max_size=max_gens))
    members = closure(t, IndexSet(27, gens))
    return SubTable(t, members).table


@st.composite
def subsets(draw, n):
    return IndexSet(n, draw(st.sets(st.integers(1, n), max_size=n)) if n else ())



def pytest_terminal_summary(terminalreporter):
    for name, mod in list(sys.modules.items()):
        if name.endswith("test_acceptance") and getattr(mod, "LINES", None):
            terminalreporter.section("acceptance criteria")
            for line in mod.LINES:
                terminalreporter.write_line(line)
