"""Shared fixtures: one solver pool per session, the bundled corpus,
and hypothesis strategies for expression trees."""

from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import strategies as st

from loopinv.lang import Binary, IntLit, Unary, Var
from loopinv.parser import parse_invariant_block, parse_program
from loopinv.smt import SolverBudget, SolverPool

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"
GOLDEN = Path(__file__).resolve().parent / "golden"

EXPR_NAMES = ("x", "y", "z")

WEAK_WALK_INVARIANTS = """\
loop invariant i1: a >= -(j - 1) && a <= (j - 1);
loop invariant i2: j >= 1;
loop invariant i3: m > 0;
"""

STRONG_WALK_INVARIANTS = """\
loop invariant i1: a >= -j + 1 && a <= j - 1;
loop invariant i2: j >= 1;
loop invariant i3: j <= m + 1;
loop invariant i4: m > 0;
"""


@pytest.fixture(scope="session")
def budget() -> SolverBudget:
    return SolverBudget(per_query_timeout=5.0)


@pytest.fixture(scope="session")
def pool():
    p = SolverPool()
    yield p
    p.close()


@pytest.fixture(scope="session")
def walk_program():
    path = CORPUS / "nondet_walk.c"
    return parse_program(path.read_text(encoding="utf-8"), name="nondet_walk")


@pytest.fixture(scope="session")
def weak_walk_invariants(walk_program):
    return parse_invariant_block(WEAK_WALK_INVARIANTS, walk_program)


@pytest.fixture(scope="session")
def strong_walk_invariants(walk_program):
    return parse_invariant_block(STRONG_WALK_INVARIANTS, walk_program)


def int_exprs(max_leaves: int = 6) -> st.SearchStrategy:
    base = st.one_of(
        st.integers(-20, 20).map(IntLit),
        st.sampled_from(EXPR_NAMES).map(Var),
    )

    def extend(children):
        return st.one_of(
            st.tuples(st.sampled_from(("+", "-", "*")), children, children)
              .map(lambda t: Binary(t[0], t[1], t[2])),
            # negation only over non-literals; -5 parses back as a literal
            children.filter(lambda e: not isinstance(e, IntLit))
                    .map(lambda e: Unary("-", e)),
        )

    return st.recursive(base, extend, max_leaves=max_leaves)


def bool_exprs(max_leaves: int = 6) -> st.SearchStrategy:
    atoms = st.tuples(
        st.sampled_from(("<", "<=", ">", ">=", "==", "!=")),
        int_exprs(4), int_exprs(4),
    ).map(lambda t: Binary(t[0], t[1], t[2]))

    def extend(children):
        return st.one_of(
            st.tuples(st.sampled_from(("&&", "||", "==>")), children, children)
              .map(lambda t: Binary(t[0], t[1], t[2])),
            children.map(lambda e: Unary("!", e)),
        )

    return st.recursive(atoms, extend, max_leaves=max_leaves)
