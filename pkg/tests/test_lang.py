"""Expression layer: substitution, negation, typing, invariant sets."""

from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from loopinv.lang import (FALSE, TRUE, Binary, BoolLit, IntLit, InvariantSet,
                          Invariant, SourceError, Type, Unary, Var, conjoin,
                          free_vars, implies, infer_type, negate, subst)
from loopinv.parser import parse_expr_text

from conftest import EXPR_NAMES, bool_exprs, int_exprs


def b(op, l, r):
    return Binary(op, l, r)


class TestConjoin:
    def test_empty_is_true(self):
        assert conjoin([]) is TRUE

    def test_singleton_passthrough(self):
        e = Var("x")
        assert conjoin([e]) is e

    def test_left_leaning(self):
        x, y, z = Var("x"), Var("y"), Var("z")
        assert conjoin([x, y, z]) == b("&&", b("&&", x, y), z)


class TestNegate:
    def test_comparison_flips(self):
        e = parse_expr_text("j <= m", ("j", "m"))
        assert negate(e) == parse_expr_text("j > m", ("j", "m"))

    def test_double_negation_collapses(self):
        e = parse_expr_text("x == 0", ("x",))
        assert negate(negate(e)) == e

    def test_bool_literals(self):
        assert negate(TRUE) == FALSE
        assert negate(FALSE) == TRUE

    @given(bool_exprs())
    def test_negate_preserves_free_vars(self, e):
        assert free_vars(negate(e)) == free_vars(e)


class TestSubst:
    def test_simple_replacement(self):
        e = parse_expr_text("x + y", ("x", "y"), boolean=False)
        out = subst(e, {"x": IntLit(3)})
        assert out == b("+", IntLit(3), Var("y"))

    def test_no_capture_of_untouched_names(self):
        e = parse_expr_text("x < y", ("x", "y"))
        assert subst(e, {"z": IntLit(0)}) == e

    @given(bool_exprs(), st.sampled_from(EXPR_NAMES), st.integers(-9, 9))
    def test_subst_removes_the_variable(self, e, name, val):
        out = subst(e, {name: IntLit(val)})
        assert name not in free_vars(out)

    @given(int_exprs())
    def test_identity_subst_is_noop(self, e):
        assert subst(e, {}) == e


class TestInferType:
    def test_arith_is_int(self):
        e = parse_expr_text("x + 2 * y", ("x", "y"), boolean=False)
        assert infer_type(e, frozenset(("x", "y"))) is Type.INT

    def test_comparison_is_bool(self):
        e = parse_expr_text("x + 1 <= y", ("x", "y"))
        assert infer_type(e, frozenset(("x", "y"))) is Type.BOOL

    def test_logic_over_int_rejected(self):
        with pytest.raises(SourceError):
            infer_type(b("&&", Var("x"), Var("y")), frozenset(("x", "y")))

    def test_undeclared_variable_rejected(self):
        with pytest.raises(SourceError) as exc:
            infer_type(Var("q"), frozenset(("x",)))
        assert exc.value.code == "undeclared-variable"


class TestInvariantSet:
    def test_duplicate_ids_rejected(self):
        with pytest.raises(SourceError) as exc:
            InvariantSet((Invariant("i1", TRUE), Invariant("i1", FALSE)))
        assert exc.value.code == "duplicate-id"

    def test_empty_conjunction_is_true(self):
        assert InvariantSet(()).conjunction() is TRUE

    def test_len(self):
        s = InvariantSet((Invariant("i1", TRUE), Invariant("i2", FALSE)))
        assert len(s) == 2


def test_implies_shape():
    assert implies(Var("p"), Var("q")) == b("==>", Var("p"), Var("q"))


@given(bool_exprs())
def test_free_vars_subset_of_universe(e):
    assert free_vars(e) <= set(EXPR_NAMES)
