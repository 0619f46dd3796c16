"""Verification condition generation and discharge."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loopinv.lang import (Assign, Assume, Binary, Havoc, If, IntLit,
                          Invariant, InvariantSet, Skip, Var)
from loopinv.parser import parse_expr_text, parse_program
from loopinv.printer import pp_expr
from loopinv.smt import Status
from loopinv.vcgen import (VcKind, all_valid, check_vcs, generate_vcs,
                           pre_state_facts, wp)

from conftest import EXPR_NAMES, bool_exprs


class TestWp:
    def test_assign_is_substitution(self):
        post = parse_expr_text("x == 1", ("x",))
        pre, fresh = wp([Assign("x", IntLit(1))], post)
        assert pp_expr(pre) == "1 == 1"
        assert fresh == ()

    def test_sequencing_composes_right_to_left(self):
        post = parse_expr_text("x == y", ("x", "y"))
        stmts = [Assign("x", Binary("+", Var("y"), IntLit(1))),
                 Assign("y", Binary("+", Var("y"), IntLit(1)))]
        pre, _ = wp(stmts, post)
        assert pp_expr(pre) == "y + 1 == y + 1"

    def test_havoc_renames_fresh(self):
        post = parse_expr_text("x >= 0", ("x",))
        pre, fresh = wp([Havoc("x")], post)
        assert len(fresh) == 1
        assert pp_expr(pre) == f"{fresh[0]} >= 0"

    def test_if_splits_on_both_branches(self):
        post = parse_expr_text("x >= 0", ("x",))
        cond = parse_expr_text("x > 0", ("x",))
        s = If(cond, (Assign("x", Binary("-", Var("x"), IntLit(1))),), ())
        pre, _ = wp([s], post)
        assert pp_expr(pre) == "(x > 0 ==> x - 1 >= 0) && (x <= 0 ==> x >= 0)"

    def test_assume_becomes_implication(self):
        post = parse_expr_text("x >= 0", ("x",))
        pre, _ = wp([Assume(parse_expr_text("x > 5", ("x",)))], post)
        assert pp_expr(pre) == "x > 5 ==> x >= 0"

    def test_skip_is_identity(self):
        post = parse_expr_text("x == 0", ("x",))
        pre, _ = wp([Skip()], post)
        assert pre == post

    @given(bool_exprs(), st.sampled_from(EXPR_NAMES), st.integers(-5, 5))
    @settings(max_examples=50)
    def test_wp_of_assign_matches_subst(self, post, name, k):
        from loopinv.lang import subst
        pre, _ = wp([Assign(name, IntLit(k))], post)
        assert pre == subst(post, {name: IntLit(k)})


class TestPreStateFacts:
    def test_walk_entry_facts(self, walk_program):
        hyp, aux = pre_state_facts(walk_program)
        assert pp_expr(hyp) == "a == 0 && j == 1 && m > 0"
        assert aux == ()

    def test_uninitialized_variable_is_unconstrained(self):
        src = """\
int main() {
    int n;
    int i = 0;
    while (i < n) { i++; }
    assert(i >= 0);
    return 0;
}
"""
        prog = parse_program(src)
        hyp, aux = pre_state_facts(prog)
        assert pp_expr(hyp) == "i == 0"
        assert aux == ()

    def test_nondet_initializer_leaves_variable_free(self):
        src = """\
extern int unknown();
int main() {
    int r = unknown();
    if (r < 0) return 0;
    while (r >= 3) { r = r - 3; }
    assert(r >= 0);
    return 0;
}
"""
        prog = parse_program(src)
        hyp, aux = pre_state_facts(prog)
        # the havoc result stays as an auxiliary symbol tied to r by the
        # guard; it is reported so VCs can quantify over it
        assert pp_expr(hyp) == "r == r__h1 && r__h1 >= 0"
        assert aux == ("r__h1",)

    def test_copied_initial_value_is_linked(self):
        src = """\
int main() {
    int x;
    int y = 0;
    int z = x;
    if (x <= 0) return 0;
    while (x > 0) { x--; y++; }
    assert(y == z);
    return 0;
}
"""
        prog = parse_program(src)
        hyp, _ = pre_state_facts(prog)
        assert pp_expr(hyp) == "y == 0 && z == x && x > 0"


class TestGenerateVcs:
    def test_count_law(self, walk_program):
        for n in range(0, 5):
            invs = InvariantSet(tuple(
                Invariant(f"i{k}", parse_expr_text("j >= 1", ("j",)))
                for k in range(1, n + 1)))
            vcs = generate_vcs(walk_program, invs)
            assert len(vcs) == 2 * n + 1

    def test_empty_set_still_checks_postcondition(self, walk_program):
        vcs = generate_vcs(walk_program, InvariantSet(()))
        assert len(vcs) == 1
        assert vcs[0].kind is VcKind.POSTCONDITION
        assert vcs[0].target == "assertion"

    def test_kinds_and_targets(self, walk_program, weak_walk_invariants):
        vcs = generate_vcs(walk_program, weak_walk_invariants)
        kinds = [(vc.kind, vc.target) for vc in vcs]
        assert kinds == [
            (VcKind.ESTABLISHMENT, "i1"),
            (VcKind.ESTABLISHMENT, "i2"),
            (VcKind.ESTABLISHMENT, "i3"),
            (VcKind.PRESERVATION, "i1"),
            (VcKind.PRESERVATION, "i2"),
            (VcKind.PRESERVATION, "i3"),
            (VcKind.POSTCONDITION, "assertion"),
        ]

    def test_establishment_uses_entry_facts(self, walk_program,
                                            weak_walk_invariants):
        vcs = generate_vcs(walk_program, weak_walk_invariants)
        est = vcs[0]
        assert pp_expr(est.hypothesis) == "a == 0 && j == 1 && m > 0"

    def test_preservation_hypothesis_includes_all_invariants_and_guard(
            self, walk_program, weak_walk_invariants):
        vcs = generate_vcs(walk_program, weak_walk_invariants)
        pres = [vc for vc in vcs if vc.kind is VcKind.PRESERVATION][0]
        text = pp_expr(pres.hypothesis)
        for inv in weak_walk_invariants.items:
            assert pp_expr(inv.formula) in text
        assert "j <= m" in text

    def test_postcondition_uses_negated_guard(self, walk_program,
                                              weak_walk_invariants):
        vcs = generate_vcs(walk_program, weak_walk_invariants)
        post = vcs[-1]
        assert "j > m" in pp_expr(post.hypothesis)
        assert post.goal == walk_program.assertion


@pytest.mark.slow
class TestDischarge:
    def test_strong_invariants_all_valid(self, walk_program,
                                         strong_walk_invariants, pool, budget):
        results = check_vcs(generate_vcs(walk_program, strong_walk_invariants),
                            pool, budget)
        assert all_valid(results)
        assert len(results) == 9

    def test_weak_invariants_fail_exactly_postcondition(
            self, walk_program, weak_walk_invariants, pool, budget):
        results = check_vcs(generate_vcs(walk_program, weak_walk_invariants),
                            pool, budget)
        failing = [r for r in results if r.status is not Status.VALID]
        assert len(failing) == 1
        bad = failing[0]
        assert bad.vc.kind is VcKind.POSTCONDITION
        assert bad.status is Status.INVALID
        assert bad.counterexample is not None
        # the model must actually break the implication
        from loopinv.interp import eval_expr
        from loopinv.lang import implies
        formula = implies(bad.vc.hypothesis, bad.vc.goal)
        assert eval_expr(formula, bad.counterexample) is False

    def test_empty_invariants_insufficient_here(self, walk_program, pool,
                                                budget):
        results = check_vcs(generate_vcs(walk_program, InvariantSet(())),
                            pool, budget)
        assert results[0].status is Status.INVALID
