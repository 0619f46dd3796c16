"""Corpus benchmarking: similarity metric, refinement rate, summaries."""

from __future__ import annotations

import json
from fractions import Fraction

import pytest
from hypothesis import given, settings

from loopinv.bench import (CorpusResult, clause_set, jaccard, load_corpus,
                           refinement_success_rate, run_corpus)
from loopinv.engine import (Classification, Outcome, RoundRecord, RunConfig,
                            RunReport, frozen_clock)
from loopinv.gateway import TokenCount
from loopinv.lang import Invariant, InvariantSet, TRUE
from loopinv.parser import parse_expr_text, parse_invariant_block
from loopinv.smt import SolverBudget
from loopinv.vcgen import VcKind, VerificationCondition

from conftest import (CORPUS, EXPR_NAMES, STRONG_WALK_INVARIANTS,
                      WEAK_WALK_INVARIANTS, bool_exprs)


def invs(*formulas: str) -> InvariantSet:
    return InvariantSet(tuple(
        Invariant(f"i{k}", parse_expr_text(f, EXPR_NAMES))
        for k, f in enumerate(formulas, start=1)))


class TestJaccard:
    def test_both_empty_is_one(self):
        assert jaccard(InvariantSet(()), InvariantSet(())) == Fraction(1)

    def test_empty_vs_nonempty_is_zero(self):
        assert jaccard(InvariantSet(()), invs("x >= 0")) == Fraction(0)

    def test_identical_sets_score_one(self):
        a = invs("x >= 0", "y == x")
        assert jaccard(a, a) == Fraction(1)

    def test_symmetry(self):
        a, b = invs("x >= 0", "y > 1"), invs("x >= 0")
        assert jaccard(a, b) == jaccard(b, a) == Fraction(1, 2)

    def test_conjunctions_split_before_comparing(self):
        one = invs("x >= 0 && y >= 0")
        two = invs("x >= 0", "y >= 0")
        assert jaccard(one, two) == Fraction(1)

    def test_commutative_operands_match(self):
        assert jaccard(invs("x == y"), invs("y == x")) == Fraction(1)

    def test_invariant_ids_are_irrelevant(self):
        a = InvariantSet((Invariant("p", parse_expr_text("x >= 0", EXPR_NAMES)),))
        b = InvariantSet((Invariant("q", parse_expr_text("x >= 0", EXPR_NAMES)),))
        assert jaccard(a, b) == Fraction(1)

    def test_weak_vs_strong_walk_sets(self, walk_program):
        weak = parse_invariant_block(WEAK_WALK_INVARIANTS, walk_program)
        strong = parse_invariant_block(STRONG_WALK_INVARIANTS, walk_program)
        # shared: the range clause (identical modulo arithmetic spelling is
        # NOT folded; these spell the bounds differently), j >= 1, m > 0.
        # The distinct spellings of the range clause keep the score at 1/2.
        assert jaccard(weak, strong) == Fraction(1, 2)

    @given(a=bool_exprs(4), b=bool_exprs(4))
    @settings(max_examples=40)
    def test_bounds_and_symmetry_hold(self, a, b):
        sa = InvariantSet((Invariant("i1", a),))
        sb = InvariantSet((Invariant("i1", b),))
        j = jaccard(sa, sb)
        assert 0 <= j <= 1
        assert j == jaccard(sb, sa)


class TestClauseSet:
    def test_nested_conjunctions_flatten(self):
        got = clause_set(invs("x >= 0 && (y >= 0 && z >= 0)"))
        assert len(got) == 3

    def test_disjunction_stays_whole(self):
        got = clause_set(invs("x == 0 || y == 0"))
        assert len(got) == 1


def _feedback_round(index, before: InvariantSet, after: InvariantSet | None):
    sel = VerificationCondition(kind=VcKind.POSTCONDITION, target="assertion",
                                hypothesis=TRUE, goal=TRUE, quantified_vars=())
    return RoundRecord(index=index, invariants=before, selected_vc=sel,
                       refined_invariants=after)


class TestRefinementRate:
    def test_two_of_three_iterations_improve(self):
        gold = invs("x >= 0", "y >= 0", "x <= z")
        start = invs("x >= 0")
        better = invs("x >= 0", "y >= 0")
        sideways = invs("x >= 0", "y > 5")  # same overlap, larger union
        rounds = [
            _feedback_round(0, start, better),      # 1/3 -> 2/4: improved
            _feedback_round(1, better, sideways),   # 2/4 -> 1/4... regressed
            _feedback_round(2, sideways, gold),     # -> 1: improved
        ]
        report = RunReport(program="p", seed=0, outcome=Outcome.SOLVED,
                           classification=Classification.FEEDBACK_DRIVEN_SUCCESS,
                           rounds=rounds, final_invariants=gold,
                           tokens=TokenCount(), elapsed_seconds=0.0)
        score = refinement_success_rate([report], {"p": gold})
        assert (score.improved, score.counted) == (2, 3)
        assert score.rate == Fraction(2, 3)

    def test_non_feedback_rounds_not_counted(self):
        gold = invs("x >= 0")
        rounds = [RoundRecord(index=0, invariants=gold)]
        report = RunReport(program="p", seed=0, outcome=Outcome.SOLVED,
                           classification=Classification.DIRECT_SUCCESS,
                           rounds=rounds, final_invariants=gold,
                           tokens=TokenCount(), elapsed_seconds=0.0)
        score = refinement_success_rate([report], {"p": gold})
        assert score.counted == 0
        assert score.rate is None

    def test_programs_without_gold_are_excluded(self):
        gold = invs("x >= 0")
        rounds = [_feedback_round(0, invs("y >= 0"), gold)]
        report = RunReport(program="nameless", seed=0, outcome=Outcome.SOLVED,
                           classification=Classification.FEEDBACK_DRIVEN_SUCCESS,
                           rounds=rounds, final_invariants=gold,
                           tokens=TokenCount(), elapsed_seconds=0.0)
        score = refinement_success_rate([report], {})
        assert score.counted == 0
        assert score.excluded_programs == ("nameless",)


@pytest.mark.slow
class TestCorpus:
    def test_load_corpus_finds_everything(self):
        entries = load_corpus(CORPUS)
        assert len(entries) == 10
        assert all(e.skip_reason is None for e in entries)
        assert all(e.gold is not None for e in entries)
        assert all(e.transcript_path is not None for e in entries)

    def test_unparseable_program_is_skipped(self, tmp_path):
        (tmp_path / "broken.c").write_text("int main() { nope", encoding="utf-8")
        entries = load_corpus(tmp_path)
        assert len(entries) == 1
        assert entries[0].skip_reason is not None

    def test_missing_transcript_skips_at_run_time(self, tmp_path, pool):
        src = (CORPUS / "doubling_sum.c").read_text(encoding="utf-8")
        (tmp_path / "doubling_sum.c").write_text(src, encoding="utf-8")
        result = run_corpus(tmp_path, RunConfig(solver=SolverBudget(5.0)),
                            clock=frozen_clock)
        assert result.entries[0].skip_reason is not None
        assert result.summary_dict()["skipped"]

    def test_full_replay_summary(self):
        result = run_corpus(CORPUS, RunConfig(solver=SolverBudget(5.0)),
                            clock=frozen_clock)
        d = result.summary_dict()
        assert d["format"] == "bench-summary"
        assert d["version"] == 1
        assert d["programs"] == 10
        assert d["solved_count"] == 10
        assert d["success_rate"] == {"num": 10, "den": 10}
        assert d["direct_successes"] == 6
        assert d["feedback_driven_successes"] == 4
        assert d["refinement_success_rate"]["improved"] == 4
        assert d["refinement_success_rate"]["counted"] == 4
        assert d["refinement_success_rate"]["rate"] == {"num": 1, "den": 1}
        assert len(d["runs"]) == 10
        json.loads(result.summary_json())

    def test_summary_is_deterministic(self):
        cfg = RunConfig(solver=SolverBudget(5.0))
        a = run_corpus(CORPUS, cfg, clock=frozen_clock).summary_json()
        b = run_corpus(CORPUS, cfg, clock=frozen_clock).summary_json()
        assert a == b

    def test_parallel_matches_serial(self):
        cfg = RunConfig(solver=SolverBudget(5.0))
        serial = run_corpus(CORPUS, cfg, clock=frozen_clock).summary_json()
        threaded = run_corpus(CORPUS, cfg, jobs=4,
                              clock=frozen_clock).summary_json()
        assert serial == threaded

    def test_repeats_reuse_the_transcript(self):
        cfg = RunConfig(solver=SolverBudget(5.0))
        result = run_corpus(CORPUS, cfg, repeats=2, clock=frozen_clock)
        d = result.summary_dict()
        assert d["total_runs"] == 20
        seeds = {(r["program"], r["seed"]) for r in d["runs"]}
        assert len(seeds) == 20
        # prompts do not depend on the seed, so replay covers every repeat
        assert d["success_rate"] == {"num": 20, "den": 20}
