"""Structured and formalized proof parsing and formatting."""

from __future__ import annotations

import pytest

from loopinv.printer import pp_expr
from loopinv.proofs import (FormalizedProof, ProofFormatError,
                            StructuredProof, format_formalized_proof,
                            format_structured_proof, parse_formalized_proof,
                            parse_structured_proof, unmatched_labels)

STRUCTURED = """\
[Initial]
- Invariant i1: `a >= -(j - 1) && a <= (j - 1)`
- Negated loop condition: `j > m`

[Proof]
[STEP 1: Bound a at loop termination]
- Substituting j = m + 1 into i1 bounds a by m on both sides.

[STEP 2]
- Nothing else is needed.

[Conclusion]
At loop exit the assertion holds.
"""

FORMALIZED = """\
[STEP 1: Bound a at loop termination]
[Initial]
a >= -(j - 1) && a <= (j - 1) // initial
j > m // initial

[Proof]
(j > m) ==> (j == m + 1) // At loop termination, j is m + 1.
(j == m + 1) && (a >= -(j - 1) && a <= (j - 1)) ==> (a >= -m && a <= m) // Substitute j.

[Conclusion]
a >= -m && a <= m // The assertion holds at termination.
"""


class TestStructuredProof:
    def test_parse_sections_and_steps(self):
        sp = parse_structured_proof(STRUCTURED)
        assert "Invariant i1" in sp.initial
        assert [s.label for s in sp.steps] == [
            "STEP 1: Bound a at loop termination", "STEP 2"]
        assert sp.steps[0].body.startswith("- Substituting")
        assert sp.conclusion == "At loop exit the assertion holds."

    def test_format_round_trip(self):
        sp = parse_structured_proof(STRUCTURED)
        assert parse_structured_proof(format_structured_proof(sp)) == sp

    def test_code_fences_are_ignored(self):
        fenced = "```\n" + STRUCTURED + "```\n"
        assert parse_structured_proof(fenced) == parse_structured_proof(STRUCTURED)

    def test_missing_conclusion_rejected(self):
        text = "[Initial]\nfacts\n\n[Proof]\n[STEP 1]\nbody\n"
        with pytest.raises(ProofFormatError) as exc:
            parse_structured_proof(text)
        assert exc.value.code == "missing-section"

    def test_out_of_order_sections_rejected(self):
        text = "[Proof]\n[STEP 1]\nbody\n\n[Initial]\nfacts\n\n[Conclusion]\ndone\n"
        with pytest.raises(ProofFormatError) as exc:
            parse_structured_proof(text)
        assert exc.value.code == "missing-section"

    def test_no_steps_rejected(self):
        text = "[Initial]\nfacts\n\n[Proof]\njust prose\n\n[Conclusion]\ndone\n"
        with pytest.raises(ProofFormatError) as exc:
            parse_structured_proof(text)
        assert exc.value.code == "zero-steps"

    def test_step_numbering_must_count_up(self):
        text = "[Initial]\nf\n\n[Proof]\n[STEP 1]\nx\n[STEP 3]\ny\n\n[Conclusion]\nd\n"
        with pytest.raises(ProofFormatError) as exc:
            parse_structured_proof(text)
        assert exc.value.code == "non-monotone-steps"


class TestFormalizedProof:
    def test_parse_full_step(self, walk_program):
        fp = parse_formalized_proof(FORMALIZED, walk_program)
        assert len(fp.steps) == 1
        step = fp.steps[0]
        assert step.label == "STEP 1: Bound a at loop termination"
        assert [c.tag for c in step.initial] == ["initial", "initial"]
        assert len(step.implications) == 2
        first = step.implications[0]
        assert pp_expr(first.premise) == "j > m"
        assert pp_expr(first.conclusion) == "j == m + 1"
        assert first.comment == "At loop termination, j is m + 1."
        assert pp_expr(step.conclusion.formula) == "a >= -m && a <= m"

    def test_untagged_initial_lines_default_to_initial(self, walk_program):
        text = """\
[STEP 1]
[Initial]
j > m

[Proof]
(j > m) ==> (j >= m) // weaken

[Conclusion]
j >= m
"""
        fp = parse_formalized_proof(text, walk_program)
        assert fp.steps[0].initial[0].tag == "initial"

    def test_anonymous_single_step_accepted(self, walk_program):
        text = """\
[Initial]
j > m // initial

[Proof]
(j > m) ==> (j >= m + 1) // integers

[Conclusion]
j >= m + 1
"""
        fp = parse_formalized_proof(text, walk_program)
        assert fp.steps[0].label == ""
        assert fp.steps[0].display_label(1) == "STEP 1"

    def test_declaration_lines_bind_fresh_names(self, walk_program):
        text = """\
[STEP 1]
[Initial]
k == j - 1 // declaration
k >= 0 // derived

[Proof]
(k >= 0) ==> (j >= 1) // shift by one... wrong on purpose? no: k == j - 1 so j = k + 1 >= 1

[Conclusion]
j >= 1
"""
        fp = parse_formalized_proof(text, walk_program)
        step = fp.steps[0]
        assert "k" in step.declared

    def test_unbound_name_rejected(self, walk_program):
        text = """\
[STEP 1]
[Initial]
q > 0 // initial

[Proof]
(q > 0) ==> (q >= 1) // integers

[Conclusion]
q >= 1
"""
        with pytest.raises(ProofFormatError) as exc:
            parse_formalized_proof(text, walk_program)
        assert exc.value.code == "unbound-name"

    def test_proof_line_without_implication_rejected(self, walk_program):
        text = """\
[STEP 1]
[Initial]
j > m // initial

[Proof]
j >= m // not an implication

[Conclusion]
j >= m
"""
        with pytest.raises(ProofFormatError):
            parse_formalized_proof(text, walk_program)

    def test_format_round_trip(self, walk_program):
        fp = parse_formalized_proof(FORMALIZED, walk_program)
        again = parse_formalized_proof(format_formalized_proof(fp),
                                       walk_program)
        assert again == fp

    def test_unmatched_labels(self, walk_program):
        sp = parse_structured_proof(STRUCTURED)
        fp = parse_formalized_proof(FORMALIZED, walk_program)
        # every formalized label names a structured step here
        assert unmatched_labels(fp, sp) == []
        renamed = FormalizedProof(
            (fp.steps[0].__class__(label="STEP 7: Invented",
                                   initial=fp.steps[0].initial,
                                   implications=fp.steps[0].implications,
                                   conclusion=fp.steps[0].conclusion),))
        assert unmatched_labels(renamed, sp) == ["STEP 7: Invented"]
