"""Prompt rendering for the synthesis loop.

Every prompt the pipeline sends is assembled here from the text assets
in templates/.  Golden snapshot tests pin the rendered output, so any
wording change is test-visible.  Placeholders use `{name}` syntax and
are substituted literally; a template placeholder without a matching
slot is an error.
"""

from __future__ import annotations

import functools
import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources

from .checker import CheckReport, ErrorKind, ReasoningError
from .lang import Binary, Expr, InvariantSet, Program, negate
from .printer import pp_expr, pp_program
from .proofs import StructuredProof, format_structured_proof
from .smt import Status
from .vcgen import VcKind, VcResult, VerificationCondition


class PromptKind(Enum):
    INITIAL_SYNTHESIS = "InitialSynthesis"
    PROOF_REQUEST = "ProofRequest"
    FORMALIZE_REQUEST = "FormalizeRequest"
    FEEDBACK = "Feedback"


class PromptError(Exception):
    pass


@dataclass(frozen=True)
class PromptBundle:
    kind: PromptKind
    text: str
    slots: tuple[tuple[str, str], ...]

    @property
    def slot_map(self) -> dict[str, str]:
        return dict(self.slots)


_PLACEHOLDER_RE = re.compile(r"\{([a-z_]+)\}")


@functools.lru_cache(maxsize=None)
def _template(name: str) -> str:
    path = resources.files(__package__) / "templates" / f"{name}.txt"
    return path.read_text(encoding="utf-8")


def _render(name: str, slots: dict[str, str]) -> str:
    text = _template(name)
    needed = set(_PLACEHOLDER_RE.findall(text))
    missing = needed - set(slots)
    if missing:
        raise PromptError(f"template {name!r} is missing slots: {sorted(missing)}")
    # longest first so no key is a prefix hazard; values are not re-scanned
    for key in sorted(needed, key=len, reverse=True):
        text = text.replace("{" + key + "}", slots[key])
    return text.strip("\n")


def _bundle(kind: PromptKind, text: str, slots: dict[str, str]) -> PromptBundle:
    return PromptBundle(kind=kind, text=text, slots=tuple(sorted(slots.items())))


def _paren(e: Expr) -> str:
    return f"({pp_expr(e)})"


def _invariant_lines(invs: InvariantSet) -> str:
    if not invs.items:
        return "  (none)"
    return "\n".join(f"  {inv.id}: {pp_expr(inv.formula)}" for inv in invs.items)


def render_initial(prog: Program) -> PromptBundle:
    """Initial synthesis request: the program verbatim, then the task."""
    source = (prog.source_text or pp_program(prog)).strip("\n")
    slots = {"program": source}
    return _bundle(PromptKind.INITIAL_SYNTHESIS, _render("initial", slots), slots)


def _obligation(prog: Program, invs: InvariantSet, vc: VerificationCondition) -> tuple[str, dict[str, str]]:
    if vc.kind is VcKind.ESTABLISHMENT:
        slots = {"target": vc.target, "formula": _paren(vc.goal)}
        return _render("obligation_establishment", slots), slots
    if vc.kind is VcKind.PRESERVATION:
        by_id = {inv.id: inv.formula for inv in invs.items}
        formula = by_id.get(vc.target, vc.goal)
        slots = {
            "target": vc.target,
            "formula": _paren(formula),
            "invariants": _invariant_lines(invs),
            "loop_condition": _paren(prog.loop_cond),
        }
        return _render("obligation_preservation", slots), slots
    slots = {
        "invariants": _invariant_lines(invs),
        "exit_condition": _paren(negate(prog.loop_cond)),
        "assertion": _paren(prog.assertion),
    }
    return _render("obligation_postcondition", slots), slots


def render_proof_request(prog: Program, invs: InvariantSet,
                         vc: VerificationCondition) -> PromptBundle:
    """Ask for a structured natural-language proof of one failed VC."""
    obligation, slots = _obligation(prog, invs, vc)
    slots = dict(slots, obligation=obligation)
    return _bundle(PromptKind.PROOF_REQUEST,
                   _render("proof_request", {"obligation": obligation}), slots)


def render_formalize_request(structured: StructuredProof) -> PromptBundle:
    """The proof text above the two-part formalization instructions."""
    proof_text = format_structured_proof(structured).strip("\n")
    text = "\n\n".join([
        proof_text,
        _template("formalize_part1").strip("\n"),
        _template("formalize_part2").strip("\n"),
    ])
    return _bundle(PromptKind.FORMALIZE_REQUEST, text, {"proof": proof_text})


def _error_paragraph(err: ReasoningError) -> str:
    soft = err.solver_status in (Status.UNKNOWN, Status.TIMEOUT)
    suffix = "_soft" if soft else ""
    if err.kind is ErrorKind.INVALID_IMPLICATION:
        assert isinstance(err.formula, Binary) and err.formula.op == "==>"
        return _render("feedback_error_implication" + suffix, {
            "step": err.step_label,
            "comment": err.comment,
            "condition": _paren(err.formula.lhs),
            "conclusion": _paren(err.formula.rhs),
        })
    if err.kind is ErrorKind.UNSUPPORTED_PREMISE:
        return _render("feedback_error_premise" + suffix, {
            "step": err.step_label,
            "comment": err.comment,
            "condition": _paren(err.formula),
        })
    return _render("feedback_error_initial" + suffix, {
        "step": err.step_label,
        "condition": _paren(err.formula),
    })


def render_feedback(report: CheckReport, prog: Program,
                    invs: InvariantSet) -> PromptBundle:
    """One paragraph per reasoning error, a framing sentence keyed to the
    failed VC's kind, then the repair instructions."""
    if not report.errors:
        raise PromptError("render_feedback needs at least one error; "
                          "use render_fallback for clean reports")
    paragraphs = "\n\n".join(_error_paragraph(e) for e in report.errors)
    assertion = _paren(prog.assertion)
    if report.vc.kind is VcKind.POSTCONDITION:
        framing = _render("feedback_framing_postcondition", {"assertion": assertion})
    else:
        framing = _render("feedback_framing_failed", {
            "target": report.vc.target,
            "kind": report.vc.kind.value.lower(),
            "assertion": assertion,
        })
    slots = {"errors": paragraphs, "framing": framing, "assertion": assertion}
    return _bundle(PromptKind.FEEDBACK, _render("feedback", slots), slots)


_CHECK_PHRASE = {
    VcKind.ESTABLISHMENT: "the establishment of invariant {0}",
    VcKind.PRESERVATION: "the preservation of invariant {0}",
    VcKind.POSTCONDITION: "the post-condition implication of the assertion",
}


def render_fallback(result: VcResult, prog: Program) -> PromptBundle:
    """Coarse counterexample-style feedback for the zero-error case."""
    vc = result.vc
    if result.counterexample:
        pairs = ", ".join(f"{k} = {v}" for k, v in sorted(result.counterexample.items()))
        witness = f"A concrete counterexample is: {pairs}."
    else:
        witness = "No concrete counterexample is available for this check."
    slots = {
        "check": _CHECK_PHRASE[vc.kind].format(vc.target),
        "hypothesis": _paren(vc.hypothesis),
        "goal": _paren(vc.goal),
        "witness": witness,
    }
    return _bundle(PromptKind.FEEDBACK, _render("fallback", slots), slots)


def render_reask_invariants(reason: str, kind: PromptKind) -> PromptBundle:
    slots = {"reason": reason}
    return _bundle(kind, _render("reask_invariants", slots), slots)


def render_reask_proof(reason: str) -> PromptBundle:
    slots = {"reason": reason}
    return _bundle(PromptKind.PROOF_REQUEST, _render("reask_proof", slots), slots)


def render_reask_formalized(reason: str) -> PromptBundle:
    slots = {"reason": reason}
    return _bundle(PromptKind.FORMALIZE_REQUEST, _render("reask_formalized", slots), slots)
