"""The refinement loop: propose, verify, prove, formalize, check, refine.

One run drives a Synthesizer session through invariant proposal and
refinement while a Formalizer session (fresh each round, so its context
stays clean) translates the Synthesizer's natural-language proof into
checkable implications.  Budgets are enforced before every model send
and every solver batch; everything that happened is captured in a
versioned run report so replays can be compared byte for byte.
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

from .checker import CheckReport, check_proof
from .gateway import (FORMALIZER, SYNTHESIZER, Backend, ChatSession,
                      GatewayError, TokenCount)
from .lang import InvariantSet, Program
from .parser import InvariantBlockError, parse_invariant_block
from .printer import pp_expr
from .prompts import (PromptBundle, PromptKind, render_fallback, render_feedback,
                      render_formalize_request, render_initial,
                      render_proof_request, render_reask_formalized,
                      render_reask_invariants, render_reask_proof)
from .proofs import (FormalizedProof, ProofFormatError, StructuredProof,
                     parse_formalized_proof, parse_structured_proof)
from .smt import (SolverBudget, SolverPool, SolverProtocolError,
                  SolverUnavailableError, Status)
from .vcgen import (VcKind, VcResult, VerificationCondition, all_valid,
                    check_vcs, generate_vcs)

REPORT_FORMAT = "synthesis-run"
REPORT_VERSION = 1


class Outcome(Enum):
    SOLVED = "Solved"
    BUDGET_EXHAUSTED = "BudgetExhausted"
    ERROR = "Error"


class Classification(Enum):
    DIRECT_SUCCESS = "DirectSuccess"
    FEEDBACK_DRIVEN_SUCCESS = "FeedbackDrivenSuccess"
    FAILURE = "Failure"


EXIT_CODES = {
    Outcome.SOLVED: 0,
    Outcome.BUDGET_EXHAUSTED: 2,
    Outcome.ERROR: 3,
}


@dataclass(frozen=True)
class RunConfig:
    wall_clock_budget: float = 600.0
    token_budget: int = 150_000
    solver: SolverBudget = SolverBudget()
    rng_seed: int = 0
    max_feedback_rounds: int | None = None

    def __post_init__(self):
        if self.wall_clock_budget <= 0:
            raise ValueError("wall_clock_budget must be positive")
        if self.token_budget <= 0:
            raise ValueError("token_budget must be positive")
        if self.max_feedback_rounds is not None and self.max_feedback_rounds < 0:
            raise ValueError("max_feedback_rounds must be >= 0")


def frozen_clock() -> float:
    """Clock for replay runs: time never passes, reports stay identical."""
    return 0.0


@dataclass
class RoundRecord:
    """Everything one loop iteration did, in the order it happened."""

    index: int
    invariants: InvariantSet
    vc_results: list[VcResult] = field(default_factory=list)
    selected_vc: VerificationCondition | None = None
    natural_proof: str | None = None
    structured_ok: bool | None = None
    formalized_proof: str | None = None
    formalized_ok: bool | None = None
    proof_check: CheckReport | None = None
    feedback: str | None = None
    refined_invariants: InvariantSet | None = None
    reverified: bool = False
    notes: list[str] = field(default_factory=list)
    tokens: TokenCount = TokenCount()
    elapsed_seconds: float = 0.0

    @property
    def is_feedback_round(self) -> bool:
        return self.selected_vc is not None


@dataclass
class RunReport:
    program: str
    seed: int
    outcome: Outcome
    classification: Classification
    rounds: list[RoundRecord]
    final_invariants: InvariantSet | None
    tokens: TokenCount
    elapsed_seconds: float
    error: str | None = None

    @property
    def feedback_rounds(self) -> int:
        return sum(1 for r in self.rounds if r.is_feedback_round)

    def to_json_dict(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "version": REPORT_VERSION,
            "program": self.program,
            "seed": self.seed,
            "outcome": self.outcome.value,
            "classification": self.classification.value,
            "feedback_rounds": self.feedback_rounds,
            "tokens": {"input": self.tokens.input, "output": self.tokens.output},
            "elapsed_seconds": round(self.elapsed_seconds, 3),
            "error": self.error,
            "final_invariants": (_invariant_list(self.final_invariants)
                                 if self.final_invariants is not None else None),
            "rounds": [_round_dict(r) for r in self.rounds],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True,
                          ensure_ascii=False) + "\n"


def _invariant_list(invs: InvariantSet) -> list[str]:
    return [f"{inv.id}: {pp_expr(inv.formula)}" for inv in invs.items]


def _vc_dict(vc: VerificationCondition) -> dict:
    return {"kind": vc.kind.value, "target": vc.target}


def _vc_result_dict(r: VcResult) -> dict:
    return {
        "kind": r.vc.kind.value,
        "target": r.vc.target,
        "status": r.status.value,
        "counterexample": r.counterexample,
        "detail": r.detail or None,
    }


def _check_report_dict(rep: CheckReport) -> dict:
    return {
        "vc": _vc_dict(rep.vc),
        "checked_implications": rep.checked_implications,
        "errors": [{
            "kind": e.kind.value,
            "step": e.step_label,
            "formula": pp_expr(e.formula),
            "comment": e.comment,
            "solver_status": e.solver_status.value,
        } for e in rep.errors],
    }


def _round_dict(r: RoundRecord) -> dict:
    return {
        "index": r.index,
        "invariants": _invariant_list(r.invariants),
        "vc_results": [_vc_result_dict(x) for x in r.vc_results],
        "all_valid": bool(r.vc_results) and all_valid(r.vc_results),
        "selected_vc": _vc_dict(r.selected_vc) if r.selected_vc else None,
        "natural_proof": r.natural_proof,
        "structured_ok": r.structured_ok,
        "formalized_proof": r.formalized_proof,
        "formalized_ok": r.formalized_ok,
        "proof_check": _check_report_dict(r.proof_check) if r.proof_check else None,
        "feedback": r.feedback,
        "refined_invariants": (_invariant_list(r.refined_invariants)
                               if r.refined_invariants is not None else None),
        "reverified": r.reverified,
        "notes": r.notes,
        "tokens": {"input": r.tokens.input, "output": r.tokens.output},
        "elapsed_seconds": round(r.elapsed_seconds, 3),
    }


_KIND_ORDER = (VcKind.ESTABLISHMENT, VcKind.PRESERVATION, VcKind.POSTCONDITION)


def select_failed_vc(results: Sequence[VcResult],
                     rng: random.Random) -> VerificationCondition:
    """Pick the condition to work on next.

    Failures are attacked in deductive order: establishment before
    preservation before the post-condition implication.  Within the
    first failing kind the choice is uniform under the caller's rng;
    Unknown and Timeout count as failures just like Invalid.
    """
    failed = [r for r in results if r.status is not Status.VALID]
    if not failed:
        raise ValueError("select_failed_vc requires at least one non-Valid result")
    for kind in _KIND_ORDER:
        of_kind = [r for r in failed if r.vc.kind is kind]
        if of_kind:
            return of_kind[rng.randrange(len(of_kind))].vc
    raise AssertionError("unreachable: failed results must have a kind")


def fallback_feedback(results: Sequence[VcResult], report: CheckReport | None,
                      prog: Program,
                      selected: VerificationCondition) -> PromptBundle:
    """Coarse feedback when proof checking surfaced no usable error.

    Names the failing check and embeds its counterexample when the
    solver produced one; used only when the targeted path comes up
    empty-handed.
    """
    for r in results:
        if r.vc is selected:
            return render_fallback(r, prog)
    # selection always comes from `results`, but stay total
    return render_fallback(VcResult(selected, Status.UNKNOWN), prog)


class _Stop(Exception):
    def __init__(self, outcome: Outcome, reason: str | None = None):
        super().__init__(reason or outcome.value)
        self.outcome = outcome
        self.reason = reason


class _Run:
    def __init__(self, prog: Program, cfg: RunConfig, backend: Backend,
                 pool: SolverPool | None, clock: Callable[[], float]):
        self.prog = prog
        self.cfg = cfg
        self.backend = backend
        self.pool = pool
        self.own_pool = pool is None
        self.clock = clock
        self.t0 = clock()
        self.rng = random.Random(cfg.rng_seed)
        self.synth = ChatSession(SYNTHESIZER, backend)
        self.sessions: list[ChatSession] = [self.synth]
        self.rounds: list[RoundRecord] = []

    # budget plumbing

    def elapsed(self) -> float:
        return self.clock() - self.t0

    def tokens(self) -> TokenCount:
        total = TokenCount()
        for s in self.sessions:
            total = total + s.token_count
        return total

    def _gate(self, about_to: str) -> None:
        if self.elapsed() >= self.cfg.wall_clock_budget:
            raise _Stop(Outcome.BUDGET_EXHAUSTED,
                        f"wall clock budget exhausted before {about_to}")
        if self.tokens().total >= self.cfg.token_budget:
            raise _Stop(Outcome.BUDGET_EXHAUSTED,
                        f"token budget exhausted before {about_to}")

    def _send(self, session: ChatSession, bundle: PromptBundle,
              about_to: str) -> str:
        self._gate(about_to)
        return session.send(bundle)

    def fresh_formalizer(self) -> ChatSession:
        fs = ChatSession(FORMALIZER, self.backend)
        self.sessions.append(fs)
        return fs

    # the phases of one iteration

    def initial_invariants(self, rec: RoundRecord) -> InvariantSet:
        reply = self._send(self.synth, render_initial(self.prog),
                           "the initial invariant request")
        try:
            return parse_invariant_block(reply, self.prog)
        except InvariantBlockError as err:
            rec.notes.append(f"initial reply unparseable ({err.code}); re-asked once")
            reply = self._send(
                self.synth,
                render_reask_invariants(str(err), PromptKind.INITIAL_SYNTHESIS),
                "the initial invariant re-ask")
            try:
                return parse_invariant_block(reply, self.prog)
            except InvariantBlockError as err2:
                rec.notes.append(
                    f"re-asked reply still unparseable ({err2.code}); "
                    "starting from the empty invariant set")
                return InvariantSet(())

    def check_invariants(self, invs: InvariantSet, rec: RoundRecord) -> list[VcResult]:
        self._gate("invariant verification")
        vcs = generate_vcs(self.prog, invs)
        results = check_vcs(vcs, self.pool, self.cfg.solver)
        rec.vc_results = results
        return results

    def natural_proof(self, invs: InvariantSet, vc: VerificationCondition,
                      rec: RoundRecord) -> StructuredProof | None:
        reply = self._send(self.synth, render_proof_request(self.prog, invs, vc),
                           "the proof request")
        rec.natural_proof = reply
        try:
            proof = parse_structured_proof(reply)
            rec.structured_ok = True
            return proof
        except ProofFormatError as err:
            rec.notes.append(f"proof reply unparseable ({err}); re-asked once")
            reply = self._send(self.synth, render_reask_proof(str(err)),
                               "the proof re-ask")
            rec.natural_proof = reply
            try:
                proof = parse_structured_proof(reply)
                rec.structured_ok = True
                return proof
            except ProofFormatError as err2:
                rec.notes.append(f"re-asked proof still unparseable ({err2})")
                rec.structured_ok = False
                return None

    def formalized_proof(self, structured: StructuredProof,
                         rec: RoundRecord) -> FormalizedProof | None:
        session = self.fresh_formalizer()
        reply = self._send(session, render_formalize_request(structured),
                           "the formalization request")
        rec.formalized_proof = reply
        try:
            fp = parse_formalized_proof(reply, self.prog)
            rec.formalized_ok = True
            return fp
        except ProofFormatError as err:
            rec.notes.append(f"formalized proof unparseable ({err}); re-asked once")
            reply = self._send(session, render_reask_formalized(str(err)),
                               "the formalization re-ask")
            rec.formalized_proof = reply
            try:
                fp = parse_formalized_proof(reply, self.prog)
                rec.formalized_ok = True
                return fp
            except ProofFormatError as err2:
                rec.notes.append(f"re-asked formalization still unparseable ({err2})")
                rec.formalized_ok = False
                return None

    def checked_proof(self, fp: FormalizedProof, vc: VerificationCondition,
                      rec: RoundRecord) -> CheckReport:
        self._gate("proof checking")
        report = check_proof(fp, self.prog, vc, self.pool, self.cfg.solver)
        rec.proof_check = report
        return report

    def refined_invariants(self, bundle: PromptBundle, previous: InvariantSet,
                           rec: RoundRecord) -> InvariantSet:
        reply = self._send(self.synth, bundle, "the refinement request")
        try:
            refined = parse_invariant_block(reply, self.prog)
        except InvariantBlockError as err:
            rec.notes.append(f"refined reply unparseable ({err.code}); re-asked once")
            reply = self._send(
                self.synth,
                render_reask_invariants(str(err), PromptKind.FEEDBACK),
                "the refinement re-ask")
            try:
                refined = parse_invariant_block(reply, self.prog)
            except InvariantBlockError as err2:
                rec.notes.append(
                    f"re-asked refinement still unparseable ({err2.code}); "
                    "keeping the previous invariant set")
                refined = previous
        rec.refined_invariants = refined
        return refined

    def reverify(self, invs: InvariantSet, rec: RoundRecord) -> None:
        # Solved is only reported after the final set passes one more
        # independent verification pass.
        self._gate("final re-verification")
        results = check_vcs(generate_vcs(self.prog, invs), self.pool, self.cfg.solver)
        if not all_valid(results):
            bad = [f"{r.vc.describe()}={r.status.value}" for r in results
                   if r.status is not Status.VALID]
            raise _Stop(Outcome.ERROR,
                        "final invariants failed re-verification: " + ", ".join(bad))
        rec.reverified = True

    # the loop

    def run(self) -> RunReport:
        if self.own_pool:
            self.pool = SolverPool()
        outcome = Outcome.ERROR
        error: str | None = None
        final: InvariantSet | None = None
        try:
            try:
                rec = self._new_round(InvariantSet(()))
                invs = self.initial_invariants(rec)
                rec.invariants = invs
                while True:
                    results = self.check_invariants(invs, rec)
                    if all_valid(results):
                        self.reverify(invs, rec)
                        self._finish_round(rec)
                        outcome = Outcome.SOLVED
                        final = invs
                        break
                    done = sum(1 for r in self.rounds if r.is_feedback_round)
                    if (self.cfg.max_feedback_rounds is not None
                            and done >= self.cfg.max_feedback_rounds):
                        raise _Stop(Outcome.BUDGET_EXHAUSTED,
                                    "feedback round limit reached")
                    vc = select_failed_vc(results, self.rng)
                    rec.selected_vc = vc

                    report: CheckReport | None = None
                    structured = self.natural_proof(invs, vc, rec)
                    if structured is not None:
                        fp = self.formalized_proof(structured, rec)
                        if fp is not None:
                            report = self.checked_proof(fp, vc, rec)

                    if report is not None and report.errors:
                        bundle = render_feedback(report, self.prog, invs)
                    else:
                        if report is not None:
                            rec.notes.append(
                                "proof check found no errors; falling back to "
                                "counterexample feedback")
                        bundle = fallback_feedback(results, report, self.prog, vc)
                    rec.feedback = bundle.text

                    invs = self.refined_invariants(bundle, invs, rec)
                    self._finish_round(rec)
                    rec = self._new_round(invs)
            except _Stop as stop:
                outcome = stop.outcome
                error = stop.reason
                self._finish_round(rec)
            except (GatewayError, SolverUnavailableError, SolverProtocolError,
                    TimeoutError) as err:
                outcome = Outcome.ERROR
                error = f"{type(err).__name__}: {err}"
                self._finish_round(rec)
        finally:
            if self.own_pool and self.pool is not None:
                self.pool.close()

        if outcome is Outcome.SOLVED:
            fb = sum(1 for r in self.rounds if r.is_feedback_round)
            classification = (Classification.DIRECT_SUCCESS if fb == 0
                              else Classification.FEEDBACK_DRIVEN_SUCCESS)
        else:
            classification = Classification.FAILURE
        return RunReport(
            program=self.prog.name,
            seed=self.cfg.rng_seed,
            outcome=outcome,
            classification=classification,
            rounds=self.rounds,
            final_invariants=final,
            tokens=self.tokens(),
            elapsed_seconds=self.elapsed(),
            error=error,
        )

    def _new_round(self, invs: InvariantSet) -> RoundRecord:
        rec = RoundRecord(index=len(self.rounds), invariants=invs)
        rec._tokens_at_start = self.tokens()  # type: ignore[attr-defined]
        rec._t_start = self.elapsed()  # type: ignore[attr-defined]
        return rec

    def _finish_round(self, rec: RoundRecord) -> None:
        start_tokens = getattr(rec, "_tokens_at_start", TokenCount())
        now = self.tokens()
        rec.tokens = TokenCount(now.input - start_tokens.input,
                                now.output - start_tokens.output)
        rec.elapsed_seconds = self.elapsed() - getattr(rec, "_t_start", 0.0)
        self.rounds.append(rec)


def run_synthesis(prog: Program, cfg: RunConfig, backend: Backend,
                  pool: SolverPool | None = None,
                  clock: Callable[[], float] = time.monotonic) -> RunReport:
    """One full synthesis run over `prog`; never raises for run-level
    failures, which land in the report's outcome and error fields."""
    return _Run(prog, cfg, backend, pool, clock).run()
