"""Solver-backed checking of a formalized proof.

Implications are checked in document order against an accumulating
condition set: for each `p ==> q`, first whether the conditions so far
entail `p` (else the premise is unsupported), then whether `p` entails
`q` (else the implication itself is invalid).  `q` joins the condition
set either way, so one wrong step is reported once instead of
cascading into complaints about every later step that builds on it.

For establishment obligations, each step's `initial`-tagged facts are
additionally checked against the symbolic loop-entry state: a condition
that only held at program start (before the prefix ran) is reported as
BadInitialCondition.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .lang import Expr, Program, free_vars
from .proofs import FormalizedProof, FormalizedStep
from .smt import SolverBudget, SolverPool, Status
from .vcgen import VcKind, VerificationCondition, pre_state_facts


class ErrorKind(Enum):
    UNSUPPORTED_PREMISE = "UnsupportedPremise"
    INVALID_IMPLICATION = "InvalidImplication"
    BAD_INITIAL_CONDITION = "BadInitialCondition"


@dataclass
class ReasoningError:
    """One defect in the model's reasoning.

    `formula` is the unsupported premise, the whole `p ==> q`
    implication, or the bad initial condition; `comment` is the model's
    own annotation on that line; `solver_status` says how the check
    failed (Invalid: refuted with a model; Unknown/Timeout: could not
    be confirmed, so feedback should be phrased softly).
    """

    step_label: str
    kind: ErrorKind
    formula: Expr
    comment: str
    solver_status: Status


@dataclass
class CheckReport:
    vc: VerificationCondition
    errors: tuple[ReasoningError, ...]
    checked_implications: int
    conds_trace: tuple[tuple[str, tuple[Expr, ...]], ...]

    @property
    def ok(self) -> bool:
        return not self.errors


def _step_variables(pre: Sequence[Expr], step: FormalizedStep) -> tuple[str, ...]:
    names: set[str] = set()
    for f in pre:
        names |= free_vars(f)
    for imp in step.implications:
        names |= free_vars(imp.premise) | free_vars(imp.conclusion)
    names |= free_vars(step.conclusion.formula)
    return tuple(sorted(names))


def check_step(step: FormalizedStep, pre: Sequence[Expr], pool: SolverPool,
               budget: SolverBudget | None = None,
               label: str = "") -> tuple[list[ReasoningError], list[Expr]]:
    """Check one step's implications against accumulating conditions.

    Returns (errors, final condition list).  The condition list always
    grows by exactly one conclusion per implication.
    """
    variables = _step_variables(pre, step)
    conds = list(pre)
    errors: list[ReasoningError] = []
    for imp in step.implications:
        supported = pool.check_entailment(conds, imp.premise, variables, budget)
        if supported.status is not Status.VALID:
            errors.append(ReasoningError(label, ErrorKind.UNSUPPORTED_PREMISE,
                                         imp.premise, imp.comment, supported.status))
        holds = pool.check_validity(imp.premise, imp.conclusion, variables, budget)
        if holds.status is not Status.VALID:
            errors.append(ReasoningError(label, ErrorKind.INVALID_IMPLICATION,
                                         imp.formula, imp.comment, holds.status))
        conds.append(imp.conclusion)
    return errors, conds


def check_initial_conditions(step: FormalizedStep, prog: Program,
                             pool: SolverPool, budget: SolverBudget | None = None,
                             label: str = "") -> list[ReasoningError]:
    """Do the step's `initial`-tagged facts hold on loop entry?

    Only meaningful for establishment obligations: a fact that held at
    program start can be destroyed by the prefix before the loop.
    Derived and declaration lines are not checked here.
    """
    entry, aux = pre_state_facts(prog)
    errors: list[ReasoningError] = []
    for cond in step.initial:
        if cond.tag != "initial":
            continue
        variables = tuple(sorted(set(prog.all_vars) | set(aux) | free_vars(cond.formula)))
        verdict = pool.check_validity(entry, cond.formula, variables, budget)
        if verdict.status is not Status.VALID:
            errors.append(ReasoningError(label, ErrorKind.BAD_INITIAL_CONDITION,
                                         cond.formula, cond.comment, verdict.status))
    return errors


def check_proof(fp: FormalizedProof, prog: Program, vc: VerificationCondition,
                pool: SolverPool, budget: SolverBudget | None = None) -> CheckReport:
    """Check a whole formalized proof against the obligation `vc`.

    Errors are concatenated in document order; each step seeds its
    condition set from its own initial list, so steps are checked
    independently of each other's implications.
    """
    errors: list[ReasoningError] = []
    trace: list[tuple[str, tuple[Expr, ...]]] = []
    checked = 0
    for position, step in enumerate(fp.steps, start=1):
        label = step.display_label(position)
        if vc.kind is VcKind.ESTABLISHMENT:
            errors.extend(check_initial_conditions(step, prog, pool, budget, label))
        step_errors, conds = check_step(step, [c.formula for c in step.initial],
                                        pool, budget, label)
        errors.extend(step_errors)
        checked += len(step.implications)
        trace.append((label, tuple(conds)))
    return CheckReport(vc, tuple(errors), checked, tuple(trace))
