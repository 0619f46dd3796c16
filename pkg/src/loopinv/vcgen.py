"""Hoare-logic verification conditions for candidate loop invariants.

For a program {P} while (B) S {Q} and invariants l_1..l_n, the checks are

  Establishment   P  ==>  l_i                       (one per invariant)
  Preservation    (l_1 && .. && l_n && B)  ==>  wp(S, l_i)
  PostCondition   (l_1 && .. && l_n && !B) ==>  Q

so an invariant set of size n yields exactly 2n + 1 conditions.  P is
rendered as explicit facts about the loop-entry state by symbolically
executing the straight-line prefix; Havoc during wp is handled by
renaming to a fresh variable, which keeps every formula quantifier-free.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .lang import (
    Assign,
    Assume,
    Binary,
    Expr,
    Havoc,
    If,
    InvariantSet,
    Program,
    Skip,
    Stmt,
    TRUE,
    Var,
    conjoin,
    free_vars,
    implies,
    negate,
    subst,
)
from .smt import QueryVerdict, SolverBudget, SolverPool, SolverProtocolError, Status


class VcKind(Enum):
    ESTABLISHMENT = "Establishment"
    PRESERVATION = "Preservation"
    POSTCONDITION = "PostCondition"


@dataclass(frozen=True)
class VerificationCondition:
    kind: VcKind
    target: str  # invariant id, or "assertion" for the postcondition check
    hypothesis: Expr
    goal: Expr
    quantified_vars: tuple[str, ...]

    def describe(self) -> str:
        return f"{self.kind.value}({self.target})"


@dataclass
class VcResult:
    vc: VerificationCondition
    status: Status
    counterexample: dict[str, int] | None = None
    detail: str = ""


class FreshNames:
    """Fresh variable names `base__hN`, unique against a set of used names."""

    def __init__(self, used: Sequence[str]):
        self.used = set(used)
        self.n = 0
        self.made: list[str] = []

    def make(self, base: str) -> str:
        while True:
            self.n += 1
            name = f"{base}__h{self.n}"
            if name not in self.used:
                self.used.add(name)
                self.made.append(name)
                return name


def wp(stmts: Sequence[Stmt], post: Expr,
       fresh: FreshNames | None = None) -> tuple[Expr, tuple[str, ...]]:
    """Weakest precondition of a loop-free block.

    Returns the formula and the fresh names introduced for Havoc
    (each Havoc'd variable is renamed rather than quantified).
    """
    if fresh is None:
        fresh = FreshNames(sorted(free_vars(post)))
    start = len(fresh.made)
    q = post
    for s in reversed(list(stmts)):
        if isinstance(s, Assign):
            q = subst(q, {s.var: s.expr})
        elif isinstance(s, Havoc):
            q = subst(q, {s.var: Var(fresh.make(s.var))})
        elif isinstance(s, Assume):
            q = implies(s.cond, q)
        elif isinstance(s, If):
            then_q, _ = wp(s.then, q, fresh)
            else_q, _ = wp(s.els, q, fresh)
            q = Binary("&&", implies(s.cond, then_q), implies(negate(s.cond), else_q))
        elif isinstance(s, Skip):
            pass
        else:
            raise TypeError(f"not a statement: {s!r}")
    return q, tuple(fresh.made[start:])


def _initial_symbol(v: str) -> str:
    return f"{v}__0"


def pre_state_facts(prog: Program) -> tuple[Expr, tuple[str, ...]]:
    """Loop-entry facts from symbolically executing the prefix.

    Produces a quantifier-free formula over the program variables plus
    auxiliary names for overwritten initial values and havoc results
    (the returned tuple).  Branching in the prefix yields a disjunction
    of per-path formulas.
    """
    init_env = {v: Var(_initial_symbol(v)) for v in prog.all_vars}
    fresh = FreshNames(list(prog.all_vars) + [_initial_symbol(v) for v in prog.all_vars])
    paths: list[tuple[dict[str, Expr], list[Expr]]] = []

    def run(stmts: Sequence[Stmt], env: dict[str, Expr], constraints: list[Expr]) -> None:
        if not stmts:
            paths.append((env, constraints))
            return
        s, rest = stmts[0], stmts[1:]
        if isinstance(s, Assign):
            run(rest, {**env, s.var: subst(s.expr, env)}, constraints)
        elif isinstance(s, Havoc):
            run(rest, {**env, s.var: Var(fresh.make(s.var))}, constraints)
        elif isinstance(s, Assume):
            run(rest, env, constraints + [subst(s.cond, env)])
        elif isinstance(s, If):
            cond = subst(s.cond, env)
            run(tuple(s.then) + tuple(rest), env, constraints + [cond])
            run(tuple(s.els) + tuple(rest), env, constraints + [negate(cond)])
        elif isinstance(s, Skip):
            run(rest, env, constraints)
        else:
            raise TypeError(f"not a statement: {s!r}")

    run(prog.pre, init_env, [])

    disjuncts: list[Expr] = []
    for env, constraints in paths:
        conjuncts: list[Expr] = []
        for v in prog.all_vars:
            if env[v] != init_env[v]:
                conjuncts.append(Binary("==", Var(v), env[v]))
        conjuncts.extend(constraints)
        # a havoc'd variable with no other mention is simply unconstrained
        kept: list[Expr] = []
        for c in conjuncts:
            if (isinstance(c, Binary) and c.op == "==" and isinstance(c.rhs, Var)
                    and c.rhs.name in fresh.made):
                uses = sum(1 for other in conjuncts if other is not c
                           and c.rhs.name in free_vars(other))
                if uses == 0:
                    continue
            kept.append(c)
        # variables never assigned on this path: their initial symbol is
        # their loop-entry value, so fold the symbol back into the name
        rename = {_initial_symbol(v): Var(v) for v in prog.all_vars if env[v] == init_env[v]}
        disjuncts.append(subst(conjoin(kept), rename) if kept else TRUE)

    hypothesis = disjuncts[0] if len(disjuncts) == 1 else _disjoin(disjuncts)
    aux = tuple(sorted(free_vars(hypothesis) - set(prog.all_vars)))
    return hypothesis, aux


def _disjoin(parts: list[Expr]) -> Expr:
    out = parts[0]
    for p in parts[1:]:
        out = Binary("||", out, p)
    return out


def generate_vcs(prog: Program, inv: InvariantSet) -> list[VerificationCondition]:
    """All establishment, preservation, and postcondition checks, in that order."""
    entry, entry_aux = pre_state_facts(prog)
    base_vars = tuple(prog.all_vars)
    inv_conj = inv.conjunction()

    vcs: list[VerificationCondition] = []
    for item in inv.items:
        vcs.append(VerificationCondition(
            kind=VcKind.ESTABLISHMENT,
            target=item.id,
            hypothesis=entry,
            goal=item.formula,
            quantified_vars=tuple(sorted(set(base_vars) | set(entry_aux))),
        ))
    for item in inv.items:
        fresh = FreshNames(base_vars)
        body_wp, wp_aux = wp(prog.body, item.formula, fresh)
        vcs.append(VerificationCondition(
            kind=VcKind.PRESERVATION,
            target=item.id,
            hypothesis=Binary("&&", inv_conj, prog.loop_cond) if inv.items else prog.loop_cond,
            goal=body_wp,
            quantified_vars=tuple(sorted(set(base_vars) | set(wp_aux))),
        ))
    exit_cond = negate(prog.loop_cond)
    vcs.append(VerificationCondition(
        kind=VcKind.POSTCONDITION,
        target="assertion",
        hypothesis=Binary("&&", inv_conj, exit_cond) if inv.items else exit_cond,
        goal=prog.assertion,
        quantified_vars=base_vars,
    ))
    return vcs


def check_vcs(vcs: Sequence[VerificationCondition], pool: SolverPool,
              budget: SolverBudget | None = None, max_workers: int = 1) -> list[VcResult]:
    """Discharge every condition; results keep input order.

    A solver crash or protocol fault on one condition is recorded as
    Unknown on that condition and the rest of the batch still runs.
    """
    budget = budget or SolverBudget()

    def one(vc: VerificationCondition) -> VcResult:
        try:
            verdict = pool.check_validity(vc.hypothesis, vc.goal, vc.quantified_vars, budget)
        except SolverProtocolError as err:
            return VcResult(vc, Status.UNKNOWN, detail=f"solver fault: {err}")
        return VcResult(vc, verdict.status,
                        counterexample=verdict.model, detail=verdict.detail)

    if max_workers > 1 and len(vcs) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool_exec:
            return list(pool_exec.map(one, vcs))
    return [one(vc) for vc in vcs]


def all_valid(results: Sequence[VcResult]) -> bool:
    return all(r.status is Status.VALID for r in results)
