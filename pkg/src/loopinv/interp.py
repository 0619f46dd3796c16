"""Concrete evaluation and bounded program execution.

This is the reference semantics: integer arithmetic is unbounded and
`/` `%` truncate toward zero as in C.  The bounded explorer enumerates
initial states and nondeterministic choices exhaustively, so it serves
as an independent oracle for both the solver backend and the generated
verification conditions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

from .lang import (
    Assign,
    Assume,
    Binary,
    BoolLit,
    Expr,
    Havoc,
    If,
    IntLit,
    Program,
    Skip,
    Stmt,
    Unary,
    Var,
)


class EvalError(Exception):
    """Division or modulo by zero during concrete evaluation."""


def _tdiv(a: int, b: int) -> int:
    if b == 0:
        raise EvalError("division by zero")
    q = abs(a) // abs(b)
    return -q if (a < 0) != (b < 0) else q


def _tmod(a: int, b: int) -> int:
    return a - b * _tdiv(a, b)


def eval_expr(e: Expr, env: Mapping[str, int]) -> int | bool:
    if isinstance(e, IntLit):
        return e.value
    if isinstance(e, BoolLit):
        return e.value
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Unary):
        v = eval_expr(e.operand, env)
        return -v if e.op == "-" else not v
    if isinstance(e, Binary):
        a = eval_expr(e.lhs, env)
        b = eval_expr(e.rhs, env)
        op = e.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            return _tdiv(a, b)
        if op == "%":
            return _tmod(a, b)
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        if op == ">=":
            return a >= b
        if op == "==":
            return a == b
        if op == "!=":
            return a != b
        if op == "&&":
            return bool(a) and bool(b)
        if op == "||":
            return bool(a) or bool(b)
        if op == "==>":
            return (not a) or bool(b)
    raise TypeError(f"not an expression: {e!r}")


def exec_stmts(stmts: tuple[Stmt, ...], env: dict[str, int],
               havoc_values: tuple[int, ...]) -> Iterator[dict[str, int]]:
    """All result states of a straight-line/branching block.

    Havoc branches over `havoc_values`; a false Assume kills the path;
    an EvalError (division by zero) also kills the path, mirroring the
    solver's treatment of those points as unconstrained.
    """
    if not stmts:
        yield env
        return
    s, rest = stmts[0], stmts[1:]
    try:
        if isinstance(s, Assign):
            env2 = dict(env)
            env2[s.var] = int(eval_expr(s.expr, env))
            yield from exec_stmts(rest, env2, havoc_values)
        elif isinstance(s, Havoc):
            for v in havoc_values:
                env2 = dict(env)
                env2[s.var] = v
                yield from exec_stmts(rest, env2, havoc_values)
        elif isinstance(s, Assume):
            if eval_expr(s.cond, env):
                yield from exec_stmts(rest, env, havoc_values)
        elif isinstance(s, If):
            branch = s.then if eval_expr(s.cond, env) else s.els
            yield from exec_stmts(branch + rest, env, havoc_values)
        elif isinstance(s, Skip):
            yield from exec_stmts(rest, env, havoc_values)
        else:
            raise TypeError(f"not a statement: {s!r}")
    except EvalError:
        return


@dataclass(frozen=True)
class Violation:
    """A concrete execution that reaches the assertion and falsifies it."""
    initial: dict[str, int]
    final: dict[str, int]
    iterations: int


def run_bounded(prog: Program, initial: Mapping[str, int], max_iters: int,
                havoc_values: tuple[int, ...]) -> Iterator[Violation]:
    """Yield assertion violations reachable from one initial state.

    Paths whose loop has not exited within `max_iters` iterations are
    abandoned (partial correctness: only exits are checked).
    """
    base = dict(initial)
    for env in exec_stmts(prog.pre, base, havoc_values):
        stack = [(env, 0)]
        while stack:
            state, iters = stack.pop()
            try:
                looping = bool(eval_expr(prog.loop_cond, state))
            except EvalError:
                continue
            if not looping:
                try:
                    ok = bool(eval_expr(prog.assertion, state))
                except EvalError:
                    continue
                if not ok:
                    yield Violation(dict(initial), state, iters)
                continue
            if iters >= max_iters:
                continue
            for nxt in exec_stmts(prog.body, state, havoc_values):
                stack.append((nxt, iters + 1))


def find_violation(prog: Program, bound: int, max_iters: int,
                   havoc_values: tuple[int, ...] | None = None,
                   init_vars: Iterable[str] | None = None) -> Violation | None:
    """Exhaustive bounded search for an assertion violation.

    Initial values for `init_vars` (default: all declared variables)
    range over [-bound, bound], enumerated lexicographically with the
    variables sorted by name.  Returns the first violation found.
    """
    names = sorted(init_vars if init_vars is not None else prog.vars)
    if havoc_values is None:
        havoc_values = tuple(range(-bound, bound + 1))
    for point in itertools.product(range(-bound, bound + 1), repeat=len(names)):
        initial = dict(zip(names, point))
        for extra in prog.all_vars:
            initial.setdefault(extra, 0)
        for v in run_bounded(prog, initial, max_iters, havoc_values):
            return v
    return None
