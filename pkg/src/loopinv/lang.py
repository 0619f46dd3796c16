"""Core terms of the single-loop mini-language.

Expressions are immutable trees over mathematical integers and booleans.
Statements cover straight-line code plus branching and nondeterministic
assignment (Havoc); a whole program is a straight-line prefix, one loop,
and one target assertion.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Union


class Type(Enum):
    INT = "int"
    BOOL = "bool"


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # '-' or '!'
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    lhs: "Expr"
    rhs: "Expr"


Expr = Union[IntLit, BoolLit, Var, Unary, Binary]

TRUE = BoolLit(True)
FALSE = BoolLit(False)

ARITH_OPS = ("+", "-", "*", "/", "%")
COMPARE_OPS = ("<", "<=", ">", ">=")
EQUALITY_OPS = ("==", "!=")
LOGIC_OPS = ("&&", "||", "==>")
COMMUTATIVE_OPS = ("==", "!=", "&&", "||")


class SourceError(Exception):
    """Any malformed program, expression, or invariant text.

    `code` is a stable machine-readable tag (see docs/language.md for the
    full table); `line`/`col` are 1-based when known.
    """

    def __init__(self, code: str, message: str, line: int | None = None, col: int | None = None):
        self.code = code
        self.line = line
        self.col = col
        where = f" at line {line}" if line is not None else ""
        super().__init__(f"{code}{where}: {message}")


@dataclass(frozen=True)
class Assign:
    var: str
    expr: Expr


@dataclass(frozen=True)
class Havoc:
    var: str


@dataclass(frozen=True)
class Assume:
    cond: Expr


@dataclass(frozen=True)
class Skip:
    pass


@dataclass(frozen=True)
class If:
    cond: Expr
    then: tuple["Stmt", ...]
    els: tuple["Stmt", ...] = ()


Stmt = Union[Assign, Havoc, Assume, Skip, If]


@dataclass(frozen=True)
class Program:
    """One loop, its straight-line prefix, and the target assertion.

    `vars` are the names declared in the source; `aux_vars` are the fresh
    names introduced while desugaring `unknown()` calls.  `source_text`
    keeps the original file text for prompt embedding and is excluded
    from structural equality.
    """

    name: str
    vars: tuple[str, ...]
    pre: tuple[Stmt, ...]
    loop_cond: Expr
    body: tuple[Stmt, ...]
    assertion: Expr
    aux_vars: tuple[str, ...] = ()
    source_text: str = field(default="", compare=False, repr=False)

    @property
    def all_vars(self) -> tuple[str, ...]:
        return self.vars + self.aux_vars


@dataclass(frozen=True)
class Invariant:
    id: str
    formula: Expr


@dataclass(frozen=True)
class InvariantSet:
    items: tuple[Invariant, ...]

    def __post_init__(self) -> None:
        ids = [inv.id for inv in self.items]
        if len(ids) != len(set(ids)):
            raise SourceError("duplicate-id", f"invariant ids must be unique, got {ids}")

    def __len__(self) -> int:
        return len(self.items)

    def conjunction(self) -> Expr:
        return conjoin([inv.formula for inv in self.items])


def conjoin(parts: list[Expr]) -> Expr:
    """Left-leaning conjunction; the empty conjunction is `true`."""
    if not parts:
        return TRUE
    out = parts[0]
    for p in parts[1:]:
        out = Binary("&&", out, p)
    return out


def implies(a: Expr, b: Expr) -> Expr:
    return Binary("==>", a, b)


_NEGATED_CMP = {"<": ">=", "<=": ">", ">": "<=", ">=": "<", "==": "!=", "!=": "=="}


def negate(e: Expr) -> Expr:
    """Logical negation, flipping comparisons instead of stacking '!'."""
    if isinstance(e, BoolLit):
        return BoolLit(not e.value)
    if isinstance(e, Unary) and e.op == "!":
        return e.operand
    if isinstance(e, Binary) and e.op in _NEGATED_CMP:
        return Binary(_NEGATED_CMP[e.op], e.lhs, e.rhs)
    return Unary("!", e)


def free_vars(e: Expr) -> frozenset[str]:
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, Unary):
        return free_vars(e.operand)
    if isinstance(e, Binary):
        return free_vars(e.lhs) | free_vars(e.rhs)
    return frozenset()


def subst(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Simultaneous substitution of variables by expressions."""
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, Unary):
        return Unary(e.op, subst(e.operand, mapping))
    if isinstance(e, Binary):
        return Binary(e.op, subst(e.lhs, mapping), subst(e.rhs, mapping))
    return e


def infer_type(e: Expr, declared: frozenset[str] | set[str]) -> Type:
    """Type of `e`, or SourceError('type-mismatch' | 'undeclared-variable')."""
    if isinstance(e, IntLit):
        return Type.INT
    if isinstance(e, BoolLit):
        return Type.BOOL
    if isinstance(e, Var):
        if e.name not in declared:
            raise SourceError("undeclared-variable", f"variable '{e.name}' is not declared")
        return Type.INT
    if isinstance(e, Unary):
        t = infer_type(e.operand, declared)
        if e.op == "-":
            if t is not Type.INT:
                raise SourceError("type-mismatch", "unary '-' needs an integer operand")
            return Type.INT
        if e.op == "!":
            if t is not Type.BOOL:
                raise SourceError("type-mismatch", "'!' needs a boolean operand")
            return Type.BOOL
        raise SourceError("type-mismatch", f"unknown unary operator {e.op!r}")
    if isinstance(e, Binary):
        lt = infer_type(e.lhs, declared)
        rt = infer_type(e.rhs, declared)
        if e.op in ARITH_OPS:
            if lt is not Type.INT or rt is not Type.INT:
                raise SourceError("type-mismatch", f"'{e.op}' needs integer operands")
            return Type.INT
        if e.op in COMPARE_OPS or e.op in EQUALITY_OPS:
            if lt is not Type.INT or rt is not Type.INT:
                raise SourceError("type-mismatch", f"'{e.op}' compares integers")
            return Type.BOOL
        if e.op in LOGIC_OPS:
            if lt is not Type.BOOL or rt is not Type.BOOL:
                raise SourceError("type-mismatch", f"'{e.op}' needs boolean operands")
            return Type.BOOL
        raise SourceError("type-mismatch", f"unknown operator {e.op!r}")
    raise SourceError("type-mismatch", f"not an expression: {e!r}")


def coerce_bool(e: Expr, declared: frozenset[str] | set[str]) -> Expr:
    """C truthiness: an integer `e` in boolean position becomes `e != 0`."""
    if infer_type(e, declared) is Type.INT:
        return Binary("!=", e, IntLit(0))
    return e


def check_program(prog: Program) -> None:
    """Raise SourceError unless every part of `prog` type-checks."""
    declared = set(prog.all_vars)
    if len(declared) != len(prog.all_vars):
        raise SourceError("duplicate-declaration", "variable declared twice")

    def check_stmts(stmts: tuple[Stmt, ...]) -> None:
        for s in stmts:
            if isinstance(s, Assign):
                if s.var not in declared:
                    raise SourceError("undeclared-variable", f"assignment to undeclared '{s.var}'")
                if infer_type(s.expr, declared) is not Type.INT:
                    raise SourceError("type-mismatch", "assigned value must be an integer")
            elif isinstance(s, Havoc):
                if s.var not in declared:
                    raise SourceError("undeclared-variable", f"havoc of undeclared '{s.var}'")
            elif isinstance(s, Assume):
                if infer_type(s.cond, declared) is not Type.BOOL:
                    raise SourceError("type-mismatch", "assume needs a boolean condition")
            elif isinstance(s, If):
                if infer_type(s.cond, declared) is not Type.BOOL:
                    raise SourceError("type-mismatch", "if needs a boolean condition")
                check_stmts(s.then)
                check_stmts(s.els)
            elif isinstance(s, Skip):
                pass
            else:
                raise SourceError("type-mismatch", f"not a statement: {s!r}")

    check_stmts(prog.pre)
    if infer_type(prog.loop_cond, declared) is not Type.BOOL:
        raise SourceError("type-mismatch", "loop condition must be boolean")
    check_stmts(prog.body)
    if infer_type(prog.assertion, declared) is not Type.BOOL:
        raise SourceError("type-mismatch", "assertion must be boolean")
