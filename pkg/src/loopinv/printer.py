"""Pretty-printing and clause canonicalization.

`pp_expr` emits canonical spacing with the fewest parentheses that
re-parse to the same tree.  `pp_program` prints a parseable source file,
folding the parser's `unknown()` desugarings back into surface syntax so
that parse -> print -> parse is the identity on supported programs.

`normalize_clause` renders an expression in a canonical text form used
for set comparisons between invariant candidates: whitespace collapsed,
`>`/`>=` flipped to `<`/`<=`, double negation removed, and operands of
commutative operators sorted by their rendered text.
"""

from __future__ import annotations

from .lang import (
    Assign,
    Assume,
    Binary,
    BoolLit,
    Expr,
    Havoc,
    If,
    IntLit,
    Invariant,
    InvariantSet,
    Program,
    Skip,
    Stmt,
    Unary,
    Var,
    free_vars,
)

_PREC = {
    "==>": 1,
    "||": 2,
    "&&": 3,
    "==": 4, "!=": 4,
    "<": 5, "<=": 5, ">": 5, ">=": 5,
    "+": 6, "-": 6,
    "*": 7, "/": 7, "%": 7,
}
_UNARY_PREC = 8
_PRIMARY_PREC = 9
_RIGHT_ASSOC = frozenset(("==>",))


def _prec(e: Expr) -> int:
    if isinstance(e, Binary):
        return _PREC[e.op]
    if isinstance(e, Unary):
        return _UNARY_PREC
    return _PRIMARY_PREC


def pp_expr(e: Expr) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        inner = pp_expr(e.operand)
        if _prec(e.operand) < _PRIMARY_PREC:
            inner = f"({inner})"
        return f"{e.op}{inner}"
    if isinstance(e, Binary):
        p = _PREC[e.op]
        lmin = p + 1 if e.op in _RIGHT_ASSOC else p
        rmin = p if e.op in _RIGHT_ASSOC else p + 1
        lhs = pp_expr(e.lhs)
        if _prec(e.lhs) < lmin:
            lhs = f"({lhs})"
        rhs = pp_expr(e.rhs)
        if _prec(e.rhs) < rmin:
            rhs = f"({rhs})"
        return f"{lhs} {e.op} {rhs}"
    raise TypeError(f"not an expression: {e!r}")


# --- statement and program printing -------------------------------------


def _is_nondet_test(cond: Expr, name: str) -> bool:
    return (isinstance(cond, Binary) and cond.op == "!="
            and cond.lhs == Var(name) and cond.rhs == IntLit(0))


def _plan(stmts: tuple[Stmt, ...] | list[Stmt], aux: frozenset[str]) -> list:
    """Fold Havoc(n); If(n != 0, ...) pairs back into `if (unknown())`."""
    out: list = []
    i = 0
    stmts = list(stmts)
    while i < len(stmts):
        s = stmts[i]
        nxt = stmts[i + 1] if i + 1 < len(stmts) else None
        if (isinstance(s, Havoc) and s.var in aux and isinstance(nxt, If)
                and _is_nondet_test(nxt.cond, s.var)
                and not any(s.var in _stmt_names(b) for b in nxt.then + nxt.els)):
            out.append(("if-unknown", _plan(nxt.then, aux), _plan(nxt.els, aux)))
            i += 2
            continue
        if isinstance(s, If):
            out.append(("if", s.cond, _plan(s.then, aux), _plan(s.els, aux)))
        else:
            out.append(("stmt", s))
        i += 1
    return out


def _stmt_names(s: Stmt) -> frozenset[str]:
    if isinstance(s, Assign):
        return free_vars(s.expr) | {s.var}
    if isinstance(s, Havoc):
        return frozenset((s.var,))
    if isinstance(s, Assume):
        return free_vars(s.cond)
    if isinstance(s, If):
        names = free_vars(s.cond)
        for t in s.then + s.els:
            names |= _stmt_names(t)
        return names
    return frozenset()


def _plan_names(plan: list) -> set[str]:
    names: set[str] = set()
    for item in plan:
        if item[0] == "stmt":
            names |= _stmt_names(item[1])
        elif item[0] == "if":
            names |= free_vars(item[1])
            names |= _plan_names(item[2])
            names |= _plan_names(item[3])
        else:
            names |= _plan_names(item[1])
            names |= _plan_names(item[2])
    return names


def _plan_has_unknown(plan: list) -> bool:
    for item in plan:
        if item[0] == "if-unknown":
            return True
        if item[0] == "stmt" and isinstance(item[1], Havoc):
            return True
        if item[0] == "if" and (_plan_has_unknown(item[2]) or _plan_has_unknown(item[3])):
            return True
    return False


def _render_plan(plan: list, depth: int, lines: list[str]) -> None:
    pad = "    " * depth
    for item in plan:
        if item[0] == "stmt":
            s = item[1]
            if isinstance(s, Assign):
                lines.append(f"{pad}{s.var} = {pp_expr(s.expr)};")
            elif isinstance(s, Havoc):
                lines.append(f"{pad}{s.var} = unknown();")
            elif isinstance(s, Assume):
                lines.append(f"{pad}assume({pp_expr(s.cond)});")
            elif isinstance(s, Skip):
                lines.append(f"{pad};")
            else:
                raise TypeError(f"not a statement: {s!r}")
        elif item[0] in ("if", "if-unknown"):
            if item[0] == "if":
                _, cond, then, els = item
                lines.append(f"{pad}if ({pp_expr(cond)}) {{")
            else:
                _, then, els = item
                lines.append(f"{pad}if (unknown()) {{")
            _render_plan(then, depth + 1, lines)
            if els:
                lines.append(f"{pad}}} else {{")
                _render_plan(els, depth + 1, lines)
            lines.append(f"{pad}}}")


def pp_program(prog: Program) -> str:
    aux = frozenset(prog.aux_vars)
    pre = list(prog.pre)
    body = list(prog.body)
    cond = prog.loop_cond
    cond_text: str | None = None

    # while (unknown()): havoc of the test variable closes the prefix and the body
    if (isinstance(cond, Binary) and cond.op == "!=" and isinstance(cond.lhs, Var)
            and cond.lhs.name in aux and cond.rhs == IntLit(0)
            and pre and pre[-1] == Havoc(cond.lhs.name)
            and body and body[-1] == Havoc(cond.lhs.name)):
        cond_text = "unknown()"
        pre = pre[:-1]
        body = body[:-1]

    pre_plan = _plan(pre, aux)
    body_plan = _plan(body, aux)
    if cond_text is None:
        cond_text = pp_expr(cond)

    used = _plan_names(pre_plan) | _plan_names(body_plan) | set(free_vars(cond)) \
        | set(free_vars(prog.assertion))
    if cond_text == "unknown()":
        used.discard(prog.loop_cond.lhs.name)  # type: ignore[union-attr]
    decls = list(prog.vars) + [v for v in prog.aux_vars if v in used]

    has_unknown = (cond_text == "unknown()" or _plan_has_unknown(pre_plan)
                   or _plan_has_unknown(body_plan))

    lines: list[str] = []
    if has_unknown:
        lines.append("extern int unknown();")
        lines.append("")
    lines.append("int main() {")
    if decls:
        lines.append("    int " + ", ".join(decls) + ";")
    _render_plan(pre_plan, 1, lines)
    lines.append(f"    while ({cond_text}) {{")
    _render_plan(body_plan, 2, lines)
    lines.append("    }")
    lines.append(f"    assert({pp_expr(prog.assertion)});")
    lines.append("    return 0;")
    lines.append("}")
    return "\n".join(lines) + "\n"


def pp_invariants(inv: InvariantSet) -> str:
    lines = ["/*@"]
    for item in inv.items:
        lines.append(f"    loop invariant {item.id}: {pp_expr(item.formula)};")
    lines.append("*/")
    return "\n".join(lines) + "\n"


def pretty_print(node) -> str:
    if isinstance(node, Program):
        return pp_program(node)
    if isinstance(node, InvariantSet):
        return pp_invariants(node)
    if isinstance(node, Invariant):
        return f"{node.id}: {pp_expr(node.formula)}"
    if isinstance(node, (Assign, Havoc, Assume, If, Skip)):
        lines: list[str] = []
        _render_plan(_plan([node], frozenset()), 0, lines)
        return "\n".join(lines)
    return pp_expr(node)


# --- canonical clause text ----------------------------------------------

_FLIP = {">": "<", ">=": "<="}
_COMMUTATIVE = frozenset(("==", "!="))
_AC = frozenset(("&&", "||"))


def _flatten(op: str, e: Expr) -> list[Expr]:
    if isinstance(e, Binary) and e.op == op:
        return _flatten(op, e.lhs) + _flatten(op, e.rhs)
    return [e]


def _canon(e: Expr) -> Expr:
    if isinstance(e, Unary):
        inner = _canon(e.operand)
        if e.op == "!" and isinstance(inner, Unary) and inner.op == "!":
            return inner.operand
        return Unary(e.op, inner)
    if isinstance(e, Binary):
        if e.op in _FLIP:
            return _canon(Binary(_FLIP[e.op], e.rhs, e.lhs))
        lhs = _canon(e.lhs)
        rhs = _canon(e.rhs)
        if e.op in _COMMUTATIVE:
            if pp_expr(rhs) < pp_expr(lhs):
                lhs, rhs = rhs, lhs
            return Binary(e.op, lhs, rhs)
        if e.op in _AC:
            parts = _flatten(e.op, lhs) + _flatten(e.op, rhs)
            parts.sort(key=pp_expr)
            out = parts[0]
            for part in parts[1:]:
                out = Binary(e.op, out, part)
            return out
        return Binary(e.op, lhs, rhs)
    return e


def normalize_clause(e: Expr) -> str:
    """Canonical text of a clause; equal text means equal clause."""
    return pp_expr(_canon(e))


def split_clauses(e: Expr) -> list[Expr]:
    """Top-level conjuncts of a formula, in source order."""
    return _flatten("&&", e)
