"""Parser for the single-loop mini-language and for invariant text.

Accepts the C-like subset documented in docs/language.md: integer
declarations, assignments (including `+=` and `++` forms), `if`/`else`,
exactly one `while` or `for` loop, `assert`/`assume`, and calls to
`extern int unknown()` for nondeterministic values.  Parsing desugars
the surface syntax into the core terms of `lang`:

  * `for (init; c; upd) { b }`  ->  init in the prefix, body `b + [upd]`
  * `if (unknown()) ...`        ->  Havoc(nondet_k); If(nondet_k != 0, ...)
  * `while (unknown()) ...`     ->  Havoc at loop entry and at body end
  * `x = unknown();`            ->  Havoc(x)
  * `if (g) return e;` before the loop  ->  Assume(!g) on the fall-through
  * integer `e` in boolean position      ->  `e != 0`

Diagnostics carry stable codes (`nested-loop`, `float-literal`, ...) so
callers can phrase retries; the full table is in docs/language.md.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

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
    SourceError,
    Stmt,
    Type,
    TRUE,
    Unary,
    Var,
    check_program,
    coerce_bool,
    infer_type,
    negate,
)

_TOKEN_RE = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<comment>//[^\n]*|/\*.*?\*/)
    | (?P<float>\d+\.\d*|\.\d+|\d+[eE][-+]?\d+)
    | (?P<int>\d+)
    | (?P<ident>[A-Za-z_]\w*)
    | (?P<punct>==>|\+\+|--|\+=|-=|\*=|/=|%=|<=|>=|==|!=|&&|\|\||[-+*/%<>=!(){},;:\[\]])
    """,
    re.VERBOSE | re.DOTALL,
)

_KEYWORDS = frozenset(
    ("int", "void", "if", "else", "while", "for", "return", "extern",
     "assert", "assume", "true", "false", "main")
)


@dataclass(frozen=True)
class Token:
    kind: str  # 'int' | 'ident' | 'punct' | 'eof'
    text: str
    line: int
    col: int


def lex(source: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line = 1
    line_start = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            col = pos - line_start + 1
            raise SourceError("syntax", f"unexpected character {source[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        col = pos - line_start + 1
        if kind == "float":
            raise SourceError("float-literal", f"non-integer literal {text!r}", line, col)
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, text, line, col))
        nl = text.count("\n")
        if nl:
            line += nl
            line_start = pos + text.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, 1))
    return tokens


@dataclass(frozen=True)
class _Return:
    """Parse-time marker for `return`; never survives into a Program."""
    pass


def _incr_stmt(name: str, op: str) -> Stmt:
    return Assign(name, Binary("+" if op == "++" else "-", Var(name), IntLit(1)))


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0
        self.declared: list[str] = []
        self.aux: list[str] = []
        self._nondet_n = 0
        # havocs hoisted out of the expression currently being parsed
        self.hoisted: list[Stmt] = []
        self.allow_unknown = False

    # --- token helpers -------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, text: str) -> bool:
        return self.peek().text == text and self.peek().kind in ("punct", "ident")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if not self.accept(text):
            raise SourceError("syntax", f"expected {text!r}, found {tok.text!r}", tok.line, tok.col)
        return tok

    def fail(self, code: str, message: str) -> SourceError:
        tok = self.peek()
        return SourceError(code, message, tok.line, tok.col)

    # --- names ----------------------------------------------------------

    def all_names(self) -> set[str]:
        return set(self.declared) | set(self.aux)

    def declare(self, name: str, tok: Token) -> None:
        if name in self.all_names():
            raise SourceError("duplicate-declaration", f"'{name}' declared twice", tok.line, tok.col)
        if "__" in name:
            raise SourceError("reserved-identifier", "names containing '__' are reserved", tok.line, tok.col)
        self.declared.append(name)

    def fresh_nondet(self) -> str:
        while True:
            name = f"nondet_{self._nondet_n}"
            self._nondet_n += 1
            if name not in self.all_names():
                self.aux.append(name)
                return name

    def flush_hoisted(self) -> list[Stmt]:
        out = self.hoisted
        self.hoisted = []
        return out

    # --- expressions ----------------------------------------------------
    # precedence, loosest first: ==>  ||  &&  ==/!=  relational  +-  */%  unary

    def coerce(self, e: Expr) -> Expr:
        try:
            return coerce_bool(e, self.all_names())
        except SourceError as err:
            if err.line is None:
                raise SourceError(err.code, str(err).split(": ", 1)[-1], self.peek().line) from None
            raise

    def parse_expr(self, logic: bool) -> Expr:
        if logic:
            return self.parse_implies()
        return self.parse_or()

    def parse_implies(self) -> Expr:
        lhs = self.parse_or()
        if self.accept("==>"):
            rhs = self.parse_implies()  # right-associative
            return Binary("==>", self.coerce(lhs), self.coerce(rhs))
        return lhs

    def parse_or(self) -> Expr:
        lhs = self.parse_and()
        while self.accept("||"):
            rhs = self.parse_and()
            lhs = Binary("||", self.coerce(lhs), self.coerce(rhs))
        return lhs

    def parse_and(self) -> Expr:
        lhs = self.parse_equality()
        while self.accept("&&"):
            rhs = self.parse_equality()
            lhs = Binary("&&", self.coerce(lhs), self.coerce(rhs))
        return lhs

    def parse_equality(self) -> Expr:
        lhs = self.parse_relational()
        while self.peek().text in ("==", "!="):
            op = self.next().text
            lhs = Binary(op, lhs, self.parse_relational())
        return lhs

    def parse_relational(self) -> Expr:
        lhs = self.parse_additive()
        while self.peek().text in ("<", "<=", ">", ">="):
            op = self.next().text
            lhs = Binary(op, lhs, self.parse_additive())
        return lhs

    def parse_additive(self) -> Expr:
        lhs = self.parse_multiplicative()
        while self.peek().text in ("+", "-"):
            op = self.next().text
            lhs = Binary(op, lhs, self.parse_multiplicative())
        return lhs

    def parse_multiplicative(self) -> Expr:
        lhs = self.parse_unary()
        while self.peek().text in ("*", "/", "%"):
            op = self.next().text
            lhs = Binary(op, lhs, self.parse_unary())
        return lhs

    def parse_unary(self) -> Expr:
        if self.accept("-"):
            return Unary("-", self.parse_unary())
        if self.accept("!"):
            return Unary("!", self.coerce(self.parse_unary()))
        return self.parse_primary()

    def parse_primary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "int":
            self.next()
            return IntLit(int(tok.text))
        if tok.text == "(":
            self.next()
            inner = self.parse_expr(logic=True) if self._logic_parens else self.parse_or()
            self.expect(")")
            return inner
        if tok.kind == "ident":
            if tok.text == "true":
                self.next()
                return BoolLit(True)
            if tok.text == "false":
                self.next()
                return BoolLit(False)
            if self.peek(1).text == "(":
                if tok.text == "unknown" and self.allow_unknown:
                    self.next()
                    self.expect("(")
                    self.expect(")")
                    name = self.fresh_nondet()
                    self.hoisted.append(Havoc(name))
                    return Var(name)
                raise SourceError(
                    "unknown-in-logic" if tok.text == "unknown" else "syntax",
                    f"function call {tok.text!r} not allowed here", tok.line, tok.col)
            if tok.text in _KEYWORDS:
                raise SourceError("syntax", f"unexpected keyword {tok.text!r}", tok.line, tok.col)
            self.next()
            if tok.text not in self.all_names():
                raise SourceError("undeclared-variable", f"variable '{tok.text}' is not declared",
                                  tok.line, tok.col)
            return Var(tok.text)
        raise SourceError("syntax", f"unexpected token {tok.text!r}", tok.line, tok.col)

    _logic_parens = True  # '(' re-enters the full grammar, so (p ==> q) works everywhere

    def parse_condition(self) -> Expr:
        """Boolean context in program position: unknown() allowed, no '==>'."""
        prev = self.allow_unknown
        self.allow_unknown = True
        self._logic_parens = False
        try:
            e = self.parse_expr(logic=False)
        finally:
            self.allow_unknown = prev
            self._logic_parens = True
        return self.coerce(e)

    def parse_formula(self) -> Expr:
        """Logic context: '==>' allowed, unknown() rejected."""
        e = self.parse_expr(logic=True)
        return self.coerce(e)

    def parse_rhs(self) -> Expr:
        """Right-hand side of an assignment: unknown() allowed."""
        prev = self.allow_unknown
        self.allow_unknown = True
        self._logic_parens = False
        try:
            return self.parse_expr(logic=False)
        finally:
            self.allow_unknown = prev
            self._logic_parens = True

    # --- statements -------------------------------------------------------

    def parse_block(self, in_loop: bool) -> list[Stmt]:
        if self.accept("{"):
            out: list[Stmt] = []
            while not self.accept("}"):
                if self.peek().kind == "eof":
                    raise self.fail("syntax", "unterminated block")
                out.extend(self.parse_stmt(in_loop))
            return out
        return self.parse_stmt(in_loop)

    def parse_stmt(self, in_loop: bool) -> list[Stmt]:
        tok = self.peek()
        if tok.text in ("while", "for"):
            if in_loop:
                raise SourceError("nested-loop", "nested loops are not supported", tok.line, tok.col)
            raise SourceError("unsupported-loop-position",
                              "a loop may only appear at the top level of main", tok.line, tok.col)
        if tok.text == "assert":
            raise SourceError("assert-before-loop" if not in_loop else "assert-in-loop",
                              "assert is only supported after the loop", tok.line, tok.col)
        if tok.text == "int":
            return self.parse_decl()
        if tok.text == "return":
            self.next()
            if not self.at(";"):
                self.parse_rhs()
            self.expect(";")
            return [_Return()]  # type: ignore[list-item]
        if tok.text == "assume":
            self.next()
            self.expect("(")
            cond = self.parse_formula()
            self.expect(")")
            self.expect(";")
            return [Assume(cond)]
        if tok.text == "if":
            self.next()
            self.expect("(")
            cond = self.parse_condition()
            self.expect(")")
            pre = self.flush_hoisted()
            then = tuple(self.parse_block(in_loop))
            els: tuple[Stmt, ...] = ()
            if self.accept("else"):
                els = tuple(self.parse_block(in_loop))
            return pre + [If(cond, then, els)]
        if self.accept(";"):
            return []
        if self.accept("{"):
            out: list[Stmt] = []
            while not self.accept("}"):
                if self.peek().kind == "eof":
                    raise self.fail("syntax", "unterminated block")
                out.extend(self.parse_stmt(in_loop))
            return out
        if tok.kind == "ident":
            return self.parse_assignment()
        if tok.text in ("++", "--"):
            op = self.next().text
            name = self.parse_lvalue()
            self.expect(";")
            return [_incr_stmt(name, op)]
        raise SourceError("syntax", f"unexpected token {tok.text!r}", tok.line, tok.col)

    def parse_lvalue(self) -> str:
        tok = self.peek()
        if tok.kind != "ident" or tok.text in _KEYWORDS:
            raise SourceError("syntax", "expected a variable name", tok.line, tok.col)
        self.next()
        if tok.text not in self.all_names():
            raise SourceError("undeclared-variable", f"variable '{tok.text}' is not declared",
                              tok.line, tok.col)
        return tok.text

    def _whole_rhs_is_unknown(self, end: tuple[str, ...]) -> bool:
        return (self.peek().text == "unknown" and self.peek(1).text == "("
                and self.peek(2).text == ")" and self.peek(3).text in end)

    def parse_assignment(self, *, consume_semi: bool = True) -> list[Stmt]:
        name = self.parse_lvalue()
        tok = self.peek()
        if tok.text in ("++", "--"):
            self.next()
            if consume_semi:
                self.expect(";")
            return [_incr_stmt(name, tok.text)]
        if tok.text in ("+=", "-=", "*=", "/=", "%="):
            self.next()
            rhs = self.parse_rhs()
            pre = self.flush_hoisted()
            if consume_semi:
                self.expect(";")
            return pre + [Assign(name, Binary(tok.text[0], Var(name), rhs))]
        if tok.text == "=":
            self.next()
            # `x = unknown();` is plain nondeterministic assignment
            if self._whole_rhs_is_unknown((";",) if consume_semi else (";", ")")):
                self.next(), self.next(), self.next()
                if consume_semi:
                    self.expect(";")
                return [Havoc(name)]
            rhs = self.parse_rhs()
            pre = self.flush_hoisted()
            if consume_semi:
                self.expect(";")
            return pre + [Assign(name, rhs)]
        raise SourceError("syntax", f"expected an assignment, found {tok.text!r}", tok.line, tok.col)

    def parse_decl(self, *, consume_semi: bool = True) -> list[Stmt]:
        self.expect("int")
        out: list[Stmt] = []
        while True:
            tok = self.peek()
            if tok.kind != "ident" or tok.text in _KEYWORDS:
                raise SourceError("syntax", "expected a variable name", tok.line, tok.col)
            self.next()
            self.declare(tok.text, tok)
            if self.accept("="):
                if self._whole_rhs_is_unknown((";", ",")):
                    self.next(), self.next(), self.next()
                    out.append(Havoc(tok.text))
                else:
                    rhs = self.parse_rhs()
                    out.extend(self.flush_hoisted())
                    out.append(Assign(tok.text, rhs))
            if not self.accept(","):
                break
        if consume_semi:
            self.expect(";")
        return out


def _scan_returns(stmts: tuple[Stmt, ...] | list[Stmt]) -> bool:
    for s in stmts:
        if isinstance(s, _Return):
            return True
        if isinstance(s, If) and (_scan_returns(s.then) or _scan_returns(s.els)):
            return True
    return False


def _normalize_pre(items: list[Stmt]) -> list[Stmt]:
    """Rewrite `if (g) return;` into Assume(!g); reject other returns."""
    out: list[Stmt] = []
    for s in items:
        if isinstance(s, If) and len(s.then) == 1 and isinstance(s.then[0], _Return) and not s.els:
            out.append(Assume(negate(s.cond)))
        elif isinstance(s, _Return):
            raise SourceError("unsupported-return", "unconditional return before the loop")
        elif isinstance(s, If) and (_scan_returns(s.then) or _scan_returns(s.els)):
            raise SourceError("unsupported-return", "return is only supported as `if (g) return;` "
                                                    "directly before the loop")
        else:
            out.append(s)
    return out


def parse_program(source: str, name: str = "main") -> Program:
    """Parse a full source file into a Program; raises SourceError."""
    p = _Parser(lex(source))

    while p.accept("extern"):
        p.expect("int")
        tok = p.peek()
        if tok.kind != "ident":
            raise p.fail("syntax", "expected a function name")
        p.next()
        p.expect("(")
        p.accept("void")
        p.expect(")")
        p.expect(";")

    if not (p.accept("int") or p.accept("void")):
        raise p.fail("syntax", "expected `int main()`")
    p.expect("main")
    p.expect("(")
    p.accept("void")
    p.expect(")")
    p.expect("{")

    pre_items: list[Stmt] = []
    loop: tuple[Expr, list[Stmt]] | None = None
    assertion: Expr | None = None

    while not p.accept("}"):
        tok = p.peek()
        if tok.kind == "eof":
            raise p.fail("syntax", "unterminated main body")
        if tok.text in ("while", "for"):
            if loop is not None:
                raise SourceError("multiple-loops", "only one loop is supported", tok.line, tok.col)
            if assertion is not None:
                raise SourceError("multiple-loops", "loop after the assertion", tok.line, tok.col)
            loop = _parse_loop(p, pre_items)
            continue
        if tok.text == "assert":
            if loop is None:
                raise SourceError("assert-before-loop", "assert is only supported after the loop",
                                  tok.line, tok.col)
            if assertion is not None:
                raise SourceError("trailing-statements", "only one assert is supported",
                                  tok.line, tok.col)
            p.next()
            p.expect("(")
            assertion = p.parse_formula()
            p.expect(")")
            p.expect(";")
            continue
        if assertion is not None:
            # only a final `return [e];` may follow the assertion
            if tok.text == "return":
                p.next()
                if not p.at(";"):
                    p.parse_rhs()
                p.expect(";")
                continue
            raise SourceError("trailing-statements",
                              f"unexpected {tok.text!r} after the assertion", tok.line, tok.col)
        if loop is not None:
            raise SourceError("trailing-statements",
                              f"expected `assert(...)` after the loop, found {tok.text!r}",
                              tok.line, tok.col)
        pre_items.extend(p.parse_stmt(in_loop=False))

    if p.peek().kind != "eof":
        raise p.fail("syntax", "text after the closing brace of main")
    if loop is None:
        raise SourceError("missing-loop", "program has no loop")
    if assertion is None:
        raise SourceError("missing-assert", "program has no assertion after the loop")

    cond, body = loop
    if _scan_returns(body):
        raise SourceError("return-in-loop", "return inside the loop body is not supported")
    pre = _normalize_pre(pre_items)

    prog = Program(
        name=name,
        vars=tuple(p.declared),
        pre=tuple(pre),
        loop_cond=cond,
        body=tuple(body),
        assertion=assertion,
        aux_vars=tuple(p.aux),
        source_text=source,
    )
    check_program(prog)
    return prog


def _parse_loop(p: _Parser, pre_items: list[Stmt]) -> tuple[Expr, list[Stmt]]:
    kw = p.next().text
    p.expect("(")
    if kw == "for":
        if not p.at(";"):
            if p.peek().text == "int":
                pre_items.extend(p.parse_decl(consume_semi=False))
            else:
                pre_items.extend(p.parse_assignment(consume_semi=False))
        p.expect(";")
        cond = TRUE if p.at(";") else p.parse_condition()
        p.expect(";")
        update: list[Stmt] = []
        if not p.at(")"):
            update = p.parse_assignment(consume_semi=False)
        p.expect(")")
    else:
        cond = p.parse_condition()
        p.expect(")")
        update = []
    cond_havocs = p.flush_hoisted()
    pre_items.extend(cond_havocs)
    body = p.parse_block(in_loop=True)
    body.extend(update)
    body.extend(cond_havocs)  # fresh nondeterministic choice before each re-test
    return cond, body


def parse_expr_text(text: str, names: tuple[str, ...] | list[str], *,
                    boolean: bool = True) -> Expr:
    """Parse one expression in logic context over the given names."""
    p = _Parser(lex(text))
    p.declared = list(names)
    e = p.parse_expr(logic=True)
    tok = p.peek()
    if tok.kind != "eof":
        raise SourceError("syntax", f"unexpected trailing {tok.text!r}", tok.line, tok.col)
    if boolean:
        e = p.coerce(e)
        if infer_type(e, set(names)) is not Type.BOOL:
            raise SourceError("type-mismatch", "expected a boolean formula")
    else:
        infer_type(e, set(names))
    return e


class InvariantBlockError(SourceError):
    """Malformed invariant text from a model reply.

    Codes: no-code-block, bad-expression, undeclared-variable,
    type-mismatch, duplicate-id.
    """


_FENCE_RE = re.compile(r"```[A-Za-z]*[ \t]*\n(.*?)```", re.DOTALL)
_ANNOT_RE = re.compile(r"loop\s+invariant\s+(?:([A-Za-z_]\w*)\s*:)?\s*([^;]+);")


def _extract_asserts(block: str) -> list[str]:
    out = []
    i = 0
    while True:
        m = re.compile(r"assert\s*\(").search(block, i)
        if m is None:
            return out
        depth = 1
        j = m.end()
        while j < len(block) and depth:
            if block[j] == "(":
                depth += 1
            elif block[j] == ")":
                depth -= 1
            j += 1
        if depth:
            raise InvariantBlockError("bad-expression", "unbalanced parentheses in assert")
        out.append(block[m.end():j - 1])
        i = j


def parse_invariant_block(text: str, prog: Program) -> InvariantSet:
    """Extract an InvariantSet from a model reply or an annotation file.

    Fenced code blocks win (the last one is used, so trailing answers
    override earlier scratch work); otherwise `loop invariant [id:] e;`
    lines are read.  Formulas are type-checked against the program's
    declared variables.
    """
    fences = _FENCE_RE.findall(text)
    pairs: list[tuple[str | None, str]] = []
    if fences:
        pairs = [(None, src) for src in _extract_asserts(fences[-1])]
    else:
        pairs = [(m.group(1), m.group(2)) for m in _ANNOT_RE.finditer(text)]
        if not pairs and "loop invariant" not in text:
            raise InvariantBlockError("no-code-block",
                                      "no fenced code block or `loop invariant` lines found")

    items = []
    for n, (given_id, src) in enumerate(pairs, start=1):
        try:
            formula = parse_expr_text(src, prog.vars, boolean=True)
        except InvariantBlockError:
            raise
        except SourceError as err:
            code = err.code if err.code in ("undeclared-variable", "type-mismatch") else "bad-expression"
            raise InvariantBlockError(code, f"invariant {n}: {err}") from err
        items.append(Invariant(given_id or f"i{n}", formula))
    try:
        return InvariantSet(tuple(items))
    except SourceError as err:
        raise InvariantBlockError("duplicate-id", str(err)) from err
