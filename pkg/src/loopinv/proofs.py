"""Proof texts exchanged with the model, and their parsers.

Two layers (formats documented in docs/proof-formats.md):

  * StructuredProof: the free-form but sectioned argument the model
    writes first.  Sections [Initial] / [Proof] / [Conclusion], with
    numbered `[STEP N: name]` labels inside [Proof].  Bodies are kept
    verbatim; only the skeleton is validated.

  * FormalizedProof: the solver-ready rewrite.  Per step: an [Initial]
    list of `formula // tag` lines (tags: initial, derived,
    declaration), a [Proof] list of `premise ==> conclusion // comment`
    lines, and one [Conclusion] line.  Every formula parses in logic
    context over the program variables plus any declaration-bound
    names, so each line can be handed straight to the solver.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .lang import Binary, Expr, Program, SourceError
from .parser import parse_expr_text
from .printer import pp_expr


class ProofFormatError(Exception):
    """Malformed proof text; `code` is stable, `line` is 1-based."""

    def __init__(self, code: str, message: str, line: int | None = None):
        self.code = code
        self.line = line
        where = f" at line {line}" if line is not None else ""
        super().__init__(f"{code}{where}: {message}")


@dataclass(frozen=True)
class ProofStep:
    number: int
    name: str
    body: str

    @property
    def label(self) -> str:
        return f"STEP {self.number}: {self.name}" if self.name else f"STEP {self.number}"


@dataclass(frozen=True)
class StructuredProof:
    initial: str
    steps: tuple[ProofStep, ...]
    conclusion: str


_STEP_RE = re.compile(r"^\s*\[STEP\s+(\d+)\s*(?::\s*(.*?))?\]\s*$")
_SECTION_RE = re.compile(r"^\s*\[(Initial|Proof|Conclusion)\]\s*$")
_FENCE_LINE_RE = re.compile(r"^\s*```")


def _clean_lines(text: str) -> list[str]:
    return [ln for ln in text.splitlines() if not _FENCE_LINE_RE.match(ln)]


def parse_structured_proof(text: str) -> StructuredProof:
    """Validate the section/step skeleton, keeping bodies verbatim."""
    lines = _clean_lines(text)
    sections: dict[str, list[str]] = {}
    current: list[str] | None = None
    order: list[str] = []
    for i, ln in enumerate(lines, start=1):
        m = _SECTION_RE.match(ln)
        if m:
            name = m.group(1)
            if name in sections:
                raise ProofFormatError("missing-section", f"duplicate [{name}] section", i)
            sections[name] = []
            current = sections[name]
            order.append(name)
            continue
        if current is not None:
            current.append(ln)
    for name in ("Initial", "Proof", "Conclusion"):
        if name not in sections:
            raise ProofFormatError("missing-section", f"no [{name}] section")
    if order != ["Initial", "Proof", "Conclusion"]:
        raise ProofFormatError("missing-section",
                               f"sections out of order: {' -> '.join(order)}")

    steps: list[ProofStep] = []
    body: list[str] = []
    header: tuple[int, str] | None = None

    def close() -> None:
        if header is not None:
            steps.append(ProofStep(header[0], header[1], "\n".join(body).strip("\n")))

    for ln in sections["Proof"]:
        m = _STEP_RE.match(ln)
        if m:
            close()
            header = (int(m.group(1)), (m.group(2) or "").strip())
            body = []
        elif header is not None:
            body.append(ln)
    close()

    if not steps:
        raise ProofFormatError("zero-steps", "the [Proof] section contains no [STEP N: ...] labels")
    expected = 1
    for st in steps:
        if st.number != expected:
            raise ProofFormatError("non-monotone-steps",
                                   f"expected STEP {expected}, found STEP {st.number}")
        expected += 1

    return StructuredProof(
        initial="\n".join(sections["Initial"]).strip("\n"),
        steps=tuple(steps),
        conclusion="\n".join(sections["Conclusion"]).strip("\n"),
    )


def format_structured_proof(sp: StructuredProof) -> str:
    """Canonical text form; parses back to an equal StructuredProof."""
    out = ["[Initial]", sp.initial, "", "[Proof]"]
    for st in sp.steps:
        out.append(f"[{st.label}]")
        if st.body:
            out.append(st.body)
        out.append("")
    out.extend(["[Conclusion]", sp.conclusion])
    return "\n".join(out).strip("\n") + "\n"


# --- formalized proofs -----------------------------------------------------


@dataclass(frozen=True)
class InitialCondition:
    formula: Expr
    tag: str  # 'initial' | 'derived' | 'declaration'
    comment: str


@dataclass(frozen=True)
class Implication:
    premise: Expr
    conclusion: Expr
    comment: str

    @property
    def formula(self) -> Expr:
        return Binary("==>", self.premise, self.conclusion)


@dataclass(frozen=True)
class Conclusion:
    formula: Expr
    comment: str = ""


@dataclass(frozen=True)
class FormalizedStep:
    label: str  # "" when the text carried no [STEP ...] line
    initial: tuple[InitialCondition, ...]
    implications: tuple[Implication, ...]
    conclusion: Conclusion
    declared: tuple[str, ...] = ()  # names bound by declaration lines

    def display_label(self, position: int) -> str:
        return self.label or f"STEP {position}"


@dataclass(frozen=True)
class FormalizedProof:
    steps: tuple[FormalizedStep, ...]


_TAGS = ("initial", "derived", "declaration")
_DECL_NAME_RE = re.compile(r"^\s*([A-Za-z_]\w*)\s*==(?![=>])")
_DECL_NAME_RHS_RE = re.compile(r"==\s*([A-Za-z_]\w*)\s*$")


def _declared_name(src: str, names: list[str]) -> str | None:
    """The fresh name a declaration line binds, on either side of '=='."""
    candidates = []
    m = _DECL_NAME_RE.match(src)
    if m:
        candidates.append(m.group(1))
    m = _DECL_NAME_RHS_RE.search(src)
    if m:
        candidates.append(m.group(1))
    for c in candidates:
        if c not in names:
            return c
    return candidates[0] if candidates else None


def _split_comment(ln: str) -> tuple[str, str | None]:
    if "//" in ln:
        formula, comment = ln.split("//", 1)
        return formula.strip(), comment.strip()
    return ln.strip(), None


def _parse_formula(src: str, names: tuple[str, ...], line_no: int) -> Expr:
    try:
        return parse_expr_text(src, names, boolean=True)
    except SourceError as err:
        code = "unbound-name" if err.code == "undeclared-variable" else "bad-expression"
        raise ProofFormatError(code, f"{src.strip()!r}: {err}", line_no) from err


def parse_formalized_proof(text: str, prog: Program) -> FormalizedProof:
    """Parse solver-ready steps; every formula is checked against the
    program's variables (plus names bound by declaration lines)."""
    lines = _clean_lines(text)

    # group lines into step chunks; a leading unlabeled [Initial] chunk
    # is accepted as a single anonymous step
    chunks: list[tuple[str, list[tuple[int, str]]]] = []
    label = ""
    current_chunk: list[tuple[int, str]] = []
    seen_any = False
    for i, ln in enumerate(lines, start=1):
        m = _STEP_RE.match(ln)
        if m:
            if seen_any and current_chunk:
                chunks.append((label, current_chunk))
            label = f"STEP {m.group(1)}" + (f": {m.group(2).strip()}" if m.group(2) else "")
            current_chunk = []
            seen_any = True
            continue
        if not seen_any and _SECTION_RE.match(ln):
            seen_any = True  # anonymous step starts at its [Initial]
        current_chunk.append((i, ln))
    if seen_any and current_chunk:
        chunks.append((label, current_chunk))
    if not chunks:
        raise ProofFormatError("zero-steps", "no [STEP ...] label or [Initial] section found")

    steps = [_parse_step(lbl, chunk, prog) for lbl, chunk in chunks]
    return FormalizedProof(tuple(steps))


def _parse_step(label: str, chunk: list[tuple[int, str]], prog: Program) -> FormalizedStep:
    sections: dict[str, list[tuple[int, str]]] = {}
    current: list[tuple[int, str]] | None = None
    for i, ln in chunk:
        m = _SECTION_RE.match(ln)
        if m:
            sections[m.group(1)] = []
            current = sections[m.group(1)]
            continue
        if current is not None and ln.strip():
            current.append((i, ln))
    for name in ("Initial", "Proof", "Conclusion"):
        if name not in sections:
            where = f" in [{label}]" if label else ""
            raise ProofFormatError("missing-section", f"no [{name}] section{where}",
                                   chunk[0][0] if chunk else None)

    names = list(prog.all_vars)
    declared: list[str] = []
    initial: list[InitialCondition] = []
    for i, ln in sections["Initial"]:
        src, comment = _split_comment(ln)
        # untagged lines count as given facts (the motivating proof style)
        tag_word = comment.split()[0].lower() if comment and comment.split() else "initial"
        tag = tag_word if tag_word in _TAGS else "derived"
        if tag == "declaration":
            name = _declared_name(src, names)
            if name is None:
                raise ProofFormatError("declaration-without-eq",
                                       "declaration line must bind a name with '=='", i)
            if name not in names:
                if "__" in name:
                    raise ProofFormatError("bad-expression",
                                           f"declared name {name!r} uses reserved '__'", i)
                names.append(name)
                declared.append(name)
        initial.append(InitialCondition(_parse_formula(src, tuple(names), i), tag, comment or ""))

    implications: list[Implication] = []
    for i, ln in sections["Proof"]:
        src, comment = _split_comment(ln)
        if comment is None:
            raise ProofFormatError("missing-comment",
                                   f"implication line lacks a '//' comment: {src!r}", i)
        formula = _parse_formula(src, tuple(names), i)
        if not (isinstance(formula, Binary) and formula.op == "==>"):
            raise ProofFormatError("missing-arrow",
                                   f"proof line is not an implication: {src!r}", i)
        implications.append(Implication(formula.lhs, formula.rhs, comment))

    conc_lines = sections["Conclusion"]
    if not conc_lines:
        raise ProofFormatError("missing-section",
                               f"[Conclusion] is empty{f' in [{label}]' if label else ''}")
    i, ln = conc_lines[0]
    src, comment = _split_comment(ln)
    conclusion = Conclusion(_parse_formula(src, tuple(names), i), comment or "")

    return FormalizedStep(label, tuple(initial), tuple(implications), conclusion,
                          tuple(declared))


def format_formalized_proof(fp: FormalizedProof) -> str:
    """Canonical text form; parses back to an equal FormalizedProof."""
    out: list[str] = []
    for step in fp.steps:
        if step.label:
            out.append(f"[{step.label}]")
        out.append("[Initial]")
        for cond in step.initial:
            out.append(f"{pp_expr(cond.formula)} // {cond.comment}")
        out.append("")
        out.append("[Proof]")
        for imp in step.implications:
            out.append(f"{pp_expr(imp.formula)} // {imp.comment}")
        out.append("")
        out.append("[Conclusion]")
        line = pp_expr(step.conclusion.formula)
        if step.conclusion.comment:
            line += f" // {step.conclusion.comment}"
        out.append(line)
        out.append("")
    return "\n".join(out).strip("\n") + "\n"


def unmatched_labels(fp: FormalizedProof, sp: StructuredProof) -> list[str]:
    """Formalized step labels that name no structured-proof step."""
    known = {st.label for st in sp.steps} | {f"STEP {st.number}" for st in sp.steps}
    return [st.label for st in fp.steps if st.label and st.label not in known]
