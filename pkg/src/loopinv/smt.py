"""Solver backend: SMT-LIB 2 emission and pooled solver sessions.

Queries ask whether `hypothesis ==> goal` is valid over the integers by
checking `hypothesis && !goal` for unsatisfiability.  The solver is an
external process speaking SMT-LIB 2 text on stdin/stdout (any conformant
binary works; the bundled default is a Node adapter around the z3
WebAssembly build).  `brute_force_validity` is the solver-free oracle
used to cross-check verdicts on bounded domains.
"""

from __future__ import annotations

import itertools
import os
import queue
import shlex
import shutil
import subprocess
import threading
import time
from collections import deque
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

from .interp import EvalError, eval_expr
from .lang import Binary, BoolLit, Expr, IntLit, TRUE, Unary, Var, conjoin

SOLVER_CMD_ENV = "LOOPINV_SOLVER_CMD"


class Status(Enum):
    VALID = "Valid"
    INVALID = "Invalid"
    UNKNOWN = "Unknown"
    TIMEOUT = "Timeout"


@dataclass(frozen=True)
class SolverBudget:
    per_query_timeout: float = 5.0  # seconds per check-sat


@dataclass
class QueryVerdict:
    status: Status
    model: dict[str, int] | None = None
    detail: str = ""


class SolverUnavailableError(Exception):
    """The configured solver command cannot be started."""


class SolverProtocolError(Exception):
    """The solver replied with something other than the protocol allows."""

    def __init__(self, message: str, transcript: str = ""):
        self.transcript = transcript
        super().__init__(message + (f"\n--- solver transcript ---\n{transcript}" if transcript else ""))


# --- emission -------------------------------------------------------------

_SMT_RESERVED = frozenset(
    "and or not xor ite div mod abs true false assert check-sat declare-const "
    "push pop exit let forall exists distinct select store".split()
)


def _sym(name: str) -> str:
    return f"|{name}|" if name in _SMT_RESERVED else name


def expr_to_smt(e: Expr) -> str:
    if isinstance(e, IntLit):
        return str(e.value) if e.value >= 0 else f"(- {-e.value})"
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, Var):
        return _sym(e.name)
    if isinstance(e, Unary):
        inner = expr_to_smt(e.operand)
        return f"(- {inner})" if e.op == "-" else f"(not {inner})"
    if isinstance(e, Binary):
        a = expr_to_smt(e.lhs)
        b = expr_to_smt(e.rhs)
        op = e.op
        if op in ("+", "-", "*", "<", "<=", ">", ">="):
            return f"({op} {a} {b})"
        if op == "/":
            # C-style truncation toward zero on top of SMT-LIB euclidean div
            return f"(ite (>= {a} 0) (div {a} {b}) (- (div (- {a}) {b})))"
        if op == "%":
            return f"(ite (>= {a} 0) (mod {a} {b}) (- (mod (- {a}) {b})))"
        if op == "==":
            return f"(= {a} {b})"
        if op == "!=":
            return f"(not (= {a} {b}))"
        if op == "&&":
            return f"(and {a} {b})"
        if op == "||":
            return f"(or {a} {b})"
        if op == "==>":
            return f"(=> {a} {b})"
    raise TypeError(f"not an expression: {e!r}")


def _is_const(e: Expr) -> bool:
    return isinstance(e, IntLit) or (isinstance(e, Unary) and e.op == "-"
                                     and isinstance(e.operand, IntLit))


def _nonlinear(e: Expr) -> bool:
    if isinstance(e, Unary):
        return _nonlinear(e.operand)
    if isinstance(e, Binary):
        if e.op == "*" and not (_is_const(e.lhs) or _is_const(e.rhs)):
            return True
        if e.op in ("/", "%") and not _is_const(e.rhs):
            return True
        return _nonlinear(e.lhs) or _nonlinear(e.rhs)
    return False


def pick_logic(exprs: Sequence[Expr]) -> str:
    """QF_NIA when any term multiplies two variables (or divides by one)."""
    return "QF_NIA" if any(_nonlinear(e) for e in exprs) else "QF_LIA"


def query_script(hypothesis: Expr, goal: Expr, variables: Sequence[str],
                 budget: SolverBudget | None = None) -> str:
    """Standalone deterministic script for one validity query.

    Byte-identical for identical inputs; runnable by any SMT-LIB 2
    solver (`--dump-smt` in the CLI writes exactly this).
    """
    logic = pick_logic([hypothesis, goal])
    lines = ["(set-option :produce-models true)"]
    if budget is not None:
        lines.append(f"(set-option :timeout {int(budget.per_query_timeout * 1000)})")
    lines.append(f"(set-logic {logic})")
    for v in sorted(variables):
        lines.append(f"(declare-const {_sym(v)} Int)")
    lines.append(f"(assert {expr_to_smt(hypothesis)})")
    lines.append(f"(assert (not {expr_to_smt(goal)}))")
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"


# --- model text parsing ----------------------------------------------------


def _sexpr_tokens(text: str):
    i = 0
    while i < len(text):
        c = text[i]
        if c in "()":
            yield c
            i += 1
        elif c.isspace():
            i += 1
        elif c == "|":
            j = text.index("|", i + 1)
            yield text[i + 1:j]
            i = j + 1
        else:
            j = i
            while j < len(text) and not text[j].isspace() and text[j] not in "()":
                j += 1
            yield text[i:j]
            i = j


def _sexpr_parse(tokens) -> list:
    out = []
    for tok in tokens:
        if tok == "(":
            out.append(_sexpr_parse(tokens))
        elif tok == ")":
            return out
        else:
            out.append(tok)
    return out


def parse_model(text: str) -> dict[str, int]:
    """Values of Int constants from a (get-model) reply."""
    tree = _sexpr_parse(_sexpr_tokens(text))
    model: dict[str, int] = {}

    def walk(node) -> None:
        if not isinstance(node, list):
            return
        if (len(node) >= 5 and node[0] == "define-fun" and node[2] == []
                and node[3] == "Int"):
            value = node[4]
            if isinstance(value, list) and len(value) == 2 and value[0] == "-":
                model[str(node[1])] = -int(value[1])
            elif isinstance(value, str) and (value.lstrip("-").isdigit()):
                model[str(node[1])] = int(value)
            return
        for child in node:
            walk(child)

    walk(tree)
    return model


# --- sessions ---------------------------------------------------------------

_WATCHDOG_SLACK = 0.8  # extra wall time past the solver's own timeout


def default_solver_command() -> list[str]:
    override = os.environ.get(SOLVER_CMD_ENV)
    if override:
        return shlex.split(override)
    z3 = shutil.which("z3")
    if z3:
        return [z3, "-in"]
    shim = Path(__file__).parent / "solver_shim" / "z3_stdio.js"
    node = shutil.which("node")
    if node and shim.exists():
        return [node, str(shim)]
    raise SolverUnavailableError(
        "no SMT solver found: install z3, or node plus the bundled shim "
        f"(npm install inside {shim.parent}), or set {SOLVER_CMD_ENV}")


class _SessionDied(Exception):
    pass


class SolverSession:
    """One solver process; queries are scoped with push/pop."""

    def __init__(self, cmd: Sequence[str]):
        self.cmd = list(cmd)
        self.proc: subprocess.Popen | None = None
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._stderr: deque[str] = deque(maxlen=40)
        self._sentinel_n = 0
        self._state: tuple[str, int] | None = None  # (logic, timeout_ms)

    # lifecycle

    def start(self) -> None:
        try:
            self.proc = subprocess.Popen(
                self.cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.PIPE, text=True, bufsize=1)
        except OSError as err:
            raise SolverUnavailableError(f"cannot start solver {self.cmd!r}: {err}") from err
        self._lines = queue.Queue()
        self._stderr = deque(maxlen=40)
        self._state = None
        threading.Thread(target=self._read_stdout, args=(self.proc,), daemon=True).start()
        threading.Thread(target=self._read_stderr, args=(self.proc,), daemon=True).start()

    def _read_stdout(self, proc: subprocess.Popen) -> None:
        assert proc.stdout is not None
        for line in proc.stdout:
            self._lines.put(line.rstrip("\n"))
        self._lines.put(None)

    def _read_stderr(self, proc: subprocess.Popen) -> None:
        assert proc.stderr is not None
        for line in proc.stderr:
            self._stderr.append(line.rstrip("\n"))

    @property
    def alive(self) -> bool:
        return self.proc is not None and self.proc.poll() is None

    def close(self) -> None:
        if self.proc is not None:
            try:
                if self.proc.stdin:
                    self.proc.stdin.close()
                self.proc.kill()
                self.proc.wait(timeout=5)
            except OSError:
                pass
            self.proc = None

    def _kill(self) -> None:
        self.close()

    # wire protocol

    def _send(self, text: str) -> None:
        if not self.alive:
            raise _SessionDied("solver process is not running")
        assert self.proc is not None and self.proc.stdin is not None
        try:
            self.proc.stdin.write(text)
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as err:
            raise _SessionDied(str(err)) from err

    def _exchange(self, commands: str, timeout: float) -> list[str]:
        """Send commands plus a sentinel echo; collect lines up to it."""
        self._sentinel_n += 1
        marker = f"@@{self._sentinel_n}@@"
        self._send(commands + f'(echo "{marker}")\n')
        out: list[str] = []
        deadline = time.monotonic() + timeout
        while True:
            try:
                line = self._lines.get(timeout=max(deadline - time.monotonic(), 0.001))
            except queue.Empty:
                self._kill()
                raise TimeoutError(f"no solver reply within {timeout:.1f}s")
            if line is None:
                raise _SessionDied("solver process closed its output"
                                   + (f"; stderr: {' | '.join(self._stderr)}" if self._stderr else ""))
            if line == marker:
                return out
            if "(error" in line:
                # An inline error means this scope (and possibly the whole
                # session) no longer reflects what was sent: the wasm solver
                # backend sporadically mangles one command of a batch, which
                # would otherwise weaken the query into a bogus "sat".
                # Recycle the process; check() retries the query once.
                self._kill()
                raise _SessionDied(f"solver error reply: {line.strip()}")
            if line.strip():
                out.append(line)

    def _configure(self, logic: str, timeout_ms: int) -> None:
        if self._state == (logic, timeout_ms):
            return
        if self._state is not None and self._state[0] != logic:
            self._exchange("(reset)\n", 10.0)
            self._state = None
        if self._state is None:
            self._exchange("(set-option :produce-models true)\n"
                           f"(set-option :timeout {timeout_ms})\n"
                           f"(set-logic {logic})\n", 10.0)
        else:
            self._exchange(f"(set-option :timeout {timeout_ms})\n", 10.0)
        self._state = (logic, timeout_ms)

    def _run_query(self, hypothesis: Expr, goal: Expr, variables: Sequence[str],
                   budget: SolverBudget) -> QueryVerdict:
        logic = pick_logic([hypothesis, goal])
        timeout_ms = int(budget.per_query_timeout * 1000)
        if not self.alive:
            self.start()
        self._configure(logic, timeout_ms)

        decls = "".join(f"(declare-const {_sym(v)} Int)\n" for v in sorted(variables))
        body = ("(push 1)\n" + decls
                + f"(assert {expr_to_smt(hypothesis)})\n"
                + f"(assert (not {expr_to_smt(goal)}))\n"
                + "(check-sat)\n")
        deadline = budget.per_query_timeout + _WATCHDOG_SLACK
        try:
            lines = self._exchange(body, deadline)
        except TimeoutError as err:
            return QueryVerdict(Status.TIMEOUT, detail=str(err))

        answer = lines[-1] if lines else ""
        if answer == "unsat":
            self._exchange("(pop 1)\n", 10.0)
            return QueryVerdict(Status.VALID)
        if answer == "sat":
            model_lines = self._exchange("(get-model)\n", 10.0)
            self._exchange("(pop 1)\n", 10.0)
            model = parse_model("\n".join(model_lines))
            full = {v: model.get(v, 0) for v in variables}
            return QueryVerdict(Status.INVALID, model=full)
        if answer == "unknown":
            reason_lines = self._exchange("(get-info :reason-unknown)\n", 10.0)
            self._exchange("(pop 1)\n", 10.0)
            reason = " ".join(reason_lines)
            if any(word in reason for word in ("timeout", "canceled", "resource")):
                return QueryVerdict(Status.TIMEOUT, detail=reason)
            return QueryVerdict(Status.UNKNOWN, detail=reason)
        self._kill()  # the push scope may be poisoned; recycle the process
        raise SolverProtocolError(f"unexpected check-sat reply {answer!r}",
                                  transcript="\n".join(lines))

    def check(self, hypothesis: Expr, goal: Expr, variables: Sequence[str],
              budget: SolverBudget) -> QueryVerdict:
        """Validity of hypothesis ==> goal; Invalid carries a model.

        A crashed or error-spewing process is restarted and the query
        retried, up to three attempts total; genuine query errors are
        deterministic, so they still surface after the retries.
        """
        failures: list[str] = []
        for _ in range(3):
            try:
                return self._run_query(hypothesis, goal, variables, budget)
            except _SessionDied as err:
                failures.append(str(err))
                self._kill()
        raise SolverProtocolError(
            "solver failed repeatedly on one query (" + "; then ".join(failures) + ")")


class SolverPool:
    """Reusable sessions behind a lock; one session per concurrent caller."""

    def __init__(self, cmd: Sequence[str] | None = None):
        self.cmd = list(cmd) if cmd is not None else default_solver_command()
        self._idle: list[SolverSession] = []
        self._all: list[SolverSession] = []
        self._lock = threading.Lock()

    def acquire(self) -> SolverSession:
        with self._lock:
            if self._idle:
                return self._idle.pop()
            session = SolverSession(self.cmd)
            self._all.append(session)
            return session

    def release(self, session: SolverSession) -> None:
        with self._lock:
            self._idle.append(session)

    def close(self) -> None:
        with self._lock:
            for session in self._all:
                session.close()
            self._idle = []
            self._all = []

    def __enter__(self) -> "SolverPool":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def check_validity(self, hypothesis: Expr, goal: Expr, variables: Sequence[str],
                       budget: SolverBudget | None = None) -> QueryVerdict:
        budget = budget or SolverBudget()
        session = self.acquire()
        try:
            return session.check(hypothesis, goal, variables, budget)
        finally:
            self.release(session)

    def check_entailment(self, conds: Sequence[Expr], formula: Expr,
                         variables: Sequence[str],
                         budget: SolverBudget | None = None) -> QueryVerdict:
        """Do the accumulated conditions entail `formula`?"""
        return self.check_validity(conjoin(list(conds)) if conds else TRUE,
                                   formula, variables, budget)


# --- solver-free oracle -----------------------------------------------------


@dataclass
class BruteForceVerdict:
    status: Status
    witness: dict[str, int] | None = None
    skipped: int = 0  # grid points discarded for division by zero


def brute_force_validity(hypothesis: Expr, goal: Expr, variables: Sequence[str],
                         bound: int) -> BruteForceVerdict:
    """Exhaustively test hypothesis ==> goal on [-bound, bound]^k.

    Variables are sorted by name and the grid is enumerated
    lexicographically, so the reported witness is the first one in that
    order.  Points where evaluation divides by zero are skipped and
    counted, mirroring the solver's unconstrained treatment.
    """
    names = sorted(variables)
    skipped = 0
    for point in itertools.product(range(-bound, bound + 1), repeat=len(names)):
        env = dict(zip(names, point))
        try:
            if eval_expr(hypothesis, env) and not eval_expr(goal, env):
                return BruteForceVerdict(Status.INVALID, witness=env, skipped=skipped)
        except EvalError:
            skipped += 1
    return BruteForceVerdict(Status.VALID, skipped=skipped)
