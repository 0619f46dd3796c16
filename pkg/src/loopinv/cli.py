"""Command-line front end.

Subcommands:
  verify       discharge the VCs for a program + invariant file
  synthesize   run the full refinement loop (replay or live backend)
  check-proof  check a formalized proof against one VC
  bench        run a corpus directory and aggregate metrics

Configuration precedence is flags > environment > config file.  The
config file is plain `key = value` lines with `#` comments.  Exit codes
follow the engine (0 solved, 2 budget exhausted, 3 error); usage errors
exit 64 and configuration errors exit 78.
"""

from __future__ import annotations

import argparse
import dataclasses
import shlex
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from .bench import replay_backend_factory, run_corpus
from .engine import (EXIT_CODES, Outcome, RunConfig, frozen_clock,
                     run_synthesis)
from .gateway import (HttpBackend, ProviderConfig, RecordingBackend,
                      TranscriptError, load_transcript, ReplayBackend,
                      save_transcript)
from .lang import InvariantSet
from .parser import SourceError, parse_invariant_block, parse_program
from .printer import pp_expr
from .proofs import ProofFormatError, parse_formalized_proof
from .checker import check_proof
from .smt import SolverBudget, SolverPool, query_script
from .vcgen import VcKind, check_vcs, generate_vcs

EX_USAGE = 64
EX_CONFIG = 78


class CliError(Exception):
    """Configuration-level failure; maps to exit code 78."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors exit 64, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EX_USAGE)


@dataclass
class Settings:
    solver_cmd: list[str] | None = None
    timeout: float = 5.0
    wall_clock_budget: float = 600.0
    token_budget: int = 150_000
    seed: int = 0
    max_feedback_rounds: int | None = None
    base_url: str | None = None
    model: str | None = None
    api_key_env: str = "LOOPINV_API_KEY"

    def run_config(self) -> RunConfig:
        try:
            return RunConfig(
                wall_clock_budget=self.wall_clock_budget,
                token_budget=self.token_budget,
                solver=SolverBudget(per_query_timeout=self.timeout),
                rng_seed=self.seed,
                max_feedback_rounds=self.max_feedback_rounds,
            )
        except ValueError as err:
            raise CliError(str(err)) from err

    def describe(self) -> str:
        cmd = " ".join(self.solver_cmd) if self.solver_cmd else "(bundled default)"
        lines = [
            f"solver_cmd = {cmd}",
            f"timeout = {self.timeout}",
            f"wall_clock_budget = {self.wall_clock_budget}",
            f"token_budget = {self.token_budget}",
            f"seed = {self.seed}",
            f"max_feedback_rounds = {self.max_feedback_rounds}",
            f"base_url = {self.base_url}",
            f"model = {self.model}",
            f"api_key_env = {self.api_key_env}",
        ]
        return "\n".join(lines)


_INT_KEYS = {"token_budget", "seed", "max_feedback_rounds"}
_FLOAT_KEYS = {"timeout", "wall_clock_budget"}
_STR_KEYS = {"base_url", "model", "api_key_env"}


def parse_config_file(path: Path) -> dict:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise CliError(f"cannot read config file: {err}") from err
    out: dict = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{n}: expected `key = value`")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "solver_cmd":
            out[key] = shlex.split(value)
        elif key in _INT_KEYS:
            try:
                out[key] = int(value)
            except ValueError:
                raise CliError(f"{path}:{n}: {key} must be an integer")
        elif key in _FLOAT_KEYS:
            try:
                out[key] = float(value)
            except ValueError:
                raise CliError(f"{path}:{n}: {key} must be a number")
        elif key in _STR_KEYS:
            out[key] = value
        else:
            raise CliError(f"{path}:{n}: unknown config key {key!r}")
    return out


def merge_settings(args: argparse.Namespace) -> Settings:
    s = Settings()
    if getattr(args, "config", None):
        for key, value in parse_config_file(Path(args.config)).items():
            setattr(s, key, value)
    # environment sits between config and flags; the solver command env
    # override is applied inside the solver module itself when no
    # explicit command reaches it, and the API key is read at send time
    if getattr(args, "solver_cmd", None):
        s.solver_cmd = shlex.split(args.solver_cmd)
    if getattr(args, "timeout", None) is not None:
        s.timeout = args.timeout
    if getattr(args, "seed", None) is not None:
        s.seed = args.seed
    if getattr(args, "base_url", None):
        s.base_url = args.base_url
    if getattr(args, "model", None):
        s.model = args.model
    if getattr(args, "token_budget", None) is not None:
        s.token_budget = args.token_budget
    if getattr(args, "wall_clock_budget", None) is not None:
        s.wall_clock_budget = args.wall_clock_budget
    if getattr(args, "max_feedback_rounds", None) is not None:
        s.max_feedback_rounds = args.max_feedback_rounds
    return s


def _load_program(path: str):
    try:
        return parse_program(Path(path).read_text(encoding="utf-8"),
                             name=Path(path).stem)
    except OSError as err:
        raise CliError(f"cannot read program: {err}") from err
    except SourceError as err:
        raise CliError(f"{path}: {err}") from err


def _load_invariants(path: str, prog) -> InvariantSet:
    try:
        return parse_invariant_block(Path(path).read_text(encoding="utf-8"), prog)
    except OSError as err:
        raise CliError(f"cannot read invariants: {err}") from err
    except SourceError as err:
        raise CliError(f"{path}: {err}") from err


def _pool(settings: Settings) -> SolverPool:
    if settings.solver_cmd:
        return SolverPool(cmd=settings.solver_cmd)
    return SolverPool()


# --- subcommands -------------------------------------------------------

def cmd_verify(args: argparse.Namespace, settings: Settings) -> int:
    prog = _load_program(args.program)
    invs = _load_invariants(args.invariants, prog)
    vcs = generate_vcs(prog, invs)
    if args.dump_smt:
        out_dir = Path(args.dump_smt)
        out_dir.mkdir(parents=True, exist_ok=True)
        for vc in vcs:
            script = query_script(vc.hypothesis, vc.goal, vc.quantified_vars)
            name = f"{vc.kind.value.lower()}_{vc.target}.smt2"
            (out_dir / name).write_text(script, encoding="utf-8")
    pool = _pool(settings)
    try:
        results = check_vcs(vcs, pool, SolverBudget(per_query_timeout=settings.timeout))
    finally:
        pool.close()
    ok = True
    for r in results:
        line = f"{r.vc.kind.value:<13} {r.vc.target:<12} {r.status.value}"
        if r.counterexample:
            pairs = ", ".join(f"{k} = {v}" for k, v in sorted(r.counterexample.items()))
            line += f"  [{pairs}]"
        print(line)
        ok = ok and r.status.value == "Valid"
    return 0 if ok else 1


def _backend_for_synthesize(args: argparse.Namespace, settings: Settings):
    if args.replay and args.live:
        raise CliError("choose either --replay or --live, not both")
    if args.replay:
        if args.record:
            raise CliError("--record needs a live backend, not --replay")
        try:
            transcript = load_transcript(args.replay)
        except (OSError, TranscriptError) as err:
            raise CliError(str(err)) from err
        return ReplayBackend(transcript), frozen_clock, None
    if args.live:
        if not settings.base_url or not settings.model:
            raise CliError("live mode needs base_url and model "
                           "(flags or config file)")
        backend = HttpBackend(ProviderConfig(
            base_url=settings.base_url, model=settings.model,
            api_key_env=settings.api_key_env))
        if args.record:
            backend = RecordingBackend(backend)
        return backend, time.monotonic, args.record
    raise CliError("choose a backend: --replay TRANSCRIPT or --live")


def cmd_synthesize(args: argparse.Namespace, settings: Settings) -> int:
    prog = _load_program(args.program)
    backend, clock, record_path = _backend_for_synthesize(args, settings)
    cfg = settings.run_config()
    pool = _pool(settings)
    try:
        report = run_synthesis(prog, cfg, backend, pool=pool, clock=clock)
    finally:
        pool.close()
    if record_path:
        save_transcript(backend.transcript(), record_path)
    print(f"{report.program}: {report.outcome.value} "
          f"({report.classification.value}, {report.feedback_rounds} feedback rounds, "
          f"{report.tokens.input}/{report.tokens.output} tokens)")
    if report.final_invariants is not None:
        for inv in report.final_invariants.items:
            print(f"  loop invariant {inv.id}: {pp_expr(inv.formula)};")
    if report.error:
        print(f"  {report.error}")
    if args.out:
        Path(args.out).write_text(report.to_json(), encoding="utf-8")
    return EXIT_CODES[report.outcome]


def _parse_vc_selector(raw: str) -> tuple[VcKind, str | None]:
    kind_txt, _, target = raw.partition(":")
    table = {k.value.lower(): k for k in VcKind}
    kind = table.get(kind_txt.strip().lower())
    if kind is None:
        names = ", ".join(k.value for k in VcKind)
        raise CliError(f"unknown VC kind {kind_txt!r} (one of: {names})")
    return kind, (target.strip() or None)


def cmd_check_proof(args: argparse.Namespace, settings: Settings) -> int:
    prog = _load_program(args.program)
    invs = _load_invariants(args.invariants, prog)
    try:
        proof_text = Path(args.proof).read_text(encoding="utf-8")
    except OSError as err:
        raise CliError(f"cannot read proof: {err}") from err
    try:
        fp = parse_formalized_proof(proof_text, prog)
    except ProofFormatError as err:
        raise CliError(f"{args.proof}: {err}") from err

    kind, target = _parse_vc_selector(args.vc)
    candidates = [vc for vc in generate_vcs(prog, invs) if vc.kind is kind]
    if target is not None:
        candidates = [vc for vc in candidates if vc.target == target]
    if not candidates:
        raise CliError(f"no {kind.value} condition matches target {target!r}")
    if len(candidates) > 1:
        ids = ", ".join(vc.target for vc in candidates)
        raise CliError(f"ambiguous {kind.value} target; choose one of: {ids}")
    vc = candidates[0]

    pool = _pool(settings)
    try:
        report = check_proof(fp, prog, vc, pool,
                             SolverBudget(per_query_timeout=settings.timeout))
    finally:
        pool.close()
    print(f"checked {report.checked_implications} implications against "
          f"{vc.describe()}")
    for e in report.errors:
        line = f"  {e.kind.value} in [{e.step_label}]: {pp_expr(e.formula)}"
        if e.comment:
            line += f"  // {e.comment}"
        print(line)
    if not report.errors:
        print("  no reasoning errors found")
    return 0 if not report.errors else 1


def cmd_bench(args: argparse.Namespace, settings: Settings) -> int:
    cfg = settings.run_config()
    if args.live:
        if not settings.base_url or not settings.model:
            raise CliError("live mode needs base_url and model")
        provider = ProviderConfig(base_url=settings.base_url, model=settings.model,
                                  api_key_env=settings.api_key_env)

        def factory(entry):
            return HttpBackend(provider)
        clock = time.monotonic
    else:
        factory = replay_backend_factory
        clock = frozen_clock
    result = run_corpus(args.corpus, cfg, repeats=args.repeats,
                        backend_factory=factory, jobs=args.jobs, clock=clock,
                        solver_cmd=settings.solver_cmd)
    sys.stdout.write(result.summary_table())
    if args.out:
        Path(args.out).write_text(result.summary_json(), encoding="utf-8")
    return 0


# --- entry point -------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="loopinv",
                     description="Loop invariant synthesis with solver-checked "
                                 "reasoning feedback.")
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--solver-cmd", dest="solver_cmd",
                        help="external SMT solver command (SMT-LIB 2 on stdin)")
    parser.add_argument("--timeout", type=float,
                        help="per-query solver timeout in seconds (default 5)")
    parser.add_argument("--verbose", action="store_true",
                        help="print the effective configuration")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="check a program against given invariants")
    p.add_argument("program")
    p.add_argument("--invariants", required=True,
                   help="file with `loop invariant id: formula;` lines")
    p.add_argument("--dump-smt", dest="dump_smt", metavar="DIR",
                   help="write each VC as an .smt2 script into DIR")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("synthesize", help="run the full synthesis loop")
    p.add_argument("program")
    p.add_argument("--replay", metavar="TRANSCRIPT",
                   help="replay recorded model responses (offline)")
    p.add_argument("--live", action="store_true",
                   help="use the configured HTTP provider")
    p.add_argument("--record", metavar="OUT",
                   help="with --live, record responses into a transcript")
    p.add_argument("--seed", type=int, help="rng seed (default 0)")
    p.add_argument("--out", help="write the run report JSON here")
    p.add_argument("--base-url", dest="base_url", help="provider base URL")
    p.add_argument("--model", help="provider model name")
    p.add_argument("--token-budget", dest="token_budget", type=int)
    p.add_argument("--wall-clock-budget", dest="wall_clock_budget", type=float)
    p.add_argument("--max-feedback-rounds", dest="max_feedback_rounds", type=int)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("check-proof", help="check a formalized proof against one VC")
    p.add_argument("program")
    p.add_argument("--invariants", required=True)
    p.add_argument("--proof", required=True, help="formalized proof text file")
    p.add_argument("--vc", required=True, metavar="KIND[:TARGET]",
                   help="e.g. PostCondition, Establishment:i2")
    p.set_defaults(func=cmd_check_proof)

    p = sub.add_parser("bench", help="run a corpus directory")
    p.add_argument("corpus")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, help="base rng seed (default 0)")
    p.add_argument("--live", action="store_true")
    p.add_argument("--base-url", dest="base_url")
    p.add_argument("--model", help="provider model name")
    p.add_argument("--out", help="write the summary JSON here")
    p.add_argument("--token-budget", dest="token_budget", type=int)
    p.add_argument("--wall-clock-budget", dest="wall_clock_budget", type=float)
    p.add_argument("--max-feedback-rounds", dest="max_feedback_rounds", type=int)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = merge_settings(args)
        if args.verbose:
            print(settings.describe(), file=sys.stderr)
        return args.func(args, settings)
    except CliError as err:
        print(f"loopinv: {err}", file=sys.stderr)
        return EX_CONFIG


if __name__ == "__main__":
    sys.exit(main())
