"""Corpus runs and the metrics summarizing them.

A corpus directory holds one program file per benchmark plus optional
siblings: `<name>.gold` with the reference invariants (used for the
Jaccard refinement metric) and `<name>.transcript` with recorded model
responses (used for offline replay).  Aggregation is a deterministic
fold over reports sorted by program name and seed, so two replay runs
of the same corpus produce byte-identical summaries.
"""

from __future__ import annotations

import dataclasses
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

from .engine import (Classification, Outcome, RunConfig, RunReport,
                     run_synthesis)
from .gateway import Backend, ReplayBackend, TranscriptError, load_transcript
from .lang import InvariantSet, Program
from .parser import SourceError, parse_invariant_block, parse_program
from .printer import normalize_clause, split_clauses
from .smt import SolverPool

SUMMARY_FORMAT = "bench-summary"
SUMMARY_VERSION = 1

PROGRAM_SUFFIX = ".c"
GOLD_SUFFIX = ".gold"
TRANSCRIPT_SUFFIX = ".transcript"


def clause_set(invs: InvariantSet) -> frozenset[str]:
    """Normalized atomic clauses: each invariant split at top-level &&."""
    out: set[str] = set()
    for inv in invs.items:
        for clause in split_clauses(inv.formula):
            out.add(normalize_clause(clause))
    return frozenset(out)


def jaccard(a: InvariantSet, b: InvariantSet) -> Fraction:
    """|A∩B| / |A∪B| over normalized clauses; two empty sets score 1."""
    ca, cb = clause_set(a), clause_set(b)
    if not ca and not cb:
        return Fraction(1)
    return Fraction(len(ca & cb), len(ca | cb))


@dataclass(frozen=True)
class RefinementScore:
    improved: int
    counted: int
    excluded_programs: tuple[str, ...]  # no gold set available

    @property
    def rate(self) -> Fraction | None:
        if self.counted == 0:
            return None
        return Fraction(self.improved, self.counted)


def refinement_success_rate(reports: Sequence[RunReport],
                            gold: dict[str, InvariantSet]) -> RefinementScore:
    """Fraction of feedback iterations that strictly increased the
    Jaccard similarity to the program's gold invariants."""
    improved = 0
    counted = 0
    excluded: list[str] = []
    for report in reports:
        target = gold.get(report.program)
        if target is None:
            if report.program not in excluded:
                excluded.append(report.program)
            continue
        for rec in report.rounds:
            if not rec.is_feedback_round or rec.refined_invariants is None:
                continue
            counted += 1
            if jaccard(rec.refined_invariants, target) > jaccard(rec.invariants, target):
                improved += 1
    return RefinementScore(improved, counted, tuple(sorted(excluded)))


@dataclass
class ProgramEntry:
    name: str
    path: Path
    program: Program | None
    gold: InvariantSet | None
    transcript_path: Path | None
    skip_reason: str | None = None
    reports: list[RunReport] = field(default_factory=list)


@dataclass
class CorpusResult:
    entries: list[ProgramEntry]
    repeats: int
    base_seed: int

    @property
    def runnable(self) -> list[ProgramEntry]:
        return [e for e in self.entries if e.skip_reason is None]

    def all_reports(self) -> list[RunReport]:
        out: list[RunReport] = []
        for e in sorted(self.runnable, key=lambda e: e.name):
            out.extend(sorted(e.reports, key=lambda r: r.seed))
        return out

    def summary_dict(self) -> dict:
        reports = self.all_reports()
        successes = [r for r in reports if r.outcome is Outcome.SOLVED]
        direct = sum(1 for r in successes
                     if r.classification is Classification.DIRECT_SUCCESS)
        fed = sum(1 for r in successes
                  if r.classification is Classification.FEEDBACK_DRIVEN_SUCCESS)
        solved_programs = sorted({r.program for r in successes})
        gold = {e.name: e.gold for e in self.runnable if e.gold is not None}
        score = refinement_success_rate(reports, gold)

        def mean(vals: list[float]) -> float | None:
            if not vals:
                return None
            return round(sum(vals) / len(vals), 3)

        rate = (None if not reports
                else {"num": len(successes), "den": len(reports)})
        refinement = {
            "improved": score.improved,
            "counted": score.counted,
            "rate": (None if score.rate is None
                     else {"num": score.rate.numerator, "den": score.rate.denominator}),
            "programs_without_gold": list(score.excluded_programs),
        }
        return {
            "format": SUMMARY_FORMAT,
            "version": SUMMARY_VERSION,
            "base_seed": self.base_seed,
            "repeats": self.repeats,
            "programs": len(self.runnable),
            "skipped": [{"file": e.path.name, "reason": e.skip_reason}
                        for e in self.entries if e.skip_reason is not None],
            "total_runs": len(reports),
            "solved_count": len(solved_programs),
            "solved_programs": solved_programs,
            "successful_runs": len(successes),
            "success_rate": rate,
            "direct_successes": direct,
            "feedback_driven_successes": fed,
            "mean_tokens_in_on_success": mean([float(r.tokens.input) for r in successes]),
            "mean_tokens_out_on_success": mean([float(r.tokens.output) for r in successes]),
            "mean_time_on_success": mean([r.elapsed_seconds for r in successes]),
            "refinement_success_rate": refinement,
            "runs": [{
                "program": r.program,
                "seed": r.seed,
                "outcome": r.outcome.value,
                "classification": r.classification.value,
                "feedback_rounds": r.feedback_rounds,
                "tokens": {"input": r.tokens.input, "output": r.tokens.output},
                "elapsed_seconds": round(r.elapsed_seconds, 3),
                "error": r.error,
            } for r in reports],
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary_dict(), indent=2, sort_keys=True,
                          ensure_ascii=False) + "\n"

    def summary_table(self) -> str:
        d = self.summary_dict()
        lines = []
        w = max([len("program")] + [len(r["program"]) for r in d["runs"]])
        lines.append(f"{'program':<{w}}  seed  outcome          rounds  tokens(in/out)")
        for r in d["runs"]:
            toks = f"{r['tokens']['input']}/{r['tokens']['output']}"
            lines.append(f"{r['program']:<{w}}  {r['seed']:<4}  {r['outcome']:<15}  "
                         f"{r['feedback_rounds']:<6}  {toks}")
        rate = d["success_rate"]
        rate_txt = "n/a" if rate is None else f"{rate['num']}/{rate['den']}"
        ref = d["refinement_success_rate"]
        ref_txt = ("n/a" if ref["rate"] is None
                   else f"{ref['improved']}/{ref['counted']}")
        lines.append("")
        lines.append(f"solved {d['solved_count']}/{d['programs']} programs; "
                     f"success rate {rate_txt}; "
                     f"direct {d['direct_successes']}, "
                     f"feedback-driven {d['feedback_driven_successes']}; "
                     f"refinement success {ref_txt}")
        if d["skipped"]:
            for s in d["skipped"]:
                lines.append(f"skipped {s['file']}: {s['reason']}")
        return "\n".join(lines) + "\n"


def _load_entry(path: Path) -> ProgramEntry:
    name = path.stem
    try:
        program = parse_program(path.read_text(encoding="utf-8"), name=name)
    except SourceError as err:
        return ProgramEntry(name, path, None, None, None,
                            skip_reason=f"unparseable program: {err}")
    gold = None
    gold_path = path.with_suffix(GOLD_SUFFIX)
    if gold_path.exists():
        try:
            gold = parse_invariant_block(gold_path.read_text(encoding="utf-8"), program)
        except SourceError as err:
            return ProgramEntry(name, path, program, None, None,
                                skip_reason=f"unparseable gold file: {err}")
    tpath = path.with_suffix(TRANSCRIPT_SUFFIX)
    return ProgramEntry(name, path, program, gold,
                        tpath if tpath.exists() else None)


def load_corpus(directory: str | Path) -> list[ProgramEntry]:
    root = Path(directory)
    return [_load_entry(p) for p in sorted(root.glob(f"*{PROGRAM_SUFFIX}"))]


def replay_backend_factory(entry: ProgramEntry) -> Backend:
    if entry.transcript_path is None:
        raise TranscriptError(f"{entry.path.name}: no sibling transcript for replay")
    return ReplayBackend(load_transcript(entry.transcript_path))


def run_corpus(directory: str | Path, cfg: RunConfig, repeats: int = 1,
               backend_factory: Callable[[ProgramEntry], Backend] = replay_backend_factory,
               jobs: int = 1,
               clock: Callable[[], float] = time.monotonic,
               solver_cmd: Sequence[str] | None = None) -> CorpusResult:
    """Run every program `repeats` times with seeds base, base+1, ...

    Unparseable files are reported in the summary, not fatal; a missing
    transcript in replay mode likewise just skips that program.
    """
    entries = load_corpus(directory)
    jobs = max(1, jobs)
    pool = SolverPool(cmd=solver_cmd) if solver_cmd else SolverPool()
    try:
        work: list[tuple[ProgramEntry, int]] = []
        for e in entries:
            if e.skip_reason is not None:
                continue
            try:
                backend = backend_factory(e)
            except (TranscriptError, OSError) as err:
                e.skip_reason = str(err)
                continue
            e._backend = backend  # type: ignore[attr-defined]
            for k in range(repeats):
                work.append((e, k))

        def one(item: tuple[ProgramEntry, int]) -> tuple[ProgramEntry, RunReport]:
            entry, k = item
            run_cfg = dataclasses.replace(cfg, rng_seed=cfg.rng_seed + k)
            report = run_synthesis(entry.program, run_cfg, entry._backend,
                                   pool=pool, clock=clock)
            return entry, report

        if jobs > 1 and len(work) > 1:
            with ThreadPoolExecutor(max_workers=jobs) as ex:
                done = list(ex.map(one, work))
        else:
            done = [one(item) for item in work]
        for entry, report in done:
            entry.reports.append(report)
        for e in entries:
            e.reports.sort(key=lambda r: r.seed)
    finally:
        pool.close()
    return CorpusResult(entries=entries, repeats=repeats, base_seed=cfg.rng_seed)
