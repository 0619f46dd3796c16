#!/usr/bin/env python3
"""One live end-to-end synthesis run against a real chat endpoint.

Not part of the test suite: it needs network access, an API key, and a
model good enough to produce invariants.  Run it by hand when checking
a provider config:

    export LOOPINV_API_KEY=...
    python scripts/live_smoke.py --base-url https://api.example.com/v1 \
        --model some-model [--program corpus/nondet_walk.c] [--record out.transcript]

Exit code mirrors the run outcome (0 solved, 2 budget exhausted,
3 error), so it can double as a canary in a cron job.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from loopinv.engine import EXIT_CODES, RunConfig, run_synthesis
from loopinv.gateway import (HttpBackend, ProviderConfig, RecordingBackend,
                             save_transcript)
from loopinv.parser import parse_program
from loopinv.smt import SolverBudget


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--base-url", required=True)
    ap.add_argument("--model", required=True)
    ap.add_argument("--api-key-env", default="LOOPINV_API_KEY")
    ap.add_argument("--program",
                    default=str(Path(__file__).resolve().parent.parent
                                / "corpus" / "nondet_walk.c"))
    ap.add_argument("--record", help="save the conversation as a transcript")
    ap.add_argument("--token-budget", type=int, default=150_000)
    ap.add_argument("--wall-clock-budget", type=float, default=600.0)
    ap.add_argument("--max-feedback-rounds", type=int, default=8)
    args = ap.parse_args()

    path = Path(args.program)
    prog = parse_program(path.read_text(encoding="utf-8"), name=path.stem)
    cfg = RunConfig(wall_clock_budget=args.wall_clock_budget,
                    token_budget=args.token_budget,
                    solver=SolverBudget(per_query_timeout=5.0),
                    max_feedback_rounds=args.max_feedback_rounds)
    backend = HttpBackend(ProviderConfig(base_url=args.base_url,
                                         model=args.model,
                                         api_key_env=args.api_key_env))
    recorder = RecordingBackend(backend) if args.record else None

    report = run_synthesis(prog, cfg, recorder or backend, clock=time.monotonic)

    if recorder is not None:
        save_transcript(recorder.transcript(), Path(args.record))
        print(f"transcript saved to {args.record}")
    print(report.to_json())
    print(f"{report.program}: {report.outcome.value} "
          f"({report.classification.value}, "
          f"{report.feedback_rounds} feedback rounds)", file=sys.stderr)
    return EXIT_CODES[report.outcome]


if __name__ == "__main__":
    raise SystemExit(main())
