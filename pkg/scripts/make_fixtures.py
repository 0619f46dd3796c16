#!/usr/bin/env python3
"""Regenerate the bundled mini-corpus and prompt snapshot fixtures.

Each corpus entry is a program plus a scripted model conversation.  The
script drives the real engine with the scripted replies, records the
exchange into a transcript, replays the transcript to prove the run is
reproducible, and only then writes the fixture files.  Run it whenever
the prompt templates change: replay matches prompts by digest, so stale
transcripts fail loudly rather than silently.

Usage: python scripts/make_fixtures.py [--corpus-dir corpus]
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from loopinv.engine import (Classification, Outcome, RunConfig, frozen_clock,
                            run_synthesis)
from loopinv.gateway import (RecordingBackend, ReplayBackend, TokenCount,
                             load_transcript, save_transcript)
from loopinv.parser import parse_invariant_block, parse_program
from loopinv.smt import SolverBudget


class ScriptedBackend:
    """Replies from a fixed per-role queue; order mirrors the engine."""

    def __init__(self, synthesizer: list[str], formalizer: list[str]):
        self.queues = {"Synthesizer": list(synthesizer),
                       "Formalizer": list(formalizer)}

    def complete(self, role, prompt, history):
        queue = self.queues.get(role, [])
        if not queue:
            raise AssertionError(
                f"no scripted reply left for {role}; prompt was:\n{prompt[:400]}")
        text = queue.pop(0)
        return text, TokenCount(len(prompt) // 4, max(1, len(text) // 4))

    def exhausted(self) -> bool:
        return not any(self.queues.values())


@dataclass
class Fixture:
    name: str
    source: str
    gold: str
    synthesizer: list[str]
    formalizer: list[str] = field(default_factory=list)
    outcome: Outcome = Outcome.SOLVED
    classification: Classification = Classification.DIRECT_SUCCESS
    feedback_rounds: int = 0


def asserts(*formulas: str) -> str:
    body = "\n".join(f"    assert({f});" for f in formulas)
    return f"```c\n{body}\n```"


FIXTURES: list[Fixture] = []

# ---------------------------------------------------------------- 1
# A loop that walks a counter up or down nondeterministically; the
# assertion bounds the final distance from the origin.  The recorded
# conversation goes through one full feedback round: the first
# proposal is too weak to discharge the post-condition, the proof of
# the exit bound contains a non-sequitur (termination does not pin the
# index to exactly m + 1 without an upper-bound invariant), and the
# refinement adds the missing bound.
FIXTURES.append(Fixture(
    name="nondet_walk",
    source="""\
extern int unknown();

int main() {
    int a = 0;
    int j, m;
    if(m <= 0) return 0;

    for(j = 1; j <= m; j++) {
        if(unknown())
            a++;
        else
            a--;
    }

    assert(a >= -m && a <= m);
    return 0;
}
""",
    gold="""\
loop invariant i1: a >= -j + 1 && a <= j - 1;
loop invariant i2: j >= 1;
loop invariant i3: j <= m + 1;
loop invariant i4: m > 0;
""",
    synthesizer=[
        asserts("a >= -(j - 1) && a <= (j - 1)", "j >= 1", "m > 0"),
        """\
[Initial]
- Invariant i1: `a >= -(j - 1) && a <= (j - 1)`
- Invariant i2: `j >= 1`
- Invariant i3: `m > 0`
- Negated loop condition: `j > m`

[Proof]
[STEP 1: Bound a at loop termination]
- From invariant **i1**: `a >= -(j - 1) && a <= (j - 1)`
  - At the end of the loop, `not B` implies `j > m`.
  - Substituting `j = m + 1`:
    - At termination, `a >= -(m + 1 - 1) && a <= (m + 1 - 1)`
    - Simplifies to: `a >= -m && a <= m`.

[Conclusion]
At loop exit the assertion `a >= -m && a <= m` holds.
""",
        asserts("a >= -j + 1 && a <= j - 1", "j >= 1", "j <= m + 1", "m > 0"),
    ],
    formalizer=["""\
[STEP 1: Bound a at loop termination]
[Initial]
a >= -(j - 1) && a <= (j - 1) // initial
j > m // initial

[Proof]
(j > m) ==> (j == m + 1) // At loop termination, j is m + 1.
(j == m + 1) && (a >= -(j - 1) && a <= (j - 1)) ==> (a >= -m && a <= m) // Substituting j = m + 1 into i1, the range for a becomes -m to m.

[Conclusion]
a >= -m && a <= m // The assertion holds at termination.
"""],
    classification=Classification.FEEDBACK_DRIVEN_SUCCESS,
    feedback_rounds=1,
))

# ---------------------------------------------------------------- 2
FIXTURES.append(Fixture(
    name="doubling_sum",
    source="""\
int main() {
    int n;
    int s = 0;
    int i = 0;
    if (n < 0) return 0;
    while (i < n) {
        s = s + 2;
        i = i + 1;
    }
    assert(s == 2 * i);
    return 0;
}
""",
    gold="loop invariant i1: s == 2 * i;\n",
    synthesizer=[asserts("s == 2 * i")],
))

# ---------------------------------------------------------------- 3
FIXTURES.append(Fixture(
    name="countdown_swap",
    source="""\
int main() {
    int x;
    int y = 0;
    int z = x;
    if (x <= 0) return 0;
    while (x > 0) {
        x--;
        y++;
    }
    assert(y == z);
    return 0;
}
""",
    gold="""\
loop invariant i1: x + y == z;
loop invariant i2: x >= 0;
""",
    synthesizer=[asserts("x + y == z", "x >= 0")],
))

# ---------------------------------------------------------------- 4
FIXTURES.append(Fixture(
    name="toggle_cap",
    source="""\
extern int unknown();

int main() {
    int x = 0;
    while (unknown()) {
        if (x < 100) x++;
    }
    assert(x >= 0 && x <= 100);
    return 0;
}
""",
    gold="loop invariant i1: x >= 0 && x <= 100;\n",
    synthesizer=[asserts("x >= 0 && x <= 100")],
))

# ---------------------------------------------------------------- 5
# Preservation failure: keeping the running sum nonnegative needs the
# index to be nonnegative too, and the first proposal forgets that.
FIXTURES.append(Fixture(
    name="nonneg_sum",
    source="""\
extern int unknown();

int main() {
    int n = unknown();
    int s = 0;
    int i = 0;
    if (n <= 0) return 0;
    while (i < n) {
        s = s + i;
        i++;
    }
    assert(s >= 0);
    return 0;
}
""",
    gold="""\
loop invariant i1: s >= 0;
loop invariant i2: i >= 0;
""",
    synthesizer=[
        asserts("s >= 0"),
        """\
[Initial]
- Invariant i1: `s >= 0`
- Loop condition: `i < n`

[Proof]
[STEP 1: The sum stays nonnegative]
- Before the update we know `s >= 0` from i1.
- The index starts at 0 and only grows, so inside the loop `i >= 0`.
- The body adds `i` to `s`; adding a nonnegative value keeps `s + i >= 0`.

[Conclusion]
The invariant `s >= 0` is preserved by one iteration of the loop.
""",
        asserts("s >= 0", "i >= 0"),
    ],
    formalizer=["""\
[STEP 1: The sum stays nonnegative]
[Initial]
s >= 0 // initial
i < n // initial

[Proof]
(s >= 0) && (i < n) ==> (i >= 0) // The index starts at 0 and only grows, so it stays nonnegative.
(i >= 0) && (s >= 0) ==> (s + i >= 0) // Adding a nonnegative index keeps the sum nonnegative.

[Conclusion]
s + i >= 0 // The updated sum is nonnegative, so i1 is preserved.
"""],
    classification=Classification.FEEDBACK_DRIVEN_SUCCESS,
    feedback_rounds=1,
))

# ---------------------------------------------------------------- 6
FIXTURES.append(Fixture(
    name="parity_flag",
    source="""\
int main() {
    int n;
    int b = 0;
    int k = 0;
    if (n <= 0) return 0;
    while (k < n) {
        b = 1 - b;
        k++;
    }
    assert(b == 0 || b == 1);
    return 0;
}
""",
    gold="loop invariant i1: b == 0 || b == 1;\n",
    synthesizer=[asserts("b == 0 || b == 1")],
))

# ---------------------------------------------------------------- 7
# Establishment failure: the proposal claims the counter pair starts
# at the loop index, but both counters start at 1 while the index
# starts at 0.
FIXTURES.append(Fixture(
    name="lockstep_pair",
    source="""\
extern int unknown();

int main() {
    int n = unknown();
    int a = 1;
    int b = 1;
    int t = 0;
    if (n <= 0) return 0;
    while (t < n) {
        a++;
        b++;
        t++;
    }
    assert(a == b);
    return 0;
}
""",
    gold="loop invariant i1: a == b;\n",
    synthesizer=[
        asserts("a == b && a == t"),
        """\
[Initial]
- Invariant i1: `a == b && a == t`
- Entry state: both counters are set before the loop.

[Proof]
[STEP 1: The invariant holds on entry]
- On entry `a` and `b` are both 1, so `a == b`.
- The loop index `t` counts iterations, and `a` counts with it, so `a == t`.
- Both conjuncts hold, so the invariant is established.

[Conclusion]
The invariant `a == b && a == t` holds when the loop is first reached.
""",
        asserts("a == b"),
    ],
    formalizer=["""\
[STEP 1: The invariant holds on entry]
[Initial]
a == b // initial
a == t // initial

[Proof]
(a == b) && (a == t) ==> (a == b && a == t) // Both equalities hold on entry, so the invariant is established.

[Conclusion]
a == b && a == t // The invariant holds at the loop head.
"""],
    classification=Classification.FEEDBACK_DRIVEN_SUCCESS,
    feedback_rounds=1,
))

# ---------------------------------------------------------------- 8
FIXTURES.append(Fixture(
    name="step_down_residue",
    source="""\
extern int unknown();

int main() {
    int r = unknown();
    if (r < 0) return 0;
    if (r > 90) return 0;
    while (r >= 3) {
        r = r - 3;
    }
    assert(r >= 0 && r <= 2);
    return 0;
}
""",
    gold="loop invariant i1: r >= 0;\n",
    synthesizer=[asserts("r >= 0")],
))

# ---------------------------------------------------------------- 9
# Fallback feedback: the proposal is too weak, but the recorded proof
# of the exit implication is internally flawless (it just proves a
# fact that does not bound the counter), so the checker finds nothing
# and the engine falls back to counterexample feedback.
FIXTURES.append(Fixture(
    name="saturating_count",
    source="""\
int main() {
    int n;
    int c = 0;
    int k = 0;
    if (n <= 0) return 0;
    while (k < n) {
        if (c < 5) c++;
        k++;
    }
    assert(c <= 5);
    return 0;
}
""",
    gold="""\
loop invariant i1: c >= 0;
loop invariant i2: c <= 5;
""",
    synthesizer=[
        asserts("c >= 0"),
        """\
[Initial]
- Invariant i1: `c >= 0`
- Negated loop condition: `k >= n`

[Proof]
[STEP 1: The counter stays nonnegative at exit]
- Invariant i1 gives `c >= 0` at every iteration boundary.
- In particular it still holds when the loop exits.

[Conclusion]
At loop exit `c >= 0` holds.
""",
        asserts("c >= 0", "c <= 5"),
    ],
    formalizer=["""\
[STEP 1: The counter stays nonnegative at exit]
[Initial]
c >= 0 // initial
k >= n // initial

[Proof]
(c >= 0) ==> (c >= 0) // The invariant carries over to the exit state unchanged.

[Conclusion]
c >= 0 // The counter is nonnegative at exit; nothing here bounds it from above.
"""],
    classification=Classification.FEEDBACK_DRIVEN_SUCCESS,
    feedback_rounds=1,
))

# ---------------------------------------------------------------- 10
FIXTURES.append(Fixture(
    name="havoc_min",
    source="""\
extern int unknown();

int main() {
    int n = unknown();
    int x = 0;
    int low = 0;
    int t = 0;
    if (n <= 0) return 0;
    while (t < n) {
        x = unknown();
        if (x < low) low = x;
        t++;
    }
    assert(low <= 0);
    return 0;
}
""",
    gold="loop invariant i1: low <= 0;\n",
    synthesizer=[asserts("low <= 0")],
))


def build_one(fx: Fixture, corpus: Path) -> None:
    prog = parse_program(fx.source, name=fx.name)
    parse_invariant_block(fx.gold, prog)  # gold must parse and type-check

    cfg = RunConfig(solver=SolverBudget(per_query_timeout=5.0), rng_seed=0)
    scripted = ScriptedBackend(fx.synthesizer, fx.formalizer)
    recorder = RecordingBackend(scripted)
    report = run_synthesis(prog, cfg, recorder, clock=frozen_clock)

    problems = []
    if report.outcome is not fx.outcome:
        problems.append(f"outcome {report.outcome.value} != {fx.outcome.value}")
    if report.classification is not fx.classification:
        problems.append(f"classification {report.classification.value} "
                        f"!= {fx.classification.value}")
    if report.feedback_rounds != fx.feedback_rounds:
        problems.append(f"feedback rounds {report.feedback_rounds} "
                        f"!= {fx.feedback_rounds}")
    if not scripted.exhausted():
        problems.append("unused scripted replies left over")
    if problems:
        print(report.to_json())
        raise SystemExit(f"{fx.name}: " + "; ".join(problems)
                         + f" (error: {report.error})")

    (corpus / f"{fx.name}.c").write_text(fx.source, encoding="utf-8")
    (corpus / f"{fx.name}.gold").write_text(fx.gold, encoding="utf-8")
    tpath = corpus / f"{fx.name}.transcript"
    save_transcript(recorder.transcript(), tpath)

    # replaying the fresh transcript must retrace the recorded run
    replayed = run_synthesis(prog, cfg, ReplayBackend(load_transcript(tpath)),
                             clock=frozen_clock)
    if replayed.to_json() != report.to_json():
        raise SystemExit(f"{fx.name}: replay diverged from the recorded run")
    print(f"{fx.name}: {report.outcome.value} ({report.classification.value}, "
          f"{report.feedback_rounds} feedback rounds, "
          f"{len(recorder.transcript().entries)} transcript entries)")


def write_prompt_snapshots(root: Path) -> None:
    """Golden copies of each rendered prompt family, for snapshot tests."""
    from loopinv.checker import check_proof
    from loopinv.engine import fallback_feedback, select_failed_vc
    from loopinv.prompts import (render_feedback, render_formalize_request,
                                 render_initial, render_proof_request,
                                 render_fallback)
    from loopinv.proofs import parse_formalized_proof, parse_structured_proof
    from loopinv.smt import SolverPool, Status
    from loopinv.vcgen import VcKind, check_vcs, generate_vcs
    import random

    golden = root / "tests" / "golden"
    golden.mkdir(parents=True, exist_ok=True)

    fx = FIXTURES[0]
    prog = parse_program(fx.source, name=fx.name)
    invs = parse_invariant_block(fx.synthesizer[0], prog)
    structured = parse_structured_proof(fx.synthesizer[1])
    formal = parse_formalized_proof(fx.formalizer[0], prog)

    pool = SolverPool()
    try:
        results = check_vcs(generate_vcs(prog, invs), pool,
                            SolverBudget(per_query_timeout=5.0))
        vc = select_failed_vc(results, random.Random(0))
        report = check_proof(formal, prog, vc, pool,
                             SolverBudget(per_query_timeout=5.0))
    finally:
        pool.close()
    assert vc.kind is VcKind.POSTCONDITION
    assert len(report.errors) == 1

    (golden / "initial_prompt.txt").write_text(
        render_initial(prog).text, encoding="utf-8")
    (golden / "proof_request.txt").write_text(
        render_proof_request(prog, invs, vc).text, encoding="utf-8")
    (golden / "formalize_request.txt").write_text(
        render_formalize_request(structured).text, encoding="utf-8")
    (golden / "feedback_invalid_implication.txt").write_text(
        render_feedback(report, prog, invs).text, encoding="utf-8")
    failed = next(r for r in results if r.status is not Status.VALID)
    (golden / "fallback_postcondition.txt").write_text(
        render_fallback(failed, prog).text, encoding="utf-8")
    print(f"prompt snapshots written to {golden}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--corpus-dir", default="corpus")
    args = ap.parse_args()
    root = Path(__file__).resolve().parent.parent
    corpus = root / args.corpus_dir
    corpus.mkdir(parents=True, exist_ok=True)
    for fx in FIXTURES:
        build_one(fx, corpus)
    write_prompt_snapshots(root)
    print(f"corpus written to {corpus}")


if __name__ == "__main__":
    main()
