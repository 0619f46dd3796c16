"""Command line interface: exit codes, output shapes, config handling."""

from __future__ import annotations

import json

import pytest

from loopinv.cli import (EX_CONFIG, EX_USAGE, CliError, main, merge_settings,
                         parse_config_file, build_parser, _parse_vc_selector)
from loopinv.vcgen import VcKind

from conftest import CORPUS, STRONG_WALK_INVARIANTS, WEAK_WALK_INVARIANTS

pytestmark = pytest.mark.slow

WALK = str(CORPUS / "nondet_walk.c")

WRONG_EXIT_PROOF = """\
[STEP 1: Bound a at loop termination]
[Initial]
a >= -(j - 1) && a <= (j - 1) // initial
j > m // initial

[Proof]
(j > m) ==> (j == m + 1) // At loop termination, j is m + 1.
(j == m + 1) && (a >= -(j - 1) && a <= (j - 1)) ==> (a >= -m && a <= m) // Substitute.

[Conclusion]
a >= -m && a <= m
"""


@pytest.fixture()
def walk_files(tmp_path):
    weak = tmp_path / "weak.inv"
    weak.write_text(WEAK_WALK_INVARIANTS, encoding="utf-8")
    strong = tmp_path / "strong.inv"
    strong.write_text(STRONG_WALK_INVARIANTS, encoding="utf-8")
    proof = tmp_path / "exit.proof"
    proof.write_text(WRONG_EXIT_PROOF, encoding="utf-8")
    return {"weak": str(weak), "strong": str(strong), "proof": str(proof),
            "dir": tmp_path}


class TestUsageErrors:
    def test_unknown_flag_exits_64(self):
        with pytest.raises(SystemExit) as exc:
            main(["verify", WALK, "--invariants", "x", "--bogus-flag"])
        assert exc.value.code == EX_USAGE

    def test_missing_subcommand_exits_64(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == EX_USAGE

    def test_missing_required_option_exits_64(self):
        with pytest.raises(SystemExit) as exc:
            main(["verify", WALK])
        assert exc.value.code == EX_USAGE


class TestConfigErrors:
    def test_synthesize_without_backend_exits_78(self, capsys):
        assert main(["synthesize", WALK]) == EX_CONFIG
        assert "--replay" in capsys.readouterr().err

    def test_record_requires_live(self, tmp_path):
        t = str(CORPUS / "nondet_walk.transcript")
        code = main(["synthesize", WALK, "--replay", t,
                     "--record", str(tmp_path / "out.transcript")])
        assert code == EX_CONFIG

    def test_live_without_provider_exits_78(self):
        assert main(["synthesize", WALK, "--live"]) == EX_CONFIG

    def test_missing_program_file_exits_78(self, walk_files):
        assert main(["verify", "no/such/file.c",
                     "--invariants", walk_files["weak"]]) == EX_CONFIG

    def test_unparseable_program_exits_78(self, tmp_path, walk_files):
        broken = tmp_path / "broken.c"
        broken.write_text("int main() {", encoding="utf-8")
        assert main(["verify", str(broken),
                     "--invariants", walk_files["weak"]]) == EX_CONFIG


class TestConfigFile:
    def test_typed_values_and_comments(self, tmp_path):
        cfg = tmp_path / "loopinv.conf"
        cfg.write_text(
            "# solver setup\n"
            "timeout = 2.5\n"
            "token_budget = 9000\n"
            "seed = 7\n"
            "base_url = https://api.example.com/v1  # provider\n",
            encoding="utf-8")
        values = parse_config_file(cfg)
        assert values == {"timeout": 2.5, "token_budget": 9000, "seed": 7,
                          "base_url": "https://api.example.com/v1"}

    def test_unknown_key_rejected(self, tmp_path):
        cfg = tmp_path / "loopinv.conf"
        cfg.write_text("colour = blue\n", encoding="utf-8")
        with pytest.raises(CliError):
            parse_config_file(cfg)

    def test_bad_number_names_the_line(self, tmp_path):
        cfg = tmp_path / "loopinv.conf"
        cfg.write_text("timeout = fast\n", encoding="utf-8")
        with pytest.raises(CliError) as exc:
            parse_config_file(cfg)
        assert ":1:" in str(exc.value)

    def test_solver_cmd_is_shell_split(self, tmp_path):
        cfg = tmp_path / "loopinv.conf"
        cfg.write_text('solver_cmd = z3 -in -t:5000\n', encoding="utf-8")
        assert parse_config_file(cfg)["solver_cmd"] == ["z3", "-in", "-t:5000"]

    def test_flags_override_config(self, tmp_path):
        cfg = tmp_path / "loopinv.conf"
        cfg.write_text("timeout = 9.0\nseed = 3\n", encoding="utf-8")
        parser = build_parser()
        args = parser.parse_args(["--config", str(cfg), "--timeout", "2.0",
                                  "synthesize", "prog.c", "--seed", "11"])
        s = merge_settings(args)
        assert s.timeout == 2.0  # flag wins
        assert s.seed == 11      # flag wins
        args2 = parser.parse_args(["--config", str(cfg),
                                   "synthesize", "prog.c"])
        s2 = merge_settings(args2)
        assert s2.timeout == 9.0  # config applies when no flag
        assert s2.seed == 3


class TestVerify:
    def test_valid_invariants_exit_0(self, capsys, walk_files):
        code = main(["verify", WALK, "--invariants", walk_files["strong"]])
        out = capsys.readouterr().out
        assert code == 0
        lines = [l for l in out.splitlines() if l.strip()]
        assert len(lines) == 9
        assert all(l.endswith("Valid") for l in lines)

    def test_weak_invariants_exit_1_with_counterexample(self, capsys,
                                                        walk_files):
        code = main(["verify", WALK, "--invariants", walk_files["weak"]])
        out = capsys.readouterr().out
        assert code == 1
        bad = [l for l in out.splitlines() if "Invalid" in l]
        assert len(bad) == 1
        assert bad[0].startswith("PostCondition")
        assert "[" in bad[0] and "=" in bad[0]

    def test_dump_smt_writes_one_script_per_vc(self, capsys, walk_files):
        out_dir = walk_files["dir"] / "smt"
        main(["verify", WALK, "--invariants", walk_files["weak"],
              "--dump-smt", str(out_dir)])
        files = sorted(p.name for p in out_dir.glob("*.smt2"))
        assert files == [
            "establishment_i1.smt2", "establishment_i2.smt2",
            "establishment_i3.smt2", "postcondition_assertion.smt2",
            "preservation_i1.smt2", "preservation_i2.smt2",
            "preservation_i3.smt2",
        ]
        text = (out_dir / "postcondition_assertion.smt2").read_text()
        assert text.rstrip().endswith("(check-sat)")


class TestCheckProof:
    def test_flawed_proof_exits_1_and_names_the_error(self, capsys,
                                                      walk_files):
        code = main(["check-proof", WALK, "--invariants", walk_files["weak"],
                     "--proof", walk_files["proof"], "--vc", "PostCondition"])
        out = capsys.readouterr().out
        assert code == 1
        assert "checked 2 implications against PostCondition(assertion)" in out
        assert "InvalidImplication" in out
        assert "j > m ==> j == m + 1" in out

    def test_selector_parses_kind_and_target(self):
        assert _parse_vc_selector("preservation:i2") == (VcKind.PRESERVATION,
                                                         "i2")
        assert _parse_vc_selector("PostCondition") == (VcKind.POSTCONDITION,
                                                       None)
        with pytest.raises(CliError):
            _parse_vc_selector("nonsense")

    def test_ambiguous_target_exits_78(self, walk_files):
        code = main(["check-proof", WALK, "--invariants", walk_files["weak"],
                     "--proof", walk_files["proof"], "--vc", "Establishment"])
        assert code == EX_CONFIG

    def test_unknown_target_exits_78(self, walk_files):
        code = main(["check-proof", WALK, "--invariants", walk_files["weak"],
                     "--proof", walk_files["proof"],
                     "--vc", "Establishment:i9"])
        assert code == EX_CONFIG


class TestSynthesizeReplay:
    def test_solved_run_prints_invariants(self, capsys, tmp_path):
        out_file = tmp_path / "report.json"
        code = main(["synthesize", WALK,
                     "--replay", str(CORPUS / "nondet_walk.transcript"),
                     "--out", str(out_file)])
        out = capsys.readouterr().out
        assert code == 0
        assert "nondet_walk: Solved (FeedbackDrivenSuccess, 1 feedback rounds" in out
        assert "loop invariant i3: j <= m + 1;" in out
        report = json.loads(out_file.read_text(encoding="utf-8"))
        assert report["format"] == "synthesis-run"
        assert report["outcome"] == "Solved"

    def test_foreign_transcript_fails_replay(self, capsys):
        code = main(["synthesize", WALK,
                     "--replay", str(CORPUS / "doubling_sum.transcript")])
        out = capsys.readouterr().out
        assert code == 3  # replay miss is a run error, not a config error
        assert "Error" in out


class TestBench:
    def test_replay_bench_summary(self, capsys, tmp_path):
        out_file = tmp_path / "summary.json"
        code = main(["bench", str(CORPUS), "--out", str(out_file)])
        out = capsys.readouterr().out
        assert code == 0
        assert "solved 10/10 programs" in out
        assert "refinement success 4/4" in out
        summary = json.loads(out_file.read_text(encoding="utf-8"))
        assert summary["format"] == "bench-summary"
        assert summary["solved_count"] == 10

    def test_double_run_is_byte_identical(self, tmp_path, capsys):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        main(["bench", str(CORPUS), "--out", str(a)])
        main(["bench", str(CORPUS), "--out", str(b)])
        capsys.readouterr()
        assert a.read_bytes() == b.read_bytes()
