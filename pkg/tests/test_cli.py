import json
import subprocess
import sys

import pytest

from conftest import FIXTURES, REPO, needs_toolchain
from dbgdiff.campaign import save_record
from dbgdiff.cli import main
from records import li_record

TRACES = FIXTURES / "traces"


def pair(name):
    return [str(TRACES / f"{name}.opt.trace.jsonl"), str(TRACES / f"{name}.unopt.trace.jsonl")]


class TestCheckPair:
    @pytest.mark.parametrize("name", ["dead_line", "extra_frame", "scope_leak", "param_value"])
    def test_fixture_violates(self, name, capsys):
        assert main(["check-pair", *pair(name)]) == 1
        assert len(capsys.readouterr().out.strip().splitlines()) == 1

    def test_identical_is_clean(self):
        p = str(TRACES / "dead_line.unopt.trace.jsonl")
        assert main(["check-pair", p, p]) == 0

    def test_out_file(self, tmp_path):
        out = tmp_path / "v.jsonl"
        main(["check-pair", *pair("scope_leak"), "--out", str(out), "--case-id", "l4"])
        rec = json.loads(out.read_text())
        assert rec["invariant"] == "SI" and rec["case_id"] == "l4"

    def test_schema_error(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"not": "a trace"}\n')
        assert main(["check-pair", str(bad), str(bad)]) == 2


class TestUsage:
    def test_no_command(self):
        assert main([]) == 2

    def test_help(self, capsys):
        assert main(["--help"]) == 0
        assert "check-pair" in capsys.readouterr().out

    def test_bad_config(self, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text("[toolchain]\ncompiler = 'gcc {src}'\nlevels = ['-O2']\n")
        assert main(["run", "--config", str(cfg), "--root", str(tmp_path), "--cases", "1"]) == 2

    def test_unknown_campaign(self, tmp_path):
        assert main(["report", "--root", str(tmp_path), "--campaign", "nope"]) == 2


class TestReport:
    def test_formats(self, tmp_path, capsys):
        save_record(tmp_path / "li", li_record(54, 10))
        assert main(["report", "--root", str(tmp_path), "--campaign", "li"]) == 0
        assert "54 / 10" in capsys.readouterr().out
        assert main(["report", "--root", str(tmp_path), "--campaign", "li", "--format", "records"]) == 0
        rows = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
        assert rows[0]["level"] == "-O1"


@needs_toolchain
@pytest.mark.toolchain
class TestLive:
    def test_canary_failure_exit(self, tmp_path):
        cfg = tmp_path / "c.toml"
        text = (REPO / "configs" / "gcc-gdb.toml").read_text()
        cfg.write_text(text.replace('compiler = "gcc -w {opt}', 'compiler = "gcc -w -include /nonexistent.h {opt}'))
        assert main(["run", "--config", str(cfg), "--root", str(tmp_path), "--campaign", "x",
                     "--levels=-O2", "--cases", "2"]) == 3

    def test_gen(self, tmp_path, capsys):
        assert main(["gen", "--config", str(REPO / "configs" / "gcc-gdb.toml"), "--count", "2",
                     "--out", str(tmp_path)]) == 0
        assert len(list(tmp_path.glob("seed-*/source.c"))) == 2

    def test_run_report_module(self, tmp_path):
        cmd = [sys.executable, "-m", "dbgdiff"]
        run = subprocess.run([*cmd, "run", "--config", str(REPO / "configs" / "gcc-gdb.toml"), "--root", str(tmp_path),
                              "--campaign", "m", "--levels=-O2", "--cases", "2", "--workers", "1"],
                             capture_output=True, text=True)
        assert run.returncode == 0, run.stderr
        rep = subprocess.run([*cmd, "report", "--root", str(tmp_path), "--campaign", "m"], capture_output=True, text=True)
        assert rep.returncode == 0 and "-O2" in rep.stdout
        tri = subprocess.run([*cmd, "triage", "--root", str(tmp_path), "--campaign", "m"], capture_output=True, text=True)
        assert tri.returncode == 0, tri.stderr
