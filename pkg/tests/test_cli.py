import io

import pytest

from pglblab.cli import derive_bounds, main, parse_config
from pglblab.isa import parse_program


def invoke(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_gen_family_then_mid(tmp_path, capsys):
    out = tmp_path / "p1.pglb"
    code, stdout, _ = invoke(capsys, "gen", "family", "--k", "1", "--out", str(out))
    assert code == 0
    assert out.exists() and out.with_suffix(".cfg").exists()
    assert "maxn = 5" in out.with_suffix(".cfg").read_text()

    code, stdout, _ = invoke(capsys, "mid", str(out))
    assert code == 0
    assert "MID = 4" in stdout
    assert "witness = " in stdout
    assert "nodes = 51" in stdout


def test_mid_reads_stdin(capsys, monkeypatch):
    monkeypatch.setattr("sys.stdin", io.StringIO("f.m ; ! ; !"))
    code, stdout, _ = invoke(capsys, "mid", "-")
    assert code == 0
    assert "MID = 0" in stdout


def test_mid_unbounded_with_aux(tmp_path, capsys):
    f = tmp_path / "loop.pglb"
    f.write_text("f.m ; +x.get ; \\#1 ; !\n")
    code, stdout, _ = invoke(capsys, "mid", str(f), "--aux", "x.*")
    assert code == 0
    assert "MID = unbounded" in stdout
    assert "cycle = 2 3" in stdout


def test_run_with_script_oracle(tmp_path, capsys):
    prog = tmp_path / "p.pglb"
    prog.write_text("+f.m ; ! ; g.n ; !\n")
    script = tmp_path / "replies.txt"
    script.write_text("F\n")
    code, stdout, _ = invoke(capsys, "run", str(prog), "--oracle", str(script))
    assert code == 0
    assert stdout == "1 +f.m reply=F\n3 g.n reply=T\n4 !\nstatus=Terminated\n"


def test_run_exhausted_oracle(tmp_path, capsys):
    prog = tmp_path / "p.pglb"
    prog.write_text("+f.m ; ! ; !\n")
    code, _, stderr = invoke(capsys, "run", str(prog))
    assert code == 1
    assert "oracle exhausted" in stderr


def test_run_steps_flag_cuts(tmp_path, capsys):
    prog = tmp_path / "spin.pglb"
    prog.write_text("#1 ; \\#1\n")
    code, stdout, _ = invoke(capsys, "run", str(prog), "--steps", "5")
    assert code == 0
    assert stdout.endswith("status=StepLimit\n")


def test_project_writes_artifacts_and_checks_equivalent(tmp_path, capsys):
    src = tmp_path / "p1.pglb"
    invoke(capsys, "gen", "family", "--k", "1", "--out", str(src))

    code, stdout, _ = invoke(
        capsys, "project", str(src), "--mode", "dispatch", "--out-dir", str(tmp_path)
    )
    assert code == 0
    produced = {
        tmp_path / "p1.dispatch.pglb",
        tmp_path / "p1.dispatch.map.csv",
        tmp_path / "p1.dispatch.report.txt",
        tmp_path / "p1.dispatch.cfg",
    }
    assert all(f.exists() for f in produced)
    assert (tmp_path / "p1.dispatch.map.csv").read_text().startswith("old_key,new_start,new_len\n")
    cfg = (tmp_path / "p1.dispatch.cfg").read_text()
    assert "cells = " in cfg and "r1b0" in cfg
    report = (tmp_path / "p1.dispatch.report.txt").read_text()
    assert "mode=dispatch" in report and "lengthBefore=28" in report

    code, stdout, _ = invoke(
        capsys, "check", str(src), str(tmp_path / "p1.dispatch.pglb"), "--depth", "6"
    )
    assert code == 0
    assert stdout.startswith("equivalent (checked=")


def test_project_thread_reports_threaded_mid(tmp_path, capsys):
    src = tmp_path / "p1.pglb"
    invoke(capsys, "gen", "family", "--k", "1", "--out", str(src))
    code, _, _ = invoke(
        capsys, "project", str(src), "--mode", "specialize", "--thread",
        "--out-dir", str(tmp_path),
    )
    assert code == 0
    report = (tmp_path / "p1.specialize.report.txt").read_text()
    assert "threaded=1" in report
    assert "midAfterThreaded=1" in report


def test_check_finds_counterexample(tmp_path, capsys):
    p = tmp_path / "p.pglb"
    q = tmp_path / "q.pglb"
    p.write_text("f.m ; !\n")
    q.write_text("f.m ; #0\n")
    code, stdout, _ = invoke(capsys, "check", str(p), str(q))
    assert code == 1
    assert "counterexample oracle=" in stdout
    assert "status=Terminated" in stdout and "status=Deadlocked" in stdout


def test_explicit_maxr_triggers_diagnostics(tmp_path, capsys):
    prog = tmp_path / "p.pglb"
    prog.write_text("set:2:1 ; !\n")
    code, _, stderr = invoke(capsys, "mid", str(prog), "--maxr", "1")
    assert code == 1
    assert "maxr" in stderr

    # without the flag the bound is derived from the program
    code, stdout, _ = invoke(capsys, "mid", str(prog))
    assert code == 0


def test_sidecar_config_is_picked_up(tmp_path, capsys):
    prog = tmp_path / "loop.pglb"
    prog.write_text("f.m ; +x.get ; \\#1 ; !\n")
    prog.with_suffix(".cfg").write_text("aux = x.*\n")
    code, stdout, _ = invoke(capsys, "mid", str(prog))
    assert code == 0
    assert "MID = unbounded" in stdout


def test_env_config_and_flag_precedence(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "env.cfg"
    cfg.write_text("stepLimit = 3\n")
    monkeypatch.setenv("PGLBLAB_CONFIG", str(cfg))
    prog = tmp_path / "spin.pglb"
    prog.write_text("#1 ; \\#1\n")

    code, stdout, _ = invoke(capsys, "run", str(prog))
    assert stdout.endswith("status=StepLimit\n")
    # a flag outranks the environment config
    code, stdout, _ = invoke(capsys, "run", str(prog), "--step-limit", "1000000")
    assert stdout.endswith("status=StepLimit\n")  # still loops forever, just later
    monkeypatch.delenv("PGLBLAB_CONFIG")


def test_config_rejects_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("bogus = 1\n")
    prog = tmp_path / "p.pglb"
    prog.write_text("!\n")
    code, _, stderr = invoke(capsys, "mid", str(prog), "--config", str(cfg))
    assert code == 1
    assert "unknown config key" in stderr


def test_parse_config_shapes():
    pairs = parse_config("# hi\nmaxr = 3\n\ncells = a, b\n")
    assert pairs == {"maxr": "3", "cells": "a, b"}
    from pglblab.cli import CLIError

    with pytest.raises(CLIError):
        parse_config("no equals sign")


def test_derive_bounds_from_programs():
    p = parse_program("set:3:9 ; i#5 ; !")
    assert derive_bounds([p]) == (5, 9)
    assert derive_bounds([parse_program("!")]) == (1, 1)


def test_parse_error_reported(tmp_path, capsys):
    prog = tmp_path / "bad.pglb"
    prog.write_text("f.m ;; !\n")
    code, _, stderr = invoke(capsys, "run", str(prog))
    assert code == 1
    assert "pglblab:" in stderr


def test_usage_error_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["project", "whatever"])  # --mode is required
    assert exc.value.code == 2


def test_bench_kmax_one_stdout(capsys):
    code, stdout, _ = invoke(capsys, "bench", "--kmax", "1")
    assert code == 0
    lines = stdout.strip().split("\n")
    assert lines[0].startswith("k,lengthOriginal,")
    assert len(lines) == 2 and lines[1].startswith("1,28,4,")


def test_gen_random_is_reproducible(capsys):
    code, first, _ = invoke(capsys, "gen", "random", "--seed", "7", "--len", "12")
    code, second, _ = invoke(capsys, "gen", "random", "--seed", "7", "--len", "12")
    assert first == second
    assert len(parse_program(first).instructions) == 12
