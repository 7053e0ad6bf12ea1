"""CLI behavior: output files, exit codes, and server/client fidelity."""

import json

from click.testing import CliRunner

import wipsim.service
from wipsim import SimConfig, export_trace, run_scenario, scenario_by_name
from wipsim.cli import main
from wipsim.configio import scenario_to_dict

from test_service import TINY, FAILING


def _write_run_file(path, spec, **extra):
    doc = {"scenario": scenario_to_dict(spec), **extra}
    path.write_text(json.dumps(doc))
    return str(path)


def test_list_shows_catalog():
    res = CliRunner().invoke(main, ["list"])
    assert res.exit_code == 0
    for name in ("translate_rotate", "arm_raise", "desk_push",
                 "kick", "arm_hit", "wall_collision"):
        assert name in res.output


def test_run_file_produces_outputs(tmp_path):
    run_file = _write_run_file(tmp_path / "run.json", TINY)
    out = tmp_path / "out"
    res = CliRunner().invoke(main, ["run", run_file, "--out", str(out)])
    assert res.exit_code == 0, res.output
    assert "[PASS] pitch" in res.output
    assert "mini: PASS" in res.output

    csv = (out / "mini.csv").read_text().splitlines()
    assert csv[0].startswith("t,theta,phi,psi,")
    assert len(csv) == 1 + 100

    report = json.loads((out / "mini.report.json").read_text())
    assert report["scenario"] == "mini" and report["passed"] is True
    assert report["envelopes"][0]["name"] == "pitch"


def test_run_builtin_matches_direct_export(tmp_path):
    # full in-process round trip: the CSV written through the HTTP layer is
    # byte-identical to exporting the trace computed directly
    out = tmp_path / "out"
    res = CliRunner().invoke(main, ["run", "kick", "--out", str(out)])
    assert res.exit_code == 0, res.output

    direct = run_scenario(scenario_by_name("kick"), SimConfig())
    want = tmp_path / "direct.csv"
    export_trace(direct.trace, want)
    assert (out / "kick.csv").read_bytes() == want.read_bytes()

    report = json.loads((out / "kick.report.json").read_text())
    assert report["passed"] == direct.report.passed


def test_failing_envelope_exits_one(tmp_path):
    run_file = _write_run_file(tmp_path / "run.json", FAILING)
    res = CliRunner().invoke(main, ["run", run_file, "--out", str(tmp_path)])
    assert res.exit_code == 1
    assert "[FAIL] pitch" in res.output
    assert "mini_fail: FAIL" in res.output
    assert (tmp_path / "mini_fail.csv").exists()


def test_unknown_scenario_exits_two(tmp_path):
    res = CliRunner().invoke(main, ["run", "orbit", "--out", str(tmp_path)])
    assert res.exit_code == 2
    assert "error (404)" in res.stderr


def test_bad_override_exits_two(tmp_path):
    res = CliRunner().invoke(main, ["run", "kick", "--out", str(tmp_path),
                                    "--override", "plant.m_b"])
    assert res.exit_code == 2
    assert "key=value" in res.stderr

    res = CliRunner().invoke(main, ["run", "kick", "--out", str(tmp_path),
                                    "--override", "plant.mb=1"])
    assert res.exit_code == 2
    assert "error (422)" in res.stderr and "plant.mb" in res.stderr


def test_cli_overrides_beat_run_file_overrides(tmp_path):
    # the file sets a valid dt, the flag an invalid one; the server error
    # proves the flag value won the merge
    run_file = _write_run_file(tmp_path / "run.json", TINY,
                               overrides={"dt": 0.002})
    res = CliRunner().invoke(main, ["run", run_file, "--out", str(tmp_path),
                                    "--override", "dt=0.5"])
    assert res.exit_code == 2
    assert "dt" in res.stderr


def test_malformed_run_file_exits_two(tmp_path):
    path = tmp_path / "run.json"
    path.write_text("{not json")
    res = CliRunner().invoke(main, ["run", str(path), "--out", str(tmp_path)])
    assert res.exit_code == 2
    assert "error" in res.stderr


def test_out_dir_from_environment(tmp_path):
    run_file = _write_run_file(tmp_path / "run.json", TINY)
    out = tmp_path / "envout"
    res = CliRunner().invoke(main, ["run", run_file],
                             env={"WIPSIM_OUT": str(out)})
    assert res.exit_code == 0
    assert (out / "mini.csv").exists()


def test_check_writes_per_scenario_files(tmp_path, monkeypatch):
    monkeypatch.setattr(wipsim.service, "builtin_scenarios",
                        lambda *a, **k: (TINY, FAILING))
    monkeypatch.setattr(wipsim.service, "scenario_by_name",
                        lambda name, *a, **k: {s.name: s for s in (TINY, FAILING)}[name])
    out = tmp_path / "out"
    res = CliRunner().invoke(main, ["check", "--out", str(out)])
    assert res.exit_code == 1
    assert "mini " in res.output or "mini" in res.output
    assert "FAIL: mini_fail" in res.output
    for name in ("mini", "mini_fail"):
        assert (out / f"{name}.csv").exists()
        assert (out / f"{name}.report.json").exists()
    agg = json.loads((out / "check.report.json").read_text())
    assert agg == {"passed": False,
                   "scenarios": {"mini": True, "mini_fail": False}}


def test_check_all_green_exits_zero(tmp_path, monkeypatch):
    monkeypatch.setattr(wipsim.service, "builtin_scenarios",
                        lambda *a, **k: (TINY,))
    monkeypatch.setattr(wipsim.service, "scenario_by_name",
                        lambda name, *a, **k: {s.name: s for s in (TINY,)}[name])
    out = tmp_path / "out"
    res = CliRunner().invoke(main, ["check", "--out", str(out)])
    assert res.exit_code == 0
    assert "all scenarios pass" in res.output
    agg = json.loads((out / "check.report.json").read_text())
    assert agg["passed"] is True
