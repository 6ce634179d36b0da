import csv
import json
import subprocess
import sys

import pytest

from hopdyn.cli import EXIT_INPUT, EXIT_OK, EXIT_USAGE, main


def _run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


def test_params_default(tmp_path, capsys):
    code, out = _run(tmp_path, "params", "--default")
    assert code == EXIT_OK
    rec = json.loads((out / "params.json").read_text())
    assert rec["m_B"] == 0.58793
    assert (out / "manifest.json").exists()


def test_params_round_trip(tmp_path):
    _, out = _run(tmp_path, "params", "--default")
    code, out2 = _run(tmp_path, "params", "--params", str(out / "params.json"), name="b")
    assert code == EXIT_OK
    assert (out2 / "params.json").read_text() == (out / "params.json").read_text()


def test_simulate_accumulates(tmp_path):
    code, out = _run(tmp_path, "simulate", "--alpha", "0.4", "--h0", "1.0", "--hops", "20")
    assert code == EXIT_OK
    with open(out / "sequence.csv") as fh:
        rows = list(csv.DictReader(fh))
    h = [float(r["height"]) for r in rows]
    assert len(h) == 21
    assert all(b >= a for a, b in zip(h[2:], h[3:]))


def test_simulate_trace_files(tmp_path):
    code, out = _run(tmp_path, "simulate", "--alpha", "0.3", "--hops", "2", "--trace")
    assert code == EXIT_OK
    for name in ("sequence.csv", "trajectory.csv", "events.csv", "ledger.csv"):
        assert (out / name).stat().st_size > 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["outputs"]) == {"sequence.csv", "trajectory.csv", "events.csv", "ledger.csv"}


def test_analyze_missing_file(tmp_path, capsys):
    code, _ = _run(tmp_path, "analyze", str(tmp_path / "missing.csv"))
    assert code == EXIT_INPUT
    assert "missing.csv" in capsys.readouterr().err


def test_analyze_malformed_file(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,x,y,z\n0,0,0,1\n0.01,0,0\n")
    code, _ = _run(tmp_path, "analyze", str(bad))
    assert code == EXIT_INPUT
    assert "bad.csv:3" in capsys.readouterr().err


def test_usage_errors(tmp_path):
    assert main(["bogus"]) == EXIT_USAGE
    assert main([]) == EXIT_USAGE
    assert main(["simulate", "--alpha", "x"]) == EXIT_USAGE
    assert _run(tmp_path, "params", "--jobs", "0")[0] == EXIT_USAGE


def test_invalid_value_is_input_error(tmp_path):
    assert _run(tmp_path, "simulate", "--alpha", "1.5")[0] == EXIT_INPUT


def test_out_env_override(tmp_path, monkeypatch):
    target = tmp_path / "env_out"
    monkeypatch.setenv("HOPDYN_OUT", str(target))
    code, ignored = _run(tmp_path, "params", "--default")
    assert code == EXIT_OK
    assert (target / "params.json").exists() and not ignored.exists()


def test_console_entry_point(tmp_path):
    r = subprocess.run(
        [sys.executable, "-m", "hopdyn.cli", "elastomer", "--out", str(tmp_path / "e")],
        capture_output=True,
        text=True,
    )
    assert r.returncode == 0, r.stderr
    rec = json.loads((tmp_path / "e" / "elastomer.json").read_text())
    assert rec["quoted_system_specific_J_per_kg"] == pytest.approx(23.87, rel=1e-3)
    assert rec["discrepancy"]["computed_stored_J"] == pytest.approx(16.05, abs=5e-3)
    assert "discrepancy" in rec["discrepancy"]["note"]


COMMANDS = [
    ["params", "--default"],
    ["simulate", "--alpha", "0.45", "--hops", "3", "--trace"],
    ["critical", "--single"],
    ["stance", "--v", "6", "--theta", "10"],
    ["stance", "--v-range", "2,4", "--theta-range", "0:10:3"],
    ["protocol", "--alpha-pct", "55", "--hops", "2", "--experimental"],
    ["elastomer"],
]


@pytest.mark.parametrize("args", COMMANDS, ids=lambda a: "-".join(a[:2]))
def test_repeat_runs_are_byte_identical(tmp_path, args):
    code_a, a = _run(tmp_path, *args, name="a")
    code_b, b = _run(tmp_path, *args, name="b")
    assert code_a == code_b == EXIT_OK
    files_a = sorted(p.name for p in a.iterdir() if p.name != "manifest.json")
    files_b = sorted(p.name for p in b.iterdir() if p.name != "manifest.json")
    assert files_a == files_b and files_a
    for name in files_a:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_analyze_command(tmp_path):
    _, sim = _run(tmp_path, "simulate", "--alpha", "0", "--h0", "1.5", "--hops", "2", "--trace", "--sample-dt", "1e-4", name="sim")
    from hopdyn.core import default_params
    from hopdyn.dynamics import SimState, simulate

    p = default_params()
    rec = tmp_path / "rec.csv"
    simulate(p, SimState.at_rest(1.5, p), n_hops=2).to_mocap_csv(rec)
    code, out = _run(tmp_path, "analyze", str(rec))
    assert code == EXIT_OK
    lines = (out / "ledgers.csv").read_text().splitlines()
    assert lines[0].endswith("hop_index,file") and len(lines) == 3
