import json
import re
from pathlib import Path

import pytest

from lvpop.cli import build_parser, main
from lvpop.experiments import ExperimentConfig, run_trials
from lvpop.protocol import builtin, protocol_from_dict

SNAPSHOTS = Path(__file__).parent / "snapshots"
SUBCOMMANDS = ["simulate", "experiment", "ode", "analyze", "builtins"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def help_text(argv, monkeypatch, capsys):
    monkeypatch.setenv("COLUMNS", "100")
    with pytest.raises(SystemExit):
        main(argv + ["--help"])
    return capsys.readouterr().out


@pytest.mark.parametrize("cmd", [None] + SUBCOMMANDS)
def test_help_snapshot(cmd, monkeypatch, capsys):
    argv = [cmd] if cmd else []
    text = help_text(argv, monkeypatch, capsys)
    snap = SNAPSHOTS / f"help_{cmd or 'main'}.txt"
    assert text == snap.read_text()


def test_every_flag_documented(monkeypatch, capsys):
    parser = build_parser()
    sub = next(a for a in parser._actions if a.dest == "command")
    for name, p in sub.choices.items():
        text = help_text([name], monkeypatch, capsys)
        for action in p._actions:
            for flag in action.option_strings:
                assert flag in text, (name, flag)


def test_builtins_list(capsys):
    code, out, _ = run(capsys, "builtins", "list")
    assert code == 0
    for name in ("rps", "ws", "life_death", "counterexample"):
        assert name in out


def test_builtins_show_rps(capsys):
    code, out, _ = run(capsys, "builtins", "show", "rps")
    rows = [line.split() for line in out.strip().splitlines()[1:]]
    assert [r[1:] for r in rows] == [["0", "1", "0"], ["0", "0", "1"], ["1", "0", "0"]]


@pytest.mark.parametrize("name", ["rps", "ws", "life_death", "counterexample"])
def test_builtins_json_roundtrip(name, capsys):
    code, out, _ = run(capsys, "builtins", "show", name, "--format", "json")
    assert code == 0
    assert protocol_from_dict(json.loads(out)) == builtin(name)


def test_nonzero_diagonal_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"k":2,"names":["a","b"],"kind":"lv","matrix":[[0.3,1],[1,0]]}')
    code, out, err = run(capsys, "simulate", "--protocol", str(bad), "--n", "10")
    assert code == 1
    assert "NonZeroDiagonal" in err and out == ""


def test_missing_file_exit_2(tmp_path, capsys):
    code, _, err = run(capsys, "simulate", "--protocol", str(tmp_path / "nope.json"))
    assert code == 2 and "FileNotFoundError" in err


def test_unknown_flag_rejected(capsys):
    with pytest.raises(SystemExit) as ei:
        main(["simulate", "--protocol", "rps", "--bogus"])
    assert ei.value.code != 0


def test_simulate_json_and_resolved_config(capsys):
    code, out, err = run(capsys, "simulate", "--protocol", "rps", "--n", "60", "--seed", "7",
                         "--max-steps", "1e9")
    assert code == 0
    res = json.loads(out)
    assert res["terminal"] == "absorbed" and sum(res["final_counts"]) == 60
    cfg = json.loads(err)
    assert cfg["seed"] == 7 and cfg["max_steps"] == 10**9 and cfg["init"] == [20, 20, 20]


def test_simulate_quiet_csv_trace(tmp_path, capsys):
    trace = tmp_path / "t.csv"
    code, out, err = run(capsys, "--quiet", "simulate", "--protocol", "rps", "--n", "90",
                         "--seed", "3", "--trace", str(trace), "--trace-stride", "500",
                         "--format", "csv")
    assert code == 0 and err == ""
    head, row = out.strip().splitlines()
    assert head.startswith("terminal,label,steps")
    lines = trace.read_text().splitlines()
    assert lines[0] == "step,n_1,n_2,n_3,U_b"
    assert lines[2].startswith("500,")


def test_simulate_star_and_graph_file(tmp_path, capsys):
    code, out, _ = run(capsys, "--quiet", "simulate", "--protocol", "rps", "--graph", "star",
                       "--n", "30", "--seed", "1")
    assert code == 0 and "center" in json.loads(out)
    g = tmp_path / "g.json"
    g.write_text(json.dumps({"n": 4, "edges": [[0, 1], [1, 2], [2, 3], [3, 0]]}))
    code, out, _ = run(capsys, "--quiet", "simulate", "--protocol", "life_death", "--graph",
                       f"file:{g}", "--init", "2,2", "--seed", "1")
    assert code == 0 and json.loads(out)["terminal"] == "absorbed"


def test_simulate_matches_experiment_trial(tmp_path, capsys):
    rec = run_trials(ExperimentConfig("rps", n=60, trials=1, base_seed=11)).records[0]
    code, out, _ = run(capsys, "--quiet", "simulate", "--protocol", "rps", "--n", "60",
                       "--seed", str(rec.seed))
    res = json.loads(out)
    assert res["steps"] == rec.steps and tuple(res["final_counts"]) == rec.final


def test_experiment_config_with_overrides(tmp_path, capsys):
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({"protocol": "life_death", "init": [5, 5], "trials": 50}))
    out_dir = tmp_path / "out"
    code, out, _ = run(capsys, "--quiet", "experiment", "--config", str(cfg), "--out",
                       str(out_dir), "--trials", "12", "--seed", "4")
    assert code == 0
    summary = json.loads((out_dir / "summary.json").read_text())
    assert summary["trials"] == 12 and summary["config"]["base_seed"] == 4
    assert len((out_dir / "trials.csv").read_text().splitlines()) == 13


def test_experiment_named(tmp_path, capsys):
    cfg = tmp_path / "sym.json"
    cfg.write_text(json.dumps({"experiment": "rps_symmetry", "x0": [0.5, 0.3, 0.2], "n": 30,
                               "trials": 20}))
    code, out, _ = run(capsys, "--quiet", "experiment", "--config", str(cfg), "--out",
                       str(tmp_path / "o"))
    assert code == 0 and "pvalue" in json.loads(out)


def test_experiment_bad_config(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"protocol": "rps", "wat": 1}))
    code, _, err = run(capsys, "experiment", "--config", str(cfg), "--out", str(tmp_path))
    assert code == 1 and "InvalidConfig" in err


def test_ode_boundary_diagnostic(tmp_path, capsys):
    out_path = tmp_path / "orbit.csv"
    code, _, err = run(capsys, "ode", "--protocol", "rps", "--x0", "1,0,0", "--duration", "1",
                       "--h", "0.25", "--out", str(out_path))
    assert code == 0 and "ZeroPopulation" in err
    lines = out_path.read_text().splitlines()
    assert lines[0] == "t,x_1,x_2,x_3,U" and len(lines) == 6
    assert lines[-1] == "1.0,1.0,0.0,0.0,"


def test_ode_interior_full_precision(capsys):
    code, out, _ = run(capsys, "--quiet", "ode", "--protocol", "rps", "--x0", "0.5,0.3,0.2",
                       "--duration", "0.5", "--h", "0.1")
    rows = out.strip().splitlines()
    vals = rows[-1].split(",")
    assert float(vals[0]) == 0.5
    assert all(repr(float(v)) == v for v in vals)


def test_analyze_b(capsys):
    code, out, _ = run(capsys, "--quiet", "analyze", "--protocol", "rps", "--b")
    res = json.loads(out)
    assert res["case"] == "i" and res["b"] == [1.0, 1.0, 1.0]
    assert res["A"] == [[0.0, 1.0, -1.0], [-1.0, 0.0, 1.0], [1.0, -1.0, 0.0]]
    code, _, err = run(capsys, "analyze", "--protocol", "counterexample")
    assert code == 1 and "NotLvKind" in err
