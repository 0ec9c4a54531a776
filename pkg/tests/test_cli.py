import json
import subprocess
import sys

import numpy as np
import pytest

from protoset.harness.cli import main
from protoset.harness.io import read_coreset, read_patterns, read_prototypes


@pytest.fixture
def ensemble_file(tmp_path):
    out = tmp_path / "ens.jsonl"
    args = ["gen", "--kind", "ensemble", "--seed", "1", "--out", str(out)]
    for kv in ("items=40", "k=3", "dims=3", "solutions=20"):
        args += ["--set", kv]
    assert main(args) == 0
    return out


def test_gen_writes_patterns_and_truth(ensemble_file):
    inst = read_patterns(ensemble_file)
    assert (inst.n, inst.k, inst.d) == (20, 3, 40)
    truth = json.loads(ensemble_file.with_suffix(".truth.json").read_text())["truth"]
    assert len(truth) == 40


def test_coreset_then_solve(ensemble_file, tmp_path, capsys):
    cs_path = tmp_path / "cs.jsonl"
    assert main(["coreset", "--data", str(ensemble_file), "--fraction", "0.25", "--seed", "2", "--out", str(cs_path)]) == 0
    cs = read_coreset(cs_path)
    assert cs.sample_size == 5 and cs.seed == 2
    q_path = tmp_path / "q.jsonl"
    assert main(["solve", "--data", str(ensemble_file), "--coreset", str(cs_path), "--seed", "3", "--out", str(q_path)]) == 0
    meta, items = read_prototypes(q_path)
    assert meta["metric"] == "sq" and items[0][1].points.shape == (3, 40)
    assert "objective=" in capsys.readouterr().out


def test_project_preserves_order(ensemble_file, tmp_path):
    out = tmp_path / "low.jsonl"
    assert main(["project", "--data", str(ensemble_file), "--jl", "7", "--seed", "4", "--out", str(out)]) == 0
    assert read_patterns(out).points.shape == (20, 3, 7)


def test_eval_with_overrides(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"dataset": {"kind": "gaussian", "n": 30, "k": 2, "d": 3}}))
    out = tmp_path / "m.csv"
    code = main(["eval", "--config", str(cfg), "--seed", "5", "--fraction", "0.2", "--fraction", "0.4",
                 "--out", str(out), "--no-timing"])
    assert code == 0
    rows = out.read_text().splitlines()
    assert len(rows) == 4 and rows[1].startswith("full,1.0,")


def test_validate_small_suite(capsys):
    assert main(["validate", "--suite", "triangle", "--count", "50", "--seed", "6"]) == 0
    assert "0 violations" in capsys.readouterr().out
    assert main(["validate", "--suite", "estimator", "--count", "2000", "--seed", "7"]) == 0


@pytest.mark.parametrize(
    "argv, code",
    [
        (["eval", "--config", "/nonexistent/cfg.json"], 2),
        (["eval", "--seed", "1", "--fraction", "2.0"], 2),
        (["eval", "--seed", "1", "--metric", "l1", "--jl", "auto"], 2),
        (["solve", "--data", "/nonexistent/p.jsonl", "--seed", "1"], 3),
        (["coreset", "--data", "/nonexistent/p.jsonl", "--seed", "1", "--fraction", "0.1", "--out", "x"], 3),
        (["gen", "--kind", "gaussian", "--out", "x.jsonl"], 2),
    ],
)
def test_exit_codes(argv, code, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == code


def test_data_errors_exit_3(tmp_path, ensemble_file):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("not json\n")
    assert main(["solve", "--data", str(bad), "--seed", "1"]) == 3
    # a coreset drawn from another file is refused
    other = tmp_path / "other.jsonl"
    main(["gen", "--kind", "gaussian", "--seed", "9", "--out", str(other), "--set", "n=20", "--set", "k=3", "--set", "d=40"])
    cs_path = tmp_path / "cs.jsonl"
    main(["coreset", "--data", str(other), "--fraction", "0.5", "--seed", "1", "--out", str(cs_path)])
    assert main(["solve", "--data", str(ensemble_file), "--coreset", str(cs_path), "--seed", "1"]) == 3


def test_numerical_failure_exit_4(monkeypatch):
    import protoset.harness.cli as cli

    monkeypatch.setattr(cli, "verify_match_triangle", lambda *a, **k: False)
    assert main(["validate", "--suite", "triangle", "--count", "2", "--metric", "sq"]) == 4


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["eval", "--metric", "l3"])
    assert exc.value.code == 2


def test_module_entry_point(tmp_path):
    out = tmp_path / "g.jsonl"
    proc = subprocess.run(
        [sys.executable, "-m", "protoset.harness.cli", "gen", "--kind", "gaussian", "--seed", "3",
         "--set", "n=5", "--set", "k=2", "--set", "d=2", "--out", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert np.all(np.isfinite(read_patterns(out).points))
