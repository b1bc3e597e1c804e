import csv
import json
import subprocess
import sys

import pytest

from groundmap.cli import main

SMALL = {"perturbation": {"n_variants": 4}, "max_triplets": 10, "gd": {"budget": 500}, "seed": 42}


def tree(path):
    return {p.relative_to(path).as_posix(): p.read_bytes() for p in sorted(path.rglob("*")) if p.is_file()}


def test_validate_theory(tmp_path, capsys):
    assert main(["validate-theory", "--eps", "1", "--camera", "default", "--out-dir", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "theory.json").read_text())
    assert 1.9 <= summary["slopes"]["1.0"] <= 2.1
    rows = list(csv.DictReader(open(tmp_path / "theory.csv")))
    assert len(rows) == 41 and float(rows[0]["Y"]) == pytest.approx(10.0)
    assert "slope=" in capsys.readouterr().out


def test_pipeline_byte_identical(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps(SMALL))
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["pipeline", "--config", str(cfg), "--out-dir", str(a)]) == 0
    assert main(["pipeline", "--config", str(cfg), "--out-dir", str(b), "--jobs", "2"]) == 0
    ta, tb = tree(a), tree(b)
    assert ta == tb
    assert ta["run_config.json"] == cfg.read_bytes()
    assert {"scene.json", "variants.jsonl", "records.csv", "aggregate.json", "heatmaps.json", "table.txt"} <= set(ta)


def test_stages_standalone(tmp_path):
    out = str(tmp_path)
    assert main(["simulate", "--scene", "scene1", "--seed", "3", "--out-dir", out]) == 0
    scene, variants = str(tmp_path / "scene.json"), str(tmp_path / "variants.jsonl")
    assert main(["perturb", "--scene", scene, "--n-variants", "3", "--seed", "3", "--out-dir", out]) == 0
    assert main(["correct", "--scene", scene, "--variants", variants, "--method", "regression",
                 "--out-dir", out]) == 0
    model = json.loads((tmp_path / "error_model.json").read_text())
    assert model["model"]["direction_sign"] in (-1, 1)
    assert main(["correct", "--scene", scene, "--variants", variants, "--method", "gd", "--budget", "300",
                 "--variant-id", "2", "--out-dir", out]) == 0
    opt = json.loads((tmp_path / "optimized.json").read_text())
    assert opt["final_objective"] <= opt["initial_objective"] and opt["evaluations"] <= 300
    assert (tmp_path / "trace.jsonl").exists()
    assert main(["evaluate", "--scene", scene, "--variants", variants, "--method", "hybrid",
                 "--max-triplets", "4", "--budget", "300", "--out-dir", out]) == 0
    methods = {r["method"] for r in csv.DictReader(open(tmp_path / "records.csv"))}
    assert methods == {"regression", "gd", "hybrid"}
    assert json.loads((tmp_path / "run_config.json").read_text())["method"] == "hybrid"
    assert main(["report", "--records", str(tmp_path / "records.csv"), "--out-dir", out]) == 0
    agg = json.loads((tmp_path / "aggregate.json").read_text())
    assert set(agg["methods"]) == {"regression", "gd", "hybrid"}


def test_exit_codes(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["report", "--records", str(empty), "--out-dir", str(tmp_path)]) == 3
    assert main(["simulate", "--scene", "nowhere", "--out-dir", str(tmp_path)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"no_such_field": 1}))
    assert main(["pipeline", "--config", str(bad), "--out-dir", str(tmp_path)]) == 2
    assert main(["simulate", "--tilt", "95", "--out-dir", str(tmp_path)]) == 2
    assert main(["perturb", "--scene", str(tmp_path / "missing.json"), "--out-dir", str(tmp_path)]) == 3
    with pytest.raises(SystemExit) as info:
        main(["evaluate", "--method", "magic"])
    assert info.value.code == 2


def test_env_default_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("GROUNDMAP_OUT", str(tmp_path / "envout"))
    assert main(["validate-theory"]) == 0
    assert (tmp_path / "envout" / "theory.csv").exists()


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "groundmap", "validate-theory", "--out-dir", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "slope" in res.stdout
