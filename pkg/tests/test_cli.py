"""End-to-end command line flows, run in-process through cli.main."""

import csv
import io
import json

import pytest

from submax import cli
from submax.instances import (CoverageInstance, WRSInstance, load_instance,
                              save_instance)
from submax.mconcave import UniformMatroid

import numpy as np


def run_cli(*argv):
    return cli.main(list(argv))


def make_coverage_file(tmp_path, name="cov.json"):
    rc = run_cli("generate", "--family", "coverage", "--n", "5", "--points",
                 "6", "--density", "0.4", "--seed", "1", "--out",
                 str(tmp_path / name))
    assert rc == 0
    return str(tmp_path / name)


def make_facility_file(tmp_path, name="fl.json"):
    rc = run_cli("generate", "--family", "facility", "--n", "5",
                 "--customers", "3", "--w-max", "6", "--seed", "2", "--out",
                 str(tmp_path / name))
    assert rc == 0
    return str(tmp_path / name)


# ---------------------------------------------------------------------------
# generate


def test_generate_stdout(capsys):
    rc = run_cli("generate", "--family", "coverage", "--n", "5", "--points",
                 "6", "--density", "0.4", "--seed", "1")
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["schema_version"] == 1
    assert doc["family"] == "coverage"
    assert doc["seed"] == 1
    assert len(doc["cover"]) == 6


def test_generate_file_round_trip(tmp_path):
    path = make_coverage_file(tmp_path)
    inst = load_instance(path)
    assert isinstance(inst, CoverageInstance)
    assert inst.n == 5


def test_generate_invalid_params(tmp_path, capsys):
    rc = run_cli("generate", "--family", "facility", "--n", "4",
                 "--customers", "0", "--seed", "0")
    assert rc == 5
    assert "invalid generator parameters" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# decompose


def test_decompose_facility(tmp_path, capsys):
    path = make_facility_file(tmp_path)
    rc = run_cli("decompose", "--instance", path)
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["method"] == "facility-location"
    assert 0.0 <= doc["gamma_h"] <= doc["c"] + 1e-9
    assert doc["verify"]["ok"]
    assert doc["meta"]["bound_holds"]


def test_decompose_trivial_on_modular(tmp_path, capsys):
    # a free-matroid weighted-rank term is modular: c = 0 and the fallback
    # split has nothing left over
    inst = WRSInstance(4, ((1.0, UniformMatroid(4, 4),
                            np.array([2.0, 1.0, 3.0, 1.0])),))
    path = tmp_path / "mod.json"
    save_instance(inst, path)
    rc = run_cli("decompose", "--instance", str(path), "--method", "trivial")
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["method"] == "trivial"
    assert doc["c"] == pytest.approx(0.0, abs=1e-12)
    assert doc["gamma_h"] == pytest.approx(0.0, abs=1e-12)


def test_decompose_quadratic_coverage(tmp_path, capsys):
    path = make_coverage_file(tmp_path)
    rc = run_cli("decompose", "--instance", path, "--method", "quadratic")
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["method"] == "quadratic"
    assert doc["meta"]["hessian_source"] == "coverage-closedform"
    assert doc["gamma_h"] <= doc["c"] + 1e-9


def test_decompose_to_file(tmp_path):
    path = make_facility_file(tmp_path)
    out = tmp_path / "dec.json"
    rc = run_cli("decompose", "--instance", path, "--out", str(out))
    assert rc == 0
    assert json.loads(out.read_text())["schema_version"] == 1


def test_decompose_skips_verify_above_cap(tmp_path, capsys):
    path = make_facility_file(tmp_path)
    rc = run_cli("decompose", "--instance", path, "--check-cap", "2")
    assert rc == 0
    assert "verify" not in json.loads(capsys.readouterr().out)


def test_decompose_missing_file(capsys):
    assert run_cli("decompose", "--instance", "/nonexistent.json") == 5
    assert "not found" in capsys.readouterr().err


def test_decompose_malformed_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run_cli("decompose", "--instance", str(bad)) == 5
    unknown = tmp_path / "unk.json"
    unknown.write_text(json.dumps({"family": "mystery"}))
    assert run_cli("decompose", "--instance", str(unknown)) == 5


# ---------------------------------------------------------------------------
# maximize


def maximize_doc(tmp_path, capsys, *extra):
    path = make_coverage_file(tmp_path)
    rc = run_cli("maximize", "--instance", path, "--k", "2", "--epsilon",
                 "0.25", "--trials", "3", "--seed", "1", *extra)
    assert rc == 0
    return json.loads(capsys.readouterr().out)


def test_maximize_json_document(tmp_path, capsys):
    doc = maximize_doc(tmp_path, capsys)
    assert set(doc["algorithms"]) == {"continuous", "lazy_greedy"}
    assert doc["opt"] is not None
    for name, ratio in doc["ratios"].items():
        assert 0.0 <= ratio <= 1.0 + 1e-9
    assert doc["bounds"]["theorem"] >= doc["bounds"]["curvature"] - 1e-12
    assert doc["run"]["k"] == 2
    assert doc["run"]["epsilon"] == 0.25
    assert "timestamp" in doc["timing"]


def test_maximize_deterministic_modulo_timing(tmp_path, capsys):
    d1 = maximize_doc(tmp_path, capsys)
    d2 = maximize_doc(tmp_path, capsys)
    d1.pop("timing")
    d2.pop("timing")
    assert d1 == d2


def test_maximize_csv(tmp_path, capsys):
    path = make_coverage_file(tmp_path)
    rc = run_cli("maximize", "--instance", path, "--k", "2", "--epsilon",
                 "0.25", "--trials", "3", "--format", "csv")
    assert rc == 0
    reader = csv.DictReader(io.StringIO(capsys.readouterr().out))
    assert reader.fieldnames == cli.CSV_FIELDS
    rows = list(reader)
    assert {r["algorithm"] for r in rows} == {"continuous", "lazy_greedy"}
    for r in rows:
        assert float(r["value"]) >= 0
        assert 0.0 <= float(r["ratio"]) <= 1.0 + 1e-9


def test_maximize_k_too_large(tmp_path, capsys):
    path = make_coverage_file(tmp_path)
    rc = run_cli("maximize", "--instance", path, "--k", "9")
    assert rc == 4
    assert "infeasible" in capsys.readouterr().err


def test_maximize_only_baselines(tmp_path, capsys):
    doc = maximize_doc(tmp_path, capsys, "--only-baselines")
    assert set(doc["algorithms"]) == {"lazy_greedy"}
    assert doc["run"]["only_baselines"]


# ---------------------------------------------------------------------------
# verify


def test_verify_clean_instance(tmp_path, capsys):
    path = make_facility_file(tmp_path)
    rc = run_cli("verify", "--instance", path)
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["ok"]
    assert doc["checks"]["monotone_submodular"] is True
    assert doc["checks"]["decomposition"]["ok"]


def test_verify_exchange_failure_carries_witness(tmp_path, capsys):
    # two overlapping neighborhoods break the exchange axiom: coverage is
    # submodular but not matroid-concave
    inst = CoverageInstance(3, (frozenset({0, 1}), frozenset({1, 2})))
    path = tmp_path / "cex.json"
    save_instance(inst, path)
    rc = run_cli("verify", "--instance", str(path), "--level", "mnat")
    assert rc == 3
    doc = json.loads(capsys.readouterr().out)
    assert doc["ok"] is False
    assert doc["checks"]["exchange"] is False
    assert doc["checks"]["witness"] == {"X": [0, 2], "Y": [1], "i": 0}


def test_verify_cap_exceeded(tmp_path, capsys):
    path = make_coverage_file(tmp_path)
    rc = run_cli("verify", "--instance", path, "--level", "function",
                 "--check-cap", "2")
    assert rc == 4
    assert "cap exceeded" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# bench


def fill_bench_dir(tmp_path):
    d = tmp_path / "instances"
    d.mkdir()
    run_cli("generate", "--family", "coverage", "--n", "5", "--points", "6",
            "--density", "0.4", "--seed", "1", "--out", str(d / "a.json"))
    run_cli("generate", "--family", "facility", "--n", "4", "--customers",
            "3", "--w-max", "5", "--seed", "2", "--out", str(d / "b.json"))
    run_cli("generate", "--family", "wrs", "--n", "3", "--terms", "2",
            "--seed", "3", "--out", str(d / "c.json"))
    return d


def test_bench_csv(tmp_path):
    d = fill_bench_dir(tmp_path)
    out = tmp_path / "bench.csv"
    rc = run_cli("bench", "--dir", str(d), "--k", "4", "--epsilon", "0.25",
                 "--trials", "3", "--format", "csv", "--out", str(out))
    assert rc == 0
    rows = list(csv.DictReader(out.open()))
    # two algorithms per instance; k is clamped to n=3 for the smallest one
    assert len(rows) == 6
    assert {r["instance"] for r in rows} == {"a", "b", "c"}
    assert all(r["k"] in {"3", "4"} for r in rows)


def test_bench_json(tmp_path, capsys):
    d = fill_bench_dir(tmp_path)
    rc = run_cli("bench", "--dir", str(d), "--k", "2", "--epsilon", "0.25",
                 "--trials", "3", "--format", "json")
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert len(doc["runs"]) == 3


def test_bench_figures(tmp_path):
    d = fill_bench_dir(tmp_path)
    out = tmp_path / "bench.csv"
    rc = run_cli("bench", "--dir", str(d), "--k", "2", "--epsilon", "0.25",
                 "--trials", "3", "--format", "csv", "--out", str(out),
                 "--figures")
    assert rc == 0
    for suffix in ("_ratio.png", "_curvature.png"):
        png = tmp_path / f"bench{suffix}"
        assert png.exists() and png.stat().st_size > 0


def test_bench_empty_dir(tmp_path, capsys):
    d = tmp_path / "empty"
    d.mkdir()
    assert run_cli("bench", "--dir", str(d), "--k", "2") == 5
    assert "no instance files" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# environment knobs


def test_env_opt_cap_disables_brute_force(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("SUBMAX_OPT_CAP", "3")
    doc = maximize_doc(tmp_path, capsys)
    assert doc["opt"] is None
    assert doc["ratios"] == {}


def test_env_cap_must_be_integer(monkeypatch):
    monkeypatch.setenv("SUBMAX_CHECK_CAP", "lots")
    with pytest.raises(SystemExit, match="must be an integer"):
        cli.build_parser()
