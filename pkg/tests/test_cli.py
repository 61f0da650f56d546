import json
import subprocess
import sys

import numpy as np
import pytest

from selector.cli import main
from selector.datamodel import (
    FeatureTable,
    InstanceKey,
    PerfRecord,
    PerformanceTable,
    load_feature_table,
    save_feature_table,
    save_performance_table,
)

SMALL = ["--runs", "5", "--budget-per-dim", "100", "--feature-repetitions", "2",
         "--sample-factor", "30"]


def tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run") / "out"
    code = main(["pipeline", *SMALL, "--repetitions", "4", "--pool-fraction", "0.3",
                 "--out", str(out)])
    return code, out


def file_inputs(tmp_path, n=30, d=40, seed=0):
    """Near-duplicate-free features (random directions) and random performance data."""
    r = np.random.default_rng(seed)
    keys = [InstanceKey("F", i + 1, 1, 5) for i in range(n)]
    save_feature_table(FeatureTable(keys, [f"x{j}" for j in range(d)], r.random((n, d))),
                       tmp_path / "features.csv")
    recs = [PerfRecord(k, a, run, float(abs(r.normal())))
            for k in keys for a in ("A", "B", "C") for run in range(10)]
    save_performance_table(PerformanceTable(tuple(recs)), tmp_path / "performance.csv")
    return ["--features", str(tmp_path / "features.csv"),
            "--performance", str(tmp_path / "performance.csv")]


def test_extract_row_count_and_drop(tmp_path):
    out = tmp_path / "x"
    code = main(["extract", "--dimension", "5", "--instances", "1", "--runs", "2",
                 "--budget-per-dim", "20", "--sample-factor", "20",
                 "--feature-repetitions", "1", "--out", str(out)])
    assert code == 0
    table = load_feature_table(out / "features.csv")
    assert len(table) == 12
    assert "ic.eps.s" not in table.feature_names
    assert (out / "performance.csv").exists()
    cfg = json.loads((out / "run_config.json").read_text())["config"]
    assert cfg["harness"]["dimension"] == 5


def test_extract_rerun_identical(tmp_path):
    args = ["extract", "--instances", "1", *SMALL]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert main([*args, "--out", str(tmp_path / "b")]) == 0
    assert tree(tmp_path / "a") == tree(tmp_path / "b")


def test_pipeline_artifacts(small_run):
    code, out = small_run
    assert code == 0
    for rel in ("features.csv", "performance.csv", "run_config.json", "report.json",
                "report.md", "selections/index.json", "selections/cluster/assignments.csv",
                "selections/cluster/suites.json", "selections/cluster_pool/suites.json",
                "graphs/threshold_0.90/graph.txt", "graphs/threshold_0.95/degrees.csv",
                "graphs/threshold_0.97/summary.json",
                "selections/ds/threshold_0.90/summary.json",
                "selections/mis/threshold_0.97/run_003.json"):
        assert (out / rel).is_file(), rel
    rep = json.loads((out / "report.json").read_text())
    names = [s["name"] for s in rep["selections"]]
    assert names[:2] == ["cluster", "cluster_pool"]
    assert "ds_0.90" in names and "mis_0.97" in names
    assert "out" not in rep["config"]


def test_pool_suites_count(small_run):
    _, out = small_run
    doc = json.loads((out / "selections/cluster_pool/suites.json").read_text())
    assert len(doc["suites"]) == 4
    assert doc["parameters"]["repetitions"] == 4


def test_counts_within_range(small_run):
    _, out = small_run
    rep = json.loads((out / "report.json").read_text())
    ds = next(s for s in rep["selections"] if s["name"] == "ds_0.90")
    assert all(0 <= c["no_significance"] <= 4 for c in ds["counts"])
    cl = next(s for s in rep["selections"] if s["name"] == "cluster")
    assert "counts" not in cl


def test_mis_file_cardinality(tmp_path):
    inputs = file_inputs(tmp_path)
    out = tmp_path / "o"
    code = main(["select", *inputs, "--heuristic", "mis", "--repetitions", "30",
                 "--threshold", "0.7", "--threshold", "0.8", "--threshold", "0.9",
                 "--out", str(out)])
    assert code == 0
    runs = list((out / "selections/mis").rglob("run_*.json"))
    summaries = list((out / "selections/mis").rglob("summary.json"))
    assert len(runs) == 90 and len(summaries) == 3


def test_cluster_fifteen_suites(tmp_path):
    inputs = file_inputs(tmp_path)
    out = tmp_path / "o"
    assert main(["select", *inputs, "--heuristic", "cluster", "--repetitions", "15",
                 "--pool-fraction", "0.25", "--clusters-range", "2:20",
                 "--out", str(out)]) == 0
    doc = json.loads((out / "selections/cluster_pool/suites.json").read_text())
    assert len(doc["suites"]) == 15


def test_high_threshold_selects_nearly_all(tmp_path):
    inputs = file_inputs(tmp_path)
    out = tmp_path / "o"
    assert main(["select", *inputs, "--heuristic", "ds", "--threshold", "0.99",
                 "--repetitions", "3", "--out", str(out)]) == 0
    summary = json.loads((out / "selections/ds/threshold_0.99/summary.json").read_text())
    assert summary["min"] >= 28


def test_compare_after_select(tmp_path):
    inputs = file_inputs(tmp_path)
    out = tmp_path / "o"
    base = [*inputs, "--heuristic", "mis", "--threshold", "0.99", "--repetitions", "3",
            "--out", str(out)]
    assert main(["select", *base]) == 0
    assert main(["compare", *base]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["selections"][0]["name"] == "mis_0.99"
    assert rep["selections"][0]["repetitions"] == 3


def test_compare_without_selections(tmp_path):
    inputs = file_inputs(tmp_path)
    assert main(["compare", *inputs, "--out", str(tmp_path / "none")]) == 3


def test_corrupt_features_no_reports(tmp_path):
    inputs = file_inputs(tmp_path)
    path = tmp_path / "features.csv"
    lines = path.read_text().splitlines()
    lines[5] = lines[5].rsplit(",", 1)[0] + ",oops"
    path.write_text("\n".join(lines) + "\n")
    out = tmp_path / "o"
    assert main(["pipeline", *inputs, "--out", str(out)]) == 3
    assert not out.exists()


def test_config_errors(tmp_path):
    assert main(["pipeline", "--threshold", "1.5"]) == 2
    bad = tmp_path / "c.yaml"
    bad.write_text("unknown_key: 1\n")
    assert main(["--config", str(bad), "pipeline"]) == 2
    inputs = file_inputs(tmp_path)
    assert main(["pipeline", *inputs, "--dimension", "3"]) == 2


def test_config_file_and_flag_override(tmp_path):
    inputs = file_inputs(tmp_path)
    cfg = tmp_path / "c.yaml"
    cfg.write_text("heuristic: ds\nthresholds: [0.99]\ngraph_repetitions: 2\n"
                   f"features: {inputs[1]}\nperformance: {inputs[3]}\n")
    out = tmp_path / "o"
    assert main(["--config", str(cfg), "select", "--threshold", "0.98",
                 "--out", str(out)]) == 0
    assert (out / "selections/ds/threshold_0.98/run_001.json").exists()
    assert not (out / "selections/ds/threshold_0.99").exists()


def test_strict_escalates_small_suites(tmp_path):
    inputs = file_inputs(tmp_path, n=8)
    args = ["pipeline", *inputs, "--heuristic", "mis", "--threshold", "0.99",
            "--repetitions", "2"]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert main([*args, "--out", str(tmp_path / "b"), "--strict"]) == 4


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "selector", "--help"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert "pipeline" in res.stdout
