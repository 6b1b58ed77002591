from __future__ import annotations

import json

import numpy as np
import pytest

from netreg import (
    CovariateRecipe, GraphonSpec, InverseSumKernel, LinearGraphonDGP, design_from_sample, ols_fit,
    sample_graphon,
)
from netreg import io as nio
from netreg.cli import main


@pytest.fixture
def dataset(tmp_path):
    s = sample_graphon(GraphonSpec(InverseSumKernel(), 0.3), 150, LinearGraphonDGP(), seed=4)
    nio.write_graph_csv(s.graph, tmp_path / "g.csv")
    nio.write_node_table(tmp_path / "cov.csv", ["y", "x1", "x2"], np.column_stack([s.Y, s.X[:, 1:]]))
    return tmp_path, s


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_complete_graph_intercept_only_fit(tmp_path, capsys):
    (tmp_path / "g.csv").write_text("src,dst\n0,1\n0,2\n0,3\n1,2\n1,3\n2,3\n")
    (tmp_path / "c.csv").write_text("y\n2.5\n2.5\n2.5\n2.5\n")
    code, out, _ = _run(capsys, "fit", "--graph", tmp_path / "g.csv", "--covariates", tmp_path / "c.csv")
    assert code == 0
    d = json.loads(out)
    assert d["names"] == ["intercept"] and d["beta"] == [2.5]


def test_missing_node_row_is_reported(tmp_path, capsys):
    (tmp_path / "g.csv").write_text("src,dst\n0,1\n1,2\n2,3\n")
    (tmp_path / "c.csv").write_text("node,y\n0,1\n1,2\n3,4\n")
    code, _, err = _run(capsys, "fit", "--graph", tmp_path / "g.csv", "--covariates", tmp_path / "c.csv")
    assert code == 2
    assert "no row for node 2" in err and err.startswith("netreg fit: error:")


def test_fit_matches_library_and_survives_round_trip(dataset, capsys):
    tmp, s = dataset
    code, out, _ = _run(capsys, "fit", "--graph", tmp / "g.csv", "--covariates", tmp / "cov.csv",
                        "--motifs", "rooted_k_star(2)")
    assert code == 0
    d = json.loads(out)
    want = ols_fit(design_from_sample(s, CovariateRecipe(motifs=("rooted_k_star(2)",)))).beta
    assert d["names"] == ["intercept", "x1", "x2", "rooted_k_star(2)"]
    # values were written with repr, so the refit is bit-identical
    assert np.array_equal(np.array(d["beta"]), want)


def test_bootstrap_outputs_are_reproducible(dataset, capsys):
    tmp, _ = dataset
    base = ["bootstrap", "--graph", tmp / "g.csv", "--covariates", tmp / "cov.csv",
            "--motifs", "rooted_k_star(2)", "--B", 60, "--seed", 3]
    assert _run(capsys, *base, "--output-dir", tmp / "a")[0] == 0
    assert _run(capsys, *base, "--output-dir", tmp / "b")[0] == 0
    a = (tmp / "a" / "bootstrap.replicates.csv").read_bytes()
    assert a == (tmp / "b" / "bootstrap.replicates.csv").read_bytes()
    summary = json.loads((tmp / "a" / "bootstrap.summary.json").read_text())
    assert summary["B"] == 60 and summary["scheme"] == "linear_multiplier"


def test_default_replicate_count(dataset, capsys):
    tmp, _ = dataset
    code, out, _ = _run(capsys, "bootstrap", "--graph", tmp / "g.csv", "--covariates", tmp / "cov.csv",
                        "--motifs", "k_star(1)", "--output-dir", tmp / "o")
    assert code == 0 and "B 500" in out
    lines = (tmp / "o" / "bootstrap.replicates.csv").read_text().splitlines()
    assert len(lines) == 501


def test_linear_scheme_rejected_for_spectral_design(dataset, capsys):
    tmp, _ = dataset
    code, _, err = _run(capsys, "bootstrap", "--graph", tmp / "g.csv", "--covariates", tmp / "cov.csv",
                        "--d", 2, "--scheme", "linear", "--B", 60, "--output-dir", tmp / "o")
    assert code == 2 and "motif column" in err


def test_network_effect_test_alpha_one_rejects(dataset, capsys):
    tmp, _ = dataset
    code, out, _ = _run(capsys, "test-network-effect", "--graph", tmp / "g.csv", "--covariates",
                        tmp / "cov.csv", "--motifs", "rooted_k_star(2)", "--B", 60, "--alpha", 1.0)
    assert code == 0
    assert "statistic" in out and "critical value" in out and "p-value" in out
    assert out.strip().splitlines()[-1] == "reject"


def test_env_output_dir(dataset, capsys, monkeypatch):
    tmp, _ = dataset
    monkeypatch.setenv("NETREG_OUTPUT_DIR", str(tmp / "env"))
    code, _, _ = _run(capsys, "ase", "--graph", tmp / "g.csv", "--d", 2)
    assert code == 0
    Z = nio.read_embedding_csv(tmp / "env" / "embedding.csv")
    assert Z.shape == (150, 2)


def test_count_motifs(dataset, capsys):
    tmp, s = dataset
    code, out, _ = _run(capsys, "count-motifs", "--graph", tmp / "g.csv", "--motifs", "k_star(2),triangle",
                        "--output", "local.csv", "--output-dir", tmp)
    assert code == 0 and "two_star: global" in out and "triangle: global" in out
    t = nio.read_node_table(tmp / "local.csv")
    assert t.columns == ("two_star", "triangle")


def test_downsample_and_corrected_flags(dataset, capsys):
    tmp, _ = dataset
    args = ["fit", "--graph", tmp / "g.csv", "--covariates", tmp / "cov.csv", "--x-columns", "x1"]
    code, out, _ = _run(capsys, *args, "--composite", "neighborhood_average:x1", "--downsample", "auto")
    assert code == 0 and json.loads(out)["variant"].startswith("downsampled(")
    code, out, _ = _run(capsys, *args, "--motifs", "rooted_k_star(2)", "--corrected")
    assert code == 0 and json.loads(out)["variant"] == "bias_corrected"
    code, _, err = _run(capsys, *args, "--d", 2, "--corrected")
    assert code == 2


def test_simulate_smoke_run(tmp_path, capsys):
    code, out, _ = _run(capsys, "simulate", "--experiment", "fig1_bias", "--n", 60, "--mc", 2,
                        "--deltas", "-0.25", "--output-dir", tmp_path)
    assert code == 0 and "config hash" in out
    from netreg.experiments import ResultBundle
    b = ResultBundle.load(tmp_path / "fig1_bias.bundle.json")
    assert len(b.runs) == 2 and b.config.n == 60
    assert (tmp_path / "fig1_bias.runs.csv").exists()


def test_simulate_config_file_and_bad_key(tmp_path, capsys):
    (tmp_path / "c.json").write_text(json.dumps({"experiment": "fig1_bias", "n": 50, "mc": 1, "deltas": [-0.3]}))
    code, _, _ = _run(capsys, "simulate", "--config", tmp_path / "c.json", "--output-dir", tmp_path)
    assert code == 0
    (tmp_path / "bad.json").write_text(json.dumps({"experiment": "fig1_bias", "nn": 5}))
    code, _, err = _run(capsys, "simulate", "--config", tmp_path / "bad.json", "--output-dir", tmp_path)
    assert code == 2 and "unknown config keys" in err
