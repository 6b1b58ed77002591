from __future__ import annotations

import json

import pytest

from netreg.errors import ConfigurationError, SchemaError
from netreg.experiments import ExperimentConfig, ResultBundle, run_experiment


@pytest.mark.parametrize("bad", [
    {"experiment": "nope"},
    {"experiment": "fig1_bias", "n": 0},
    {"experiment": "fig1_bias", "mc": 2.5},
    {"experiment": "fig1_bias", "deltas": [0.1]},
    {"experiment": "fig1_bias", "delta": -0.3, "rho": 0.2},
    {"experiment": "fig1_bias", "level": 1.0},
    {"experiment": "custom", "motifs": ["cycle(4)"]},
])
def test_config_validation(bad):
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict(bad)


def test_hash_ignores_output_location_and_workers():
    a = ExperimentConfig("fig1_bias", n=80, mc=3, output_dir="/tmp/a", workers=1)
    b = ExperimentConfig("fig1_bias", n=80, mc=3, output_dir="/tmp/b", workers=4)
    c = ExperimentConfig("fig1_bias", n=80, mc=3, seed=1)
    assert a.digest() == b.digest() != c.digest()
    assert ExperimentConfig.from_dict(a.to_dict()).digest() == a.digest()


def test_parallel_results_equal_serial(tmp_path):
    cfg = dict(experiment="custom", n=80, mc=4, B=60, deltas=(-0.3,), seed=5)
    serial = run_experiment(ExperimentConfig(**cfg))
    parallel = run_experiment(ExperimentConfig(**cfg, workers=2))
    assert serial.runs == parallel.runs and serial.aggregates == parallel.aggregates


def test_bundle_round_trip_and_tamper_detection(tmp_path):
    b = run_experiment(ExperimentConfig("fig1_bias", n=60, mc=2, deltas=(-0.25,)))
    paths = b.write(tmp_path)
    loaded = ResultBundle.load(paths["bundle"])
    assert loaded.aggregates == b.aggregates
    d = json.loads(paths["bundle"].read_text())
    d["runs"][0]["ols_z"] += 1.0
    paths["bundle"].write_text(json.dumps(d))
    with pytest.raises(SchemaError):
        ResultBundle.load(paths["bundle"])
    d["runs"][0]["ols_z"] -= 1.0
    d["provenance"]["config_hash"] = "0" * 64
    paths["bundle"].write_text(json.dumps(d))
    with pytest.raises(SchemaError):
        ResultBundle.load(paths["bundle"])


def test_progress_callback_and_table():
    seen = []
    b = run_experiment(ExperimentConfig("downsample_coverage", n=200, mc=2, B=60), progress=seen.append)
    assert seen == [0, 1]
    assert "coverage_z" in b.table()
