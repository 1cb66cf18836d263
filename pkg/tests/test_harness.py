import csv

import numpy as np
import pytest

from dcid.errors import ConfigError
from dcid.harness import (
    EXTERNAL_METHODS,
    RUN_COLUMNS,
    SUMMARY_COLUMNS,
    StudyConfig,
    SweepSpec,
    derive_seed,
    emit_plotdata,
    log_grid,
    mean_metric,
    run_benchmark,
    run_sweep,
    summarize,
)
from dcid.nets import MlpSpec, TrainConfig
from dcid.pipeline import DcidConfig
from dcid.scenario import ScenarioConfig

FAST = StudyConfig(
    scenario=ScenarioConfig(n_samples=2000),
    dcid=DcidConfig(
        representation="linear",
        net=MlpSpec(input_dim=1, feature_dim=8, hidden_widths=(16,), activation="tanh", feature_activation="linear"),
        train=TrainConfig(learning_rate=3e-3, epochs=2),
    ),
    n_scenarios=2,
    seeds=2,
)


@pytest.fixture(scope="module")
def records():
    return run_benchmark(FAST, master_seed=7)


def test_grid_cardinality(records):
    assert len(records) == 2 * 2 * len(FAST.methods)
    assert {(r.scenario_id, r.seed) for r in records} == {(0, 0), (0, 1), (1, 0), (1, 1)}


def test_oracle_scores_near_one(records):
    assert mean_metric(records, "oracle-z") >= 0.95


def test_dcid_less_leaky_than_raw_features(records):
    assert mean_metric(records, "dcid", "minimality") > mean_metric(records, "raw-features", "minimality")


def test_no_failures(records):
    assert not [r.error for r in records if r.failed]


def test_seeds_follow_master_seed(records):
    r = records[0]
    assert r.scenario_seed == derive_seed(7, r.scenario_id)
    assert r.run_seed == derive_seed(7, r.scenario_id, r.seed)
    assert derive_seed(7, 0) != derive_seed(8, 0)


def test_csv_byte_identical(tmp_path, records):
    again = run_benchmark(FAST, master_seed=7)
    emit_plotdata(records, tmp_path / "a")
    emit_plotdata(again, tmp_path / "b")
    for name in ("benchmark_runs.csv", "benchmark_summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_worker_count_does_not_change_results(tmp_path):
    study = StudyConfig(scenario=FAST.scenario, dcid=FAST.dcid, methods=("dcid", "oracle-z"), n_scenarios=2, seeds=1)
    emit_plotdata(run_benchmark(study, master_seed=3, workers=1), tmp_path / "one")
    emit_plotdata(run_benchmark(study, master_seed=3, workers=2), tmp_path / "two")
    assert (tmp_path / "one" / "benchmark_runs.csv").read_bytes() == (tmp_path / "two" / "benchmark_runs.csv").read_bytes()


def test_csv_headers_and_external_rows(tmp_path, records):
    runs, summary = emit_plotdata(records, tmp_path)
    with open(runs) as fh:
        assert tuple(next(csv.reader(fh))) == RUN_COLUMNS
    with open(summary) as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0]) == SUMMARY_COLUMNS
    assert {r["method"] for r in rows} == set(FAST.methods) | set(EXTERNAL_METHODS)
    ext = [r for r in rows if r["method"] in EXTERNAL_METHODS]
    assert all(r["icm_mean"] == "" and r["n_runs"] == "0" for r in ext)
    assert (tmp_path / "benchmark_metadata.json").exists()


def test_failed_runs_are_quarantined(tmp_path):
    # a 16-feature MLP needs 160 training rows; 100 samples give 70
    study = StudyConfig(scenario=ScenarioConfig(n_samples=100, dim_obs=8), methods=("dcid", "oracle-z"), n_scenarios=1, seeds=1)
    recs = run_benchmark(study)
    by = {r.method: r for r in recs}
    assert by["dcid"].failed and "ConfigError" in by["dcid"].error
    assert not by["oracle-z"].failed
    runs, summary = emit_plotdata(recs, tmp_path)
    row = [r for r in csv.DictReader(open(runs)) if r["method"] == "dcid"][0]
    assert row["icm"] == "" and row["error"].startswith("ConfigError")
    srow = [r for r in csv.DictReader(open(summary)) if r["method"] == "dcid"][0]
    assert srow["n_failed"] == "1"


def test_empty_methods_rejected():
    with pytest.raises(ConfigError):
        StudyConfig(methods=())
    with pytest.raises(ConfigError):
        StudyConfig(methods=("dcid", "pca"))


def test_study_config_round_trip():
    assert StudyConfig.from_dict(FAST.to_dict()) == FAST
    with pytest.raises(ConfigError):
        StudyConfig.from_dict({"bogus": 1})


def test_default_grids():
    tau = SweepSpec("tau").grid
    assert len(tau) == 17 and tau[0] == pytest.approx(0.1) and tau[-1] == pytest.approx(10.0)
    assert tau[8] == pytest.approx(1.0)
    kappa = SweepSpec("kappa").grid
    np.testing.assert_allclose(kappa, np.linspace(0.1, 1.0, 10))
    assert log_grid(1, 100, 3) == [1.0, 10.0, 100.0]
    with pytest.raises(ConfigError):
        SweepSpec("kappa", grid=(0.0, 0.5))


def test_tau_sweep_holds_latents_fixed():
    study = StudyConfig(scenario=FAST.scenario, dcid=FAST.dcid, methods=("dcid",))
    recs = run_sweep(SweepSpec("tau", grid=(1e-6, 1.0), n_scenarios=1, seeds=1), study)
    assert [r.grid_value for r in recs] == [1e-6, 1.0]
    assert recs[0].scenario_seed == recs[1].scenario_seed
    assert recs[0].score.icm < 0.1 <= 0.9 <= recs[1].score.icm


def test_kappa_sweep_rejects_infeasible_grid():
    study = StudyConfig(scenario=ScenarioConfig(tau=10.0), methods=("oracle-z",))
    with pytest.raises(ConfigError, match="infeasible"):
        run_sweep(SweepSpec("kappa", grid=(1.0, 0.1), n_scenarios=1, seeds=1), study)


def test_summary_statistics(records):
    rows = {r["method"]: r for r in summarize(records)}
    vals = [r.score.icm for r in records if r.method == "dcid"]
    assert float(rows["dcid"]["icm_mean"]) == pytest.approx(np.mean(vals), abs=1e-12)
    assert float(rows["dcid"]["icm_std"]) == pytest.approx(np.std(vals), abs=1e-12)
