import numpy as np
import pytest

from dcid.errors import ConfigError, EmptyEstimateError
from dcid.icm import score_icm
from dcid.nets import TrainConfig
from dcid.pipeline import (
    DcidConfig,
    FeatureScaler,
    SharedEstimate,
    estimate_from_predictors,
    fit_dcid,
    fit_linear_predictor,
    predict_shared,
    surrogate_psi1,
    train_representations,
)
from dcid.scenario import ScenarioConfig, generate

LINEAR = DcidConfig(representation="linear")


@pytest.fixture(scope="module")
def unit():
    ds = generate(ScenarioConfig(seed=0))
    return ds, fit_dcid(ds, LINEAR)


def test_linear_representation_recovers_z(unit):
    ds, est = unit
    assert est.n_selected >= 1
    assert score_icm(predict_shared(est, ds.part("test")["x"]), ds).icm >= 0.9


def test_no_shared_signal_gives_empty_estimate():
    ds = generate(ScenarioConfig(seed=0, tau=1e-6))
    est = fit_dcid(ds, LINEAR)
    assert est.n_selected == 0
    with pytest.raises(EmptyEstimateError, match="threshold"):
        predict_shared(est, ds.x[:3])
    with pytest.raises(EmptyEstimateError):
        est.one_sided(ds.x[:3])


def test_selection_counts_correlations_above_threshold(unit):
    _, est = unit
    corr = est.cca.correlations
    assert est.n_selected == int(np.sum(corr > est.threshold))
    np.testing.assert_array_equal(est.correlations, corr[: est.n_selected])


def test_shared_estimate_averages_both_views(unit):
    ds, est = unit
    x = ds.part("train")["x"]
    c1, c2 = est.cca.transform(*est.view_features(x))
    n = est.n_selected
    np.testing.assert_allclose(predict_shared(est, x), 0.5 * (c1[:, :n] + c2[:, :n]), atol=1e-12)


def test_single_and_repeated_rows(unit):
    ds, est = unit
    full = predict_shared(est, ds.x[:10])
    np.testing.assert_allclose(predict_shared(est, ds.x[4:5]), full[4:5], atol=1e-12)
    twin = predict_shared(est, np.vstack([ds.x[0], ds.x[0]]))
    np.testing.assert_array_equal(twin[0], twin[1])


def test_threshold_monotone():
    ds = generate(ScenarioConfig(seed=3, dim_shared=2, dim_indiv=2, dim_obs=16))
    p1, p2, _ = train_representations(ds, LINEAR)
    x = ds.part("train")["x"]
    counts = [estimate_from_predictors(p1, p2, x, t).n_selected for t in (0.0, 0.3, 0.5, 0.7, 0.9, 0.99)]
    assert counts == sorted(counts, reverse=True)


def test_beats_raw_features(unit):
    ds, est = unit
    test_x = ds.part("test")["x"]
    dcid = score_icm(predict_shared(est, test_x), ds).icm
    assert dcid >= score_icm(est.predictor_1.features(test_x), ds).icm
    assert dcid >= score_icm(est.predictor_2.features(test_x), ds).icm


def test_linear_predictor_ranks_axes_by_target():
    rng = np.random.default_rng(0)
    # the largest-variance axis is irrelevant to y
    x = rng.standard_normal((3000, 3)) * np.array([10.0, 1.0, 0.5])
    y = x[:, 2]
    pred = fit_linear_predictor(x, y, 1)
    # sample principal axes sit within sampling error of the coordinate axes
    assert abs(pred.axes[2, 0]) == pytest.approx(1.0, abs=1e-3)
    assert np.mean((pred.forward(x) - y) ** 2) < 1e-3 * y.var()
    with pytest.raises(ConfigError):
        fit_linear_predictor(x, y, 4)


def test_feature_scaler_whitens_and_drops_null_directions():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((1000, 2))
    b = np.hstack([a, a[:, :1] + a[:, 1:]]) + 5.0
    s = FeatureScaler.fit(b, 1e-10)
    assert s.rank == 2
    w = s(b)
    np.testing.assert_allclose(w.T @ w / len(w), np.eye(2), atol=1e-9)
    with pytest.raises(EmptyEstimateError):
        FeatureScaler.fit(np.ones((10, 3)), 1e-10)


@pytest.mark.parametrize("kappa,lo,hi", [(1.0, 0.75, 1.25), (0.25, 0.15, 0.35)])
def test_surrogate_r2_ratio_tracks_kappa(kappa, lo, hi):
    ds = generate(ScenarioConfig(seed=0, kappa=kappa))
    res = surrogate_psi1(fit_dcid(ds, LINEAR), ds)
    assert lo <= res.r2_y1 / res.r2_y2 <= hi
    assert res.psi1_hat.shape == (ds.split_counts()["test"],)


def test_surrogate_correlates_more_with_other_target():
    ds = generate(ScenarioConfig(seed=0, tau=0.5))
    res = surrogate_psi1(fit_dcid(ds, LINEAR), ds)
    te = ds.part("test")
    assert abs(np.corrcoef(res.psi1_hat, te["y2"])[0, 1]) > abs(np.corrcoef(te["y1"], te["y2"])[0, 1])


def test_json_round_trip(unit):
    ds, est = unit
    back = SharedEstimate.from_json(est.to_json())
    assert back.n_selected == est.n_selected
    np.testing.assert_array_equal(predict_shared(back, ds.x[:50]), predict_shared(est, ds.x[:50]))


def test_config_round_trip_and_validation():
    cfg = DcidConfig(threshold=0.3, seed=4)
    assert DcidConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError):
        DcidConfig(threshold=1.0)
    with pytest.raises(ConfigError):
        DcidConfig(representation="kernel")


def test_mlp_needs_enough_training_rows():
    ds = generate(ScenarioConfig(n_samples=150, dim_obs=8))
    with pytest.raises(ConfigError, match="training split"):
        fit_dcid(ds)


def test_mlp_fit_deterministic():
    ds = generate(ScenarioConfig(n_samples=2000, seed=2))
    cfg = DcidConfig(seed=5, train=TrainConfig(learning_rate=1e-3, epochs=2, weight_decay=1.0))
    a, b = fit_dcid(ds, cfg), fit_dcid(ds, cfg)
    np.testing.assert_array_equal(a.cca.correlations, b.cca.correlations)
    assert a.traces["y1"]["epoch_losses"] == b.traces["y1"]["epoch_losses"]
