import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dcid.errors import SelectionError
from dcid.mtl import MtlModel, mtl_shared_estimate, select_shared_features, train_mtl
from dcid.nets import MlpSpec, TrainConfig
from dcid.scenario import ScenarioConfig, generate

SMALL_NET = MlpSpec(input_dim=1, feature_dim=8, hidden_widths=(16,), activation="tanh", feature_activation="linear")


def test_selection_examples():
    g1 = np.array([1.0, 0.6, 0.2, 0.5])
    g2 = np.array([0.1, 2.0, 1.5, -1.0])
    # normalised: g1 -> [1, .6, .2, .5], g2 -> [.05, 1, .75, .5]; threshold is inclusive
    np.testing.assert_array_equal(select_shared_features((g1, g2), 0.5), [1, 3])
    np.testing.assert_array_equal(select_shared_features((g1, g2), 0.0), [0, 1, 2, 3])
    np.testing.assert_array_equal(select_shared_features((g1, g2), 1.0), [])


def test_selection_errors():
    with pytest.raises(SelectionError, match="all-zero"):
        select_shared_features((np.zeros(3), np.ones(3)))
    with pytest.raises(SelectionError):
        select_shared_features((np.ones(3), np.ones(2)))
    with pytest.raises(SelectionError):
        select_shared_features((np.ones(3), np.ones(3)), 1.5)


@settings(max_examples=50, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    scale=st.floats(1e-3, 1e3),
    t=st.floats(0.0, 1.0),
)
def test_selection_ignores_head_scale_and_sign(seed, scale, t):
    rng = np.random.default_rng(seed)
    g1, g2 = rng.standard_normal((2, 10))
    a = select_shared_features((g1, g2), t)
    b = select_shared_features((-scale * g1, scale * g2), t)
    np.testing.assert_array_equal(a, b)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), t1=st.floats(0.0, 1.0), t2=st.floats(0.0, 1.0))
def test_selection_shrinks_as_threshold_rises(seed, t1, t2):
    lo, hi = sorted((t1, t2))
    g1, g2 = np.random.default_rng(seed).standard_normal((2, 10))
    assert set(select_shared_features((g1, g2), hi)) <= set(select_shared_features((g1, g2), lo))


@pytest.fixture(scope="module")
def trained():
    ds = generate(ScenarioConfig(n_samples=3000, seed=1))
    model = train_mtl(ds, SMALL_NET, TrainConfig(learning_rate=3e-3, epochs=5))
    return ds, model


def test_training_reduces_loss(trained):
    _, model = trained
    assert model.trace["epoch_losses"][-1] < model.trace["initial_loss"]
    assert model.net.spec.output_dim == 2


def test_estimate_keeps_selected_columns(trained):
    ds, model = trained
    x = ds.part("test")["x"]
    idx = select_shared_features(model)
    np.testing.assert_array_equal(mtl_shared_estimate(model, x), model.features(x)[:, idx])


def test_identical_targets_give_matching_heads():
    # with no individual signal the targets agree up to sign, so must the heads' outputs
    ds = generate(ScenarioConfig(n_samples=3000, seed=2, tau=1e6))
    model = train_mtl(ds, SMALL_NET, TrainConfig(learning_rate=3e-3, epochs=20, weight_decay=1.0))
    f = model.features(ds.part("test")["x"])
    assert abs(np.corrcoef(f @ model.G1, f @ model.G2)[0, 1]) > 0.99
    assert abs(np.corrcoef(model.G1, model.G2)[0, 1]) > 0.9


def test_zero_epochs_keeps_initialisation():
    ds = generate(ScenarioConfig(n_samples=1000, seed=2))
    model = train_mtl(ds, SMALL_NET, TrainConfig(epochs=0))
    assert model.trace["epoch_losses"] == []


def test_round_trip(trained):
    ds, model = trained
    back = MtlModel.from_dict(model.to_dict())
    np.testing.assert_array_equal(back.predict(ds.x[:20]), model.predict(ds.x[:20]))
