"""Shared-signal recovery from two per-target regressors and CCA.

Each target gets its own regressor ``h_i = g_i o f_i`` trained on the
observations. CCA between the two feature spaces ``f_1(x)`` and ``f_2(x)``
then finds directions both regressors rely on; the components whose
canonical correlation exceeds a threshold are averaged across the two
views into the shared estimate.
"""
import json
from dataclasses import dataclass, field, replace

import numpy as np

from dcid.cca import CcaModel, count_above, fit_cca
from dcid.errors import ConfigError, EmptyEstimateError
from dcid.linalg import jacobi_eigh
from dcid.nets import MlpSpec, Predictor, TrainConfig, fit_predictor
from dcid.regression import as_matrix, fit_ols, r_squared

SCHEMA_VERSION = 1
REPRESENTATIONS = ("mlp", "linear")


def default_net():
    return MlpSpec(input_dim=1, feature_dim=16, hidden_widths=(64, 64), activation="tanh", feature_activation="linear")


def default_train():
    return TrainConfig(learning_rate=1e-3, batch_size=128, epochs=30, weight_decay=1.0, input_group_lasso=1.0)


@dataclass(frozen=True)
class DcidConfig:
    """Settings for :func:`fit_dcid`.

    ``linear_dim`` is the number of principal axes kept by the linear
    representation; ``None`` uses the scenario's shared plus individual
    latent dimension. Feature directions whose training variance is below
    ``feature_rel_tol`` times the largest one are dropped before CCA.
    """

    threshold: float = 0.5
    representation: str = "mlp"
    net: MlpSpec = field(default_factory=default_net)
    train: TrainConfig = field(default_factory=default_train)
    linear_dim: int = None
    feature_rel_tol: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if not (0 <= self.threshold < 1):
            raise ConfigError(f"threshold must lie in [0, 1), got {self.threshold!r}")
        if self.representation not in REPRESENTATIONS:
            raise ConfigError(f"representation must be one of {REPRESENTATIONS}")
        if self.linear_dim is not None and self.linear_dim < 1:
            raise ConfigError("linear_dim must be positive")

    def to_dict(self):
        return {
            "threshold": self.threshold,
            "representation": self.representation,
            "net": self.net.to_dict(),
            "train": self.train.to_dict(),
            "linear_dim": self.linear_dim,
            "feature_rel_tol": self.feature_rel_tol,
            "seed": int(self.seed),
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "net" in d:
            net = dict(d["net"])
            net.setdefault("input_dim", 1)
            if "hidden_widths" in net:
                net["hidden_widths"] = tuple(net["hidden_widths"])
            d["net"] = MlpSpec(**net)
        if "train" in d:
            d["train"] = TrainConfig(**d["train"])
        return cls(**d)


@dataclass
class LinearPredictor:
    """Projection of centred ``x`` onto selected principal axes, with an OLS head."""

    mean: np.ndarray
    axes: np.ndarray  # (l, k)
    head_weights: np.ndarray  # (k, 1)
    head_bias: np.ndarray

    def features(self, x):
        return (as_matrix(x, "x") - self.mean) @ self.axes

    def forward(self, x):
        return (self.features(x) @ self.head_weights + self.head_bias)[:, 0]

    @property
    def G(self):
        return self.head_weights[:, 0]

    def to_dict(self):
        return {
            "kind": "linear",
            "mean": self.mean.tolist(),
            "axes": self.axes.tolist(),
            "head_weights": self.head_weights.tolist(),
            "head_bias": self.head_bias.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        axes = np.asarray(d["axes"], float).reshape(len(d["mean"]), -1)
        return cls(
            np.asarray(d["mean"], float),
            axes,
            np.asarray(d["head_weights"], float).reshape(axes.shape[1], 1),
            np.asarray(d["head_bias"], float),
        )


def fit_linear_predictor(x, y, k):
    """Supervised principal-component regression.

    The principal axes of ``x`` are ranked by the share of ``y``'s variance
    each one explains on its own; the top ``k`` form the representation and
    an OLS fit on them forms the head.
    """
    x = as_matrix(x, "x")
    y = as_matrix(y, "y")
    if k > x.shape[1]:
        raise ConfigError(f"linear representation asks for {k} axes but x has {x.shape[1]} columns")
    mean = x.mean(axis=0)
    xc = x - mean
    _, axes = jacobi_eigh(xc.T @ xc / x.shape[0])
    proj = xc @ axes
    yc = y[:, 0] - y[:, 0].mean()
    power = np.sum(proj * proj, axis=0) * (yc @ yc)
    explained = np.divide((proj.T @ yc) ** 2, power, out=np.zeros(axes.shape[1]), where=power > 0)
    keep = np.argsort(-explained, kind="stable")[:k]
    axes = axes[:, keep]
    head = fit_ols(xc @ axes, y)
    return LinearPredictor(mean, axes, head.weights, head.intercept)


def predictor_from_dict(d):
    if d.get("kind") == "linear":
        return LinearPredictor.from_dict(d)
    return Predictor.from_dict(d)


@dataclass(frozen=True)
class FeatureScaler:
    """Whitens a feature matrix with training statistics.

    Features are centred and rotated onto their principal axes; axes whose
    variance is below ``rel_tol`` times the largest are dropped and the rest
    scaled to unit variance. Learned features are often close to low rank
    with weak but informative trailing directions, and whitening keeps
    those directions visible to CCA.
    """

    mean: np.ndarray
    rotation: np.ndarray  # (k, r)

    def __call__(self, b):
        return (b - self.mean) @ self.rotation

    @property
    def rank(self):
        return self.rotation.shape[1]

    @classmethod
    def fit(cls, b, rel_tol):
        mean = b.mean(axis=0)
        bc = b - mean
        w, v = jacobi_eigh(bc.T @ bc / b.shape[0])
        top = w[-1] if w.size else 0.0
        if top <= 0.0:
            raise EmptyEstimateError("every feature column is constant on the training rows")
        keep = np.flatnonzero(w > rel_tol * top)[::-1]
        return cls(mean, v[:, keep] / np.sqrt(w[keep]))

    def to_dict(self):
        return {"mean": self.mean.tolist(), "rotation": self.rotation.tolist()}

    @classmethod
    def from_dict(cls, d):
        mean = np.asarray(d["mean"], float)
        return cls(mean, np.asarray(d["rotation"], float).reshape(mean.size, -1))


@dataclass
class SharedEstimate:
    """The fitted prediction function for the shared signal plus what built it."""

    n_selected: int
    projection_1: np.ndarray  # (k1, n)
    projection_2: np.ndarray  # (k2, n)
    predictor_1: object
    predictor_2: object
    correlations: np.ndarray  # selected, length n
    cca: CcaModel
    scaler_1: FeatureScaler
    scaler_2: FeatureScaler
    threshold: float
    config: dict = field(default_factory=dict)
    traces: dict = field(default_factory=dict)

    def view_features(self, x):
        """Scaled feature matrices of both regressors, ready for the CCA projections."""
        return self.scaler_1(self.predictor_1.features(x)), self.scaler_2(self.predictor_2.features(x))

    def one_sided(self, x):
        """Shared components computed from the first regressor's features only."""
        self._require_components()
        b1 = self.scaler_1(self.predictor_1.features(x))
        return (b1 - self.cca.means_1) @ self.projection_1

    def _require_components(self):
        if self.n_selected == 0:
            raise EmptyEstimateError(
                "no canonical correlation exceeds the threshold; the shared estimate is empty "
                "(score it as zero or lower the threshold)"
            )

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "n_selected": self.n_selected,
            "threshold": self.threshold,
            "correlations": self.correlations.tolist(),
            "cca": self.cca.to_dict(),
            "scaler_1": self.scaler_1.to_dict(),
            "scaler_2": self.scaler_2.to_dict(),
            "predictor_1": self.predictor_1.to_dict(),
            "predictor_2": self.predictor_2.to_dict(),
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported estimate schema version {d.get('schema_version')!r}")
        cca = CcaModel.from_dict(d["cca"])
        n = int(d["n_selected"])
        return cls(
            n_selected=n,
            projection_1=cca.u[:, :n],
            projection_2=cca.v[:, :n],
            predictor_1=predictor_from_dict(d["predictor_1"]),
            predictor_2=predictor_from_dict(d["predictor_2"]),
            correlations=np.asarray(d["correlations"], float),
            cca=cca,
            scaler_1=FeatureScaler.from_dict(d["scaler_1"]),
            scaler_2=FeatureScaler.from_dict(d["scaler_2"]),
            threshold=float(d["threshold"]),
            config=d.get("config", {}),
        )

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _net_seeds(seed):
    # (init seed, shuffle seed) for each of the two regressors
    s = np.random.SeedSequence(int(seed)).generate_state(4, dtype=np.uint64)
    return [(int(s[0]), int(s[1])), (int(s[2]), int(s[3]))]


def train_representations(dataset, cfg):
    """The two per-target regressors, fitted on the training split."""
    tr = dataset.part("train")
    if cfg.representation == "linear":
        scen = dataset.config
        k = cfg.linear_dim or scen.dim_shared + scen.dim_indiv
        return fit_linear_predictor(tr["x"], tr["y1"], k), fit_linear_predictor(tr["x"], tr["y2"], k), {}

    k = cfg.net.feature_dim
    if tr["x"].shape[0] < 10 * k:
        raise ConfigError(f"training split has {tr['x'].shape[0]} rows; need at least {10 * k} for k={k}")
    va = dataset.part("val")
    out, traces = [], {}
    for i, (init_seed, shuffle_seed) in enumerate(_net_seeds(cfg.seed), start=1):
        spec = replace(cfg.net, seed=init_seed, output_dim=1)
        tc = replace(cfg.train, shuffle_seed=shuffle_seed)
        pred, trace = fit_predictor(tr["x"], tr[f"y{i}"], spec, tc, va["x"], va[f"y{i}"])
        out.append(pred)
        traces[f"y{i}"] = trace.to_dict()
    return out[0], out[1], traces


def estimate_from_predictors(pred_1, pred_2, x_train, threshold=0.5, feature_rel_tol=1e-10):
    """CCA on the two regressors' training features and threshold selection."""
    b1 = pred_1.features(x_train)
    b2 = pred_2.features(x_train)
    s1 = FeatureScaler.fit(b1, feature_rel_tol)
    s2 = FeatureScaler.fit(b2, feature_rel_tol)
    model = fit_cca(s1(b1), s2(b2))
    n = count_above(model.correlations, threshold)
    return SharedEstimate(
        n_selected=n,
        projection_1=model.u[:, :n],
        projection_2=model.v[:, :n],
        predictor_1=pred_1,
        predictor_2=pred_2,
        correlations=model.correlations[:n].copy(),
        cca=model,
        scaler_1=s1,
        scaler_2=s2,
        threshold=threshold,
    )


def fit_dcid(dataset, cfg=None):
    """Train both regressors, run CCA on their features, keep correlations above the threshold.

    An estimate with ``n_selected == 0`` is a valid outcome.
    """
    cfg = cfg or DcidConfig()
    pred_1, pred_2, traces = train_representations(dataset, cfg)
    est = estimate_from_predictors(
        pred_1, pred_2, dataset.part("train")["x"], cfg.threshold, cfg.feature_rel_tol
    )
    est.config = cfg.to_dict()
    est.traces = traces
    return est


def predict_shared(est, x):
    """``0.5 * (c1 + c2)`` over the selected canonical components of new rows."""
    est._require_components()
    b1, b2 = est.view_features(x)
    c1 = (b1 - est.cca.means_1) @ est.projection_1
    c2 = (b2 - est.cca.means_2) @ est.projection_2
    return 0.5 * (c1 + c2)


@dataclass(frozen=True)
class SurrogateResult:
    psi1_hat: np.ndarray  # one value per test row
    r2_y1: float
    r2_y2: float


def surrogate_psi1(est, dataset, **probe):
    """Shared part of ``y1`` rebuilt from the first regressor's features alone.

    The one-sided shared components are fitted to ``y1`` by OLS on training
    rows; the fit's test-row predictions are the surrogate. ``r2_y1`` and
    ``r2_y2`` measure how much of each target the one-sided components
    explain on the test rows.
    """
    tr = dataset.part("train")
    te = dataset.part("test")
    e_train = est.one_sided(tr["x"])
    e_test = est.one_sided(te["x"])
    readout = fit_ols(e_train, tr["y1"])
    psi1_hat = readout.predict(e_test)[:, 0]
    return SurrogateResult(
        psi1_hat=psi1_hat,
        r2_y1=r_squared(e_test, te["y1"], **probe),
        r2_y2=r_squared(e_test, te["y2"], **probe),
    )
