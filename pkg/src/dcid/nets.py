"""Numpy multilayer perceptron split into a feature extractor and an affine head.

A network maps ``x`` through ``len(hidden_widths)`` hidden layers and one
feature layer of width ``feature_dim`` (the representation ``f``) and then
through an affine head ``g`` with ``output_dim`` outputs. Training minimises
the per-row squared error summed over outputs, on internally z-scored
targets, with hand-written backpropagation.
"""
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from dcid.errors import ConfigError, TrainingDivergedError
from dcid.regression import as_matrix

SCHEMA_VERSION = 1
ACTIVATIONS = ("relu", "tanh", "linear")
OPTIMIZERS = ("adam", "sgd")


def _act(name, h):
    if name == "relu":
        return np.maximum(h, 0.0)
    if name == "tanh":
        return np.tanh(h)
    return h


def _act_grad(name, h, a):
    """Derivative of the activation given pre-activation ``h`` and output ``a``."""
    if name == "relu":
        return (h > 0).astype(float)
    if name == "tanh":
        return 1.0 - a * a
    return np.ones_like(h)


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    feature_dim: int = 16
    hidden_widths: tuple = (64, 64)
    activation: str = "relu"
    # activation of the feature layer; None reuses ``activation``
    feature_activation: str = None
    output_dim: int = 1
    seed: int = 0

    def __post_init__(self):
        widths = tuple(int(w) for w in self.hidden_widths)
        object.__setattr__(self, "hidden_widths", widths)
        if self.input_dim < 1 or self.feature_dim < 1 or self.output_dim < 1:
            raise ConfigError("input_dim, feature_dim and output_dim must be positive")
        if not widths or min(widths) < 1:
            raise ConfigError(f"hidden_widths must be a non-empty list of positive widths, got {widths}")
        if self.activation not in ACTIVATIONS[:2]:
            raise ConfigError(f"activation must be relu or tanh, got {self.activation!r}")
        if self.feature_activation is not None and self.feature_activation not in ACTIVATIONS:
            raise ConfigError(f"feature_activation must be one of {ACTIVATIONS}")
        if not (0 <= int(self.seed) < 2**64):
            raise ConfigError("seed must be an unsigned 64-bit integer")

    @property
    def layer_activations(self):
        feat = self.feature_activation or self.activation
        return (self.activation,) * len(self.hidden_widths) + (feat,)

    @property
    def layer_sizes(self):
        return (self.input_dim,) + self.hidden_widths + (self.feature_dim,)

    def to_dict(self):
        return {
            "input_dim": self.input_dim,
            "feature_dim": self.feature_dim,
            "hidden_widths": list(self.hidden_widths),
            "activation": self.activation,
            "feature_activation": self.feature_activation,
            "output_dim": self.output_dim,
            "seed": int(self.seed),
        }


@dataclass(frozen=True)
class TrainConfig:
    """Mini-batch optimisation settings.

    ``weight_decay`` is decoupled (applied to the parameters directly, as in
    AdamW). ``input_group_lasso`` applies a proximal shrinkage to each
    input's outgoing weight row after every step, which switches off
    inputs the target does not need.
    """

    learning_rate: float = 1e-4
    batch_size: int = 128
    epochs: int = 30
    optimizer: str = "adam"
    shuffle_seed: int = 0
    weight_decay: float = 0.0
    input_group_lasso: float = 0.0

    def __post_init__(self):
        if self.learning_rate < 0 or not math.isfinite(self.learning_rate):
            raise ConfigError("learning_rate must be a finite non-negative number")
        if self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("batch_size must be positive and epochs non-negative")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}")
        if self.weight_decay < 0 or self.input_group_lasso < 0:
            raise ConfigError("regularisation strengths must be non-negative")

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class Predictor:
    """Trained or freshly initialised network ``h = g o f``.

    ``layers`` holds ``(weights, bias)`` per representation layer with
    weights shaped (fan_in, fan_out); ``head_weights`` is (feature_dim,
    output_dim).
    """

    spec: MlpSpec
    layers: list
    head_weights: np.ndarray
    head_bias: np.ndarray

    @property
    def G(self):
        """Head weights; a vector for single-output networks."""
        return self.head_weights[:, 0] if self.spec.output_dim == 1 else self.head_weights

    def copy(self):
        return Predictor(
            self.spec,
            [(w.copy(), b.copy()) for w, b in self.layers],
            self.head_weights.copy(),
            self.head_bias.copy(),
        )

    def _check_input(self, x):
        x = as_matrix(x, "x")
        if x.shape[1] != self.spec.input_dim:
            raise ValueError(f"x has {x.shape[1]} columns, network expects {self.spec.input_dim}")
        return x

    def features(self, x):
        """Representation ``f(x)``: the feature-layer activations."""
        a = self._check_input(x)
        for (w, b), act in zip(self.layers, self.spec.layer_activations):
            a = _act(act, a @ w + b)
        return a

    def head(self, feats):
        return feats @ self.head_weights + self.head_bias

    def forward(self, x):
        out = self.head(self.features(x))
        return out[:, 0] if self.spec.output_dim == 1 else out

    def parameters(self):
        """Flat list of parameter arrays (views, not copies)."""
        out = []
        for w, b in self.layers:
            out += [w, b]
        return out + [self.head_weights, self.head_bias]

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "spec": self.spec.to_dict(),
            "layers": [{"weights": w.tolist(), "bias": b.tolist()} for w, b in self.layers],
            "head_weights": self.head_weights.tolist(),
            "head_bias": self.head_bias.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported network schema version {d.get('schema_version')!r}")
        s = dict(d["spec"])
        s["hidden_widths"] = tuple(s["hidden_widths"])
        spec = MlpSpec(**s)
        sizes = spec.layer_sizes
        layers = [
            (np.asarray(l["weights"], float).reshape(sizes[i], sizes[i + 1]), np.asarray(l["bias"], float))
            for i, l in enumerate(d["layers"])
        ]
        hw = np.asarray(d["head_weights"], float).reshape(spec.feature_dim, spec.output_dim)
        return cls(spec, layers, hw, np.asarray(d["head_bias"], float))

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def init(spec):
    """Seeded fan-in uniform weights in (-1/sqrt(fan_in), 1/sqrt(fan_in)), zero biases."""
    rng = np.random.default_rng(int(spec.seed))
    sizes = spec.layer_sizes + (spec.output_dim,)
    mats = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        mats.append((rng.uniform(-bound, bound, (fan_in, fan_out)), np.zeros(fan_out)))
    head_w, head_b = mats.pop()
    return Predictor(spec, mats, head_w, head_b)


def loss_and_grads(pred, x, y):
    """Mean over rows of the summed squared error, and its gradient.

    Gradients come back in the order of :meth:`Predictor.parameters`.
    """
    x = as_matrix(x, "x")
    y = as_matrix(y, "y")
    pre, post = [], [x]
    a = x
    for (w, b), act in zip(pred.layers, pred.spec.layer_activations):
        h = a @ w + b
        a = _act(act, h)
        pre.append(h)
        post.append(a)
    out = pred.head(a)
    resid = out - y
    n = x.shape[0]
    loss = float(np.sum(resid * resid) / n)

    d_out = 2.0 * resid / n
    g_head_w = a.T @ d_out
    g_head_b = d_out.sum(axis=0)
    delta = d_out @ pred.head_weights.T
    grads = []
    for i in range(len(pred.layers) - 1, -1, -1):
        act = pred.spec.layer_activations[i]
        delta = delta * _act_grad(act, pre[i], post[i + 1])
        grads.append((post[i].T @ delta, delta.sum(axis=0)))
        if i:
            delta = delta @ pred.layers[i][0].T
    flat = []
    for gw, gb in reversed(grads):
        flat += [gw, gb]
    return loss, flat + [g_head_w, g_head_b]


def finite_difference_grads(pred, x, y, step=1e-5):
    """Central-difference gradient of :func:`loss_and_grads`'s loss, entry by entry."""
    probe = pred.copy()
    out = []
    for p in probe.parameters():
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + step
            up = loss_and_grads(probe, x, y)[0]
            p[idx] = orig - step
            down = loss_and_grads(probe, x, y)[0]
            p[idx] = orig
            g[idx] = (up - down) / (2 * step)
        out.append(g)
    return out


def gradient_check(pred, x, y, step=1e-5):
    """Largest relative error per parameter tensor between backprop and finite differences."""
    _, analytic = loss_and_grads(pred, x, y)
    numeric = finite_difference_grads(pred, x, y, step)
    errs = []
    for ga, gn in zip(analytic, numeric):
        scale = max(np.max(np.abs(ga)), np.max(np.abs(gn)), 1e-12)
        errs.append(float(np.max(np.abs(ga - gn)) / scale))
    return errs


@dataclass
class TrainTrace:
    """Training-set loss (z-scored units) before training and after every epoch."""

    initial_loss: float
    epoch_losses: list = field(default_factory=list)
    val_losses: list = field(default_factory=list)
    per_output_losses: list = field(default_factory=list)

    def to_dict(self):
        return dict(self.__dict__)


def _per_output_mse(pred, x, ys):
    resid = pred.head(pred.features(x)) - ys
    return np.mean(resid * resid, axis=0)


def train(pred, x, y, cfg, x_val=None, y_val=None):
    """Fit ``pred`` to ``(x, y)``; returns a new predictor and a :class:`TrainTrace`.

    Targets are z-scored per column for optimisation and the head is
    mapped back afterwards, so the returned network predicts in the
    original units and ``forward == head(features)`` exactly.
    """
    x = pred._check_input(x)
    y = as_matrix(y, "y")
    if y.shape != (x.shape[0], pred.spec.output_dim):
        raise ValueError(f"y must have shape ({x.shape[0]}, {pred.spec.output_dim}), got {y.shape}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("training data must be finite")
    y_mean = y.mean(axis=0)
    y_std = y.std(axis=0)
    y_std = np.where(y_std > 0, y_std, 1.0)
    ys = (y - y_mean) / y_std

    net = pred.copy()
    net.head_weights /= y_std
    net.head_bias = (net.head_bias - y_mean) / y_std
    val = None
    if x_val is not None:
        val = (net._check_input(x_val), (as_matrix(y_val, "y_val") - y_mean) / y_std)

    def record(trace, epoch):
        per = _per_output_mse(net, x, ys)
        loss = float(per.sum())
        if not math.isfinite(loss):
            raise TrainingDivergedError(epoch, loss)
        if epoch:
            trace.epoch_losses.append(loss)
            trace.per_output_losses.append(per.tolist())
        if val is not None:
            trace.val_losses.append(float(_per_output_mse(net, *val).sum()))
        return loss

    trace = TrainTrace(initial_loss=float("nan"))
    trace.initial_loss = record(trace, 0)

    params = net.parameters()
    lr = cfg.learning_rate
    first_w = net.layers[0][0]
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    rng = np.random.default_rng(int(cfg.shuffle_seed))
    n = x.shape[0]
    step = 0
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            rows = perm[start : start + cfg.batch_size]
            loss, grads = loss_and_grads(net, x[rows], ys[rows])
            if not math.isfinite(loss):
                raise TrainingDivergedError(epoch, loss)
            step += 1
            if lr == 0.0:
                continue
            if cfg.weight_decay:
                for p in params:
                    p *= 1.0 - lr * cfg.weight_decay
            if cfg.optimizer == "adam":
                c1 = 1.0 - beta1**step
                c2 = 1.0 - beta2**step
                for p, g, mi, vi in zip(params, grads, m, v):
                    mi *= beta1
                    mi += (1.0 - beta1) * g
                    vi *= beta2
                    vi += (1.0 - beta2) * g * g
                    p -= lr * (mi / c1) / (np.sqrt(vi / c2) + eps)
            else:
                for p, g in zip(params, grads):
                    p -= lr * g
            if cfg.input_group_lasso:
                norms = np.linalg.norm(first_w, axis=1, keepdims=True)
                first_w *= np.maximum(0.0, 1.0 - lr * cfg.input_group_lasso / np.maximum(norms, 1e-12))
        record(trace, epoch)

    net.head_weights *= y_std
    net.head_bias = net.head_bias * y_std + y_mean
    return net, trace


def fit_predictor(x, y, spec, cfg, x_val=None, y_val=None):
    """Initialise from ``spec`` and train in one call."""
    spec = replace(spec, input_dim=as_matrix(x).shape[1])
    return train(init(spec), x, y, cfg, x_val, y_val)
