"""Multi-task baseline: one shared trunk, two linear heads, head-weight feature selection."""
from dataclasses import dataclass, field, replace

import numpy as np

from dcid.errors import SelectionError
from dcid.nets import Predictor, fit_predictor


@dataclass
class MtlModel:
    """A two-output network whose head columns are the task heads ``G1`` and ``G2``."""

    net: Predictor
    trace: dict = field(default_factory=dict)

    @property
    def G1(self):
        return self.net.head_weights[:, 0]

    @property
    def G2(self):
        return self.net.head_weights[:, 1]

    def features(self, x):
        return self.net.features(x)

    def predict(self, x):
        return self.net.forward(x)

    def to_dict(self):
        return {"net": self.net.to_dict(), "trace": self.trace}

    @classmethod
    def from_dict(cls, d):
        return cls(Predictor.from_dict(d["net"]), d.get("trace", {}))


def train_mtl(dataset, spec, train_cfg):
    """Fit the shared trunk and both heads on the training split.

    The objective is the sum of the two tasks' mean squared errors.
    """
    tr = dataset.part("train")
    va = dataset.part("val")
    y = np.column_stack([tr["y1"], tr["y2"]])
    y_val = np.column_stack([va["y1"], va["y2"]])
    net, trace = fit_predictor(tr["x"], y, replace(spec, output_dim=2), train_cfg, va["x"], y_val)
    return MtlModel(net, trace.to_dict())


def select_shared_features(model_or_heads, t_mtl=0.5):
    """Feature indices whose normalised weight is at least ``t_mtl`` in both heads.

    Accepts an :class:`MtlModel` or a pair of head weight vectors.
    """
    if isinstance(model_or_heads, MtlModel):
        g1, g2 = model_or_heads.G1, model_or_heads.G2
    else:
        g1, g2 = model_or_heads
    if not 0 <= t_mtl <= 1:
        raise SelectionError(f"t_mtl must lie in [0, 1], got {t_mtl!r}")
    g1 = np.abs(np.asarray(g1, dtype=float))
    g2 = np.abs(np.asarray(g2, dtype=float))
    if g1.shape != g2.shape:
        raise SelectionError("head weight vectors differ in length")
    if g1.max(initial=0.0) == 0.0 or g2.max(initial=0.0) == 0.0:
        raise SelectionError("a head has all-zero weights; normalised selection is undefined")
    keep = (g1 / g1.max() >= t_mtl) & (g2 / g2.max() >= t_mtl)
    return np.flatnonzero(keep)


def mtl_shared_estimate(model, x, t_mtl=0.5):
    """Trunk features restricted to the selected shared columns."""
    return model.features(x)[:, select_shared_features(model, t_mtl)]
