"""Linear canonical correlation analysis by whitening and SVD."""
import json
from dataclasses import dataclass

import numpy as np

from dcid.errors import SampleSizeError
from dcid.linalg import jacobi_eigh, jacobi_svd
from dcid.regression import as_matrix

SCHEMA_VERSION = 1
WHITEN_RIDGE = 1e-6
# covariances with eigenvalue ratio below this get the whitening ridge
_RCOND = 1e-12


@dataclass(frozen=True)
class CcaModel:
    u: np.ndarray  # (p, d)
    v: np.ndarray  # (q, d)
    correlations: np.ndarray  # (d,), descending
    means_1: np.ndarray
    means_2: np.ndarray

    @property
    def n_components(self):
        return self.correlations.shape[0]

    def transform(self, b1, b2):
        """Canonical components ``(c1, c2)`` of new rows."""
        b1 = as_matrix(b1, "b1")
        b2 = as_matrix(b2, "b2")
        if b1.shape[1] != self.u.shape[0] or b2.shape[1] != self.v.shape[0]:
            raise ValueError(
                f"views have {b1.shape[1]} and {b2.shape[1]} columns, "
                f"model expects {self.u.shape[0]} and {self.v.shape[0]}"
            )
        if b1.shape[0] != b2.shape[0]:
            raise ValueError("views must have the same number of rows")
        return (b1 - self.means_1) @ self.u, (b2 - self.means_2) @ self.v

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "u": self.u.tolist(),
            "v": self.v.tolist(),
            "correlations": self.correlations.tolist(),
            "means_1": self.means_1.tolist(),
            "means_2": self.means_2.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported CCA schema version {d.get('schema_version')!r}")
        p = len(d["means_1"])
        q = len(d["means_2"])
        k = len(d["correlations"])
        return cls(
            u=np.asarray(d["u"], dtype=float).reshape(p, k),
            v=np.asarray(d["v"], dtype=float).reshape(q, k),
            correlations=np.asarray(d["correlations"], dtype=float),
            means_1=np.asarray(d["means_1"], dtype=float),
            means_2=np.asarray(d["means_2"], dtype=float),
        )

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _whitener(bc):
    """Inverse square root of the view covariance.

    A ridge of ``WHITEN_RIDGE * trace / dim`` is added only when the
    covariance is numerically singular, so well-conditioned views keep
    exact affine invariance.
    """
    cov = bc.T @ bc / bc.shape[0]
    w, v = jacobi_eigh(cov)
    if w[-1] <= 0.0:
        raise ValueError("a view has zero variance in every column")
    if w[0] <= _RCOND * w[-1]:
        w = np.clip(w, 0.0, None) + WHITEN_RIDGE * np.trace(cov) / cov.shape[0]
    return (v / np.sqrt(w)) @ v.T


def fit_cca(b1, b2):
    """Fit CCA between views ``b1`` (N x p) and ``b2`` (N x q).

    Returns ``min(p, q)`` component pairs sorted by correlation. Each
    u/v column pair is signed so that the largest-magnitude entry of the u
    column is positive. The reported correlations are the sample Pearson
    correlations of the resulting training components, so they stay exact
    when a singular view forces a whitening ridge.
    """
    b1 = as_matrix(b1, "b1")
    b2 = as_matrix(b2, "b2")
    n, p = b1.shape
    q = b2.shape[1]
    if b2.shape[0] != n:
        raise ValueError(f"views have {n} and {b2.shape[0]} rows")
    if not (np.all(np.isfinite(b1)) and np.all(np.isfinite(b2))):
        raise ValueError("views must be finite")
    if n <= max(p, q) + 1:
        raise SampleSizeError(f"CCA on {p} and {q} columns needs more than {max(p, q) + 1} rows, got {n}")

    m1 = b1.mean(axis=0)
    m2 = b2.mean(axis=0)
    c1 = b1 - m1
    c2 = b2 - m2
    w1 = _whitener(c1)
    w2 = _whitener(c2)
    s12 = c1.T @ c2 / n

    left, _, right_t = jacobi_svd(w1 @ s12 @ w2)
    d = min(p, q)
    u = w1 @ left[:, :d]
    v = w2 @ right_t[:d].T

    # deterministic signs
    pivot = np.argmax(np.abs(u), axis=0)
    flip = np.where(u[pivot, np.arange(d)] < 0, -1.0, 1.0)
    u = u * flip
    v = v * flip

    comp1 = c1 @ u
    comp2 = c2 @ v
    norms = np.sqrt(np.sum(comp1**2, axis=0) * np.sum(comp2**2, axis=0))
    corr = np.divide(np.sum(comp1 * comp2, axis=0), norms, out=np.zeros(d), where=norms > 0)
    corr = np.clip(corr, 0.0, 1.0)
    # the SVD order and the recomputed values can swap near-ties
    order = np.argsort(-corr, kind="stable")
    return CcaModel(u=u[:, order], v=v[:, order], correlations=corr[order], means_1=m1, means_2=m2)


def count_above(correlations, threshold):
    """Number of leading correlations strictly greater than ``threshold``."""
    above = np.asarray(correlations) > threshold
    return int(np.argmin(above)) if not above.all() else int(above.size)
