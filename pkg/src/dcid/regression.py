"""Least squares with intercept and the averaged coefficient of determination."""
import warnings
from dataclasses import dataclass

import numpy as np

from dcid.errors import RankDeficiencyError

# relative size of the ridge added when the Gram matrix is numerically singular
RIDGE_SCALE = 1e-8
# Gram matrices with eigenvalue ratio below this are treated as rank deficient
_RCOND = 1e-12


def as_matrix(a, name="array"):
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError(f"{name} must be 1-D or 2-D, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class OlsModel:
    weights: np.ndarray  # (p, d)
    intercept: np.ndarray  # (d,)
    fitted_on: int
    ridge: float = 0.0

    def predict(self, x):
        x = as_matrix(x, "x")
        if x.shape[1] != self.weights.shape[0]:
            raise ValueError(f"x has {x.shape[1]} columns, model expects {self.weights.shape[0]}")
        return x @ self.weights + self.intercept


def fit_ols(x, y):
    """Ordinary least squares of ``y`` on ``x`` with an intercept.

    Solved through the centred normal equations. When the Gram matrix is
    numerically singular (collinear columns, more columns than signal) a
    ridge of ``RIDGE_SCALE * trace / p`` is added so the fit stays defined.
    """
    x = as_matrix(x, "x")
    y = as_matrix(y, "y")
    n, p = x.shape
    if y.shape[0] != n:
        raise ValueError(f"x has {n} rows but y has {y.shape[0]}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("x and y must be finite")
    if n < p + 1:
        raise RankDeficiencyError(f"{p} regressors need at least {p + 1} rows, got {n}")

    x_mean = x.mean(axis=0)
    y_mean = y.mean(axis=0)
    xc = x - x_mean
    yc = y - y_mean
    gram = xc.T @ xc
    rhs = xc.T @ yc

    ridge = 0.0
    eig = np.linalg.eigvalsh(gram) if p else np.zeros(0)
    if p and eig[0] <= _RCOND * max(eig[-1], 0.0):
        ridge = RIDGE_SCALE * np.trace(gram) / p
        if ridge <= 0.0:
            raise RankDeficiencyError(f"all {p} regressors are constant; normal equations are singular")
        gram = gram + ridge * np.eye(p)
    weights = np.linalg.solve(gram, rhs) if p else np.zeros((0, y.shape[1]))
    intercept = y_mean - x_mean @ weights
    return OlsModel(weights=weights, intercept=intercept, fitted_on=n, ridge=ridge)


def probe_split(n, fraction=0.5, seed=0):
    """Seeded partition of ``range(n)`` into (fit rows, score rows)."""
    perm = np.random.default_rng(seed).permutation(n)
    n_fit = int(round(n * fraction))
    if n_fit < 1 or n_fit >= n:
        raise ValueError(f"probe fraction {fraction} leaves an empty partition for {n} rows")
    return np.sort(perm[:n_fit]), np.sort(perm[n_fit:])


def per_column_r2(y, y_pred):
    """1 - SSE/SST for every column; NaN where the column has no variance."""
    y = as_matrix(y, "y")
    resid = y - as_matrix(y_pred, "y_pred")
    sst = np.sum((y - y.mean(axis=0)) ** 2, axis=0)
    sse = np.sum(resid**2, axis=0)
    scale = np.maximum(np.sum(y**2, axis=0), 1e-300)
    flat = sst <= 1e-24 * scale
    out = np.full(y.shape[1], np.nan)
    out[~flat] = 1.0 - sse[~flat] / sst[~flat]
    return out


def r_squared(x, y, probe="holdout", probe_fraction=0.5, seed=0):
    """Share of variance in ``y`` explained by a linear regression on ``x``.

    The per-column ratios are averaged over the columns of ``y`` and the
    average is clamped to [0, 1]. With ``probe="holdout"`` the regression is
    fitted on a seeded ``probe_fraction`` of the rows and scored on the
    rest; ``probe="insample"`` fits and scores on all rows.
    """
    x = as_matrix(x, "x")
    y = as_matrix(y, "y")
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"x has {x.shape[0]} rows but y has {y.shape[0]}")
    if probe == "holdout":
        fit_rows, score_rows = probe_split(x.shape[0], probe_fraction, seed)
    elif probe == "insample":
        fit_rows = score_rows = np.arange(x.shape[0])
    else:
        raise ValueError(f"unknown probe mode {probe!r}")

    model = fit_ols(x[fit_rows], y[fit_rows])
    scores = per_column_r2(y[score_rows], model.predict(x[score_rows]))
    flat = np.isnan(scores)
    if flat.all():
        raise ValueError("every target column has zero variance on the scored rows")
    if flat.any():
        warnings.warn(f"{int(flat.sum())} zero-variance target column(s) excluded from R^2", RuntimeWarning)
    return float(np.clip(np.mean(scores[~flat]), 0.0, 1.0))
