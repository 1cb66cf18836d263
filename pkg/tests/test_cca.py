import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dcid.cca import CcaModel, count_above, fit_cca
from dcid.errors import SampleSizeError


def _correlated_views(n=2000, p=3, q=3, seed=0):
    rng = np.random.default_rng(seed)
    shared = rng.standard_normal((n, 2))
    b1 = shared @ rng.standard_normal((2, p)) + rng.standard_normal((n, p))
    b2 = shared @ rng.standard_normal((2, q)) + rng.standard_normal((n, q))
    return b1, b2


def _determinant_oracle(b1, b2):
    """Canonical correlations of two 2-column views from det(S12 S22^-1 S21 - r^2 S11) = 0."""
    c = np.cov(np.hstack([b1, b2]).T, bias=True)
    s11, s12, s22 = c[:2, :2], c[:2, 2:], c[2:, 2:]
    a = s12 @ np.linalg.inv(s22) @ s12.T
    b = s11
    # det(a - lam b) = lam^2 det(b) - lam * cross + det(a)
    cross = a[0, 0] * b[1, 1] + a[1, 1] * b[0, 0] - a[0, 1] * b[1, 0] - a[1, 0] * b[0, 1]
    qa, qb, qc = np.linalg.det(b), -cross, np.linalg.det(a)
    disc = np.sqrt(qb * qb - 4 * qa * qc)
    lam = np.array([(-qb + disc) / (2 * qa), (-qb - disc) / (2 * qa)])
    return np.sqrt(np.clip(lam, 0, None))


def test_identical_views():
    b, _ = _correlated_views(p=3)
    m = fit_cca(b, b)
    np.testing.assert_allclose(m.correlations, 1.0, atol=1e-6)


def test_univariate_is_abs_pearson():
    rng = np.random.default_rng(0)
    a = rng.standard_normal(500)
    b = -0.4 * a + rng.standard_normal(500)
    m = fit_cca(a, b)
    assert m.correlations[0] == pytest.approx(abs(np.corrcoef(a, b)[0, 1]), abs=1e-9)
    # the only component is the variable itself, rescaled
    assert m.u.shape == (1, 1) and m.v.shape == (1, 1)
    assert m.u[0, 0] > 0


def test_independent_views_small_correlations():
    rng = np.random.default_rng(0)
    m = fit_cca(rng.standard_normal((10_000, 2)), rng.standard_normal((10_000, 2)))
    assert np.all(m.correlations < 0.05)


@pytest.mark.parametrize("seed", range(4))
def test_matches_determinant_oracle(seed):
    b1, b2 = _correlated_views(n=500, p=2, q=2, seed=seed)
    np.testing.assert_allclose(fit_cca(b1, b2).correlations, _determinant_oracle(b1, b2), atol=1e-7)


def test_affine_invariance():
    b1, b2 = _correlated_views(p=3, q=4)
    rng = np.random.default_rng(5)
    a = rng.standard_normal((3, 3)) + 2 * np.eye(3)
    ref = fit_cca(b1, b2).correlations
    np.testing.assert_allclose(fit_cca(b1 @ a + rng.standard_normal(3), b2).correlations, ref, atol=1e-6)


def test_symmetry():
    b1, b2 = _correlated_views(p=2, q=4)
    np.testing.assert_allclose(fit_cca(b1, b2).correlations, fit_cca(b2, b1).correlations, atol=1e-9)


def test_components_decorrelated():
    b1, b2 = _correlated_views(p=3, q=3)
    m = fit_cca(b1, b2)
    c1, c2 = m.transform(b1, b2)
    full = np.corrcoef(np.hstack([c1, c2]).T)
    d = m.n_components
    off = full - np.diag(np.diag(full))
    off[:d, d:] -= np.diag(m.correlations)
    off[d:, :d] -= np.diag(m.correlations)
    assert np.max(np.abs(off)) < 1e-6


def test_transform_round_trip_and_single_row():
    b1, b2 = _correlated_views()
    m = fit_cca(b1, b2)
    c1, c2 = m.transform(b1, b2)
    assert np.corrcoef(c1[:, 0], c2[:, 0])[0, 1] == pytest.approx(m.correlations[0], abs=1e-9)
    r1, r2 = m.transform(b1[:1], b2[:1])
    assert r1.shape == (1, m.n_components)
    np.testing.assert_array_equal(r1, c1[:1])


def test_fresh_sample_correlation():
    def draw(row_seed):
        mix = np.random.default_rng(7)
        m1, m2 = mix.standard_normal((2, 3)), mix.standard_normal((2, 3))
        rng = np.random.default_rng(row_seed)
        shared = rng.standard_normal((10_000, 2))
        return shared @ m1 + rng.standard_normal((10_000, 3)), shared @ m2 + rng.standard_normal((10_000, 3))

    m = fit_cca(*draw(0))
    c1, c2 = m.transform(*draw(1))
    assert np.corrcoef(c1[:, 0], c2[:, 0])[0, 1] == pytest.approx(m.correlations[0], abs=0.05)


def test_errors():
    with pytest.raises(SampleSizeError):
        fit_cca(np.ones((4, 3)), np.ones((4, 1)))
    with pytest.raises(ValueError):
        fit_cca(np.full((20, 1), np.inf), np.ones((20, 1)))
    m = fit_cca(*_correlated_views())
    with pytest.raises(ValueError):
        m.transform(np.ones((2, 5)), np.ones((2, 3)))


def test_json_round_trip():
    m = fit_cca(*_correlated_views(p=2, q=3))
    back = CcaModel.from_json(m.to_json())
    for name in ("u", "v", "correlations", "means_1", "means_2"):
        np.testing.assert_array_equal(getattr(back, name), getattr(m, name))


def test_sign_convention():
    b1, b2 = _correlated_views()
    m = fit_cca(b1, b2)
    pivot = np.argmax(np.abs(m.u), axis=0)
    assert np.all(m.u[pivot, np.arange(m.n_components)] > 0)
    m2 = fit_cca(-b1, b2)
    np.testing.assert_allclose(m2.correlations, m.correlations, atol=1e-12)


def test_count_above():
    assert count_above([0.9, 0.7, 0.3, 0.1], 0.5) == 2
    assert count_above([0.9, 0.7], 0.5) == 2
    assert count_above([0.5, 0.2], 0.5) == 0
    assert count_above([], 0.5) == 0


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), p=st.integers(1, 4), q=st.integers(1, 4))
def test_correlations_sorted_and_bounded(seed, p, q):
    b1, b2 = _correlated_views(n=300, p=p, q=q, seed=seed)
    c = fit_cca(b1, b2).correlations
    assert c.shape == (min(p, q),)
    assert np.all(c >= 0) and np.all(c <= 1 + 1e-9)
    assert np.all(np.diff(c) <= 0)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_affine_invariance_property(seed):
    rng = np.random.default_rng(seed)
    b1, b2 = _correlated_views(n=400, p=3, q=2, seed=seed)
    a = rng.standard_normal((3, 3))
    if abs(np.linalg.det(a)) < 0.1:
        a += 2 * np.eye(3)
    shifted = b1 @ a + 10 * rng.standard_normal(3)
    np.testing.assert_allclose(fit_cca(shifted, b2).correlations, fit_cca(b1, b2).correlations, atol=1e-6)
