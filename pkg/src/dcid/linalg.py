"""Jacobi-rotation eigensolver and SVD for small dense matrices.

Both routines use the round-robin (parallel) ordering: every sweep visits
each index pair exactly once, grouped into rounds of disjoint pairs so a
whole round of rotations is applied with a few vectorised numpy updates.
"""
import numpy as np

_TINY = 1e-300


def _round_robin(n):
    """Rounds of disjoint (p, q) pairs, p < q, covering all pairs once."""
    m = n + (n % 2)
    ring = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = []
        for i in range(m // 2):
            a, b = ring[i], ring[m - 1 - i]
            if a < n and b < n:
                pairs.append((min(a, b), max(a, b)))
        if pairs:
            p, q = np.array(pairs).T
            rounds.append((p, q))
        ring = [ring[0], ring[-1]] + ring[1:-1]
    return rounds


def _tan_half(zeta):
    # smaller root of t^2 + 2 zeta t - 1 = 0, written to avoid overflow
    sign = np.where(zeta >= 0, 1.0, -1.0)
    return sign / (np.abs(zeta) + np.hypot(zeta, 1.0))


def jacobi_eigh(a, tol=1e-14, max_sweeps=100):
    """Eigen-decomposition of a real symmetric matrix by cyclic Jacobi.

    Returns ``(w, v)`` with eigenvalues ascending and ``a @ v == v * w``,
    matching the layout of :func:`numpy.linalg.eigh`.
    """
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    scale = np.abs(a).max() if a.size else 0.0
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-10 * max(scale, 1.0)):
        raise ValueError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    if n < 2:
        return np.diag(a).copy(), v

    rounds = _round_robin(n)
    norm = np.linalg.norm(a)
    for _ in range(max_sweeps):
        off = np.sqrt(2.0 * np.sum(np.triu(a, 1) ** 2))
        if off <= tol * norm:
            break
        for p, q in rounds:
            apq = a[p, q]
            active = np.abs(apq) > _TINY
            zeta = np.where(active, (a[q, q] - a[p, p]) / (2.0 * np.where(active, apq, 1.0)), 0.0)
            t = _tan_half(zeta)
            c = np.where(active, 1.0 / np.sqrt(1.0 + t * t), 1.0)
            s = np.where(active, t * c, 0.0)

            ap, aq = a[:, p], a[:, q]
            a[:, p] = ap * c - aq * s
            a[:, q] = ap * s + aq * c
            ap, aq = a[p, :], a[q, :]
            a[p, :] = c[:, None] * ap - s[:, None] * aq
            a[q, :] = s[:, None] * ap + c[:, None] * aq
            a[p, q] = 0.0
            a[q, p] = 0.0

            vp, vq = v[:, p], v[:, q]
            v[:, p] = vp * c - vq * s
            v[:, q] = vp * s + vq * c

    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def _complete_orthonormal(u, filled):
    """Replace columns of ``u`` not marked in ``filled`` by an orthonormal completion."""
    m, k = u.shape
    basis = [u[:, j] for j in range(k) if filled[j]]
    out = u.copy()
    candidates = iter(np.eye(m))
    for j in range(k):
        if filled[j]:
            continue
        for e in candidates:
            w = e.copy()
            for _ in range(2):
                for b in basis:
                    w -= (b @ w) * b
            nrm = np.linalg.norm(w)
            if nrm > 1e-8:
                w /= nrm
                basis.append(w)
                out[:, j] = w
                break
    return out


def jacobi_svd(a, tol=1e-15, max_sweeps=100):
    """Thin SVD ``a = u @ diag(s) @ vt`` by one-sided (Hestenes) Jacobi.

    Singular values come back in descending order; ``u`` is m x k and ``vt``
    is k x n with k = min(m, n).
    """
    a = np.array(a, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    m, n = a.shape
    if m < n:
        u, s, vt = jacobi_svd(a.T, tol=tol, max_sweeps=max_sweeps)
        return vt.T, s, u.T

    g = a.copy()
    v = np.eye(n)
    rounds = _round_robin(n) if n > 1 else []
    for _ in range(max_sweeps):
        rotated = False
        for p, q in rounds:
            gp, gq = g[:, p], g[:, q]
            alpha = np.sum(gp * gp, axis=0)
            beta = np.sum(gq * gq, axis=0)
            gamma = np.sum(gp * gq, axis=0)
            active = np.abs(gamma) > tol * np.sqrt(alpha * beta) + _TINY
            if not active.any():
                continue
            rotated = True
            zeta = np.where(active, (beta - alpha) / (2.0 * np.where(active, gamma, 1.0)), 0.0)
            t = _tan_half(zeta)
            c = np.where(active, 1.0 / np.sqrt(1.0 + t * t), 1.0)
            s = np.where(active, t * c, 0.0)
            g[:, p] = gp * c - gq * s
            g[:, q] = gp * s + gq * c
            vp, vq = v[:, p], v[:, q]
            v[:, p] = vp * c - vq * s
            v[:, q] = vp * s + vq * c
        if not rotated:
            break

    sigma = np.linalg.norm(g, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma, g, v = sigma[order], g[:, order], v[:, order]
    cutoff = max(sigma[0] if n else 0.0, _TINY) * max(m, n) * np.finfo(float).eps
    filled = sigma > cutoff
    u = np.zeros_like(g)
    u[:, filled] = g[:, filled] / sigma[filled]
    if not filled.all():
        u = _complete_orthonormal(u, filled)
        sigma = np.where(filled, sigma, 0.0)
    return u, sigma, v.T


def inv_sqrt_psd(s, ridge=0.0):
    """Symmetric inverse square root of ``s + ridge * I`` (s positive semi-definite)."""
    w, v = jacobi_eigh(s)
    w = np.clip(w, 0.0, None) + ridge
    if np.any(w <= 0.0):
        raise np.linalg.LinAlgError("matrix is singular; a positive ridge is required")
    return (v / np.sqrt(w)) @ v.T
