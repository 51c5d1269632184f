"""Pure Python/numpy versions of the compiled kernels.

Signatures and results match ``_ckernels`` to floating-point tolerance; the
package falls back to these when the extension is not built.
"""
from __future__ import annotations

import numpy as np


def local_linear_fit(x, w, half):
    """Weighted least-squares line over [i-half, i+half] evaluated at i.

    Windows are truncated at the edges.  Where the weighted normal equations
    are singular the weighted mean is used; where all weights vanish the
    unweighted fit is used.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    n = x.size
    if n == 0:
        return np.zeros(0)
    t = np.arange(n, dtype=np.float64) - 0.5 * (n - 1)

    def window_sums(v):
        c = np.concatenate(([0.0], np.cumsum(v)))
        lo = np.clip(np.arange(n) - half, 0, n)
        hi = np.clip(np.arange(n) + half + 1, 0, n)
        return c[hi] - c[lo]

    def fit(weights):
        s0 = window_sums(weights)
        st = window_sums(weights * t)
        stt = window_sums(weights * t * t)
        sx = window_sums(weights * x)
        stx = window_sums(weights * t * x)
        s1 = st - t * s0
        s2 = stt - 2 * t * st + t * t * s0
        sx1 = stx - t * sx
        det = s0 * s2 - s1 * s1
        with np.errstate(divide="ignore", invalid="ignore"):
            line = (s2 * sx - s1 * sx1) / det
            mean = sx / s0
        ok = det > 1e-9 * np.maximum(s0 * s2, 1e-300)
        out = np.where(ok, line, mean)
        return out, s0

    out, s0 = fit(w)
    empty = ~(s0 > 0)
    if empty.any():
        full, _ = fit(np.ones(n))
        out[empty] = full[empty]
    return out


def smo_solve(K, y, C, tol, max_iter):
    """Soft-margin SVM dual by SMO with second-order working-set selection.

    Minimises 0.5 a'Qa - sum(a), Q_ij = y_i y_j K_ij, 0 <= a_i <= C_i, y'a = 0.
    ``C`` is a scalar or one bound per sample.  Returns (alpha, bias, iterations, kkt_gap).
    """
    K = np.ascontiguousarray(K, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = y.size
    C = np.array(np.broadcast_to(np.asarray(C, dtype=np.float64), (n,)))
    alpha = np.zeros(n)
    grad = -np.ones(n)                      # gradient of the dual objective
    diag = np.diag(K).copy()
    tau = 1e-12
    it = 0
    gap = np.inf
    while it < max_iter:
        # I_up / I_low index sets
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        score = -y * grad
        if not up.any() or not low.any():
            gap = 0.0
            break
        i = int(np.flatnonzero(up)[np.argmax(score[up])])
        m_up = score[i]
        m_low = score[low].min()
        gap = m_up - m_low
        if gap < tol:
            break
        # second-order choice of j among I_low with score < m_up
        cand = low & (score < m_up)
        b = m_up - score
        a = diag[i] + diag - 2 * K[i]
        a = np.where(a > 0, a, tau)
        obj = np.where(cand, -(b * b) / a, np.inf)
        j = int(np.argmin(obj))
        yi, yj = y[i], y[j]
        quad = max(diag[i] + diag[j] - 2 * K[i, j], tau)
        # step along y_i e_i - y_j e_j
        delta = (score[i] - score[j]) / quad
        # box limits for alpha_i += yi*delta, alpha_j -= yj*delta
        lim_i = C[i] - alpha[i] if yi > 0 else alpha[i]
        lim_j = alpha[j] if yj > 0 else C[j] - alpha[j]
        delta = min(delta, lim_i, lim_j)
        alpha[i] += yi * delta
        alpha[j] -= yj * delta
        # Q_ki = y_k y_i K_ki, so Q[:, i] dai + Q[:, j] daj = y (K_i - K_j) delta
        grad += y * (K[:, i] - K[:, j]) * delta
        it += 1
    bias = _bias(alpha, grad, y, C)
    return alpha, bias, it, gap


def _bias(alpha, grad, y, C):
    free = (alpha > 1e-12 * C) & (alpha < C * (1 - 1e-12))
    yg = y * grad
    if free.any():
        return float(-yg[free].mean())
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    score = -yg
    hi = score[up].max() if up.any() else 0.0
    lo = score[low].min() if low.any() else 0.0
    return float((hi + lo) / 2)
