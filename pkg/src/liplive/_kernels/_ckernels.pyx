# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: sliding weighted line fit and the SMO inner loop."""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


cdef void _fit(const double[::1] x, const double[::1] w, Py_ssize_t half,
               double[::1] out, double[::1] s0_out) noexcept nogil:
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, lo, hi, k
    cdef double mid = 0.5 * (n - 1)
    cdef double s0 = 0, st = 0, stt = 0, sx = 0, stx = 0
    cdef double t, c, s1, s2, sx1, det
    # running sums over the current window [lo, hi)
    lo = 0
    hi = 0
    for i in range(n):
        while hi < n and hi <= i + half:
            t = hi - mid
            s0 += w[hi]
            st += w[hi] * t
            stt += w[hi] * t * t
            sx += w[hi] * x[hi]
            stx += w[hi] * t * x[hi]
            hi += 1
        while lo < i - half:
            t = lo - mid
            s0 -= w[lo]
            st -= w[lo] * t
            stt -= w[lo] * t * t
            sx -= w[lo] * x[lo]
            stx -= w[lo] * t * x[lo]
            lo += 1
        c = i - mid
        s1 = st - c * s0
        s2 = stt - 2 * c * st + c * c * s0
        sx1 = stx - c * sx
        det = s0 * s2 - s1 * s1
        s0_out[i] = s0
        if det > 1e-9 * (s0 * s2 if s0 * s2 > 1e-300 else 1e-300):
            out[i] = (s2 * sx - s1 * sx1) / det
        elif s0 > 0:
            out[i] = sx / s0
        else:
            out[i] = 0.0


def local_linear_fit(x, w, Py_ssize_t half):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0]
    out = np.zeros(n)
    s0 = np.zeros(n)
    cdef double[::1] ov = out
    cdef double[::1] sv = s0
    with nogil:
        _fit(xv, wv, half, ov, sv)
    empty = ~(s0 > 0)
    if n and empty.any():
        full = np.zeros(n)
        s0b = np.zeros(n)
        ones = np.ones(n)
        _fit(xv, ones, half, full, s0b)
        out[empty] = full[empty]
    return out


def smo_solve(K, y, C, double tol, long max_iter):
    cdef double[:, ::1] Kv = np.ascontiguousarray(K, dtype=np.float64)
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = yv.shape[0]
    c_a = np.array(np.broadcast_to(np.asarray(C, dtype=np.float64), (n,)))
    cdef double[::1] Cv = c_a
    alpha_a = np.zeros(n)
    grad_a = -np.ones(n)
    cdef double[::1] alpha = alpha_a
    cdef double[::1] grad = grad_a
    cdef Py_ssize_t t, i, j
    cdef long it = 0
    cdef double m_up, m_low, sc, b, a, obj, best, quad, delta, lim_i, lim_j
    cdef double tau = 1e-12
    cdef double gap = INFINITY
    cdef bint in_up, in_low
    with nogil:
        while it < max_iter:
            i = -1
            m_up = -INFINITY
            m_low = INFINITY
            for t in range(n):
                sc = -yv[t] * grad[t]
                in_up = (yv[t] > 0 and alpha[t] < Cv[t]) or (yv[t] < 0 and alpha[t] > 0)
                in_low = (yv[t] > 0 and alpha[t] > 0) or (yv[t] < 0 and alpha[t] < Cv[t])
                if in_up and sc > m_up:
                    m_up = sc
                    i = t
                if in_low and sc < m_low:
                    m_low = sc
            if i < 0 or m_low == INFINITY:
                gap = 0.0
                break
            gap = m_up - m_low
            if gap < tol:
                break
            j = -1
            best = INFINITY
            for t in range(n):
                in_low = (yv[t] > 0 and alpha[t] > 0) or (yv[t] < 0 and alpha[t] < Cv[t])
                sc = -yv[t] * grad[t]
                if in_low and sc < m_up:
                    b = m_up - sc
                    a = Kv[i, i] + Kv[t, t] - 2 * Kv[i, t]
                    if a <= 0:
                        a = tau
                    obj = -(b * b) / a
                    if obj < best:
                        best = obj
                        j = t
            quad = Kv[i, i] + Kv[j, j] - 2 * Kv[i, j]
            if quad < tau:
                quad = tau
            delta = (m_up - (-yv[j] * grad[j])) / quad
            lim_i = Cv[i] - alpha[i] if yv[i] > 0 else alpha[i]
            lim_j = alpha[j] if yv[j] > 0 else Cv[j] - alpha[j]
            if lim_i < delta:
                delta = lim_i
            if lim_j < delta:
                delta = lim_j
            alpha[i] += yv[i] * delta
            alpha[j] -= yv[j] * delta
            for t in range(n):
                grad[t] += yv[t] * (Kv[t, i] - Kv[t, j]) * delta
            it += 1
    from ._pykernels import _bias
    return alpha_a, _bias(alpha_a, grad_a, np.asarray(yv), c_a), it, gap
