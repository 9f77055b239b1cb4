# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels.  Signatures mirror :mod:`mllc._pykernels`."""

import numpy as np

from libc.math cimport exp, log, log1p, fabs, tanh

BACKEND = "compiled"


cdef inline double _logaddexp(double a, double b) nogil:
    if a > b:
        return a + log1p(exp(b - a))
    return b + log1p(exp(a - b))


def labeling_scores(const double[::1] h):
    """``z[m] = sum_i y_i h_i`` for every labeling bitmask ``m``."""
    cdef Py_ssize_t l = h.shape[0]
    cdef Py_ssize_t n = (<Py_ssize_t>1) << l
    out = np.empty(n)
    cdef double[::1] z = out
    cdef Py_ssize_t m, i
    cdef double acc
    with nogil:
        for m in range(n):
            acc = 0.0
            for i in range(l):
                if (m >> i) & 1:
                    acc = acc + h[i]
                else:
                    acc = acc - h[i]
            z[m] = acc
    return out


cdef double _forward_backward(const double[::1] wp, const double[::1] wm,
                              double[::1] q, double[::1] alpha, double[::1] beta) nogil:
    # one state per position, so both arcs at k share alpha[k] and beta[k + 1];
    # beta holds the per-position log-sums until the backward pass overwrites it
    cdef Py_ssize_t l = wp.shape[0]
    cdef Py_ssize_t k
    cdef double logz, pp, pm, d, step
    alpha[0] = 0.0
    for k in range(l):
        step = _logaddexp(wp[k], wm[k])
        beta[k] = step
        alpha[k + 1] = alpha[k] + step
    logz = alpha[l]
    beta[l] = 0.0
    for k in range(l - 1, -1, -1):
        beta[k] = beta[k] + beta[k + 1]
    for k in range(l):
        pp = exp(alpha[k] + wp[k] + beta[k + 1] - logz)
        pm = exp(alpha[k] + wm[k] + beta[k + 1] - logz)
        d = pp - pm
        if d > 1.0:
            d = 1.0
        elif d < -1.0:
            d = -1.0
        q[k] = d
    return logz


def chain_forward_backward(const double[::1] wplus, const double[::1] wminus):
    """Log-space forward/backward over the chain automaton.

    Returns ``(q, logZ)`` where ``q[k]`` is the path-weight mass through the
    +1 arc at position ``k`` minus the mass through the -1 arc, over ``Z``.
    """
    cdef Py_ssize_t l = wplus.shape[0]
    q = np.empty(l)
    alpha = np.empty(l + 1)
    beta = np.empty(l + 1)
    cdef double logz
    cdef double[::1] qv = q, av = alpha, bv = beta
    with nogil:
        logz = _forward_backward(wplus, wminus, qv, av, bv)
    return q, logz


def sparse_scores(const double[:, ::1] W, const long[::1] idx, const double[::1] vals):
    cdef Py_ssize_t l = W.shape[0], nnz = idx.shape[0], i, k
    out = np.empty(l)
    cdef double[::1] s = out
    cdef double acc
    with nogil:
        for i in range(l):
            acc = 0.0
            for k in range(nnz):
                acc = acc + W[i, idx[k]] * vals[k]
            s[i] = acc
    return out


cdef void _coefs(const double[::1] s, double l1, const double[::1] l2, bint use_wfa,
                 double[::1] g, double[::1] wp, double[::1] wm,
                 double[::1] alpha, double[::1] beta) nogil:
    cdef Py_ssize_t l = s.shape[0], i
    if use_wfa:
        for i in range(l):
            wp[i] = s[i]
            wm[i] = -s[i]
        _forward_backward(wp, wm, g, alpha, beta)
        for i in range(l):
            g[i] = l1 * g[i] - l2[i]
    else:
        for i in range(l):
            g[i] = l1 * tanh(s[i]) - l2[i]


def mllog_coefs(const double[::1] s, double l1, const double[::1] l2, bint use_wfa=False):
    """Per-label gradient coefficients ``L1 * Q(i) - L2(i)``."""
    cdef Py_ssize_t l = s.shape[0]
    g = np.empty(l)
    wp = np.empty(l)
    wm = np.empty(l)
    alpha = np.empty(l + 1)
    beta = np.empty(l + 1)
    cdef double[::1] gv = g, wpv = wp, wmv = wm, av = alpha, bv = beta
    with nogil:
        _coefs(s, l1, l2, use_wfa, gv, wpv, wmv, av, bv)
    return g


def mllog_sparse_grad(const double[:, ::1] W, const long[::1] idx, const double[::1] vals,
                      double l1, const double[::1] l2, bint use_wfa=False):
    """Coefficients and the ``(l, nnz)`` nonzero block of the weight gradient."""
    cdef Py_ssize_t l = W.shape[0], nnz = idx.shape[0], i, k
    s = np.empty(l)
    g = np.empty(l)
    grad = np.empty((l, nnz))
    cdef double[::1] sv = s, gv = g
    cdef double[:, ::1] G = grad
    cdef double[::1] wp, wm, alpha, beta
    cdef double acc
    if use_wfa:
        wp = np.empty(l)
        wm = np.empty(l)
        alpha = np.empty(l + 1)
        beta = np.empty(l + 1)
    with nogil:
        for i in range(l):
            acc = 0.0
            for k in range(nnz):
                acc = acc + W[i, idx[k]] * vals[k]
            sv[i] = acc
        if use_wfa:
            _coefs(sv, l1, l2, True, gv, wp, wm, alpha, beta)
        else:
            for i in range(l):
                gv[i] = l1 * tanh(sv[i]) - l2[i]
        for i in range(l):
            for k in range(nnz):
                G[i, k] = gv[i] * vals[k]
    return g, grad


def mllog_sgd_step(double[:, ::1] W, const long[::1] idx, const double[::1] vals,
                   double l1, const double[::1] l2, double lr, bint use_wfa=False):
    """In-place SGD step on one example; returns the largest |score| seen."""
    cdef Py_ssize_t l = W.shape[0], nnz = idx.shape[0], i, k
    s = np.empty(l)
    g = np.empty(l)
    cdef double[::1] sv = s, gv = g
    cdef double[::1] wp, wm, alpha, beta
    cdef double acc, smax = 0.0
    if use_wfa:
        wp = np.empty(l)
        wm = np.empty(l)
        alpha = np.empty(l + 1)
        beta = np.empty(l + 1)
    with nogil:
        for i in range(l):
            acc = 0.0
            for k in range(nnz):
                acc = acc + W[i, idx[k]] * vals[k]
            sv[i] = acc
            if fabs(acc) > smax:
                smax = fabs(acc)
        if use_wfa:
            _coefs(sv, l1, l2, True, gv, wp, wm, alpha, beta)
        else:
            for i in range(l):
                gv[i] = l1 * tanh(sv[i]) - l2[i]
        for i in range(l):
            for k in range(nnz):
                W[i, idx[k]] = W[i, idx[k]] - lr * gv[i] * vals[k]
    return smax
