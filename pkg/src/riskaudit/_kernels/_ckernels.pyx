# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; same contract as ``_pykernels``."""

import numpy as np
from libc.math cimport exp, expm1, sqrt, fabs


cdef double _wg(const double[:, ::1] x, const long[::1] eplayer,
                const double[::1] ew, const unsigned char[:, ::1] emask,
                double[:, ::1] grad, bint want_grad) noexcept nogil:
    cdef Py_ssize_t n = x.shape[0], mi = x.shape[1], ne = ew.shape[0]
    cdef Py_ssize_t i, j, e, p
    cdef double t, c, w_val = 0.0
    if want_grad:
        for i in range(n):
            for j in range(mi):
                grad[i, j] = 0.0
    for e in range(ne):
        p = eplayer[e]
        t = 0.0
        for j in range(mi):
            if emask[e, j]:
                t += x[p, j]
        c = exp(-t)
        w_val += ew[e] * (-expm1(-t))
        if want_grad:
            c *= ew[e]
            for j in range(mi):
                if emask[e, j]:
                    grad[p, j] += c
    return w_val


cdef void _project(double[:, ::1] x, double[::1] buf) noexcept nogil:
    cdef Py_ssize_t n = x.shape[0], mi = x.shape[1]
    cdef Py_ssize_t i, j, k, rho
    cdef double tot, t, css, theta, cand
    for j in range(mi):
        tot = 0.0
        for i in range(n):
            if x[i, j] > 0.0:
                tot += x[i, j]
        if tot <= 1.0:
            for i in range(n):
                if x[i, j] < 0.0:
                    x[i, j] = 0.0
            continue
        # insertion sort, descending
        for i in range(n):
            t = x[i, j]
            k = i
            while k > 0 and buf[k - 1] < t:
                buf[k] = buf[k - 1]
                k -= 1
            buf[k] = t
        css = 0.0
        theta = 0.0
        rho = 0
        for k in range(n):
            css += buf[k]
            cand = (css - 1.0) / (k + 1)
            if buf[k] - cand > 0.0:
                rho = k + 1
                theta = cand
        for i in range(n):
            t = x[i, j] - theta
            x[i, j] = t if t > 0.0 else 0.0


def marginals(x):
    return -np.expm1(-np.ascontiguousarray(x, dtype=np.float64))


def _prep(x, eplayer, eweight, emask):
    return (np.ascontiguousarray(x, dtype=np.float64),
            np.ascontiguousarray(eplayer, dtype=np.int_),
            np.ascontiguousarray(eweight, dtype=np.float64),
            np.ascontiguousarray(emask, dtype=np.uint8))


def welfare(x, eplayer, eweight, emask):
    xa, ep, ew, em = _prep(x, eplayer, eweight, emask)
    scratch = np.empty((0, 0))
    return float(_wg(xa, ep, ew, em, scratch, False))


def welfare_and_grad(x, eplayer, eweight, emask):
    xa, ep, ew, em = _prep(x, eplayer, eweight, emask)
    n, mi = xa.shape
    grad = np.zeros((n, mi))
    w_val = _wg(xa, ep, ew, em, grad, True)
    return float(w_val), grad


def project_columns(x):
    out = np.array(x, dtype=np.float64, order="C", copy=True)
    if out.size == 0:
        return out
    buf = np.empty(out.shape[0])
    _project(out, buf)
    return out


def ascend(x0, eplayer, eweight, emask, double step, double tol, long max_iter):
    xa, ep, ew, em = _prep(x0, eplayer, eweight, emask)
    cdef Py_ssize_t n = xa.shape[0], mi = xa.shape[1]
    x_np = np.array(xa, copy=True)
    xn_np = np.empty_like(x_np)
    g_np = np.zeros_like(x_np)
    gn_np = np.zeros_like(x_np)
    buf_np = np.empty(max(n, 1))
    cdef double[:, ::1] x = x_np, xn = xn_np, g = g_np, gn = gn_np
    cdef double[::1] buf = buf_np
    cdef const long[::1] epv = ep
    cdef const double[::1] ewv = ew
    cdef const unsigned char[:, ::1] emv = em
    cdef double eta = step, w_val, w_new, res = float("inf"), d, slack
    cdef long it
    cdef Py_ssize_t i, j
    cdef bint done = False
    if n == 0 or mi == 0:
        return x_np, 0.0, 0, 0.0, True
    with nogil:
        _project(x, buf)
        w_val = _wg(x, epv, ewv, emv, g, True)
        it = 0
        while it < max_iter:
            for i in range(n):
                for j in range(mi):
                    xn[i, j] = x[i, j] + eta * g[i, j]
            _project(xn, buf)
            res = 0.0
            for i in range(n):
                for j in range(mi):
                    d = (xn[i, j] - x[i, j]) / eta
                    res += d * d
            res = sqrt(res)
            if res <= tol:
                done = True
                break
            w_new = _wg(xn, epv, ewv, emv, gn, True)
            slack = 1e-12 * (fabs(w_val) if fabs(w_val) > 1.0 else 1.0)
            if w_new < w_val + 0.5 * eta * res * res - slack and eta > 1e-12:
                eta *= 0.5
                it += 1
                continue
            for i in range(n):
                for j in range(mi):
                    x[i, j] = xn[i, j]
                    g[i, j] = gn[i, j]
            w_val = w_new
            it += 1
    return x_np, float(w_val), int(it), float(res), bool(done)
