# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels: lagged autocovariance and L1-logistic coordinate descent.

Mirrors ``fallback.py`` exactly in update order; see that module for the
contract documentation.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log1p

cnp.import_array()


cdef inline double _sigmoid(double z) nogil:
    cdef double e
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


cdef inline double _softplus(double z) nogil:
    if z > 0.0:
        return log1p(exp(-z)) + z
    return log1p(exp(z))


def acc_core(double[:, ::1] values, int max_lag):
    cdef Py_ssize_t length = values.shape[0]
    cdef Py_ssize_t dim = values.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(dim * max_lag)
    cdef double[::1] ov = out
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cen = np.empty(length)
    cdef double[::1] cv = cen
    cdef Py_ssize_t k, i, lag
    cdef double base, acc, mu

    for k in range(dim):
        base = values[0, k]
        acc = 0.0
        for i in range(length):
            acc += values[i, k] - base
        mu = acc / length
        for i in range(length):
            cv[i] = values[i, k] - base - mu
        for lag in range(1, max_lag + 1):
            acc = 0.0
            for i in range(length - lag):
                acc += cv[i] * cv[i + lag]
            ov[k * max_lag + (lag - 1)] = acc / (length - lag)
    return out


def cd_fit(double[:, ::1] Xt, double[::1] y, double lam, w_in, double bias,
           int max_sweeps, double tol):
    cdef Py_ssize_t p = Xt.shape[0]
    cdef Py_ssize_t n = Xt.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w_arr = \
        np.array(w_in, dtype=np.float64, copy=True)
    cdef double[::1] w = w_arr
    cdef cnp.ndarray[cnp.float64_t, ndim=1] hj_arr = np.empty(p)
    cdef double[::1] hj = hj_arr
    cdef cnp.ndarray[cnp.float64_t, ndim=1] z_arr = np.empty(n)
    cdef double[::1] z = z_arr
    cdef cnp.ndarray[cnp.float64_t, ndim=1] resid_arr = np.empty(n)
    cdef double[::1] resid = resid_arr
    cdef Py_ssize_t i, j, sweep
    cdef double acc, g, u, w_new, delta, denom, max_rel, obj, abs_u
    cdef int sweeps = 0

    for j in range(p):
        acc = 0.0
        for i in range(n):
            acc += Xt[j, i] * Xt[j, i]
        hj[j] = 0.25 * acc / n

    for i in range(n):
        acc = bias
        for j in range(p):
            if w[j] != 0.0:
                acc += w[j] * Xt[j, i]
        z[i] = acc
    for i in range(n):
        resid[i] = _sigmoid(z[i]) - y[i]

    objectives = []
    for sweep in range(max_sweeps):
        sweeps += 1
        max_rel = 0.0

        acc = 0.0
        for i in range(n):
            acc += resid[i]
        delta = -(acc / n) / 0.25
        if delta != 0.0:
            denom = fabs(bias + delta)
            if fabs(bias) > denom:
                denom = fabs(bias)
            if denom > 0.0 and fabs(delta) / denom > max_rel:
                max_rel = fabs(delta) / denom
            bias += delta
            for i in range(n):
                z[i] += delta
                resid[i] = _sigmoid(z[i]) - y[i]

        for j in range(p):
            if hj[j] <= 0.0:
                continue
            acc = 0.0
            for i in range(n):
                acc += Xt[j, i] * resid[i]
            g = acc / n
            u = hj[j] * w[j] - g
            abs_u = fabs(u) - lam
            if abs_u <= 0.0:
                w_new = 0.0
            elif u > 0.0:
                w_new = abs_u / hj[j]
            else:
                w_new = -abs_u / hj[j]
            delta = w_new - w[j]
            if delta != 0.0:
                denom = fabs(w_new)
                if fabs(w[j]) > denom:
                    denom = fabs(w[j])
                if denom > 0.0 and fabs(delta) / denom > max_rel:
                    max_rel = fabs(delta) / denom
                w[j] = w_new
                for i in range(n):
                    z[i] += delta * Xt[j, i]
                    resid[i] = _sigmoid(z[i]) - y[i]

        acc = 0.0
        for i in range(n):
            acc += _softplus(z[i]) - y[i] * z[i]
        obj = acc / n
        acc = 0.0
        for j in range(p):
            acc += fabs(w[j])
        obj += lam * acc
        objectives.append(obj)
        if max_rel < tol:
            break

    return w_arr, bias, sweeps, objectives
