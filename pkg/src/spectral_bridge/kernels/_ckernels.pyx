# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled implementations of the training hot kernels.

Semantics mirror spectral_bridge.kernels._numpy; the fused loops avoid the
temporaries and repeated passes of the numpy fallback.
"""

import numpy as np

cimport cython
cimport numpy as cnp
from libc.math cimport erf, exp, sqrt

cnp.import_array()

ctypedef fused floating:
    float
    double

cdef double SQRT1_2 = sqrt(0.5)
cdef double INV_SQRT_2PI = 1.0 / sqrt(2.0 * 3.14159265358979323846)


def layer_norm_forward(floating[:, ::1] x, floating[::1] gamma, floating[::1] beta, double eps):
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1]
    cdef Py_ssize_t i, j
    cdef double acc, mu, var, r

    if floating is float:
        dtype = np.float32
    else:
        dtype = np.float64
    y_arr = np.empty((n, d), dtype=dtype)
    mean_arr = np.empty(n, dtype=dtype)
    rstd_arr = np.empty(n, dtype=dtype)
    cdef floating[:, ::1] y = y_arr
    cdef floating[::1] mean = mean_arr
    cdef floating[::1] rstd = rstd_arr

    for i in range(n):
        acc = 0.0
        for j in range(d):
            acc += x[i, j]
        mu = acc / d
        acc = 0.0
        for j in range(d):
            acc += (x[i, j] - mu) * (x[i, j] - mu)
        var = acc / d
        r = 1.0 / sqrt(var + eps)
        mean[i] = <floating> mu
        rstd[i] = <floating> r
        for j in range(d):
            y[i, j] = <floating> ((x[i, j] - mu) * r * gamma[j] + beta[j])
    return y_arr, mean_arr, rstd_arr


def layer_norm_backward(floating[:, ::1] dy, floating[:, ::1] x, floating[::1] gamma,
                        floating[::1] mean, floating[::1] rstd):
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1]
    cdef Py_ssize_t i, j
    cdef double mu, r, xhat, dxh, m1, m2

    if floating is float:
        dtype = np.float32
    else:
        dtype = np.float64
    dx_arr = np.empty((n, d), dtype=dtype)
    dgamma_arr = np.zeros(d, dtype=dtype)
    dbeta_arr = np.zeros(d, dtype=dtype)
    cdef floating[:, ::1] dx = dx_arr
    cdef floating[::1] dgamma = dgamma_arr
    cdef floating[::1] dbeta = dbeta_arr

    for i in range(n):
        mu = mean[i]
        r = rstd[i]
        m1 = 0.0
        m2 = 0.0
        for j in range(d):
            xhat = (x[i, j] - mu) * r
            dxh = dy[i, j] * gamma[j]
            dgamma[j] += <floating> (dy[i, j] * xhat)
            dbeta[j] += dy[i, j]
            m1 += dxh
            m2 += dxh * xhat
        m1 /= d
        m2 /= d
        for j in range(d):
            xhat = (x[i, j] - mu) * r
            dxh = dy[i, j] * gamma[j]
            dx[i, j] = <floating> (r * (dxh - m1 - xhat * m2))
    return dx_arr, dgamma_arr, dbeta_arr


def attention_forward(floating[:, :, ::1] q, floating[:, :, ::1] k, floating[:, :, ::1] v,
                      double scale):
    cdef Py_ssize_t n = q.shape[0], t = q.shape[1], dh = q.shape[2]
    cdef Py_ssize_t b, i, j, h
    cdef double s, mx, denom, acc

    if floating is float:
        dtype = np.float32
    else:
        dtype = np.float64
    out_arr = np.empty((n, t, dh), dtype=dtype)
    probs_arr = np.empty((n, t, t), dtype=dtype)
    scores_arr = np.empty(t, dtype=np.float64)
    cdef floating[:, :, ::1] out = out_arr
    cdef floating[:, :, ::1] probs = probs_arr
    cdef double[::1] scores = scores_arr

    for b in range(n):
        for i in range(t):
            mx = -1e300
            for j in range(t):
                s = 0.0
                for h in range(dh):
                    s += q[b, i, h] * k[b, j, h]
                s *= scale
                scores[j] = s
                if s > mx:
                    mx = s
            denom = 0.0
            for j in range(t):
                s = exp(scores[j] - mx)
                scores[j] = s
                denom += s
            for j in range(t):
                probs[b, i, j] = <floating> (scores[j] / denom)
            for h in range(dh):
                acc = 0.0
                for j in range(t):
                    acc += probs[b, i, j] * v[b, j, h]
                out[b, i, h] = <floating> acc
    return out_arr, probs_arr


def attention_backward(floating[:, :, ::1] dout, floating[:, :, ::1] q, floating[:, :, ::1] k,
                       floating[:, :, ::1] v, floating[:, :, ::1] probs, double scale):
    cdef Py_ssize_t n = q.shape[0], t = q.shape[1], dh = q.shape[2]
    cdef Py_ssize_t b, i, j, h
    cdef double inner, dp, ds, acc

    if floating is float:
        dtype = np.float32
    else:
        dtype = np.float64
    dq_arr = np.zeros((n, t, dh), dtype=dtype)
    dk_arr = np.zeros((n, t, dh), dtype=dtype)
    dv_arr = np.zeros((n, t, dh), dtype=dtype)
    dprobs_arr = np.empty(t, dtype=np.float64)
    cdef floating[:, :, ::1] dq = dq_arr
    cdef floating[:, :, ::1] dk = dk_arr
    cdef floating[:, :, ::1] dv = dv_arr
    cdef double[::1] dprobs = dprobs_arr

    for b in range(n):
        for i in range(t):
            inner = 0.0
            for j in range(t):
                dp = 0.0
                for h in range(dh):
                    dp += dout[b, i, h] * v[b, j, h]
                dprobs[j] = dp
                inner += dp * probs[b, i, j]
            for j in range(t):
                ds = probs[b, i, j] * (dprobs[j] - inner) * scale
                for h in range(dh):
                    dq[b, i, h] += <floating> (ds * k[b, j, h])
                    dk[b, j, h] += <floating> (ds * q[b, i, h])
            for j in range(t):
                for h in range(dh):
                    dv[b, j, h] += <floating> (probs[b, i, j] * dout[b, i, h])
    return dq_arr, dk_arr, dv_arr


def gelu_forward(floating[::1] x):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i
    cdef double xv

    if floating is float:
        dtype = np.float32
    else:
        dtype = np.float64
    y_arr = np.empty(n, dtype=dtype)
    cdef floating[::1] y = y_arr
    for i in range(n):
        xv = x[i]
        y[i] = <floating> (0.5 * xv * (1.0 + erf(xv * SQRT1_2)))
    return y_arr


def gelu_backward(floating[::1] dy, floating[::1] x):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i
    cdef double xv, cdf, pdf

    if floating is float:
        dtype = np.float32
    else:
        dtype = np.float64
    dx_arr = np.empty(n, dtype=dtype)
    cdef floating[::1] dx = dx_arr
    for i in range(n):
        xv = x[i]
        cdf = 0.5 * (1.0 + erf(xv * SQRT1_2))
        pdf = INV_SQRT_2PI * exp(-0.5 * xv * xv)
        dx[i] = <floating> (dy[i] * (cdf + xv * pdf))
    return dx_arr
