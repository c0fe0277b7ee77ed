"""Pure-numpy implementations of the training hot kernels.

These are the fallback backend and the reference semantics for the compiled
extension. Matrix products delegate to BLAS either way; what the compiled
backend fuses are the row-wise reductions around them.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

SQRT1_2 = float(np.sqrt(0.5))
INV_SQRT_2PI = float(1.0 / np.sqrt(2.0 * np.pi))


def layer_norm_forward(x, gamma, beta, eps):
    """Row-wise layer norm. x: (n, d). Returns (y, mean, rstd)."""
    mean = x.mean(axis=1)
    var = x.var(axis=1)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean[:, None]) * rstd[:, None]
    y = xhat * gamma + beta
    return y.astype(x.dtype, copy=False), mean.astype(x.dtype, copy=False), rstd.astype(x.dtype, copy=False)


def layer_norm_backward(dy, x, gamma, mean, rstd):
    """Gradients of layer_norm_forward. Returns (dx, dgamma, dbeta)."""
    xhat = (x - mean[:, None]) * rstd[:, None]
    dbeta = dy.sum(axis=0)
    dgamma = (dy * xhat).sum(axis=0)
    dxhat = dy * gamma
    m1 = dxhat.mean(axis=1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=1, keepdims=True)
    dx = rstd[:, None] * (dxhat - m1 - xhat * m2)
    return dx.astype(x.dtype, copy=False), dgamma, dbeta


def softmax_rows(scores):
    """Softmax over the last axis, numerically shifted."""
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def attention_forward(q, k, v, scale):
    """Scaled dot-product attention over (n, t, h) slices.

    Returns (out, probs) with probs kept for the backward pass.
    """
    scores = np.matmul(q, np.swapaxes(k, 1, 2)) * scale
    probs = softmax_rows(scores)
    out = np.matmul(probs, v)
    return out.astype(q.dtype, copy=False), probs.astype(q.dtype, copy=False)


def attention_backward(dout, q, k, v, probs, scale):
    """Gradients of attention_forward. Returns (dq, dk, dv)."""
    dv = np.matmul(np.swapaxes(probs, 1, 2), dout)
    dprobs = np.matmul(dout, np.swapaxes(v, 1, 2))
    inner = (dprobs * probs).sum(axis=-1, keepdims=True)
    dscores = probs * (dprobs - inner)
    dq = np.matmul(dscores, k) * scale
    dk = np.matmul(np.swapaxes(dscores, 1, 2), q) * scale
    return (
        dq.astype(q.dtype, copy=False),
        dk.astype(q.dtype, copy=False),
        dv.astype(q.dtype, copy=False),
    )


def gelu_forward(x):
    """Exact (erf-based) GELU."""
    return (0.5 * x * (1.0 + erf(x * SQRT1_2))).astype(x.dtype, copy=False)


def gelu_backward(dy, x):
    cdf = 0.5 * (1.0 + erf(x * SQRT1_2))
    pdf = INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return (dy * (cdf + x * pdf)).astype(x.dtype, copy=False)
