"""Layers as pure functions over a name -> array parameter dict.

Every forward returns (output, cache); the matching backward consumes the
cache, adds parameter gradients into a grads dict, and returns the input
gradient. Row-wise reductions (layer norm, softmax attention, GELU) run on
the kernels backend; matrix products stay in numpy/BLAS.
"""

from __future__ import annotations

import numpy as np

from .. import kernels

LN_EPS = 1e-5
INIT_STD = 0.02


def _is_float(a) -> bool:
    return isinstance(a, np.ndarray) and a.dtype in (np.float32, np.float64)


def add_grad(grads: dict, name: str, value: np.ndarray) -> None:
    if name in grads:
        grads[name] += value
    else:
        grads[name] = np.array(value, copy=True)


# ---------------------------------------------------------------------------
# linear


def init_linear(params: dict, rng: np.random.Generator, name: str, n_in: int, n_out: int,
                dtype=np.float32, std: float | None = None) -> None:
    if std is None:
        std = float(np.sqrt(2.0 / (n_in + n_out)))  # Xavier-normal
    params[f"{name}.w"] = rng.normal(0.0, std, size=(n_out, n_in)).astype(dtype)
    params[f"{name}.b"] = np.zeros(n_out, dtype=dtype)


def linear_forward(x: np.ndarray, params: dict, name: str):
    w = params[f"{name}.w"]
    y = x @ w.T + params[f"{name}.b"]
    return y, (x,)


def linear_backward(dy: np.ndarray, cache, params: dict, grads: dict, name: str) -> np.ndarray:
    (x,) = cache
    w = params[f"{name}.w"]
    xf = x.reshape(-1, x.shape[-1])
    dyf = dy.reshape(-1, dy.shape[-1])
    add_grad(grads, f"{name}.w", dyf.T @ xf)
    add_grad(grads, f"{name}.b", dyf.sum(axis=0))
    return dy @ w


# ---------------------------------------------------------------------------
# layer norm (over the last axis)


def init_layer_norm(params: dict, name: str, dim: int, dtype=np.float32) -> None:
    params[f"{name}.g"] = np.ones(dim, dtype=dtype)
    params[f"{name}.b"] = np.zeros(dim, dtype=dtype)


def layer_norm_forward(x: np.ndarray, params: dict, name: str):
    d = x.shape[-1]
    x2 = np.ascontiguousarray(x.reshape(-1, d))
    y, mean, rstd = kernels.layer_norm_forward(x2, params[f"{name}.g"], params[f"{name}.b"], LN_EPS)
    return y.reshape(x.shape), (x2, mean, rstd, x.shape)


def layer_norm_backward(dy: np.ndarray, cache, params: dict, grads: dict, name: str) -> np.ndarray:
    x2, mean, rstd, shape = cache
    dy2 = np.ascontiguousarray(dy.reshape(x2.shape))
    dx, dgamma, dbeta = kernels.layer_norm_backward(dy2, x2, params[f"{name}.g"], mean, rstd)
    add_grad(grads, f"{name}.g", dgamma)
    add_grad(grads, f"{name}.b", dbeta)
    return dx.reshape(shape)


# ---------------------------------------------------------------------------
# multi-head self-attention over the middle (token) axis of (n, t, d)


def init_attention(params: dict, rng: np.random.Generator, name: str, dim: int,
                   dtype=np.float32) -> None:
    for part in ("q", "k", "v", "o"):
        init_linear(params, rng, f"{name}.{part}", dim, dim, dtype=dtype)
    # Residual branches start at zero so blocks are identity maps at init;
    # speeds up early convergence markedly at these model sizes.
    params[f"{name}.o.w"][:] = 0.0


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    n, t, d = x.shape
    dh = d // heads
    return np.ascontiguousarray(x.reshape(n, t, heads, dh).transpose(0, 2, 1, 3).reshape(n * heads, t, dh))


def _merge_heads(x: np.ndarray, heads: int) -> np.ndarray:
    nh, t, dh = x.shape
    n = nh // heads
    return np.ascontiguousarray(x.reshape(n, heads, t, dh).transpose(0, 2, 1, 3).reshape(n, t, heads * dh))


def attention_forward(x: np.ndarray, params: dict, name: str, heads: int):
    """Self-attention among the t tokens of each (n, t, d) slice."""
    q, cq = linear_forward(x, params, f"{name}.q")
    k, ck = linear_forward(x, params, f"{name}.k")
    v, cv = linear_forward(x, params, f"{name}.v")
    dh = x.shape[-1] // heads
    scale = 1.0 / np.sqrt(dh)
    qh, kh, vh = (_split_heads(a, heads) for a in (q, k, v))
    ctx, probs = kernels.attention_forward(qh, kh, vh, scale)
    merged = _merge_heads(ctx, heads)
    out, co = linear_forward(merged, params, f"{name}.o")
    return out, (cq, ck, cv, co, qh, kh, vh, probs, heads, scale)


def attention_backward(dy: np.ndarray, cache, params: dict, grads: dict, name: str) -> np.ndarray:
    cq, ck, cv, co, qh, kh, vh, probs, heads, scale = cache
    dmerged = linear_backward(dy, co, params, grads, f"{name}.o")
    dctx = _split_heads(dmerged, heads)
    dqh, dkh, dvh = kernels.attention_backward(dctx, qh, kh, vh, probs, scale)
    dq = _merge_heads(dqh, heads)
    dk = _merge_heads(dkh, heads)
    dv = _merge_heads(dvh, heads)
    dx = linear_backward(dq, cq, params, grads, f"{name}.q")
    dx += linear_backward(dk, ck, params, grads, f"{name}.k")
    dx += linear_backward(dv, cv, params, grads, f"{name}.v")
    return dx


# ---------------------------------------------------------------------------
# MLP with GELU


def init_mlp(params: dict, rng: np.random.Generator, name: str, dim: int, hidden: int,
             dtype=np.float32) -> None:
    init_linear(params, rng, f"{name}.fc1", dim, hidden, dtype=dtype)
    init_linear(params, rng, f"{name}.fc2", hidden, dim, dtype=dtype)
    params[f"{name}.fc2.w"][:] = 0.0


def mlp_forward(x: np.ndarray, params: dict, name: str):
    h, c1 = linear_forward(x, params, f"{name}.fc1")
    a = kernels.gelu_forward(h)
    y, c2 = linear_forward(a, params, f"{name}.fc2")
    return y, (c1, h, c2)


def mlp_backward(dy: np.ndarray, cache, params: dict, grads: dict, name: str) -> np.ndarray:
    c1, h, c2 = cache
    da = linear_backward(dy, c2, params, grads, f"{name}.fc2")
    dh = kernels.gelu_backward(da, h)
    return linear_backward(dh, c1, params, grads, f"{name}.fc1")


# ---------------------------------------------------------------------------
# pre-norm transformer block and stacks


def init_block(params: dict, rng: np.random.Generator, name: str, dim: int, mlp_ratio: int = 4,
               dtype=np.float32) -> None:
    init_layer_norm(params, f"{name}.ln1", dim, dtype=dtype)
    init_attention(params, rng, f"{name}.attn", dim, dtype=dtype)
    init_layer_norm(params, f"{name}.ln2", dim, dtype=dtype)
    init_mlp(params, rng, f"{name}.mlp", dim, mlp_ratio * dim, dtype=dtype)


def block_forward(x: np.ndarray, params: dict, name: str, heads: int):
    h, c_ln1 = layer_norm_forward(x, params, f"{name}.ln1")
    a, c_attn = attention_forward(h, params, f"{name}.attn", heads)
    x1 = x + a
    h2, c_ln2 = layer_norm_forward(x1, params, f"{name}.ln2")
    m, c_mlp = mlp_forward(h2, params, f"{name}.mlp")
    return x1 + m, (c_ln1, c_attn, c_ln2, c_mlp)


def block_backward(dy: np.ndarray, cache, params: dict, grads: dict, name: str) -> np.ndarray:
    c_ln1, c_attn, c_ln2, c_mlp = cache
    dh2 = mlp_backward(dy, c_mlp, params, grads, f"{name}.mlp")
    dx1 = dy + layer_norm_backward(dh2, c_ln2, params, grads, f"{name}.ln2")
    da = attention_backward(dx1, c_attn, params, grads, f"{name}.attn")
    dx = dx1 + layer_norm_backward(da, c_ln1, params, grads, f"{name}.ln1")
    return dx


def init_stack(params: dict, rng: np.random.Generator, name: str, layers: int, dim: int,
               mlp_ratio: int = 4, dtype=np.float32) -> None:
    for i in range(layers):
        init_block(params, rng, f"{name}{i}", dim, mlp_ratio=mlp_ratio, dtype=dtype)
    init_layer_norm(params, f"{name}_norm", dim, dtype=dtype)


def stack_forward(x: np.ndarray, params: dict, name: str, layers: int, heads: int):
    caches = []
    for i in range(layers):
        x, c = block_forward(x, params, f"{name}{i}", heads)
        caches.append(c)
    x, c_norm = layer_norm_forward(x, params, f"{name}_norm")
    return x, (caches, c_norm)


def stack_backward(dy: np.ndarray, cache, params: dict, grads: dict, name: str) -> np.ndarray:
    caches, c_norm = cache
    dy = layer_norm_backward(dy, c_norm, params, grads, f"{name}_norm")
    for i in reversed(range(len(caches))):
        dy = block_backward(dy, caches[i], params, grads, f"{name}{i}")
    return dy


# ---------------------------------------------------------------------------
# ReLU (regressor plumbing)


def relu_forward(x: np.ndarray):
    mask = x > 0
    return x * mask, mask


def relu_backward(dy: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return dy * mask
