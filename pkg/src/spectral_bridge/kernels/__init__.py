"""Hot numerical kernels with a compiled core and a pure-numpy fallback.

The compiled extension (built from _ckernels.pyx) is used when importable;
otherwise the numpy implementation takes over. Selection can be forced with
the environment variable SPECTRAL_BRIDGE_BACKEND=compiled|numpy (read at
import time). Both backends share semantics; summation order may differ, so
cross-backend comparisons are tolerance-based while run-to-run results within
one backend are bit-identical.
"""

from __future__ import annotations

import os
from types import ModuleType

import numpy as np

from . import _numpy

try:
    from . import _ckernels
except ImportError:
    _ckernels = None

_BACKENDS: dict[str, ModuleType] = {"numpy": _numpy}
if _ckernels is not None:
    _BACKENDS["compiled"] = _ckernels

_requested = os.environ.get("SPECTRAL_BRIDGE_BACKEND", "auto")
if _requested == "auto":
    BACKEND = "compiled" if _ckernels is not None else "numpy"
elif _requested in _BACKENDS:
    BACKEND = _requested
else:
    raise ImportError(
        f"SPECTRAL_BRIDGE_BACKEND={_requested!r} unavailable; "
        f"choices: {sorted(_BACKENDS)} or 'auto'"
    )

_active = _BACKENDS[BACKEND]


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def get_backend(name: str) -> ModuleType:
    return _BACKENDS[name]


def layer_norm_forward(x, gamma, beta, eps=1e-5, backend=None):
    """Row-wise layer norm of a 2-D array; returns (y, mean, rstd)."""
    mod = _BACKENDS[backend] if backend else _active
    return mod.layer_norm_forward(np.ascontiguousarray(x), gamma, beta, eps)


def layer_norm_backward(dy, x, gamma, mean, rstd, backend=None):
    mod = _BACKENDS[backend] if backend else _active
    return mod.layer_norm_backward(np.ascontiguousarray(dy), np.ascontiguousarray(x), gamma, mean, rstd)


def attention_forward(q, k, v, scale, backend=None):
    """Softmax attention over (n, t, head_dim) slices; returns (out, probs)."""
    mod = _BACKENDS[backend] if backend else _active
    return mod.attention_forward(
        np.ascontiguousarray(q), np.ascontiguousarray(k), np.ascontiguousarray(v), scale
    )


def attention_backward(dout, q, k, v, probs, scale, backend=None):
    mod = _BACKENDS[backend] if backend else _active
    return mod.attention_backward(
        np.ascontiguousarray(dout),
        np.ascontiguousarray(q),
        np.ascontiguousarray(k),
        np.ascontiguousarray(v),
        np.ascontiguousarray(probs),
        scale,
    )


def gelu_forward(x, backend=None):
    """Exact erf-based GELU, elementwise over any shape."""
    mod = _BACKENDS[backend] if backend else _active
    if mod is _numpy:
        return mod.gelu_forward(x)
    flat = np.ascontiguousarray(x).reshape(-1)
    return mod.gelu_forward(flat).reshape(x.shape)


def gelu_backward(dy, x, backend=None):
    mod = _BACKENDS[backend] if backend else _active
    if mod is _numpy:
        return mod.gelu_backward(dy, x)
    flat_dy = np.ascontiguousarray(dy).reshape(-1)
    flat_x = np.ascontiguousarray(x).reshape(-1)
    return mod.gelu_backward(flat_dy, flat_x).reshape(x.shape)
