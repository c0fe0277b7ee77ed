"""Adam with cosine learning-rate decay; deterministic parameter ordering."""

from __future__ import annotations

import numpy as np


def cosine_lr(base_lr: float, step: int, total_steps: int, min_frac: float = 0.0) -> float:
    """Learning rate for 1-based ``step`` under half-cosine decay."""
    if total_steps <= 1:
        return base_lr
    progress = (step - 1) / (total_steps - 1)
    frac = min_frac + (1.0 - min_frac) * 0.5 * (1.0 + np.cos(np.pi * progress))
    return base_lr * float(frac)


class Adam:
    """Adaptive-moment gradient descent over a name -> array parameter dict."""

    def __init__(self, params: dict, lr: float, total_steps: int,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 min_lr_frac: float = 0.0):
        self.lr = lr
        self.total_steps = total_steps
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.min_lr_frac = min_lr_frac
        self.t = 0
        self._m = {k: np.zeros_like(v) for k, v in params.items()}
        self._v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict, grads: dict) -> float:
        """Apply one update in place; returns the learning rate used."""
        self.t += 1
        lr_t = cosine_lr(self.lr, self.t, self.total_steps, self.min_lr_frac)
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name in sorted(params):
            g = grads.get(name)
            if g is None:
                continue
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            params[name] -= (lr_t * update).astype(params[name].dtype, copy=False)
        return lr_t
