"""AdamW with decoupled weight decay, plus global-norm gradient clipping."""
from __future__ import annotations

import numpy as np

from ..errors import ConfigError


def adamw_step(params, grads, state, lr, betas=(0.9, 0.999), weight_decay=1e-2,
               eps=1e-8, step_index=1):
    """Update every array in ``params`` in place and return them.

    ``state`` maps the same keys to ``(m, v)`` moment buffers, also updated in
    place. ``step_index`` counts from 1 and drives the bias correction.
    """
    if lr <= 0:
        raise ConfigError(f"learning rate must be positive, got {lr}")
    b1, b2 = betas
    c1 = 1.0 - b1 ** step_index
    c2 = 1.0 - b2 ** step_index
    for key, p in params.items():
        g = grads.get(key)
        if g is None:
            g = np.zeros_like(p)
        m, v = state[key]
        p *= 1.0 - lr * weight_decay
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params


class AdamW:
    """Optimizer over a named subset of tensors."""

    def __init__(self, tensors, betas=(0.9, 0.999), weight_decay=1e-2, eps=1e-8):
        self.tensors = dict(tensors)
        self.betas = tuple(betas)
        self.weight_decay = weight_decay
        self.eps = eps
        self.step_count = 0
        self.state = {k: (np.zeros_like(t.data), np.zeros_like(t.data))
                      for k, t in self.tensors.items()}

    def step(self, lr):
        self.step_count += 1
        arrays = {k: t.data for k, t in self.tensors.items()}
        grads = {k: t.grad for k, t in self.tensors.items() if t.grad is not None}
        adamw_step(arrays, grads, self.state, lr, self.betas, self.weight_decay,
                   self.eps, self.step_count)

    def state_arrays(self):
        out = {}
        for k, (m, v) in self.state.items():
            out[f"adam.m/{k}"] = m
            out[f"adam.v/{k}"] = v
        return out

    def load_state_arrays(self, arrays, step_count):
        for k in self.state:
            self.state[k] = (np.array(arrays[f"adam.m/{k}"]), np.array(arrays[f"adam.v/{k}"]))
        self.step_count = int(step_count)


def clip_grad_norm(tensors, max_norm):
    """Scale gradients so their joint L2 norm is at most ``max_norm``; returns the pre-clip norm."""
    grads = [t.grad for t in tensors if t.grad is not None]
    total = float(np.sqrt(sum(float((g * g).sum()) for g in grads)))
    if max_norm is not None and total > max_norm:
        scale = max_norm / total
        for t in tensors:
            if t.grad is not None:
                t.grad = t.grad * scale
    return total
