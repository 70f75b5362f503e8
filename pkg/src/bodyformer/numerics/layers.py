"""Parameter containers and the dense layers built on the autodiff ops."""
from __future__ import annotations

import numpy as np

from ..errors import ConfigError, DimensionError
from . import autodiff as ad
from .autodiff import Tensor


def init_linear(rng, fan_in, fan_out, prefix, params, scale=1.0):
    """Add ``prefix.w`` (fan_in x fan_out) and ``prefix.b`` to ``params``."""
    bound = scale * np.sqrt(6.0 / (fan_in + fan_out))
    params[f"{prefix}.w"] = Tensor(rng.uniform(-bound, bound, (fan_in, fan_out)), True, f"{prefix}.w")
    params[f"{prefix}.b"] = Tensor(np.zeros(fan_out), True, f"{prefix}.b")


def init_layer_norm(d, prefix, params):
    params[f"{prefix}.gain"] = Tensor(np.ones(d), True, f"{prefix}.gain")
    params[f"{prefix}.bias"] = Tensor(np.zeros(d), True, f"{prefix}.bias")


def init_attention(rng, d, prefix, params):
    for name in ("q", "k", "v", "o"):
        init_linear(rng, d, d, f"{prefix}.{name}", params)


def init_feed_forward(rng, d_in, d_hidden, d_out, prefix, params):
    init_linear(rng, d_in, d_hidden, f"{prefix}.fc1", params)
    init_linear(rng, d_hidden, d_out, f"{prefix}.fc2", params)


def linear(x, params, prefix):
    x = ad.as_tensor(x)
    w = params[f"{prefix}.w"]
    if x.shape[-1] != w.shape[0]:
        raise DimensionError(f"{prefix}: input width {x.shape[-1]} != {w.shape[0]}")
    if x.ndim == 1:
        return ad.reshape(ad.matmul(ad.reshape(x, (1, -1)), w), (-1,)) + params[f"{prefix}.b"]
    return ad.matmul(x, w) + params[f"{prefix}.b"]


def layer_norm(x, params, prefix, eps=1e-5):
    return ad.layer_norm(x, params[f"{prefix}.gain"], params[f"{prefix}.bias"], eps)


def feed_forward(x, params, prefix):
    """FC -> GELU -> FC, applied independently to every row."""
    return linear(ad.gelu(linear(x, params, f"{prefix}.fc1")), params, f"{prefix}.fc2")


def _split_heads(x, heads):
    *lead, t, d = x.shape
    x = ad.reshape(x, (*lead, t, heads, d // heads))
    return ad.swapaxes(x, -2, -3)


def _merge_heads(x):
    x = ad.swapaxes(x, -2, -3)
    *lead, t, h, dh = x.shape
    return ad.reshape(x, (*lead, t, h * dh))


def multi_head_attention(q, k, v, heads, params, prefix, mask=None):
    """Scaled dot-product attention over ``heads`` heads.

    q is (..., Tq, d); k and v are (..., Tk, d). ``mask`` is a boolean
    (Tq, Tk) "allowed" matrix shared across heads and batch entries.
    """
    d = q.shape[-1]
    if heads < 1 or d % heads:
        raise ConfigError(f"model width {d} is not divisible by {heads} heads")
    if k.shape[-1] != d or v.shape[-1] != d or k.shape[-2] != v.shape[-2]:
        raise DimensionError(f"attention shapes disagree: q{q.shape} k{k.shape} v{v.shape}")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (q.shape[-2], k.shape[-2]):
            raise DimensionError(f"mask shape {mask.shape} != {(q.shape[-2], k.shape[-2])}")
    qh = _split_heads(linear(q, params, f"{prefix}.q"), heads)
    kh = _split_heads(linear(k, params, f"{prefix}.k"), heads)
    vh = _split_heads(linear(v, params, f"{prefix}.v"), heads)
    scores = ad.matmul(qh, ad.swapaxes(kh, -1, -2)) * (1.0 / np.sqrt(d // heads))
    weights = ad.softmax(scores, mask)
    return linear(_merge_heads(ad.matmul(weights, vh)), params, f"{prefix}.o")


def causal_mask(t):
    """Lower-triangular "allowed" matrix: row i may see columns 0..i."""
    return np.tril(np.ones((t, t), dtype=bool))
