from __future__ import annotations

import math

import numpy as np


def round_half_up(x):
    return int(math.floor(x + 0.5))


def corrupt_for_masked_modeling(frames, rng, rate=0.2, noise_fraction=0.1):
    """Corrupt ``round(rate*T)`` frames chosen without replacement.

    ``round(noise_fraction * modified)`` of them become N(0, I) noise, the
    rest are zeroed (half-up rounding both times). Returns the corrupted copy
    and a boolean mask of modified frames; other rows are bit-identical.
    """
    frames = np.asarray(frames, dtype=np.float64)
    T = frames.shape[0]
    n_mod = min(T, round_half_up(rate * T))
    n_noise = round_half_up(noise_fraction * n_mod)
    chosen = rng.choice(T, size=n_mod, replace=False)
    out = frames.copy()
    mask = np.zeros(T, dtype=bool)
    mask[chosen] = True
    noise_rows = chosen[:n_noise]
    out[noise_rows] = rng.standard_normal((n_noise,) + frames.shape[1:])
    out[chosen[n_noise:]] = 0.0
    return out, mask


def frame_keep_mask(rng, shape, drop_p):
    """0/1 array; each frame dropped independently with probability ``drop_p``."""
    return (rng.random(shape) >= drop_p).astype(np.float64)
