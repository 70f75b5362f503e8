"""Training objectives. Inputs may be tensors or arrays with optional batch axes."""
from __future__ import annotations

import numpy as np

from .. import numerics as nx
from ..errors import DimensionError, InputError
from ..numerics import Tensor
from .schedules import cyclical_lambda3


def _t(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def joint_prediction_loss(pred, target):
    """(1/T) sum_t ||pred_t - target_t||^2, averaged over any batch axes."""
    pred, target = _t(pred), _t(target)
    if pred.shape != target.shape:
        raise DimensionError(f"prediction {pred.shape} vs target {target.shape}")
    diff = pred - target
    per_seq = nx.mean(nx.tsum(diff * diff, axis=-1), axis=-1)
    return nx.mean(per_seq)


def magnitude_loss(pred, target):
    """Squared mismatch of per-joint frame-to-frame change magnitudes.

    (1/(T*J)) sum_{t>=1} sum_j (||dpred_{t,j}|| - ||dtarget_{t,j}||)^2, where
    d is the difference between consecutive frames of one joint's 6-vector.
    There are T-1 differences but the normaliser is T*J.
    """
    pred, target = _t(pred), _t(target)
    if pred.shape != target.shape:
        raise DimensionError(f"prediction {pred.shape} vs target {target.shape}")
    T, D = pred.shape[-2:]
    if T < 2:
        raise InputError("magnitude loss needs at least two frames")
    J = D // 6
    shape = pred.shape[:-1] + (J, 6)

    def step_norms(x):
        x = nx.reshape(x, shape)
        return nx.norm(x[..., 1:, :, :] - x[..., :-1, :, :], axis=-1)

    gap = step_norms(pred) - step_norms(target)
    per_seq = nx.tsum(nx.tsum(gap * gap, axis=-1), axis=-1) * (1.0 / (T * J))
    return nx.mean(per_seq)


def kl_divergence(mu_q, sigma_q, mu_p, sigma_p):
    """KL(N(mu_q, sigma_q^2) || N(mu_p, sigma_p^2)) for diagonal Gaussians.

    Summed over the last axis, averaged over any leading batch axes.
    """
    mu_q, sigma_q, mu_p, sigma_p = map(_t, (mu_q, sigma_q, mu_p, sigma_p))
    if (sigma_q.data <= 0).any() or (sigma_p.data <= 0).any():
        raise InputError("standard deviations must be strictly positive")
    diff = mu_q - mu_p
    var_p = sigma_p * sigma_p
    terms = (nx.log(sigma_p) - nx.log(sigma_q)
             + (sigma_q * sigma_q + diff * diff) / (var_p * 2.0) - 0.5)
    return nx.mean(nx.tsum(terms, axis=-1))


def kl_from_logvar(mu_q, logvar_q, mu_p, logvar_p):
    """Same divergence parameterised by log-variances (avoids log of exp)."""
    diff = mu_q - mu_p
    inv_var_p = nx.exp(-logvar_p)
    terms = (logvar_p - logvar_q) * 0.5 + (nx.exp(logvar_q) + diff * diff) * inv_var_p * 0.5 - 0.5
    return nx.mean(nx.tsum(terms, axis=-1))


def total_loss(l_g, l_m, l_kl, epoch, schedule):
    """lambda1 * L_g + lambda2 * L_m + lambda3(epoch) * L_KL."""
    lam3 = cyclical_lambda3(epoch, schedule)
    return l_g * schedule.lambda1 + l_m * schedule.lambda2 + l_kl * lam3


def masked_mse(pred, target, mask):
    """Mean squared error over the frames flagged in ``mask`` (..., T)."""
    pred, target = _t(pred), _t(target)
    mask = np.asarray(mask, dtype=np.float64)
    n = mask.sum() * pred.shape[-1]
    if n == 0:
        return nx.tsum(pred * 0.0)
    diff = (pred - target) * mask[..., None]
    return nx.tsum(diff * diff) * (1.0 / n)
