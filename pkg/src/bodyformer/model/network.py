"""Forward passes of the speech-to-gesture network.

All functions are batch-polymorphic: sequence inputs are (..., T, width)
arrays or tensors, per-frame clocks and modes are (..., T) integer arrays.
"""
from __future__ import annotations

import numpy as np

from .. import numerics as nx
from ..errors import DimensionError, InputError
from ..features.modes import MODE_INDEX
from ..motion.sequence import MotionSequence
from ..numerics import Tensor
from ..numerics.layers import causal_mask, feed_forward, layer_norm, linear, multi_head_attention


def _t(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _mode_indices(modes):
    modes = np.asarray(modes)
    if modes.dtype.kind in "US":
        try:
            return np.vectorize(MODE_INDEX.__getitem__, otypes=[np.int64])(modes)
        except KeyError as exc:
            raise InputError(f"unknown speaking mode {exc.args[0]!r}") from None
    modes = modes.astype(np.int64)
    if modes.size and (modes.min() < 0 or modes.max() >= len(MODE_INDEX)):
        raise InputError(f"mode index outside 0..{len(MODE_INDEX) - 1}")
    return modes


# ----------------------------------------------------------------- pieces

def projection_net(x, params, prefix):
    """Row-wise FC -> GELU -> FC."""
    return feed_forward(_t(x), params, prefix)


def sinusoid(clocks, freqs):
    """Interleaved [sin(w_i t), cos(w_i t)] features.

    ``freqs`` is a (d/2,) tensor or one already gathered per frame
    (..., T, d/2); ``clocks`` broadcasts against its leading axes.
    """
    clocks = np.asarray(clocks, dtype=np.float64)[..., None]
    angle = freqs * clocks
    both = nx.stack([nx.sin(angle), nx.cos(angle)], axis=-1)
    return nx.reshape(both, angle.shape[:-1] + (2 * angle.shape[-1],))


def gpe(t, freqs):
    """Global positional embedding of frame index (or indices) ``t``."""
    t = np.asarray(t)
    if (t < 0).any():
        raise InputError("frame index must be non-negative")
    return sinusoid(t, _t(freqs))


def mpe(mode, t_local, mode_freqs):
    """Mode positional embedding: sinusoid on the local clock with the mode's frequencies."""
    idx = _mode_indices(mode)
    t_local = np.asarray(t_local)
    if (t_local < 0).any():
        raise InputError("local clock must be non-negative")
    return sinusoid(t_local, nx.take(_t(mode_freqs), idx, axis=0))


def embed(x, clocks, local_clocks, modes, params, prefix, scale=None):
    """LayerNorm(c * (x + GPE(t)) + MPE(m, t')) per frame."""
    x = _t(x)
    T = x.shape[-2]
    local_clocks = np.asarray(local_clocks)
    modes = np.asarray(modes)
    if np.shape(clocks)[-1] != T or local_clocks.shape[-1] != T or modes.shape[-1] != T:
        raise DimensionError("clock and mode arrays must have one entry per frame")
    c = params.config.embed_scale if scale is None else scale
    g = gpe(clocks, params[f"{prefix}.gpe_freqs"])
    m = mpe(modes, local_clocks, params[f"{prefix}.mpe_freqs"])
    return layer_norm((x + g) * c + m, params, f"{prefix}.norm", params.config.ln_eps)


def _check_length(T, params):
    if T > params.config.max_T:
        raise InputError(f"sequence of {T} frames exceeds max_T={params.config.max_T}")
    if T < 1:
        raise InputError("empty sequence")


# ----------------------------------------------------------------- encoder

def encode(speech, modes, local_clocks, params):
    """Bidirectional encoding of speech frames (..., T, speech_dim) -> (..., T, d)."""
    speech = _t(speech)
    cfg = params.config
    T = speech.shape[-2]
    _check_length(T, params)
    if speech.shape[-1] != cfg.speech_dim:
        raise DimensionError(f"speech width {speech.shape[-1]} != {cfg.speech_dim}")
    h = embed(projection_net(speech, params, "speech_proj"), np.arange(T), local_clocks, modes,
              params, "speech_embed")
    eps = cfg.ln_eps
    for i in range(cfg.enc_layers):
        pre = f"encoder.{i}"
        h = layer_norm(h + multi_head_attention(h, h, h, cfg.heads, params, f"{pre}.self_attn"),
                       params, f"{pre}.norm1", eps)
        h = layer_norm(h + feed_forward(h, params, f"{pre}.ff"), params, f"{pre}.norm2", eps)
    return h


def encode_features(feats, params):
    """Encode a :class:`SpeechFeatureSequence`."""
    return encode(feats.frames, feats.modes, feats.local_clocks, params)


# ----------------------------------------------------------------- decoder

def decoder_inputs(motion, params, shift=True, seed_pose=None, keep=None):
    """Projected decoder input rows.

    With ``shift`` row 0 is the start token (or the projected ``seed_pose``)
    and row i>0 holds pose i-1, so output row i predicts pose i. Without
    ``shift`` row i holds pose i. ``keep`` is an optional (..., n) 0/1 frame
    mask applied to the poses before projection (frame-level dropout).
    """
    motion = _t(motion)
    if motion.shape[-1] != params.config.pose_dim:
        raise DimensionError(f"pose width {motion.shape[-1]} != {params.config.pose_dim}")
    poses = motion[..., :-1, :] if shift else motion
    if keep is not None:
        poses = poses * np.asarray(keep, dtype=np.float64)[..., None]
    rows = projection_net(poses, params, "motion_proj") if poses.shape[-2] else None
    if not shift:
        return rows
    lead = motion.shape[:-2]
    if seed_pose is not None:
        first = projection_net(np.broadcast_to(np.asarray(seed_pose, dtype=np.float64),
                                               lead + (1, params.config.pose_dim)),
                               params, "motion_proj")
    else:
        first = nx.broadcast_to(nx.reshape(params["start_token"], (1, -1)),
                                lead + (1, params.config.d_model))
    return first if rows is None else nx.concat([first, rows], axis=-2)


def decoder_stack(x, enc, params, cross=True):
    """Post-LN decoder layers with causal self-attention.

    ``cross=False`` bypasses every cross-attention block (residual passes
    straight through), which is how the decoder is pre-trained on motion alone.
    """
    cfg = params.config
    eps = cfg.ln_eps
    mask = causal_mask(x.shape[-2])
    h = x
    for i in range(cfg.dec_layers):
        pre = f"decoder.{i}"
        h = layer_norm(h + multi_head_attention(h, h, h, cfg.heads, params, f"{pre}.self_attn", mask),
                       params, f"{pre}.norm1", eps)
        if cross:
            h = layer_norm(h + multi_head_attention(h, enc, enc, cfg.heads, params,
                                                    f"{pre}.cross_attn"),
                           params, f"{pre}.norm2", eps)
        h = layer_norm(h + feed_forward(h, params, f"{pre}.ff"), params, f"{pre}.norm3", eps)
    return h


def decode_hidden(motion, enc, eta, modes, local_clocks, params, cross=True, shift=True,
                  seed_pose=None, keep=None):
    """Decoder hidden states (..., T, d) before the output projection."""
    T = _t(motion).shape[-2]
    _check_length(T, params)
    modes = np.asarray(modes)[..., :T]
    local_clocks = np.asarray(local_clocks)[..., :T]
    x = decoder_inputs(motion, params, shift, seed_pose, keep)
    x = embed(x, np.arange(T), local_clocks, modes, params, "motion_embed")
    if eta is not None:
        x = x + nx.reshape(_t(eta), _t(eta).shape[:-1] + (1, params.config.d_model))
    return decoder_stack(x, enc, params, cross)


def decode_step_train(motion, enc, eta, modes, local_clocks, params, seed_pose=None, keep=None,
                      cross=True):
    """Teacher-forced decoder pass; output row i predicts pose i from poses < i."""
    h = decode_hidden(motion, enc, eta, modes, local_clocks, params, cross, True, seed_pose, keep)
    return linear(h, params, "out_proj")


# ------------------------------------------------------- variational parts

def mab(q, kv, params, prefix):
    """LayerNorm(H + FF(H)), H = LayerNorm(Q + Multihead(Q, K, V))."""
    cfg = params.config
    h = layer_norm(q + multi_head_attention(q, kv, kv, cfg.heads, params, f"{prefix}.attn"),
                   params, f"{prefix}.norm1", cfg.ln_eps)
    return layer_norm(h + feed_forward(h, params, f"{prefix}.ff"), params, f"{prefix}.norm2",
                      cfg.ln_eps)


def motion_tokens(motion, modes, local_clocks, params):
    """Embedded (unshifted) motion frames: the set fed to the sequence embedder."""
    motion = _t(motion)
    T = motion.shape[-2]
    return embed(projection_net(motion, params, "motion_proj"), np.arange(T),
                 np.asarray(local_clocks)[..., :T], np.asarray(modes)[..., :T], params,
                 "motion_embed")


def sequence_embed(tokens, params):
    """Two self-attention blocks then attention pooling against the learned seed.

    Returns (..., k*d); with the default single seed that is one d-vector.
    """
    tokens = _t(tokens)
    if tokens.shape[-2] < 1:
        raise InputError("sequence embedding of an empty sequence")
    h = mab(tokens, tokens, params, "seq_embed.mab0")
    h = mab(h, h, params, "seq_embed.mab1")
    z = feed_forward(h, params, "seq_embed.pma.ff")
    seed = params["seq_embed.pma.seed"]
    pooled = mab(seed, z, params, "seq_embed.pma.mab")
    if pooled.ndim == 2:  # unbatched: seed broadcast did not add a lead axis
        return nx.reshape(pooled, (-1,))
    return nx.reshape(pooled, pooled.shape[:-2] + (-1,))


def posterior(pooled, params):
    """(mu_q, sigma_q, logvar_q) from the pooled motion summary."""
    mu = linear(pooled, params, "posterior.mu")
    logvar = linear(pooled, params, "posterior.logvar")
    return mu, nx.exp(logvar * 0.5), logvar


def prior(params):
    """(mu, sigma) of the learnable diagonal Gaussian prior."""
    return params["prior.mu"], nx.exp(params["prior.logvar"] * 0.5)


def reparameterize(mu, sigma, noise):
    return mu + sigma * np.asarray(noise, dtype=np.float64)


def sample_prior(params, rng, n=None, sigma=None):
    """eta = mu + sigma * eps with eps ~ N(0, I); ``n`` draws a batch of them."""
    mu = params["prior.mu"].data
    sd = np.exp(0.5 * params["prior.logvar"].data) if sigma is None else np.asarray(sigma)
    shape = mu.shape if n is None else (n,) + mu.shape
    return mu + sd * rng.standard_normal(shape)


# -------------------------------------------------------------- generation

def generate(speech, params, rng, seed_pose=None, skeleton=None, eta=None):
    """Autoregressive rollout conditioned on a :class:`SpeechFeatureSequence`.

    The speech is encoded once, one latent vector is drawn from the prior for
    the whole sequence, and each step feeds every pose generated so far.
    Returns a :class:`MotionSequence` when ``skeleton`` is given, else the
    (T, pose_dim) array.
    """
    cfg = params.config
    T = len(speech)
    _check_length(T, params)
    with nx.no_grad():
        enc = encode(speech.frames, speech.modes, speech.local_clocks, params)
        if eta is None:
            eta = sample_prior(params, rng)
        out = np.zeros((T, cfg.pose_dim))
        buf = np.zeros((T, cfg.pose_dim))
        modes, clocks = speech.modes, speech.local_clocks
        for t in range(T):
            pred = decode_step_train(buf[:t + 1], enc, eta, modes[:t + 1], clocks[:t + 1], params,
                                     seed_pose=seed_pose)
            out[t] = pred.data[t]
            buf[t] = out[t]
    if skeleton is not None:
        return MotionSequence(out, skeleton, speech.fps)
    return out
