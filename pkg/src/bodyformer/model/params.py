"""Learnable state of the network, keyed by dotted names."""
from __future__ import annotations

import dataclasses
import hashlib

import numpy as np

from ..errors import ConfigError
from ..numerics import Tensor
from ..numerics.layers import (init_attention, init_feed_forward, init_layer_norm,
                               init_linear)
from .config import ModelConfig

# name prefixes owned by each sub-network
ENCODER_GROUP = ("speech_proj.", "speech_embed.", "encoder.")
DECODER_GROUP = ("motion_proj.", "motion_embed.", "decoder.", "start_token", "out_proj.")
LATENT_GROUP = ("seq_embed.", "posterior.", "prior.")


def frequency_ladder(d_model):
    """Standard sinusoid ladder 10000^(-2i/d) for i < d/2."""
    return 10000.0 ** (-2.0 * np.arange(d_model // 2) / d_model)


def _init_mab(rng, d, ff, prefix, p):
    init_attention(rng, d, f"{prefix}.attn", p)
    init_layer_norm(d, f"{prefix}.norm1", p)
    init_feed_forward(rng, d, ff, d, f"{prefix}.ff", p)
    init_layer_norm(d, f"{prefix}.norm2", p)


def _init_embed(cfg, prefix, p):
    p[f"{prefix}.gpe_freqs"] = Tensor(frequency_ladder(cfg.d_model), True)
    p[f"{prefix}.mpe_freqs"] = Tensor(np.tile(frequency_ladder(cfg.d_model), (cfg.modes, 1)), True)
    init_layer_norm(cfg.d_model, f"{prefix}.norm", p)


class ModelParams:
    """Ordered mapping name -> :class:`Tensor` plus the config that shaped it."""

    def __init__(self, config, tensors):
        self.config = config
        self.tensors = dict(tensors)
        for name, t in self.tensors.items():
            t.name = name

    def __getitem__(self, name):
        return self.tensors[name]

    def __contains__(self, name):
        return name in self.tensors

    def __iter__(self):
        return iter(self.tensors)

    def items(self):
        return self.tensors.items()

    def group(self, prefixes, exclude=()):
        return {k: t for k, t in self.tensors.items()
                if k.startswith(tuple(prefixes)) and not any(k.startswith(e) for e in exclude)}

    def n_parameters(self):
        return int(sum(t.data.size for t in self.tensors.values()))

    def zero_grad(self):
        for t in self.tensors.values():
            t.grad = None

    def copy(self):
        return ModelParams(self.config, {k: Tensor(t.data.copy(), True)
                                         for k, t in self.tensors.items()})

    def to_arrays(self):
        return {k: t.data for k, t in self.tensors.items()}

    def checksum(self, prefixes=None):
        h = hashlib.sha256()
        for k, t in self.tensors.items():
            if prefixes is None or k.startswith(tuple(prefixes)):
                h.update(k.encode())
                h.update(np.ascontiguousarray(t.data).tobytes())
        return h.hexdigest()

    @classmethod
    def from_arrays(cls, config, arrays):
        expected = init_params(config, np.random.default_rng(0))
        missing = [k for k in expected if k not in arrays]
        if missing:
            raise ConfigError(f"checkpoint lacks {len(missing)} parameters, e.g. {missing[0]}")
        tensors = {}
        for k, ref in expected.items():
            a = np.asarray(arrays[k], dtype=np.float64)
            if a.shape != ref.shape:
                raise ConfigError(f"parameter {k}: checkpoint shape {a.shape}, config expects {ref.shape}")
            tensors[k] = Tensor(a.copy(), True)
        return cls(config, tensors)


def init_params(config: ModelConfig, rng) -> ModelParams:
    d, ff = config.d_model, config.ff_dim
    p = {}
    init_feed_forward(rng, config.speech_dim, d, d, "speech_proj", p)
    init_feed_forward(rng, config.pose_dim, d, d, "motion_proj", p)
    _init_embed(config, "speech_embed", p)
    _init_embed(config, "motion_embed", p)
    for i in range(config.enc_layers):
        pre = f"encoder.{i}"
        init_attention(rng, d, f"{pre}.self_attn", p)
        init_layer_norm(d, f"{pre}.norm1", p)
        init_feed_forward(rng, d, ff, d, f"{pre}.ff", p)
        init_layer_norm(d, f"{pre}.norm2", p)
    for i in range(config.dec_layers):
        pre = f"decoder.{i}"
        init_attention(rng, d, f"{pre}.self_attn", p)
        init_layer_norm(d, f"{pre}.norm1", p)
        init_attention(rng, d, f"{pre}.cross_attn", p)
        init_layer_norm(d, f"{pre}.norm2", p)
        init_feed_forward(rng, d, ff, d, f"{pre}.ff", p)
        init_layer_norm(d, f"{pre}.norm3", p)
    p["start_token"] = Tensor(rng.normal(0.0, 0.02, d), True)
    init_linear(rng, d, config.pose_dim, "out_proj", p)
    _init_mab(rng, d, ff, "seq_embed.mab0", p)
    _init_mab(rng, d, ff, "seq_embed.mab1", p)
    init_feed_forward(rng, d, ff, d, "seq_embed.pma.ff", p)
    p["seq_embed.pma.seed"] = Tensor(rng.normal(0.0, 1.0 / np.sqrt(d), (config.pma_seeds, d)), True)
    _init_mab(rng, d, ff, "seq_embed.pma.mab", p)
    init_linear(rng, d * config.pma_seeds, d, "posterior.mu", p, scale=0.1)
    init_linear(rng, d * config.pma_seeds, d, "posterior.logvar", p, scale=0.1)
    p["prior.mu"] = Tensor(np.zeros(d), True)
    p["prior.logvar"] = Tensor(np.zeros(d), True)
    return ModelParams(config, p)


def config_to_dict(config):
    return dataclasses.asdict(config)
