from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError

EMBED_SCALE = float(np.sqrt(512.0 / 3.0))


@dataclass(frozen=True)
class ModelConfig:
    """Network sizes. Defaults are the full-scale setting."""

    d_model: int = 512
    heads: int = 8
    enc_layers: int = 4
    dec_layers: int = 4
    ff_dim: int = 2048
    speech_dim: int = 59
    pose_dim: int = 6 * 15
    max_T: int = 600
    modes: int = 3
    pma_seeds: int = 1
    embed_scale: float = EMBED_SCALE
    ln_eps: float = 1e-5

    def __post_init__(self):
        if self.d_model % 2:
            raise ConfigError(f"d_model must be even, got {self.d_model}")
        if self.heads < 1 or self.d_model % self.heads:
            raise ConfigError(f"d_model {self.d_model} not divisible by heads {self.heads}")
        if self.pose_dim % 6:
            raise ConfigError(f"pose_dim must be a multiple of 6, got {self.pose_dim}")
        for name in ("enc_layers", "dec_layers", "ff_dim", "speech_dim", "max_T", "modes",
                     "pma_seeds"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")

    @property
    def n_joints(self):
        return self.pose_dim // 6


def tiny_config(**overrides):
    """The gradient-check configuration: d=16, 1+1 layers, 2 heads, 2 joints."""
    base = dict(d_model=16, heads=2, enc_layers=1, dec_layers=1, ff_dim=32, pose_dim=12,
                max_T=64)
    base.update(overrides)
    return ModelConfig(**base)
