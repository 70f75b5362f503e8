"""Learning-rate, KL-weight and frame-dropout schedules."""
from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import ConfigError


@dataclass(frozen=True)
class TrainingSchedule:
    """All optimisation hyper-parameters. Defaults are the full-scale setting.

    ``total_steps`` / ``warmup_steps`` override the epoch-derived values when
    positive / non-negative, which is how small runs are configured.
    """

    warmup_epochs: int = 400
    pretrain_lr: float = 1e-4
    crossmodal_lr: float = 1e-5
    weight_decay: float = 1e-2
    betas: tuple[float, ...] = (0.9, 0.999)
    adam_eps: float = 1e-8
    lambda1: float = 1.0
    lambda2: float = 0.3
    lambda3_min: float = 0.2
    lambda3_max: float = 3.0
    lambda3_period: int = 10
    dropout_start: float = 1.0
    dropout_end: float = 0.6
    mask_rate: float = 0.2
    mask_noise_fraction: float = 0.1
    spec_augment_max: float = 0.2
    spec_augment: bool = True
    spec_augment_pretrain: bool = True
    batch_size: int = 32
    pretrain_epochs: int = 50
    crossmodal_epochs: int = 1500
    total_steps: int = 0
    warmup_steps: int = -1
    seq_len: int = 300
    grad_clip: float = 1.0
    checkpoint_every: int = 0
    collapse_threshold: float = 1e-3

    def __post_init__(self):
        for name in ("pretrain_lr", "crossmodal_lr", "lambda3_period", "batch_size", "seq_len"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be non-negative")
        if not 0.0 <= self.mask_rate <= 1.0 or not 0.0 <= self.mask_noise_fraction <= 1.0:
            raise ConfigError("mask rates must lie in [0, 1]")
        if len(self.betas) != 2:
            raise ConfigError("betas needs two values")

    def steps_per_epoch(self, n_samples):
        return max(1, math.ceil(n_samples / self.batch_size))

    def horizon(self, n_samples, phase):
        """(total_steps, warmup_steps) for ``phase`` in {"pretrain", "crossmodal"}."""
        spe = self.steps_per_epoch(n_samples)
        epochs = self.pretrain_epochs if phase == "pretrain" else self.crossmodal_epochs
        total = self.total_steps if self.total_steps > 0 else epochs * spe
        warm = self.warmup_steps if self.warmup_steps >= 0 else self.warmup_epochs * spe
        return total, min(warm, total)

    def base_lr(self, phase):
        return self.pretrain_lr if phase == "pretrain" else self.crossmodal_lr


def cyclical_lambda3(epoch, schedule=None):
    """Sawtooth KL weight: rises linearly from min towards max over one period, then resets."""
    s = schedule or TrainingSchedule()
    if epoch < 0:
        raise ConfigError("epoch must be non-negative")
    step = (s.lambda3_max - s.lambda3_min) / s.lambda3_period
    return s.lambda3_min + (epoch % s.lambda3_period) * step


def warmup_cosine_lr(step, total_steps, warmup_steps, base_lr):
    """Linear ramp 0 -> base_lr over warm-up, then cosine decay to 0 at ``total_steps``."""
    if warmup_steps > total_steps:
        raise ConfigError("warm-up longer than the whole run")
    if step < warmup_steps:
        return base_lr * step / warmup_steps
    span = total_steps - warmup_steps
    if span <= 0:
        return base_lr
    progress = min(1.0, (step - warmup_steps) / span)
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


def dropout_annealing_p(step, warmup_steps, start=1.0, end=0.6):
    """Frame-drop probability: linear from ``start`` to ``end`` across warm-up, then flat."""
    if warmup_steps <= 0 or step >= warmup_steps:
        return end
    return start + (end - start) * step / warmup_steps
