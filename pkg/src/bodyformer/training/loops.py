"""Intra-modal pre-training and cross-modal learning.

All three phases share :class:`Trainer`: it owns the step counter, the
optimizer over the phase's trainable tensors, the RNG stream and, for the
pre-training phases, a temporary reconstruction head. Its full state goes
into a checkpoint, so a run interrupted after n steps and resumed produces
the same parameters as an uninterrupted one.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from .. import numerics as nx
from ..errors import ConfigError, InputError, NumericError, ParseError
from ..features.pipeline import SpeechFeatureSequence, spec_augment
from ..model import network as net
from ..model.config import ModelConfig
from ..model.params import DECODER_GROUP, ENCODER_GROUP, ModelParams
from ..motion.sequence import MotionSequence
from ..numerics import Tensor, tensorfile
from ..numerics.layers import init_linear, linear
from .losses import joint_prediction_loss, kl_from_logvar, magnitude_loss, masked_mse, total_loss
from .masking import corrupt_for_masked_modeling, frame_keep_mask
from .schedules import (TrainingSchedule, cyclical_lambda3, dropout_annealing_p,
                        warmup_cosine_lr)

log = logging.getLogger(__name__)

PHASES = ("encoder", "decoder", "crossmodal")
CHECKPOINT_FORMAT = "bodyformer-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class TrainingSample:
    speech: SpeechFeatureSequence
    motion: MotionSequence
    id: str = ""

    def __post_init__(self):
        if len(self.speech) != len(self.motion):
            raise InputError(f"sample {self.id!r}: {len(self.speech)} speech frames vs "
                             f"{len(self.motion)} motion frames")


@dataclass
class Batch:
    speech: np.ndarray        # (B, L, speech_dim)
    motion: np.ndarray        # (B, L, pose_dim)
    modes: np.ndarray         # (B, L)
    local_clocks: np.ndarray  # (B, L)


def _stack(items):
    return Batch(np.stack([s.frames for s, _ in items]), np.stack([m for _, m in items]),
                 np.stack([s.modes for s, _ in items]),
                 np.stack([s.local_clocks for s, _ in items]))


def full_batch(dataset, length=None):
    """Every sample, cropped from frame 0 to a common length."""
    L = min(len(s.speech) for s in dataset)
    L = L if length is None else min(L, length)
    return _stack([(s.speech.crop(0, L), s.motion.frames[:L]) for s in dataset])


def _phase_group(params, phase):
    if phase == "encoder":
        return params.group(ENCODER_GROUP)
    if phase == "decoder":
        # cross-attention is bypassed and the start token unused in this phase
        skip = tuple(f"decoder.{i}.{n}." for i in range(params.config.dec_layers)
                     for n in ("cross_attn", "norm2")) + ("start_token",)
        return params.group(DECODER_GROUP, exclude=skip)
    return dict(params.items())


def _init_head(phase, config, rng):
    head = {}
    width = config.speech_dim if phase == "encoder" else config.pose_dim
    init_linear(rng, config.d_model, width, "head", head)
    return head


# ------------------------------------------------------------ loss functions

def reconstruction_loss(params, head, phase, corrupted, clean, mask, modes, clocks):
    """Masked-frame MSE of the temporary head for one pre-training phase."""
    if phase == "encoder":
        hidden = net.encode(corrupted, modes, clocks, params)
    else:
        hidden = net.decode_hidden(corrupted, None, None, modes, clocks, params,
                                   cross=False, shift=False)
    return masked_mse(linear(hidden, head, "head"), clean, mask)


def crossmodal_loss(params, batch, noise, keep, epoch, schedule):
    """Full objective for one batch with all randomness supplied explicitly.

    ``noise`` is the reparameterisation draw (B, d) and ``keep`` the frame
    keep mask over the shifted decoder inputs (B, L-1). Returns the scalar
    loss tensor and a dict of its parts.
    """
    enc = net.encode(batch.speech, batch.modes, batch.local_clocks, params)
    tokens = net.motion_tokens(batch.motion, batch.modes, batch.local_clocks, params)
    mu, sigma, logvar = net.posterior(net.sequence_embed(tokens, params), params)
    eta = net.reparameterize(mu, sigma, noise)
    pred = net.decode_step_train(batch.motion, enc, eta, batch.modes, batch.local_clocks,
                                 params, keep=keep)
    l_g = joint_prediction_loss(pred, batch.motion)
    l_m = magnitude_loss(pred, batch.motion)
    l_kl = kl_from_logvar(mu, logvar, params["prior.mu"], params["prior.logvar"])
    loss = total_loss(l_g, l_m, l_kl, epoch, schedule)
    return loss, {"L_g": l_g.item(), "L_m": l_m.item(), "L_KL": l_kl.item()}


def teacher_forced_error(params, dataset, length=None):
    """L_g with posterior-mean latent, no frame dropout and no augmentation."""
    b = full_batch(dataset, length)
    with nx.no_grad():
        enc = net.encode(b.speech, b.modes, b.local_clocks, params)
        tokens = net.motion_tokens(b.motion, b.modes, b.local_clocks, params)
        mu, _, _ = net.posterior(net.sequence_embed(tokens, params), params)
        pred = net.decode_step_train(b.motion, enc, mu, b.modes, b.local_clocks, params)
        return joint_prediction_loss(pred, b.motion).item()


def prior_sigma_witness(params, threshold=1e-3):
    """Largest prior standard deviation and whether it clears ``threshold``.

    A prior whose every component has shrunk to ~0 means the latent path has
    collapsed and generation is effectively deterministic.
    """
    sigma_max = float(np.exp(0.5 * params["prior.logvar"].data).max())
    ok = sigma_max > threshold
    log.log(logging.INFO if ok else logging.WARNING,
            "prior sigma max %.4g (threshold %.1e)%s", sigma_max, threshold,
            "" if ok else ": posterior collapse suspected")
    return sigma_max, ok


def masked_reconstruction_error(params, head, phase, dataset, seed=0, schedule=None):
    """Pre-training objective on the whole set with a fixed corruption draw."""
    s = schedule or TrainingSchedule()
    rng = np.random.default_rng(seed)
    b = full_batch(dataset, s.seq_len)
    clean = b.speech if phase == "encoder" else b.motion
    pairs = [corrupt_for_masked_modeling(x, rng, s.mask_rate, s.mask_noise_fraction) for x in clean]
    corrupted = np.stack([c for c, _ in pairs])
    mask = np.stack([m for _, m in pairs])
    with nx.no_grad():
        return reconstruction_loss(params, head, phase, corrupted, clean, mask, b.modes,
                                   b.local_clocks).item()


# ------------------------------------------------------------------ trainer

class Trainer:
    """Stateful driver for one training phase."""

    def __init__(self, params, dataset, schedule, phase, rng, head=None, metrics_path=None):
        if phase not in PHASES:
            raise ConfigError(f"unknown phase {phase!r}; expected one of {PHASES}")
        if not dataset:
            raise InputError("training needs at least one sample")
        self.params = params
        self.dataset = list(dataset)
        self.schedule = schedule
        self.phase = phase
        self.rng = rng
        self.step = 0
        self.metrics_path = metrics_path
        self.history = []
        self.extra_meta = {}
        self.log_fields = {}  # extra keys written to every metrics-log row
        if phase != "crossmodal" and head is None:
            head = _init_head(phase, params.config, rng)
        self.head = head or {}
        trainable = dict(_phase_group(params, phase))
        trainable.update({f"head/{k}": t for k, t in self.head.items()})
        self.trainable = trainable
        self.optimizer = nx.AdamW(trainable, schedule.betas, schedule.weight_decay,
                                  schedule.adam_eps)
        lr_phase = "pretrain" if phase != "crossmodal" else "crossmodal"
        self.total_steps, self.warmup_steps = schedule.horizon(len(self.dataset), lr_phase)
        self.base_lr = schedule.base_lr(lr_phase)

    # -- batching
    def _sample_batch(self):
        s = self.schedule
        n = len(self.dataset)
        idx = self.rng.choice(n, size=min(s.batch_size, n), replace=False)
        chosen = [self.dataset[i] for i in sorted(idx)]
        L = min(s.seq_len, min(len(c.speech) for c in chosen))
        items = []
        for c in chosen:
            start = int(self.rng.integers(0, len(c.speech) - L + 1))
            speech = c.speech.crop(start, start + L)
            augment = s.spec_augment if self.phase == "crossmodal" else s.spec_augment_pretrain
            if augment and self.phase != "decoder":
                speech = spec_augment(speech, self.rng, s.spec_augment_max)
            items.append((speech, c.motion.frames[start:start + L]))
        return _stack(items)

    def epoch(self):
        return self.step // self.schedule.steps_per_epoch(len(self.dataset))

    def lr(self):
        # warm-up updates use the value one step ahead so the first one is not a no-op
        k = self.step + 1 if self.step < self.warmup_steps else self.step
        return warmup_cosine_lr(k, self.total_steps, self.warmup_steps, self.base_lr)

    # -- one update
    def train_step(self):
        s = self.schedule
        batch = self._sample_batch()
        record = {"step": self.step, "phase": self.phase}
        for t in self.trainable.values():
            t.grad = None
        with nx.graph_scope():
            if self.phase == "crossmodal":
                p_drop = dropout_annealing_p(self.step, self.warmup_steps, s.dropout_start,
                                             s.dropout_end)
                L = batch.motion.shape[1]
                noise = self.rng.standard_normal((batch.motion.shape[0], self.params.config.d_model))
                keep = frame_keep_mask(self.rng, (batch.motion.shape[0], L - 1), p_drop)
                loss, parts = crossmodal_loss(self.params, batch, noise, keep, self.epoch(), s)
                record.update(parts)
                record.update({"lambda3": cyclical_lambda3(self.epoch(), s), "dropout_p": p_drop,
                               "prior_sigma_max": float(np.exp(
                                   0.5 * self.params["prior.logvar"].data).max())})
            else:
                clean = batch.speech if self.phase == "encoder" else batch.motion
                pairs = [corrupt_for_masked_modeling(x, self.rng, s.mask_rate,
                                                     s.mask_noise_fraction) for x in clean]
                corrupted = np.stack([c for c, _ in pairs])
                mask = np.stack([m for _, m in pairs])
                loss = reconstruction_loss(self.params, self.head, self.phase, corrupted, clean,
                                           mask, batch.modes, batch.local_clocks)
                record["mse"] = loss.item()
            nx.backward(loss)
        if not math.isfinite(loss.item()):
            raise NumericError(f"non-finite loss at step {self.step}")
        record["loss"] = loss.item()
        if s.grad_clip > 0:
            record["grad_norm"] = nx.clip_grad_norm(list(self.trainable.values()), s.grad_clip)
        lr = self.lr()
        record["lr"] = lr
        self.optimizer.step(lr)
        self.step += 1
        self.history.append(record)
        if self.metrics_path is not None:
            with open(self.metrics_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps({**self.log_fields, **record}, sort_keys=True) + "\n")
        return record

    def run(self, steps=None, checkpoint_path=None):
        """Advance ``steps`` updates (default: to the end of the schedule)."""
        stop = self.total_steps if steps is None else min(self.total_steps, self.step + steps)
        every = self.schedule.checkpoint_every
        while self.step < stop:
            self.train_step()
            if checkpoint_path and every > 0 and self.step % every == 0 and self.step < stop:
                self.save(checkpoint_path)
        if checkpoint_path:
            self.save(checkpoint_path)
        return self.params

    # -- persistence
    def state_arrays(self):
        arrays = dict(self.params.to_arrays())
        arrays.update({f"head/{k}": t.data for k, t in self.head.items()})
        arrays.update(self.optimizer.state_arrays())
        return arrays

    def metadata(self):
        return {**self.extra_meta, "format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION, "phase": self.phase,
                "step": self.step, "model": asdict(self.params.config),
                "schedule": asdict(self.schedule), "rng": self.rng.bit_generator.state}

    def save(self, path):
        tensorfile.save(path, self.state_arrays(), self.metadata())

    @classmethod
    def resume(cls, path, dataset, schedule=None, metrics_path=None):
        """Rebuild a trainer mid-run from a checkpoint written by :meth:`save`."""
        arrays, meta = read_checkpoint(path)
        params = params_from_checkpoint(arrays, meta)
        schedule = schedule or TrainingSchedule(**_tuples(meta["schedule"]))
        rng = np.random.default_rng()
        rng.bit_generator.state = meta["rng"]
        head = {k[5:]: Tensor(v.copy(), True) for k, v in arrays.items() if k.startswith("head/")}
        trainer = cls(params, dataset, schedule, meta["phase"], rng, head or None, metrics_path)
        trainer.optimizer.load_state_arrays(arrays, meta["step"])
        trainer.step = int(meta["step"])
        trainer.extra_meta = {k: v for k, v in meta.items()
                              if k not in ("format", "version", "phase", "step", "model",
                                           "schedule", "rng")}
        return trainer


def _tuples(d):
    return {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}


def read_checkpoint(path):
    arrays, meta = tensorfile.load(path)
    if meta.get("format") != CHECKPOINT_FORMAT:
        raise ParseError(f"{path}: not a checkpoint")
    if meta.get("version") != CHECKPOINT_VERSION:
        raise ConfigError(f"{path}: checkpoint version {meta.get('version')} is not supported "
                          f"(expected {CHECKPOINT_VERSION})")
    return arrays, meta


def params_from_checkpoint(arrays, meta, config=None):
    """Model parameters from a checkpoint, optionally checked against ``config``."""
    stored = ModelConfig(**_tuples(meta["model"]))
    if config is not None and config != stored:
        diff = sorted(k for k, v in asdict(config).items() if meta["model"].get(k) != v)
        raise ConfigError(f"checkpoint (version {meta['version']}) was trained with a different "
                          f"model config: {', '.join(diff)}")
    return ModelParams.from_arrays(stored, {k: v for k, v in arrays.items() if "/" not in k})


# ---------------------------------------------------------- phase wrappers

def pretrain_encoder(dataset, params, schedule, rng=None, steps=None, metrics_path=None):
    """Masked speech modelling; only the speech-side parameters move."""
    t = Trainer(params, dataset, schedule, "encoder", rng or np.random.default_rng(0),
                metrics_path=metrics_path)
    return t.run(steps)


def pretrain_decoder(dataset, params, schedule, rng=None, steps=None, metrics_path=None):
    """Masked motion modelling with cross-attention bypassed."""
    t = Trainer(params, dataset, schedule, "decoder", rng or np.random.default_rng(0),
                metrics_path=metrics_path)
    return t.run(steps)


def train_crossmodal(dataset, params, schedule, rng, steps=None, metrics_path=None):
    """End-to-end optimisation of the weighted objective over every parameter."""
    t = Trainer(params, dataset, schedule, "crossmodal", rng, metrics_path=metrics_path)
    return t.run(steps)
