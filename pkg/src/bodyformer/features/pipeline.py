"""Assemble the per-frame speech stream and its mode metadata."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import InputError, ParseError
from ..motion.sequence import MODES
from ..numerics import tensorfile
from .audio import mel_spectrogram
from .modes import MODE_INDEX, label_modes, segments_from_labels
from .words import align_words, word_frame_index

N_MELS = 27
WORD_DIM = 32
SPEECH_DIM = N_MELS + WORD_DIM
FPS = 20


@dataclass
class AudioClip:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise InputError("sample rate must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise InputError("audio samples are not finite")

    @property
    def duration(self):
        return self.samples.size / self.sample_rate


@dataclass
class SpeechFeatureSequence:
    frames: np.ndarray  # (T, 59): mel | word
    mode_labels: list
    local_clocks: np.ndarray
    segments: list = field(default=None)
    fps: int = FPS
    n_mels: int = N_MELS

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        self.local_clocks = np.asarray(self.local_clocks, dtype=np.int64)
        self.mode_labels = list(self.mode_labels)
        if self.segments is None:
            self.segments = segments_from_labels(self.mode_labels)
        T = self.frames.shape[0]
        if len(self.mode_labels) != T or self.local_clocks.shape != (T,):
            raise InputError("frames, mode labels and local clocks differ in length")

    def __len__(self):
        return self.frames.shape[0]

    @property
    def modes(self):
        """Mode labels as integer indices (NS=0, SS=1, LS=2)."""
        return np.array([MODE_INDEX[m] for m in self.mode_labels], dtype=np.int64)

    @property
    def audio(self):
        return self.frames[:, :self.n_mels]

    @property
    def words(self):
        return self.frames[:, self.n_mels:]

    def crop(self, start, stop):
        """Frames [start, stop); local clocks keep their segment-relative values."""
        labels = self.mode_labels[start:stop]
        return SpeechFeatureSequence(self.frames[start:stop].copy(), labels,
                                     self.local_clocks[start:stop].copy(), None, self.fps,
                                     self.n_mels)


def build_speech_features(clip, words, pca, fps=FPS, n_mels=N_MELS):
    """Mel and word features on one 20 Hz grid, with NS/SS/LS labels.

    Frames with no recognised word get a zero word vector, so NS frames (and
    short gaps inside merged speech spans) carry audio only.
    """
    mel = mel_spectrogram(clip.samples, clip.sample_rate, n_mels, fps)
    T = mel.shape[0]
    silence = word_frame_index(words, T, fps) < 0
    word_feats = align_words(words, pca, T, fps, silence)
    labels, segments, clocks = label_modes(words, T, fps)
    return SpeechFeatureSequence(np.concatenate([mel, word_feats], axis=1), labels, clocks,
                                 segments, fps, n_mels)


def spec_augment(features, rng, max_fraction=0.2):
    """Copy of ``features`` with one contiguous span of one channel group zeroed.

    The group (audio or word) is picked with equal probability; the span
    length is uniform over the integers 0..floor(max_fraction * T) and its
    start uniform over the admissible positions.
    """
    if not 0.0 <= max_fraction <= 1.0:
        raise InputError(f"max_fraction must lie in [0, 1], got {max_fraction}")
    frames = features.frames.copy()
    T = frames.shape[0]
    use_audio = rng.random() < 0.5
    length = int(rng.integers(0, int(np.floor(max_fraction * T)) + 1))
    start = int(rng.integers(0, T - length + 1))
    cols = slice(0, features.n_mels) if use_audio else slice(features.n_mels, None)
    frames[start:start + length, cols] = 0.0
    return replace(features, frames=frames, mode_labels=list(features.mode_labels),
                   local_clocks=features.local_clocks.copy(), segments=list(features.segments))


# -------------------------------------------------------------- feature cache

def save_speech_features(path, feats, meta=None):
    arrays = {"frames": feats.frames, "modes": feats.modes.astype(np.float64),
              "local_clocks": feats.local_clocks.astype(np.float64)}
    info = {"format": "bodyformer-speech", "fps": feats.fps, "n_mels": feats.n_mels}
    info.update(meta or {})
    tensorfile.save(path, arrays, info)


def load_speech_features(path):
    arrays, meta = tensorfile.load(path)
    if meta.get("format") != "bodyformer-speech":
        raise ParseError(f"{path}: not a speech feature cache")
    labels = [MODES[int(m)] for m in arrays["modes"]]
    clocks = arrays["local_clocks"].astype(np.int64)
    return SpeechFeatureSequence(arrays["frames"], labels, clocks, None,
                                 int(meta.get("fps", FPS)), int(meta.get("n_mels", N_MELS)))
