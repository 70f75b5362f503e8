"""Synthetic paired speech/motion data for tests, demos and smoke runs.

Each sample is driven by a few smooth latent curves. Speech frames are a
fixed non-linear mixture of the curves and joint angles a fixed linear one,
so the pose at frame t is a function of the speech at frame t and a small
model can fit the pairing exactly.
"""
from __future__ import annotations

import os

import numpy as np

from .features.audio import write_wav
from .features.modes import local_clocks, segments_from_labels
from .features.pipeline import SPEECH_DIM, SpeechFeatureSequence
from .features.words import WordToken, write_transcript
from .motion.rotation import euler_to_rotmat, rotmat_to_6d
from .motion.sequence import MODES, MotionSequence, Skeleton
from .training.loops import TrainingSample

N_LATENT = 3


def chain_skeleton(n_joints=2, bone=10.0):
    """A straight chain along +y: joint j hangs ``bone`` units above joint j-1."""
    offsets = [[0.0, 0.0, 0.0]] + [[0.0, bone, 0.0]] * (n_joints - 1)
    return Skeleton(tuple(f"j{i}" for i in range(n_joints)), tuple(range(-1, n_joints - 1)),
                    offsets)


def latent_curves(rng, T, n=N_LATENT):
    t = np.arange(T)[:, None]
    freq = rng.uniform(0.01, 0.06, (2, n))
    phase = rng.uniform(0, 2 * np.pi, (2, n))
    return 0.6 * np.sin(2 * np.pi * freq[0] * t + phase[0]) + 0.4 * np.sin(2 * np.pi * freq[1] * t + phase[1])


def mode_labels(rng, T):
    """Alternating NS / speaking segments with random lengths."""
    labels = []
    speaking = False
    while len(labels) < T:
        if speaking:
            n = int(rng.integers(10, 60))
            labels += [MODES[2] if n > 40 else MODES[1]] * n
        else:
            labels += [MODES[0]] * int(rng.integers(6, 16))
        speaking = not speaking
    return labels[:T]


class SyntheticMapping:
    """Fixed mixing weights shared by every sample of one synthetic corpus."""

    def __init__(self, seed=0, n_joints=2, speech_dim=SPEECH_DIM, max_angle=40.0):
        rng = np.random.default_rng(seed)
        self.speech_mix = rng.standard_normal((N_LATENT, speech_dim)) / np.sqrt(N_LATENT)
        self.speech_bias = 0.1 * rng.standard_normal(speech_dim)
        self.angle_mix = rng.standard_normal((N_LATENT, 3 * n_joints)) / np.sqrt(N_LATENT)
        self.max_angle = max_angle
        self.skeleton = chain_skeleton(n_joints)

    def speech(self, z):
        return np.tanh(z @ self.speech_mix + self.speech_bias)

    def angles(self, z):
        """Per-joint intrinsic ZXY Euler angles in degrees, (T, J, 3)."""
        J = self.skeleton.n_joints
        return (self.max_angle * np.tanh(z @ self.angle_mix)).reshape(len(z), J, 3)

    def motion_frames(self, z):
        R = euler_to_rotmat(self.angles(z), "ZXY")
        return rotmat_to_6d(R).reshape(len(z), -1)


def synthetic_sample(rng, T, mapping, sample_id=""):
    z = latent_curves(rng, T)
    labels = mode_labels(rng, T)
    segments = segments_from_labels(labels)
    speech = SpeechFeatureSequence(mapping.speech(z), labels, local_clocks(segments, T), segments)
    motion = MotionSequence(mapping.motion_frames(z), mapping.skeleton, 20.0)
    return TrainingSample(speech, motion, sample_id)


def synthetic_dataset(n=4, T=64, seed=0, n_joints=2):
    """``n`` paired sequences of ``T`` frames sharing one mapping."""
    mapping = SyntheticMapping(seed, n_joints)
    rng = np.random.default_rng(seed + 1)
    return [synthetic_sample(rng, T, mapping, f"synth{i:03d}") for i in range(n)]


# ------------------------------------------------------------- raw corpus

_VOCAB = ("so", "the", "idea", "is", "that", "we", "move", "our", "hands", "when", "talking",
          "about", "big", "small", "things", "and", "then", "stop", "right", "here", "now",
          "look", "at", "this", "one", "over", "there", "maybe", "yes", "no", "well", "it",
          "goes", "up", "down", "around", "again", "together", "apart", "first", "second")


def _words(rng, duration):
    words = []
    t = float(rng.uniform(0.2, 0.6))
    while t < duration - 0.4:
        span_end = min(duration - 0.2, t + float(rng.uniform(0.8, 3.0)))
        while t < span_end - 0.1:
            length = float(rng.uniform(0.12, 0.35))
            end = min(t + length, span_end)
            words.append(WordToken(str(rng.choice(_VOCAB)), round(t, 3), round(end, 3)))
            t = end + float(rng.uniform(0.0, 0.15))
        t = span_end + float(rng.uniform(0.4, 1.0))
    return words


def bvh_text(skeleton, angles, fps=20.0):
    """BVH with a 6-channel root and 3 rotation channels per joint, ZXY order."""
    lines = ["HIERARCHY"]
    depth = 0
    children = {j: [] for j in range(skeleton.n_joints)}
    for j, p in enumerate(skeleton.parents):
        if p >= 0:
            children[p].append(j)

    def emit(j):
        nonlocal depth
        pad = "  " * depth
        kind = "ROOT" if skeleton.parents[j] < 0 else "JOINT"
        lines.append(f"{pad}{kind} {skeleton.joints[j]}")
        lines.append(pad + "{")
        off = " ".join(f"{v:.6f}" for v in skeleton.offsets[j])
        lines.append(f"{pad}  OFFSET {off}")
        if kind == "ROOT":
            lines.append(f"{pad}  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation")
        else:
            lines.append(f"{pad}  CHANNELS 3 Zrotation Xrotation Yrotation")
        depth += 1
        for c in children[j]:
            emit(c)
        if not children[j]:
            lines.extend([f"{pad}  End Site", f"{pad}  " + "{", f"{pad}    OFFSET 0.0 5.0 0.0",
                          f"{pad}  " + "}"])
        depth -= 1
        lines.append(pad + "}")

    emit(0)
    lines += ["MOTION", f"Frames: {len(angles)}", f"Frame Time: {1.0 / fps:.6f}"]
    for frame in angles:
        vals = [0.0, 0.0, 0.0] + list(frame.reshape(-1))
        lines.append(" ".join(f"{v:.6f}" for v in vals))
    return "\n".join(lines) + "\n"


def write_raw_corpus(root, n=2, seconds=4.0, sample_rate=16000, seed=0, n_joints=2):
    """Write ``audio/``, ``transcripts/`` and ``motion/`` dirs with paired files.

    Returns the three directory paths. Audio is a tone whose loudness follows
    the first latent curve; motion angles follow the fixed mapping.
    """
    mapping = SyntheticMapping(seed, n_joints)
    rng = np.random.default_rng(seed + 1)
    dirs = [os.path.join(root, d) for d in ("audio", "transcripts", "motion")]
    for d in dirs:
        os.makedirs(d, exist_ok=True)
    T = int(round(seconds * 20))
    for i in range(n):
        name = f"clip{i:02d}"
        z = latent_curves(rng, T)
        t = np.arange(int(seconds * sample_rate)) / sample_rate
        envelope = np.interp(t * 20, np.arange(T), 0.5 + 0.4 * np.tanh(z[:, 0]))
        pitch = 180.0 + 60.0 * np.interp(t * 20, np.arange(T), z[:, 1])
        audio = 0.3 * envelope * np.sin(2 * np.pi * np.cumsum(pitch) / sample_rate)
        write_wav(os.path.join(dirs[0], name + ".wav"), audio, sample_rate)
        write_transcript(os.path.join(dirs[1], name + ".txt"), _words(rng, seconds))
        with open(os.path.join(dirs[2], name + ".bvh"), "w", encoding="utf-8") as fh:
            fh.write(bvh_text(mapping.skeleton, mapping.angles(z)))
    return tuple(dirs)


__all__ = ["SyntheticMapping", "bvh_text", "chain_skeleton", "latent_curves",
           "mode_labels", "synthetic_dataset", "synthetic_sample", "write_raw_corpus"]
