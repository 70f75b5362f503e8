"""Skeleton and pose-sequence containers plus kinematic statistics."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError
from .rotation import sixd_to_rotmat

MODES = ("NS", "SS", "LS")


@dataclass(frozen=True)
class Skeleton:
    joints: tuple
    parents: tuple  # -1 for the root
    offsets: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "parents", tuple(int(p) for p in self.parents))
        offsets = np.asarray(self.offsets, dtype=np.float64).reshape(len(self.joints), 3)
        object.__setattr__(self, "offsets", offsets)
        if not self.joints:
            raise InputError("skeleton has no joints")
        if len(self.parents) != len(self.joints):
            raise InputError("one parent index per joint required")
        if self.parents[0] != -1:
            raise InputError("joint 0 must be the root")
        for j, p in enumerate(self.parents[1:], start=1):
            if not 0 <= p < j:
                raise InputError(f"joint {j} has parent {p}; parents must precede children")

    @property
    def n_joints(self):
        return len(self.joints)

    def __eq__(self, other):
        return (isinstance(other, Skeleton) and self.joints == other.joints
                and self.parents == other.parents
                and np.array_equal(self.offsets, other.offsets))

    __hash__ = None

    def forward_kinematics(self, rotations):
        """Joint positions (T, J, 3) from local rotations (T, J, 3, 3); root at the origin."""
        T, J = rotations.shape[:2]
        glob = np.empty_like(rotations)
        pos = np.zeros((T, J, 3))
        for j, p in enumerate(self.parents):
            if p < 0:
                glob[:, j] = rotations[:, j]
                pos[:, j] = self.offsets[j]
            else:
                glob[:, j] = glob[:, p] @ rotations[:, j]
                pos[:, j] = pos[:, p] + glob[:, p] @ self.offsets[j]
        return pos


@dataclass
class MotionSequence:
    frames: np.ndarray  # (T, 6J)
    skeleton: Skeleton
    fps: float = 20.0

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2 or self.frames.shape[1] != 6 * self.skeleton.n_joints:
            raise InputError(f"frames of shape {self.frames.shape} do not fit "
                             f"{self.skeleton.n_joints} joints")

    def __len__(self):
        return self.frames.shape[0]

    def rotations(self):
        T = len(self)
        return sixd_to_rotmat(self.frames.reshape(T, -1, 6))

    def positions(self):
        return self.skeleton.forward_kinematics(self.rotations())


@dataclass(frozen=True)
class ModeSegment:
    mode: str
    start_frame: int
    length: int

    @property
    def stop_frame(self):
        return self.start_frame + self.length


def segment_velocity_sums(frames, segments):
    """Cumulative ||y_t - y_{t-1}|| inside each segment.

    The step entering a segment from the previous global frame counts toward
    that segment; frame 0 has no predecessor and contributes nothing.
    """
    frames = np.asarray(frames, dtype=np.float64)
    step = np.zeros(len(frames))
    if len(frames) > 1:
        step[1:] = np.linalg.norm(np.diff(frames, axis=0), axis=1)
    sums = []
    for seg in segments:
        if seg.stop_frame > len(frames) or seg.start_frame < 0:
            raise InputError(f"segment {seg} exceeds motion of {len(frames)} frames")
        sums.append(float(step[seg.start_frame:seg.stop_frame].sum()))
    return sums


def velocity_norm_sum(motion, segments):
    """Per-mode (mean, std) of per-segment cumulative velocity norms.

    Standard deviation is the population one (ddof=0). Modes with no segments
    are omitted; an empty segment list gives an empty dict.
    """
    frames = motion.frames if isinstance(motion, MotionSequence) else motion
    sums = segment_velocity_sums(frames, segments)
    grouped = {}
    for seg, s in zip(segments, sums):
        grouped.setdefault(seg.mode, []).append(s)
    return {m: (float(np.mean(v)), float(np.std(v))) for m, v in
            sorted(grouped.items(), key=lambda kv: MODES.index(kv[0]))}
