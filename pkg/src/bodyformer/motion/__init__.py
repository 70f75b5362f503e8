"""Pose representation, motion files and kinematic statistics."""
from .io import parse_bvh, read_bvh, read_motion, resample_frames, write_motion
from .rotation import euler_to_rotmat, rotmat_to_6d, sixd_to_rotmat
from .sequence import (MODES, ModeSegment, MotionSequence, Skeleton, segment_velocity_sums,
                       velocity_norm_sum)

__all__ = [
    "MODES", "ModeSegment", "MotionSequence", "Skeleton", "euler_to_rotmat", "parse_bvh",
    "read_bvh", "read_motion", "resample_frames", "rotmat_to_6d", "segment_velocity_sums",
    "sixd_to_rotmat", "velocity_norm_sum", "write_motion",
]
