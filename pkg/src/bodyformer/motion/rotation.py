"""Continuous 6D rotation representation (first two columns of the matrix)."""
from __future__ import annotations

import numpy as np

from ..errors import InputError, NumericError


def rotmat_to_6d(R, atol=1e-6):
    """First two columns of ``R`` concatenated: ``[R[:,0], R[:,1]]``.

    Accepts a single 3x3 matrix or a stack (..., 3, 3); rejects anything that
    is not a proper rotation within ``atol``.
    """
    R = np.asarray(R, dtype=np.float64)
    if R.shape[-2:] != (3, 3):
        raise InputError(f"expected (..., 3, 3) rotation matrices, got {R.shape}")
    eye = np.broadcast_to(np.eye(3), R.shape)
    if (np.abs(np.swapaxes(R, -1, -2) @ R - eye).max(initial=0.0) > atol
            or np.abs(np.linalg.det(R) - 1.0).max(initial=0.0) > atol):
        raise InputError("matrix is not a proper rotation")
    return np.concatenate([R[..., :, 0], R[..., :, 1]], axis=-1)


def sixd_to_rotmat(v, tol=1e-12):
    """Gram-Schmidt decode of 6-vectors (..., 6) into rotations (..., 3, 3)."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != 6:
        raise InputError(f"expected (..., 6) vectors, got {v.shape}")
    a, b = v[..., :3], v[..., 3:]
    na = np.linalg.norm(a, axis=-1, keepdims=True)
    if (na <= tol).any():
        raise NumericError("first 6D column is zero")
    b1 = a / na
    r = b - (b1 * b).sum(axis=-1, keepdims=True) * b1
    nr = np.linalg.norm(r, axis=-1, keepdims=True)
    if (nr <= tol * np.maximum(1.0, np.linalg.norm(b, axis=-1, keepdims=True))).any():
        raise NumericError("6D columns are parallel")
    b2 = r / nr
    b3 = np.cross(b1, b2)
    return np.stack([b1, b2, b3], axis=-1)


def euler_to_rotmat(angles_deg, order):
    """Intrinsic Euler angles (degrees) to matrices, e.g. order "ZXY" -> Rz @ Rx @ Ry."""
    angles = np.radians(np.asarray(angles_deg, dtype=np.float64))
    out = np.broadcast_to(np.eye(3), angles.shape[:-1] + (3, 3)).copy()
    for i, axis in enumerate(order.upper()):
        out = out @ _axis_rotation(axis, angles[..., i])
    return out


def _axis_rotation(axis, theta):
    c, s = np.cos(theta), np.sin(theta)
    z, o = np.zeros_like(theta), np.ones_like(theta)
    if axis == "X":
        rows = [[o, z, z], [z, c, -s], [z, s, c]]
    elif axis == "Y":
        rows = [[c, z, s], [z, o, z], [-s, z, c]]
    elif axis == "Z":
        rows = [[c, -s, z], [s, c, z], [z, z, o]]
    else:
        raise InputError(f"unknown rotation axis {axis!r}")
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)
