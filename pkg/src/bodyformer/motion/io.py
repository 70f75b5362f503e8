"""Motion file formats.

Native format is a pair of files:

* ``<path>``: a tensor file (see :mod:`bodyformer.numerics.tensorfile`) with one
  record ``frames`` of shape (T, 6J) and metadata ``{"fps": ..., "format": "bodyformer-motion"}``.
* ``<path>.skel.json``: the skeleton descriptor, a JSON object
  ``{"joints": [{"name": str, "parent": int, "offset": [x, y, z]}, ...]}`` with
  the root first and parent ``-1``.

A BVH subset reader (HIERARCHY + MOTION, rotation channels only) converts
captures into the native representation; root translation is dropped.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import ParseError
from ..numerics import tensorfile
from .rotation import euler_to_rotmat, rotmat_to_6d
from .sequence import MotionSequence, Skeleton

FORMAT_TAG = "bodyformer-motion"


def skeleton_path(path):
    path = Path(path)
    return path.with_name(path.name + ".skel.json")


def skeleton_to_json(skel):
    joints = [{"name": n, "parent": p, "offset": [float(x) for x in o]}
              for n, p, o in zip(skel.joints, skel.parents, skel.offsets)]
    return json.dumps({"joints": joints}, indent=1, sort_keys=True) + "\n"


def skeleton_from_json(text, source="<skeleton>"):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}: line {exc.lineno}: {exc.msg}") from None
    try:
        joints = doc["joints"]
        return Skeleton([j["name"] for j in joints], [j["parent"] for j in joints],
                        [j["offset"] for j in joints])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{source}: invalid skeleton descriptor: {exc}") from None


def write_motion(motion, path, meta=None):
    """Write the frames file and its skeleton sidecar; ``meta`` adds header fields."""
    path = Path(path)
    info = dict(meta or {})
    info.update({"fps": motion.fps, "format": FORMAT_TAG})
    tensorfile.save(path, {"frames": motion.frames}, info)
    skeleton_path(path).write_text(skeleton_to_json(motion.skeleton), encoding="utf-8")


def read_motion(path):
    path = Path(path)
    arrays, meta = tensorfile.load(path)
    if meta.get("format") != FORMAT_TAG or "frames" not in arrays:
        raise ParseError(f"{path}: not a motion file")
    sk = skeleton_path(path)
    if not sk.exists():
        raise ParseError(f"{path}: missing skeleton descriptor {sk.name}")
    skel = skeleton_from_json(sk.read_text(encoding="utf-8"), str(sk))
    try:
        return MotionSequence(arrays["frames"], skel, float(meta["fps"]))
    except Exception as exc:
        raise ParseError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------- BVH

_AXES = {"Xrotation": "X", "Yrotation": "Y", "Zrotation": "Z"}


def read_bvh(path, euler_order=None):
    """Import a BVH capture as a :class:`MotionSequence` of joint rotations.

    ``euler_order`` overrides the per-joint order declared by the CHANNELS
    lines (intrinsic, e.g. "ZXY").
    """
    with open(path, encoding="utf-8") as fh:
        return parse_bvh(fh.read(), str(path), euler_order)


def parse_bvh(text, source="<bvh>", euler_order=None):
    lines = text.splitlines()
    names, parents, offsets, channels = [], [], [], []
    stack = []
    pending = None
    in_end_site = 0
    i = 0

    def fail(msg):
        raise ParseError(f"{source}: line {i + 1}: {msg}")

    while i < len(lines):
        tok = lines[i].split()
        if not tok:
            i += 1
            continue
        head = tok[0]
        if head == "HIERARCHY":
            pass
        elif head in ("ROOT", "JOINT"):
            if len(tok) < 2:
                fail("joint without a name")
            parent = stack[-1] if stack else -1
            if head == "ROOT" and names:
                fail("multiple ROOT entries are not supported")
            names.append(tok[1])
            parents.append(parent)
            offsets.append(None)
            channels.append([])
            pending = len(names) - 1
        elif head == "End":
            in_end_site = 1
            pending = None
        elif head == "{":
            if in_end_site:
                in_end_site = 2
            elif pending is None:
                fail("unexpected '{'")
            else:
                stack.append(pending)
                pending = None
        elif head == "}":
            if in_end_site == 2:
                in_end_site = 0
            elif stack:
                stack.pop()
            else:
                fail("unbalanced '}'")
        elif head == "OFFSET":
            if in_end_site:
                pass
            elif not stack:
                fail("OFFSET outside a joint")
            else:
                try:
                    offsets[stack[-1]] = [float(x) for x in tok[1:4]]
                except ValueError:
                    fail("non-numeric OFFSET")
                if len(tok) != 4:
                    fail("OFFSET needs three values")
        elif head == "CHANNELS":
            if not stack:
                fail("CHANNELS outside a joint")
            try:
                n = int(tok[1])
            except (IndexError, ValueError):
                fail("bad channel count")
            if len(tok) != n + 2:
                fail(f"expected {n} channel names")
            channels[stack[-1]] = tok[2:]
        elif head == "MOTION":
            break
        else:
            fail(f"unexpected token {head!r}")
        i += 1
    else:
        raise ParseError(f"{source}: no MOTION section")
    if stack or not names:
        raise ParseError(f"{source}: line {i + 1}: hierarchy not closed or empty")

    def header(prefix, k):
        if k >= len(lines) or not lines[k].strip().startswith(prefix):
            raise ParseError(f"{source}: line {k + 1}: expected '{prefix}'")
        try:
            return float(lines[k].split(":", 1)[1])
        except (IndexError, ValueError):
            raise ParseError(f"{source}: line {k + 1}: bad '{prefix}' value") from None

    n_frames = int(header("Frames:", i + 1))
    frame_time = header("Frame Time:", i + 2)
    width = sum(len(c) for c in channels)
    rows = []
    for k in range(i + 3, i + 3 + n_frames):
        if k >= len(lines):
            raise ParseError(f"{source}: line {k + 1}: expected {n_frames} frames, found {len(rows)}")
        try:
            row = [float(x) for x in lines[k].split()]
        except ValueError:
            raise ParseError(f"{source}: line {k + 1}: non-numeric frame value") from None
        if len(row) != width:
            raise ParseError(f"{source}: line {k + 1}: {len(row)} values, expected {width}")
        rows.append(row)
    data = np.array(rows, dtype=np.float64).reshape(n_frames, width)

    J = len(names)
    rot = np.broadcast_to(np.eye(3), (n_frames, J, 3, 3)).copy()
    col = 0
    for j, chans in enumerate(channels):
        rot_cols = [(col + c, _AXES[name]) for c, name in enumerate(chans) if name in _AXES]
        col += len(chans)
        if rot_cols:
            order = euler_order or "".join(a for _, a in rot_cols)
            rot[:, j] = euler_to_rotmat(data[:, [c for c, _ in rot_cols]], order)
    skel = Skeleton(names, parents, [o if o is not None else [0.0, 0.0, 0.0] for o in offsets])
    frames = rotmat_to_6d(rot).reshape(n_frames, 6 * J)
    fps = 1.0 / frame_time if frame_time > 0 else 20.0
    return MotionSequence(frames, skel, fps)


def resample_frames(frames, src_fps, dst_fps=20.0):
    """Nearest-frame resampling; identity when the rates agree."""
    if abs(src_fps - dst_fps) < 1e-9:
        return frames
    n = int(np.floor(len(frames) * dst_fps / src_fps))
    idx = np.minimum(np.round(np.arange(n) * src_fps / dst_fps).astype(int), len(frames) - 1)
    return frames[idx]
