"""Quantitative motion metrics: joint error, Frechet gesture distance, per-mode velocity."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericError
from .motion.sequence import MODES, MotionSequence, segment_velocity_sums, velocity_norm_sum

REGULARIZATION = 1e-6

# Published figures, kept only to exercise report formatting.
REFERENCE_MAJE_TRINITY = {"Ours": 70.05, "w/o D.P": 71.92, "Tri": 126.71, "StyleGest": 107.95,
                          "Gest": 86.04, "A2R2P": 125.50}
REFERENCE_FGD_TRINITY = {"Ours": 9.66, "w/o D.P": 10.83, "Tri": 254.90, "StyleGest": 20.81,
                         "Gest": 51.53, "A2R2P": 346.50}
REFERENCE_VELOCITY_TRINITY = {
    "Ground Truth": {"NS": (38.97, 19.66), "SS": (40.37, 22.59), "LS": (46.83, 24.63)},
    "Our Proposed Embedding Layer": {"NS": (32.97, 11.09), "SS": (42.53, 13.60),
                                     "LS": (40.69, 11.86)},
}


# -------------------------------------------------------------------- MAJE

def maje(pred, truth, skeleton=None, per_joint=False):
    """Mean absolute joint-position error after forward kinematics.

    Default: per-axis mean |p_hat - p| over frames, joints and the three axes.
    ``per_joint=True`` averages the Euclidean distance per joint instead.
    """
    skeleton = skeleton or truth.skeleton
    if pred.skeleton != skeleton or truth.skeleton != skeleton:
        raise InputError("prediction and reference use different skeletons")
    if len(pred) != len(truth):
        raise InputError(f"length mismatch: {len(pred)} vs {len(truth)} frames")
    diff = pred.positions() - truth.positions()
    if per_joint:
        return float(np.linalg.norm(diff, axis=-1).mean())
    return float(np.abs(diff).mean())


# --------------------------------------------------------------------- FGD

@dataclass
class GaussianSummary:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        self.covariance = np.atleast_2d(np.asarray(self.covariance, dtype=np.float64))
        d = self.mean.shape[0]
        if self.covariance.shape != (d, d):
            raise InputError(f"covariance {self.covariance.shape} does not match mean of size {d}")
        if np.abs(self.covariance - self.covariance.T).max(initial=0.0) > 1e-10:
            raise InputError("covariance is not symmetric")
        if d and np.linalg.eigvalsh(self.covariance).min() < -1e-10:
            raise InputError("covariance is not positive semi-definite")

    @classmethod
    def fit(cls, features):
        x = np.asarray(features, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 2:
            raise InputError("need a 2-D array with at least two feature rows")
        mean = x.mean(axis=0)
        centred = x - mean
        cov = centred.T @ centred / (x.shape[0] - 1)
        return cls(mean, 0.5 * (cov + cov.T))


def _psd_sqrt(m):
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    if w.min(initial=0.0) < -1e-8 * max(1.0, np.abs(w).max(initial=0.0)):
        raise NumericError(f"matrix has a negative eigenvalue {w.min():.3e} beyond round-off")
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def frechet_distance(a, b, eps=REGULARIZATION):
    """||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)) between two summaries.

    Both covariances get ``eps * I``. The trace of (S_a S_b)^(1/2) is taken
    from the symmetric product S_a^(1/2) S_b S_a^(1/2), which has the same
    eigenvalues.
    """
    if a.mean.shape != b.mean.shape:
        raise InputError(f"feature sizes differ: {a.mean.shape[0]} vs {b.mean.shape[0]}")
    eye = np.eye(a.mean.shape[0])
    sa, sb = a.covariance + eps * eye, b.covariance + eps * eye
    root_a = _psd_sqrt(sa)
    cross = np.trace(_psd_sqrt(root_a @ sb @ root_a))
    diff = a.mean - b.mean
    value = float(diff @ diff + np.trace(sa) + np.trace(sb) - 2.0 * cross)
    if not np.isfinite(value):
        raise NumericError("Frechet distance is not finite")
    return value


def fgd(pred_features, truth_features, eps=REGULARIZATION):
    return frechet_distance(GaussianSummary.fit(pred_features), GaussianSummary.fit(truth_features),
                            eps)


def fgd_feature_extractor(motion, window=10):
    """Window-averaged [pose, velocity] rows, one per window start.

    The velocity of frame t is pose_t - pose_{t-1} (zero at t=0). Returns
    (T - window + 1, 2 * pose_dim).
    """
    frames = motion.frames if isinstance(motion, MotionSequence) else np.asarray(motion, float)
    T = frames.shape[0]
    if not 1 <= window <= T:
        raise InputError(f"window {window} must lie in 1..{T}")
    vel = np.zeros_like(frames)
    vel[1:] = np.diff(frames, axis=0)
    per_frame = np.concatenate([frames, vel], axis=1)
    csum = np.concatenate([np.zeros((1, per_frame.shape[1])), np.cumsum(per_frame, axis=0)])
    return (csum[window:] - csum[:-window]) / window


def motion_fgd(preds, truths, window=10, extractor=fgd_feature_extractor):
    """FGD between two motion collections through a pluggable feature extractor."""
    fp = np.concatenate([extractor(m, window) for m in preds])
    ft = np.concatenate([extractor(m, window) for m in truths])
    return fgd(fp, ft)


# ------------------------------------------------------- velocity report

def format_mean_std(mean, std):
    return f"{mean:.2f} ± {std:05.2f}"


@dataclass
class VelocityReport:
    """Rows of per-mode (mean, std), laid out with NS, SS, LS columns."""

    rows: dict  # label -> {mode: (mean, std)}

    def table(self):
        header = ["Speaking mode", *MODES]
        body = [[label] + [format_mean_std(*stats[m]) if m in stats else "-" for m in MODES]
                for label, stats in self.rows.items()]
        widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
        lines = []
        for r in [header] + body:
            lines.append(" | ".join(c.ljust(w) if i == 0 else c.rjust(w)
                                    for i, (c, w) in enumerate(zip(r, widths))).rstrip())
        lines.insert(1, "-+-".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"

    def records(self):
        out = []
        for label, stats in self.rows.items():
            for m in MODES:
                if m in stats:
                    out.append({"row": label, "mode": m, "mean": stats[m][0], "std": stats[m][1]})
        return out

    def jsonl(self):
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records())


def mode_velocity_report(motion, segments, label="Motion"):
    """One-row report for a single motion; see :func:`combine_reports` for several rows."""
    return VelocityReport({label: velocity_norm_sum(motion, segments)})


def pooled_velocity_stats(pairs):
    """Per-mode (mean, std) over the segments of many (motion, segments) pairs."""
    grouped = {}
    for motion, segments in pairs:
        frames = motion.frames if isinstance(motion, MotionSequence) else motion
        for seg, s in zip(segments, segment_velocity_sums(frames, segments)):
            grouped.setdefault(seg.mode, []).append(s)
    return {m: (float(np.mean(grouped[m])), float(np.std(grouped[m]))) for m in MODES
            if m in grouped}


def combine_reports(*reports):
    rows = {}
    for r in reports:
        rows.update(r.rows)
    return VelocityReport(rows)
