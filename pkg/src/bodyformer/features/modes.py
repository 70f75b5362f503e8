"""Speaking-mode labels (not / short / long speaking) from word timings."""
from __future__ import annotations

import numpy as np

from ..motion.sequence import MODES, ModeSegment

NS, SS, LS = MODES
MODE_INDEX = {m: i for i, m in enumerate(MODES)}


def speech_spans(words, merge_gap=0.3):
    """Merge word intervals separated by less than ``merge_gap`` seconds."""
    spans = []
    for w in sorted(words, key=lambda w: (w.start, w.end)):
        if spans and w.start - spans[-1][1] < merge_gap:
            spans[-1][1] = max(spans[-1][1], w.end)
        else:
            spans.append([w.start, w.end])
    return [tuple(s) for s in spans]


def segments_from_labels(labels):
    segments = []
    start = 0
    for t in range(1, len(labels) + 1):
        if t == len(labels) or labels[t] != labels[start]:
            segments.append(ModeSegment(labels[start], start, t - start))
            start = t
    return segments


def local_clocks(segments, T):
    clocks = np.zeros(T, dtype=np.int64)
    for seg in segments:
        clocks[seg.start_frame:seg.stop_frame] = np.arange(seg.length)
    return clocks


def label_modes(words, T, fps=20, merge_gap=0.3, long_threshold=2.0):
    """Per-frame mode labels, maximal segments and local clocks.

    A merged speech span longer than ``long_threshold`` seconds is LS, any
    other span SS; frames outside every span are NS. A frame belongs to a
    span when its start time t/fps lies in [span_start, span_end).
    """
    labels = [NS] * T
    times = np.arange(T) / float(fps)
    for start, end in speech_spans(words, merge_gap):
        mode = LS if end - start > long_threshold else SS
        for t in np.nonzero((times >= start) & (times < end))[0]:
            labels[t] = mode
    segments = segments_from_labels(labels)
    return labels, segments, local_clocks(segments, T)
