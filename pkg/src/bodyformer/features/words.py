"""Word-level features: transcript parsing, embeddings, PCA and frame alignment."""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError, ParseError
from ..numerics import tensorfile

EMBED_DIM = 768


@dataclass
class WordToken:
    text: str
    start: float
    end: float
    embedding: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if not self.start < self.end:
            raise InputError(f"word {self.text!r}: start {self.start} not before end {self.end}")


def stub_word_embedder(text, dim=EMBED_DIM):
    """Deterministic unit-variance Gaussian vector seeded by a hash of ``text``."""
    seed = int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little")
    return np.random.default_rng(seed).standard_normal(dim)


# -------------------------------------------------------------------- PCA

@dataclass
class PcaProjection:
    mean: np.ndarray
    basis: np.ndarray  # (in_dim, out_dim), orthonormal columns
    explained_variance: np.ndarray

    def project(self, x):
        return (np.asarray(x, dtype=np.float64) - self.mean) @ self.basis

    def reconstruct(self, z):
        return np.asarray(z) @ self.basis.T + self.mean

    def to_arrays(self):
        return {"pca.mean": self.mean, "pca.basis": self.basis,
                "pca.explained_variance": self.explained_variance}

    @classmethod
    def from_arrays(cls, arrays):
        return cls(arrays["pca.mean"], arrays["pca.basis"], arrays["pca.explained_variance"])

    def save(self, path):
        tensorfile.save(path, self.to_arrays(), {"format": "bodyformer-pca"})

    @classmethod
    def load(cls, path):
        arrays, _ = tensorfile.load(path)
        return cls.from_arrays(arrays)


def fit_pca(embeddings, out_dim=32):
    """Principal axes of the centred rows, by descending variance."""
    x = np.asarray(embeddings, dtype=np.float64)
    n = x.shape[0]
    if n <= out_dim:
        raise InputError(f"PCA to {out_dim} dims needs more than {out_dim} rows, got {n}")
    mean = x.mean(axis=0)
    _, s, vt = np.linalg.svd(x - mean, full_matrices=False)
    basis = vt[:out_dim].T.copy()
    # fix the sign so the largest-magnitude loading of each axis is positive
    flip = np.sign(basis[np.abs(basis).argmax(axis=0), np.arange(out_dim)])
    basis *= np.where(flip == 0, 1.0, flip)
    return PcaProjection(mean, basis, (s[:out_dim] ** 2) / (n - 1))


# -------------------------------------------------------------- alignment

def frame_times(T, fps=20):
    return np.arange(T) / float(fps)


def word_frame_index(words, T, fps=20):
    """Per-frame index of the word covering the frame's start time, or -1.

    A frame belongs to a word when its time t/fps lies in [start, end).
    Where intervals overlap, the word with the later start wins.
    """
    owner = np.full(T, -1, dtype=np.int64)
    times = frame_times(T, fps)
    order = sorted(range(len(words)), key=lambda i: (words[i].start, i))
    for i in order:
        w = words[i]
        owner[(times >= w.start) & (times < w.end)] = i
    return owner


def align_words(words, pca, T, fps=20, silence=None):
    """(T, out_dim) matrix of projected word vectors; silent / wordless frames are zero."""
    out = np.zeros((T, pca.basis.shape[1]))
    owner = word_frame_index(words, T, fps)
    if silence is not None:
        owner = np.where(np.asarray(silence, dtype=bool), -1, owner)
    for i in np.unique(owner[owner >= 0]):
        out[owner == i] = pca.project(words[i].embedding)
    return out


# --------------------------------------------------------------------- I/O

def read_transcript(path):
    """``start<TAB>end<TAB>token`` per line, UTF-8; blank lines and ``#`` comments skipped."""
    words = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(f"{path}: line {lineno}: expected 3 tab-separated fields")
            try:
                words.append(WordToken(parts[2], float(parts[0]), float(parts[1])))
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from None
    return words


def write_transcript(path, words):
    with open(path, "w", encoding="utf-8") as fh:
        for w in words:
            fh.write(f"{w.start!r}\t{w.end!r}\t{w.text}\n")


_EMB_MAGIC = b"BFWE"


def write_embeddings(path, words):
    """Sidecar with one record per transcript line, in transcript order.

    Layout: magic b"BFWE", u32 version (1), u32 dim, u32 count, then per
    record u32 token byte length, UTF-8 token, dim x f64 little-endian.
    """
    dim = len(words[0].embedding) if words else EMBED_DIM
    parts = [_EMB_MAGIC, struct.pack("<III", 1, dim, len(words))]
    for w in words:
        tb = w.text.encode("utf-8")
        parts += [struct.pack("<I", len(tb)), tb,
                  np.ascontiguousarray(w.embedding, dtype="<f8").tobytes()]
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def read_embeddings(path):
    """List of (token, vector) records from a sidecar file."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != _EMB_MAGIC:
        raise ParseError(f"{path}: bad magic bytes")
    try:
        version, dim, count = struct.unpack_from("<III", buf, 4)
        pos = 16
        out = []
        for i in range(count):
            (n,) = struct.unpack_from("<I", buf, pos)
            pos += 4
            token = buf[pos:pos + n].decode("utf-8")
            pos += n
            if pos + 8 * dim > len(buf):
                raise ParseError(f"{path}: record {i} truncated")
            out.append((token, np.frombuffer(buf, "<f8", dim, pos).astype(np.float64)))
            pos += 8 * dim
    except struct.error:
        raise ParseError(f"{path}: truncated header or record") from None
    if version != 1:
        raise ParseError(f"{path}: unsupported version {version}")
    return out


def attach_embeddings(words, records=None, embedder=stub_word_embedder):
    """Fill ``word.embedding`` from sidecar records (matched by position) or the embedder."""
    if records is not None and len(records) != len(words):
        raise InputError(f"{len(records)} embedding records for {len(words)} words")
    for i, w in enumerate(words):
        if records is not None:
            token, vec = records[i]
            if token != w.text:
                raise InputError(f"embedding record {i} is for {token!r}, transcript has {w.text!r}")
            w.embedding = vec
        else:
            w.embedding = embedder(w.text)
    return words
