"""Log-mel features at the motion frame rate."""
from __future__ import annotations

from math import gcd

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from ..errors import InputError


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_band_centers(n_mels, sample_rate):
    """Centre frequency (Hz) of each triangular filter."""
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2.0), n_mels + 2))
    return edges[1:-1]


def mel_filterbank(n_mels, n_fft, sample_rate):
    """(n_mels, n_fft//2 + 1) triangular filters with unit peak, spanning 0..Nyquist."""
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2.0), n_mels + 2))
    freqs = np.fft.rfftfreq(n_fft, 1.0 / sample_rate)
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    up = (freqs - lo) / (mid - lo)
    down = (hi - freqs) / (hi - mid)
    return np.maximum(0.0, np.minimum(up, down))


def _resample_to_multiple(samples, sample_rate, fps):
    target = int(round(sample_rate / fps)) * fps
    if target == sample_rate:
        return samples, sample_rate
    g = gcd(int(target), int(sample_rate))
    return resample_poly(samples, target // g, sample_rate // g), target


def mel_spectrogram(samples, sample_rate, n_mels=27, fps=20):
    """(T, n_mels) log(1 + mel power), one row per 1/fps seconds.

    hop = sample_rate / fps; Hann window of 2 * hop centred on each hop
    interval; T = floor(len(samples) / hop). Rates that are not a multiple of
    ``fps`` are resampled to the nearest one first.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1 or samples.size == 0:
        raise InputError("audio clip must be a non-empty mono signal")
    if sample_rate <= 0:
        raise InputError(f"sample rate must be positive, got {sample_rate}")
    if not np.all(np.isfinite(samples)):
        raise InputError("audio samples are not finite")
    samples, sample_rate = _resample_to_multiple(samples, int(sample_rate), fps)
    hop = sample_rate // fps
    n_fft = 2 * hop
    T = samples.size // hop
    if T == 0:
        raise InputError(f"clip shorter than one frame ({hop} samples)")
    half = hop // 2
    padded = np.zeros(T * hop + n_fft)
    padded[half:half + samples.size] = samples
    frames = np.lib.stride_tricks.sliding_window_view(padded, n_fft)[::hop][:T]
    spec = np.fft.rfft(frames * np.hanning(n_fft + 1)[:-1], axis=1)
    power = spec.real ** 2 + spec.imag ** 2
    return np.log1p(power @ mel_filterbank(n_mels, n_fft, sample_rate).T)


def read_wav(path):
    """Mono float samples and rate from a 16-bit PCM or 32-bit float WAV."""
    rate, data = wavfile.read(path)
    if data.dtype == np.int16:
        data = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        data = data.astype(np.float64) / 2147483648.0
    else:
        data = data.astype(np.float64)
    if data.ndim == 2:
        data = data.mean(axis=1)
    return data, int(rate)


def write_wav(path, samples, sample_rate):
    wavfile.write(path, int(sample_rate), np.asarray(samples, dtype=np.float32))
