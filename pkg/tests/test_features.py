import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bodyformer.errors import InputError, ParseError
from bodyformer.features import (EMBED_DIM, AudioClip, WordToken, align_words,
                                 attach_embeddings, build_speech_features, fit_pca, label_modes,
                                 load_speech_features, mel_band_centers, mel_spectrogram,
                                 read_embeddings, read_transcript, read_wav,
                                 save_speech_features, spec_augment, stub_word_embedder,
                                 write_embeddings, write_transcript, write_wav)


# --------------------------------------------------------------------- mel

def test_silence_gives_zero_features():
    mel = mel_spectrogram(np.zeros(48000), 48000)
    assert mel.shape == (20, 27)
    assert (mel == 0.0).all()


def test_two_second_clip_at_48k_has_40_frames():
    assert mel_spectrogram(np.ones(96000) * 0.1, 48000).shape == (40, 27)


@pytest.mark.parametrize("band", [3, 10, 20, 26])
def test_tone_at_band_centre_peaks_in_that_band(band):
    sr = 48000
    f = mel_band_centers(27, sr)[band]
    t = np.arange(sr) / sr
    mel = mel_spectrogram(np.sin(2 * np.pi * f * t), sr)
    assert np.argmax(mel[2:-2].mean(axis=0)) == band


def test_odd_rate_is_resampled():
    mel = mel_spectrogram(np.random.default_rng(0).normal(size=22050), 22050)
    assert mel.shape == (20, 27)


def test_empty_clip_rejected():
    with pytest.raises(InputError):
        mel_spectrogram(np.zeros(0), 48000)


def test_wav_round_trip(tmp_path):
    x = np.sin(np.linspace(0, 20, 4800)) * 0.5
    write_wav(tmp_path / "a.wav", x, 48000)
    y, sr = read_wav(tmp_path / "a.wav")
    assert sr == 48000
    np.testing.assert_allclose(y, x, atol=1e-7)


# --------------------------------------------------------------------- PCA

def test_pca_rank_one_data(rng):
    direction = rng.normal(size=40)
    x = rng.normal(size=(60, 1)) * direction
    pca = fit_pca(x, 5)
    assert pca.explained_variance[0] >= (1 - 1e-10) * pca.explained_variance.sum()


def test_pca_exact_rank_reconstruction(rng):
    x = rng.normal(size=(100, 32)) @ rng.normal(size=(32, 96)) + rng.normal(size=96)
    pca = fit_pca(x, 32)
    assert np.abs(pca.reconstruct(pca.project(x)) - x).max() < 1e-8


def test_pca_orthonormal_ordered_and_idempotent(rng):
    x = rng.normal(size=(80, 50)) * np.linspace(3, 0.1, 50)
    pca = fit_pca(x, 10)
    assert np.abs(pca.basis.T @ pca.basis - np.eye(10)).max() < 1e-8
    assert (np.diff(pca.explained_variance) <= 0).all()
    # eigendecomposition oracle: same spectrum as the sample covariance
    evals = np.sort(np.linalg.eigvalsh(np.cov(x, rowvar=False)))[::-1][:10]
    np.testing.assert_allclose(pca.explained_variance, evals, rtol=1e-9)
    once = pca.reconstruct(pca.project(x))
    np.testing.assert_allclose(pca.reconstruct(pca.project(once)), once, atol=1e-10)


def test_pca_insufficient_rows(rng):
    with pytest.raises(InputError):
        fit_pca(rng.normal(size=(32, 40)), 32)


# --------------------------------------------------------------- alignment

@pytest.fixture
def pca(rng):
    return fit_pca(rng.normal(size=(64, EMBED_DIM)), 32)


def test_no_words_gives_zeros(pca):
    assert (align_words([], pca, 10) == 0).all()


def test_single_word_spans_frames_3_to_7(pca):
    w = attach_embeddings([WordToken("hello", 0.15, 0.40)])
    out = align_words(w, pca, 12)
    expected = pca.basis.T @ (w[0].embedding - pca.mean)
    for t in range(12):
        if 3 <= t <= 7:
            np.testing.assert_allclose(out[t], expected, atol=1e-12)
        else:
            assert (out[t] == 0).all()


def test_overlap_later_start_wins(pca):
    w = attach_embeddings([WordToken("a", 0.0, 0.5), WordToken("b", 0.2, 0.3)])
    out = align_words(w, pca, 10)
    np.testing.assert_array_equal(out[4], pca.project(w[1].embedding))
    np.testing.assert_array_equal(out[6], pca.project(w[0].embedding))


def test_silence_flags_zero_frames(pca):
    w = attach_embeddings([WordToken("a", 0.0, 0.5)])
    silence = np.zeros(10, dtype=bool)
    silence[2] = True
    assert (align_words(w, pca, 10, silence=silence)[2] == 0).all()


# ------------------------------------------------------------------- modes

def test_modes_long_and_short():
    words = [WordToken("x", 0.0, 1.5), WordToken("y", 1.6, 3.0),  # merged 3 s -> LS
             WordToken("z", 4.0, 5.0)]                             # 1 s -> SS
    labels, segs, clocks = label_modes(words, 120)
    assert labels[10] == "LS" and labels[35] == "LS"
    assert labels[70] == "NS" and labels[85] == "SS" and labels[110] == "NS"
    assert [s.mode for s in segs] == ["LS", "NS", "SS", "NS"]


def test_two_seconds_exactly_is_short():
    labels, _, _ = label_modes([WordToken("x", 0.0, 2.0)], 50)
    assert labels[0] == "SS"


def test_empty_transcript_all_ns():
    labels, segs, clocks = label_modes([], 15)
    assert set(labels) == {"NS"} and len(segs) == 1
    np.testing.assert_array_equal(clocks, np.arange(15))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 9), st.floats(0.05, 3)), max_size=8),
       st.integers(1, 220))
def test_mode_partition_invariants(spans, T):
    words = [WordToken("w", s, s + d) for s, d in spans]
    labels, segs, clocks = label_modes(words, T)
    assert sum(s.length for s in segs) == T
    assert segs[0].start_frame == 0
    for a, b in zip(segs, segs[1:]):
        assert a.stop_frame == b.start_frame and a.mode != b.mode
    for s in segs:
        np.testing.assert_array_equal(clocks[s.start_frame:s.stop_frame], np.arange(s.length))
        assert all(labels[t] == s.mode for t in range(s.start_frame, s.stop_frame))


# ----------------------------------------------------------- full pipeline

def _clip(seconds=3.0, sr=16000, seed=0):
    r = np.random.default_rng(seed)
    return AudioClip(r.normal(size=int(seconds * sr)) * 0.1, sr)


def test_build_features_shape_and_ns_zero(pca):
    words = attach_embeddings([WordToken("hi", 0.5, 0.9), WordToken("there", 1.0, 1.4)])
    feats = build_speech_features(_clip(), words, pca)
    assert feats.frames.shape == (60, 59)
    ns = np.array([m == "NS" for m in feats.mode_labels])
    assert ns.any() and (feats.words[ns] == 0).all()
    assert len(feats) == mel_spectrogram(_clip().samples, 16000).shape[0]
    again = build_speech_features(_clip(), words, pca)
    assert again.frames.tobytes() == feats.frames.tobytes()


def test_feature_cache_round_trip(tmp_path, pca):
    words = attach_embeddings([WordToken("hi", 0.5, 0.9)])
    feats = build_speech_features(_clip(), words, pca)
    save_speech_features(tmp_path / "f.bft", feats)
    back = load_speech_features(tmp_path / "f.bft")
    assert back.frames.tobytes() == feats.frames.tobytes()
    assert back.mode_labels == feats.mode_labels
    np.testing.assert_array_equal(back.local_clocks, feats.local_clocks)


# ------------------------------------------------------------ augmentation

def _feats(rng, T=100):
    from bodyformer.features import SpeechFeatureSequence
    return SpeechFeatureSequence(rng.normal(size=(T, 59)) + 5.0, ["NS"] * T, np.arange(T))


def test_spec_augment_zero_fraction_is_identity(rng):
    f = _feats(rng)
    out = spec_augment(f, rng, 0.0)
    np.testing.assert_array_equal(out.frames, f.frames)


def test_spec_augment_one_group_one_span(rng):
    f = _feats(rng)
    before = f.frames.copy()
    for _ in range(200):
        out = spec_augment(f, rng, 0.2)
        changed = out.frames != f.frames
        rows = np.nonzero(changed.any(axis=1))[0]
        assert len(rows) <= 20
        if len(rows):
            assert (np.diff(rows) == 1).all()
            cols = np.nonzero(changed.any(axis=0))[0]
            assert cols.max() < 27 or cols.min() >= 27
    np.testing.assert_array_equal(f.frames, before)


def test_spec_augment_mean_fraction(rng):
    f = _feats(rng)
    fracs = []
    for _ in range(10_000):
        out = spec_augment(f, rng, 0.2)
        fracs.append((out.frames == 0).any(axis=1).mean())
    # span length uniform on {0..20} of T=100 frames: mean 0.1, sd sqrt(440/12)/100
    sd = np.sqrt((21 ** 2 - 1) / 12) / 100
    assert abs(np.mean(fracs) - 0.1) < 3 * sd / np.sqrt(len(fracs))


# -------------------------------------------------------------- embeddings

def test_stub_embedder_properties():
    a = stub_word_embedder("gesture")
    np.testing.assert_array_equal(a, stub_word_embedder("gesture"))
    assert not np.array_equal(a, stub_word_embedder("speech"))
    norms = [np.linalg.norm(stub_word_embedder(f"tok{i}")) for i in range(500)]
    # ||z||^2 ~ chi2(768): mean 768, sd sqrt(2*768)
    assert abs(np.mean(np.square(norms)) - 768) < 3 * np.sqrt(2 * 768) / np.sqrt(500)


def test_transcript_and_sidecar_round_trip(tmp_path):
    words = attach_embeddings([WordToken("so", 0.1, 0.3), WordToken("interesting", 0.3, 0.9)])
    write_transcript(tmp_path / "t.tsv", words)
    back = read_transcript(tmp_path / "t.tsv")
    assert [(w.text, w.start, w.end) for w in back] == [(w.text, w.start, w.end) for w in words]
    write_embeddings(tmp_path / "t.emb", words)
    recs = read_embeddings(tmp_path / "t.emb")
    attach_embeddings(back, recs)
    np.testing.assert_array_equal(back[1].embedding, words[1].embedding)


def test_transcript_parse_error_has_line(tmp_path):
    (tmp_path / "t.tsv").write_text("0.0\t0.5\tok\nbroken line\n", encoding="utf-8")
    with pytest.raises(ParseError, match="line 2"):
        read_transcript(tmp_path / "t.tsv")
