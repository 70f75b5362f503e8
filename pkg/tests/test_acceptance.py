"""Acceptance criteria 1-12, one test each, each reporting a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the summary lines are
repeated at the end of the pytest session.
"""
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from bodyformer.cli import main as cli_main
from bodyformer.evaluation import (REFERENCE_VELOCITY_TRINITY, GaussianSummary, VelocityReport,
                                   fgd, frechet_distance, maje, mode_velocity_report)
from bodyformer.features import local_clocks, segments_from_labels
from bodyformer.model import (DECODER_GROUP, EMBED_SCALE, ENCODER_GROUP, LATENT_GROUP,
                              decode_hidden, decode_step_train, encode, generate, gpe,
                              init_params, mpe, tiny_config)
from bodyformer.motion import (ModeSegment, MotionSequence, euler_to_rotmat, rotmat_to_6d,
                               sixd_to_rotmat)
from bodyformer.synthetic import chain_skeleton, synthetic_dataset, write_raw_corpus
from bodyformer.training import (Trainer, TrainingSchedule, corrupt_for_masked_modeling,
                                 cyclical_lambda3, dropout_annealing_p, full_batch,
                                 joint_prediction_loss, kl_divergence, magnitude_loss,
                                 masked_reconstruction_error, prior_sigma_witness,
                                 teacher_forced_error, warmup_cosine_lr)

from conftest import ACCEPTANCE_LINES, full_loss_gradient_errors

OVERFIT = dict(crossmodal_lr=3e-3, total_steps=3000, warmup_steps=300, batch_size=4, seq_len=64)
PRETRAIN = dict(pretrain_lr=2e-2, total_steps=200, warmup_steps=0, batch_size=4, seq_len=64)


def verdict(n, title, checks):
    """Print one line for criterion ``n`` and fail the test if any check is false."""
    failed = [name for name, ok in checks if not ok]
    line = f"criterion {n:2d} {'PASS' if not failed else 'FAIL'}: {title}"
    if failed:
        line += " -- failed: " + "; ".join(failed)
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert not failed, line


def quat_to_matrix(q):
    w, x, y, z = q / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


# ---------------------------------------------------------------------------

def test_criterion_01_gradient_fidelity():
    start = time.perf_counter()
    errors = full_loss_gradient_errors(per_tensor=10)
    elapsed = time.perf_counter() - start
    worst = max(errors, key=errors.get)
    required = ("speech_embed.gpe_freqs", "speech_embed.mpe_freqs", "motion_embed.gpe_freqs",
                "motion_embed.mpe_freqs", "prior.mu", "prior.logvar", "seq_embed.pma.seed")
    verdict(1, f"gradient fidelity over {len(errors)} groups, worst {worst} "
               f"{errors[worst]:.2e}, {elapsed:.1f} s", [
        ("named groups probed", all(k in errors for k in required)),
        ("relative error < 1e-4", errors[worst] < 1e-4),
        ("runtime < 2 min", elapsed < 120.0),
    ])


def test_criterion_02_causality():
    params = init_params(tiny_config(), np.random.default_rng(0))
    rng = np.random.default_rng(1)
    sample = synthetic_dataset(1, 8, seed=2)[0]
    speech = sample.speech
    enc = encode(speech.frames, speech.modes, speech.local_clocks, params).data
    eta = rng.normal(size=params.config.d_model)
    motion = rng.normal(size=(8, params.config.pose_dim))
    base = decode_step_train(motion, enc, eta, speech.modes, speech.local_clocks, params).data
    worst = 0.0
    for j in range(8):
        bumped = motion.copy()
        bumped[j] += rng.normal(size=params.config.pose_dim)
        out = decode_step_train(bumped, enc, eta, speech.modes, speech.local_clocks, params).data
        for i in range(j):
            worst = max(worst, float(np.abs(out[i] - base[i]).max()))
    verdict(2, f"causality over all (i, j>i) on T=8, max leak {worst:.1e}",
            [("leak < 1e-12", worst < 1e-12)])


def test_criterion_03_embedding_constants():
    params = init_params(tiny_config(), np.random.default_rng(0))
    d = params.config.d_model
    g0 = gpe(np.array([0]), params["speech_embed.gpe_freqs"]).data[0]
    pattern = np.tile([0.0, 1.0], d // 2)
    labels = ["SS"] * 3 + ["NS"] * 2 + ["SS"] * 4 + ["LS"] * 3 + ["SS"] * 3
    clocks = local_clocks(segments_from_labels(labels), len(labels))
    modes = np.array([{"NS": 0, "SS": 1, "LS": 2}[m] for m in labels])
    m = mpe(modes, clocks, params["speech_embed.mpe_freqs"]).data
    pairs = [(i, j) for i in range(len(labels)) for j in range(i + 1, len(labels))
             if modes[i] == modes[j] and clocks[i] == clocks[j]]
    mpe_gap = max(float(np.abs(m[i] - m[j]).max()) for i, j in pairs)
    verdict(3, f"c = {EMBED_SCALE:.15f}, GPE(0) pattern, MPE equal on {len(pairs)} pairs", [
        ("c = sqrt(512/3)", abs(EMBED_SCALE - math.sqrt(512 / 3)) < 1e-12),
        ("GPE(0) sin=0/cos=1", np.array_equal(g0, pattern)),
        ("pairs across segments exist", len(pairs) >= 3),
        ("MPE equal to 1e-12", mpe_gap < 1e-12),
    ])


def test_criterion_04_schedules():
    base, total, warm = 1e-4, 1000, 200
    mid = warm + (total - warm) // 2
    verdict(4, "lambda3, dropout and learning-rate schedule values", [
        ("lambda3(0) = 0.2", abs(cyclical_lambda3(0) - 0.2) < 1e-12),
        ("lambda3(10) = 0.2", abs(cyclical_lambda3(10) - 0.2) < 1e-12),
        ("lambda3(5) = 1.6", abs(cyclical_lambda3(5) - 1.6) < 1e-12),
        ("p(0) = 1.0", dropout_annealing_p(0, warm) == 1.0),
        ("p(warmup end) = 0.6", abs(dropout_annealing_p(warm, warm) - 0.6) < 1e-12),
        ("lr(0) = 0", warmup_cosine_lr(0, total, warm, base) == 0.0),
        ("lr(warmup) = base", abs(warmup_cosine_lr(warm, total, warm, base) - base) < 1e-12),
        ("cosine midpoint = base/2",
         abs(warmup_cosine_lr(mid, total, warm, base) - base / 2) < 1e-12),
    ])


def test_criterion_05_masking_statistics():
    rng = np.random.default_rng(0)
    frames = rng.normal(size=(100, 6)) + 5.0
    out, mask = corrupt_for_masked_modeling(frames, rng)
    zero = np.all(out[mask] == 0.0, axis=1)
    counts = (int(mask.sum()), int((~zero).sum()), int(zero.sum()))
    untouched = np.array_equal(out[~mask], frames[~mask])
    noise = []
    for _ in range(10_000):
        out, mask = corrupt_for_masked_modeling(frames, rng)
        noise.append(out[mask & np.any(out != 0.0, axis=1)])
    v = np.concatenate(noise).ravel()
    var = float(v.var())
    sigma = math.sqrt(2.0 / v.size)
    verdict(5, f"T=100 modified/noise/zero = {counts}; noise variance {var:.4f} "
               f"(3 sigma = {3 * sigma:.4f})", [
        ("counts (20, 2, 18)", counts == (20, 2, 18)),
        ("unmasked frames untouched", untouched),
        ("variance within 3 sigma of 1", abs(var - 1.0) < 3 * sigma),
    ])


def test_criterion_06_losses():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(16, 12))
    kl_unit = kl_divergence(np.zeros(1), np.ones(1), np.ones(1), np.ones(1)).item()
    draws = [kl_divergence(rng.normal(size=4), np.exp(rng.normal(size=4)), rng.normal(size=4),
                           np.exp(rng.normal(size=4))).item() for _ in range(1000)]
    verdict(6, f"L_g, L_m zero on identical inputs; KL(N(0,1)||N(1,1)) = {kl_unit!r}; "
               f"min KL over 1000 draws {min(draws):.3g}", [
        ("L_g = 0", joint_prediction_loss(x, x).item() == 0.0),
        ("L_m = 0", magnitude_loss(x, x).item() == 0.0),
        ("KL unit shift = 0.5", abs(kl_unit - 0.5) < 1e-12),
        ("KL >= 0", min(draws) >= 0.0),
    ])


def test_criterion_07_metrics():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(200, 8))
    fgd_self = fgd(a, a)
    one_d = frechet_distance(GaussianSummary([0.0], [[1.0]]), GaussianSummary([3.0], [[1.0]]),
                             eps=0.0)
    skel = chain_skeleton(2)
    angles = rng.uniform(-1, 1, (12, 2, 3))
    motion = MotionSequence(rotmat_to_6d(euler_to_rotmat(angles * 60, "ZXY")).reshape(12, -1),
                            skel)
    # constructed sequence: only channel 0 moves; per-segment velocity sums are 3, 5 and 1
    x = np.array([0, 1, 3, 3, 3, 7, 8, 8, 8, 9], dtype=float)
    frames = np.zeros((10, 6))
    frames[:, 0] = x
    segs = [ModeSegment("NS", 0, 3), ModeSegment("SS", 3, 4), ModeSegment("LS", 7, 3)]
    report = mode_velocity_report(frames, segs, "GT")
    rows = report.table().splitlines()
    expected_row = ["GT", "3.00 ± 00.00", "5.00 ± 00.00", "1.00 ± 00.00"]
    published = VelocityReport(dict(REFERENCE_VELOCITY_TRINITY)).table().splitlines()
    verdict(7, f"FGD(A,A) = {fgd_self:.1e}; 1-D Frechet = {one_d!r}; velocity table", [
        ("FGD(A,A) < 1e-8", fgd_self < 1e-8),
        ("1-D Frechet = 9", abs(one_d - 9.0) < 1e-8),
        ("MAJE(x,x) = 0", maje(motion, motion) == 0.0),
        ("header", [c.strip() for c in rows[0].split("|")] == ["Speaking mode", "NS", "SS", "LS"]),
        ("hand-oracle row", [c.strip() for c in rows[2].split("|")] == expected_row),
        ("published row format", "38.97 ± 19.66" in published[2]),
    ])


def test_criterion_08_rotation_representation():
    rng = np.random.default_rng(0)
    R = np.stack([quat_to_matrix(rng.normal(size=4)) for _ in range(1000)])
    six = rotmat_to_6d(R)
    err = float(np.abs(sixd_to_rotmat(six) - R).max())
    scales = rng.uniform(0.1, 10.0, (1000, 2))
    scaled = six * np.repeat(scales, 3, axis=1)
    scale_err = float(np.abs(sixd_to_rotmat(scaled) - R).max())
    verdict(8, f"1000 rotations: round-trip error {err:.1e}, scaled-column error "
               f"{scale_err:.1e}", [
        ("round trip < 1e-10", err < 1e-10),
        ("scale invariance < 1e-10", scale_err < 1e-10),
    ])


# ---------------------------------------------------------- trained models

@pytest.fixture(scope="module")
def data():
    return synthetic_dataset(4, 64, seed=0)


@pytest.fixture(scope="module")
def overfit(data):
    params = init_params(tiny_config(), np.random.default_rng(0))
    schedule = TrainingSchedule(**OVERFIT)
    start = time.process_time()
    trainer = Trainer(params, data, schedule, "crossmodal", np.random.default_rng(1))
    trainer.run()
    return trainer, time.process_time() - start


def _pretrain(data, phase):
    params = init_params(tiny_config(), np.random.default_rng(0))
    s = TrainingSchedule(**PRETRAIN)
    t = Trainer(params, data, s, phase, np.random.default_rng(10))
    e0 = masked_reconstruction_error(params, t.head, phase, data, 7, s)
    t.run()
    return e0 / masked_reconstruction_error(params, t.head, phase, data, 7, s)


def test_criterion_09_tiny_overfit(data, overfit):
    trainer, cpu = overfit
    l_g = teacher_forced_error(trainer.params, data)
    enc_gain = _pretrain(data, "encoder")
    dec_gain = _pretrain(data, "decoder")
    verdict(9, f"L_g {l_g:.4f} after {trainer.step} steps in {cpu:.0f} s CPU; masked MSE "
               f"reduction encoder {enc_gain:.1f}x, decoder {dec_gain:.1f}x", [
        ("steps <= 3000", trainer.step <= 3000),
        ("L_g < 1e-2", l_g < 1e-2),
        ("CPU time < 10 min", cpu < 600.0),
        ("encoder pre-training >= 10x", enc_gain >= 10.0),
        ("decoder pre-training >= 10x", dec_gain >= 10.0),
    ])


def test_criterion_10_variational_contract(data, overfit):
    trainer, _ = overfit
    params = trainer.params
    speech = data[0].speech
    a = generate(speech, params, np.random.default_rng(100))
    b = generate(speech, params, np.random.default_rng(200))
    a2 = generate(speech, params, np.random.default_rng(100))
    diff = float(np.abs(a - b).max(axis=1).max())
    threshold = trainer.schedule.collapse_threshold
    sigma_max, ok = prior_sigma_witness(params, threshold)
    verdict(10, f"seed difference {diff:.3g}; prior sigma max {sigma_max:.3g} "
                f"(threshold {threshold:g})", [
        ("two seeds differ", diff > 0.0),
        ("fixed seed bit-reproducible", np.array_equal(a, a2)),
        ("prior sigma above threshold", ok),
    ])


def test_criterion_11_phase_isolation(data):
    s = TrainingSchedule(**dict(PRETRAIN, total_steps=20))
    p = init_params(tiny_config(), np.random.default_rng(0))
    dec_before = p.checksum(DECODER_GROUP + LATENT_GROUP)
    enc_before = p.checksum(ENCODER_GROUP)
    Trainer(p, data, s, "encoder", np.random.default_rng(1)).run()
    enc_only = (p.checksum(DECODER_GROUP + LATENT_GROUP) == dec_before
                and p.checksum(ENCODER_GROUP) != enc_before)

    p = init_params(tiny_config(), np.random.default_rng(0))
    enc_before = p.checksum(ENCODER_GROUP + LATENT_GROUP)
    dec_before = p.checksum(DECODER_GROUP)
    Trainer(p, data, s, "decoder", np.random.default_rng(1)).run()
    dec_only = (p.checksum(ENCODER_GROUP + LATENT_GROUP) == enc_before
                and p.checksum(DECODER_GROUP) != dec_before)

    b = full_batch(data, 16)
    rng = np.random.default_rng(2)
    enc_a = encode(b.speech, b.modes, b.local_clocks, p)
    enc_b = encode(b.speech + rng.normal(size=b.speech.shape), b.modes, b.local_clocks, p)
    ha = decode_hidden(b.motion, enc_a, None, b.modes, b.local_clocks, p, cross=False,
                       shift=False).data
    hb = decode_hidden(b.motion, enc_b, None, b.modes, b.local_clocks, p, cross=False,
                       shift=False).data
    verdict(11, "encoder/decoder pre-training checksums; decoder pre-training ignores speech", [
        ("encoder phase leaves decoder and latent untouched", enc_only),
        ("decoder phase leaves encoder and latent untouched", dec_only),
        ("decoder pre-training output invariant to speech", np.array_equal(ha, hb)),
    ])


TINY_CONFIG = """\
d_model = 16
heads = 2
enc_layers = 1
dec_layers = 1
ff_dim = 32
max_T = 160
batch_size = 2
seq_len = 32
pretrain_lr = 1e-3
crossmodal_lr = 1e-3
total_steps = 100
warmup_steps = 10
"""


def _pipeline(workdir):
    """preprocess -> pretrain (both phases) -> train -> generate -> evaluate, relative paths."""
    old = os.getcwd()
    os.chdir(workdir)
    try:
        write_raw_corpus("raw", n=4, seconds=6.0, seed=0)
        Path("tiny.cfg").write_text(TINY_CONFIG)
        common = ["--config", "tiny.cfg", "--seed", "5"]
        steps = [
            ["preprocess", "--audio", "raw/audio", "--transcripts", "raw/transcripts",
             "--motion", "raw/motion", "--out", "cache"],
            ["pretrain", "--phase", "encoder", "--cache", "cache", "--out", "enc.ckpt"],
            ["pretrain", "--phase", "decoder", "--cache", "cache", "--init", "enc.ckpt",
             "--out", "dec.ckpt"],
            ["train", "--cache", "cache", "--init", "dec.ckpt", "--out", "model.ckpt"],
            ["generate", "--checkpoint", "model.ckpt", "--speech", "cache", "--out", "gen",
             "--samples", "2"],
            ["evaluate", "--pred", "cache", "--truth", "cache", "--out", "self.txt"],
        ]
        codes = [cli_main(argv + common) for argv in steps]
        # generated samples carry a ".k" suffix; evaluate sample 0 against the references
        Path("gen0").mkdir()
        for f in sorted(Path("gen").glob("*.0.motion.bftn*")):
            (Path("gen0") / f.name.replace(".0.motion", ".motion")).write_bytes(f.read_bytes())
        codes.append(cli_main(["evaluate", "--pred", "gen0", "--truth", "cache", "--out",
                               "report.txt"] + common))
    finally:
        os.chdir(old)
    return codes, {str(p.relative_to(workdir)): p.read_bytes()
                   for p in sorted(Path(workdir).rglob("*")) if p.is_file()}


def test_criterion_12_end_to_end_determinism(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    codes_a, files_a = _pipeline(tmp_path / "a")
    codes_b, files_b = _pipeline(tmp_path / "b")
    differing = sorted(k for k in set(files_a) | set(files_b) if files_a.get(k) != files_b.get(k))
    verdict(12, f"CLI pipeline twice: {len(files_a)} files, {len(differing)} differ", [
        ("every command exits 0", codes_a == codes_b == [0] * len(codes_a)),
        ("outputs byte-identical", not differing),
        ("report written", "report.txt" in files_a),
    ])
