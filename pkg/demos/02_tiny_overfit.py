"""Pre-train, then fit the cross-modal objective on a tiny synthetic corpus.

Four paired sequences, 64 frames each, two joints. The speech-to-pose map
is deterministic, so a small model should drive the joint loss close to
zero. Takes a minute or two on one core.

    python3 demos/02_tiny_overfit.py
"""
import numpy as np

from bodyformer.model import generate, init_params, tiny_config
from bodyformer.synthetic import synthetic_dataset
from bodyformer.training import (Trainer, TrainingSchedule, masked_reconstruction_error,
                                 prior_sigma_witness, teacher_forced_error)

data = synthetic_dataset(4, 64, seed=0)
params = init_params(tiny_config(), np.random.default_rng(0))

# Stage 1: masked reconstruction for each side on its own.
pre = TrainingSchedule(pretrain_lr=2e-2, total_steps=200, warmup_steps=0, batch_size=4,
                       seq_len=64)
for phase in ("encoder", "decoder"):
    t = Trainer(params, data, pre, phase, np.random.default_rng(10))
    before = masked_reconstruction_error(params, t.head, phase, data, 7, pre)
    t.run()
    after = masked_reconstruction_error(params, t.head, phase, data, 7, pre)
    print(f"{phase:8s} masked MSE {before:8.4f} -> {after:.4f}  ({before / after:.1f}x)")

# Stage 2: every parameter, all schedules on.
s = TrainingSchedule(crossmodal_lr=3e-3, total_steps=3000, warmup_steps=300, batch_size=4,
                     seq_len=64)
t = Trainer(params, data, s, "crossmodal", np.random.default_rng(1))
for _ in range(6):
    t.run(500)
    r = t.history[-1]
    print(f"step {r['step']:4d}  L_g {r['L_g']:.4f}  L_KL {r['L_KL']:.4f}  "
          f"lambda3 {r['lambda3']:.2f}  p_drop {r['dropout_p']:.2f}  lr {r['lr']:.2e}")

# From pre-trained weights this budget ends near 2e-2; the same run from a
# fresh initialisation ends near 4e-3. Decoder pre-training fits an unshifted
# reconstruction, which the shifted objective then has to unlearn.
print("teacher-forced L_g:", round(teacher_forced_error(params, data), 5))
print("prior sigma max / not collapsed:", prior_sigma_witness(params))

# Two latent draws give two different gesture sequences for the same speech.
a = generate(data[0].speech, params, np.random.default_rng(1))
b = generate(data[0].speech, params, np.random.default_rng(2))
print("max difference between two samples:", float(np.abs(a - b).max()))
