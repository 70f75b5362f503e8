"""The command-line pipeline end to end on a throwaway corpus.

Writes wav / transcript / bvh files into a temporary directory and runs
preprocess, both pre-training phases, cross-modal training, generation and
evaluation, exactly as one would from a shell:

    bodyformer preprocess --audio raw/audio --transcripts raw/transcripts \\
        --motion raw/motion --out cache --config tiny.cfg --seed 5
    ...

    python3 demos/03_cli_walkthrough.py
"""
import os
import tempfile
from pathlib import Path

from bodyformer.cli import main
from bodyformer.synthetic import write_raw_corpus

CONFIG = """\
# model
d_model = 16
heads = 2
enc_layers = 1
dec_layers = 1
ff_dim = 32
max_T = 160
# schedule
batch_size = 2
seq_len = 32
pretrain_lr = 1e-3
crossmodal_lr = 1e-3
total_steps = 100
warmup_steps = 10
"""

work = Path(tempfile.mkdtemp(prefix="bodyformer-"))
os.chdir(work)
write_raw_corpus("raw", n=4, seconds=6.0)
Path("tiny.cfg").write_text(CONFIG)
common = ["--config", "tiny.cfg", "--seed", "5"]

for argv in (
    ["preprocess", "--audio", "raw/audio", "--transcripts", "raw/transcripts",
     "--motion", "raw/motion", "--out", "cache"],
    ["pretrain", "--phase", "encoder", "--cache", "cache", "--out", "enc.ckpt"],
    ["pretrain", "--phase", "decoder", "--cache", "cache", "--init", "enc.ckpt", "--out", "dec.ckpt"],
    ["train", "--cache", "cache", "--init", "dec.ckpt", "--out", "model.ckpt"],
    ["generate", "--checkpoint", "model.ckpt", "--speech", "cache", "--out", "gen"],
    ["evaluate", "--pred", "gen", "--truth", "cache", "--out", "report.txt"],
):
    print("$ bodyformer", " ".join(argv + common))
    assert main(argv + common) == 0

print()
print(Path("report.txt").read_text())
print("workspace:", work)
