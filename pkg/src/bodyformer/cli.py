"""Command-line entry point: preprocess, pretrain, train, generate, evaluate.

Every command is deterministic under ``--seed`` and stamps its outputs with
the tool version, a hash of the effective configuration and the seed. Set
``BODYFORMER_LOG`` (DEBUG, INFO, WARNING, ...) to change log verbosity.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import apply_kv, check_known_keys, config_hash, format_kv, parse_kv
from .errors import BodyFormerError, ConfigError, InputError
from .evaluation import (VelocityReport, maje, motion_fgd, pooled_velocity_stats)
from .features import (AudioClip, attach_embeddings, build_speech_features,
                       fit_pca, load_speech_features, read_embeddings, read_transcript, read_wav,
                       save_speech_features)
from .model import ModelConfig, generate, init_params
from .motion import MotionSequence, read_bvh, read_motion, resample_frames, write_motion
from .motion.io import skeleton_from_json, skeleton_to_json
from .training import Trainer, TrainingSample, TrainingSchedule, params_from_checkpoint
from .training.loops import read_checkpoint

log = logging.getLogger("bodyformer")

SPEECH_SUFFIX = ".speech.bftn"
MOTION_SUFFIX = ".motion.bftn"
PCA_FILE = "pca.bftn"
MANIFEST = "manifest.json"


# ------------------------------------------------------------- run config

@dataclasses.dataclass
class RunManifest:
    """Inputs of one training invocation, stored in the checkpoint header.

    ``checkpoint`` is the starting checkpoint (``--init``), empty for a fresh
    initialisation; the output path is deliberately not recorded so that a
    run is byte-identical wherever it writes.
    """

    config: str
    datasets: list
    checkpoint: str
    seed: int
    phase: str


def load_config(path, pose_dim=None):
    """(ModelConfig, TrainingSchedule, hash) from a flat key-value file.

    ``pose_dim`` fills in the pose width from the data when the file does
    not set it; a conflicting explicit value is an error.
    """
    values = {}
    if path:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {p} does not exist")
        values = parse_kv(p.read_text(encoding="utf-8"), str(p))
    check_known_keys(values, ModelConfig, TrainingSchedule)
    model = apply_kv(ModelConfig, values)
    if pose_dim is not None:
        if "pose_dim" in values and model.pose_dim != pose_dim:
            raise ConfigError(f"config pose_dim={model.pose_dim} but the data has {pose_dim}")
        model = dataclasses.replace(model, pose_dim=pose_dim)
    schedule = apply_kv(TrainingSchedule, values)
    return model, schedule, config_hash(format_kv(model, schedule))


def provenance(cfg_hash, seed):
    return {"tool": "bodyformer", "tool_version": __version__, "config_hash": cfg_hash,
            "seed": int(seed)}


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


# ------------------------------------------------------------ preprocess

def _index(directory, suffixes, what):
    d = Path(directory)
    if not d.is_dir():
        raise InputError(f"{what} directory {d} does not exist")
    found = {}
    for f in sorted(d.iterdir()):
        for suf in suffixes:
            if f.name.endswith(suf):
                found.setdefault(f.name[:-len(suf)], f)
    if not found:
        raise InputError(f"{what} directory {d} contains no {'/'.join(suffixes)} files")
    return found


def _read_motion_any(path):
    if str(path).endswith(".bvh"):
        m = read_bvh(path)
        frames = resample_frames(m.frames, m.fps, 20.0)
        return MotionSequence(frames, m.skeleton, 20.0)
    m = read_motion(path)
    return MotionSequence(resample_frames(m.frames, m.fps, 20.0), m.skeleton, 20.0)


def cmd_preprocess(args):
    audio = _index(args.audio, (".wav",), "audio")
    text = _index(args.transcripts, (".txt", ".tsv"), "transcript")
    motion = _index(args.motion, (".bvh", MOTION_SUFFIX), "motion")
    names = sorted(set(audio) & set(text) & set(motion))
    unpaired = sorted((set(audio) | set(text) | set(motion)) - set(names))
    for n in unpaired:
        missing = [k for k, idx in (("audio", audio), ("transcript", text), ("motion", motion))
                   if n not in idx]
        log.warning("skipping %s: no %s file", n, " or ".join(missing))
    if not names:
        raise InputError(f"no complete audio/transcript/motion triples across {args.audio}, "
                         f"{args.transcripts}, {args.motion}")
    _, _, cfg_hash = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    words = {}
    for n in names:
        ws = read_transcript(text[n])
        sidecar = text[n].with_suffix(".emb")
        attach_embeddings(ws, read_embeddings(sidecar) if sidecar.exists() else None)
        words[n] = ws
    all_vecs = [w.embedding for n in names for w in words[n]]
    if len(all_vecs) <= 32:
        raise InputError(f"only {len(all_vecs)} words in the corpus; the word projection "
                         "needs more than 32 to fit")
    pca = fit_pca(np.stack(all_vecs))
    pca.save(out / PCA_FILE)

    meta = provenance(cfg_hash, args.seed)
    samples = []
    for n in names:
        samples_, rate = read_wav(audio[n])
        feats = build_speech_features(AudioClip(samples_, rate), words[n], pca)
        mot = _read_motion_any(motion[n])
        T = min(len(feats), len(mot))
        if len(feats) != len(mot):
            log.warning("%s: %d speech frames vs %d motion frames; truncating to %d", n,
                        len(feats), len(mot), T)
        if T == 0:
            log.warning("skipping %s: no frames", n)
            continue
        save_speech_features(out / (n + SPEECH_SUFFIX), feats.crop(0, T), meta)
        write_motion(MotionSequence(mot.frames[:T], mot.skeleton, 20.0), out / (n + MOTION_SUFFIX),
                     meta)
        samples.append({"name": n, "frames": T})
    _write_json(out / MANIFEST, {**meta, "samples": samples, "skipped": unpaired})
    print(f"preprocessed {len(samples)} pairs into {out}")
    return 0


# -------------------------------------------------------------- training

def load_cache(cache):
    d = Path(cache)
    if not (d / MANIFEST).is_file():
        raise InputError(f"feature cache {d} not found (no {MANIFEST}); run preprocess first")
    doc = json.loads((d / MANIFEST).read_text(encoding="utf-8"))
    out = []
    for s in doc["samples"]:
        speech = load_speech_features(d / (s["name"] + SPEECH_SUFFIX))
        motion = read_motion(d / (s["name"] + MOTION_SUFFIX))
        out.append(TrainingSample(speech, motion, s["name"]))
    if not out:
        raise InputError(f"feature cache {d} holds no samples")
    return out


def _train_phase(args, phase):
    data = load_cache(args.cache)
    skeleton = data[0].motion.skeleton
    model_cfg, schedule, cfg_hash = load_config(args.config, 6 * skeleton.n_joints)
    metrics = Path(str(args.out) + ".metrics.jsonl")
    if args.resume:
        trainer = Trainer.resume(args.resume, data, schedule, metrics)
        if trainer.phase != phase:
            raise ConfigError(f"{args.resume} is a {trainer.phase} checkpoint, not {phase}")
        if trainer.params.config != model_cfg:
            raise ConfigError(f"{args.resume}: model config differs from {args.config}")
    else:
        rng = np.random.default_rng(args.seed)
        if args.init:
            arrays, meta = read_checkpoint(args.init)
            params = params_from_checkpoint(arrays, meta, model_cfg)
        else:
            params = init_params(model_cfg, rng)
        if metrics.exists():
            metrics.unlink()
        trainer = Trainer(params, data, schedule, phase, rng, metrics_path=metrics)
        run = RunManifest(args.config or "", [str(args.cache)], args.init or "", args.seed, phase)
        trainer.extra_meta = {**provenance(cfg_hash, args.seed), "run": dataclasses.asdict(run),
                              "skeleton": json.loads(skeleton_to_json(skeleton))}
    trainer.log_fields = {k: trainer.extra_meta[k] for k in ("tool_version", "config_hash", "seed")
                          if k in trainer.extra_meta}
    trainer.run(args.steps, checkpoint_path=args.out)
    last = trainer.history[-1] if trainer.history else {}
    print(f"{phase}: step {trainer.step}/{trainer.total_steps} "
          + " ".join(f"{k}={last[k]:.6g}" for k in ("mse", "L_g", "L_m", "L_KL") if k in last))
    return 0


def cmd_pretrain(args):
    return _train_phase(args, args.phase)


def cmd_train(args):
    return _train_phase(args, "crossmodal")


# -------------------------------------------------------------- generate

def cmd_generate(args):
    arrays, meta = read_checkpoint(args.checkpoint)
    cfg = None
    if args.config:
        cfg, _, _ = load_config(args.config, meta["model"]["pose_dim"])
    params = params_from_checkpoint(arrays, meta, cfg)
    if "skeleton" not in meta:
        raise ConfigError(f"{args.checkpoint} carries no skeleton; was it written by train?")
    skeleton = skeleton_from_json(json.dumps(meta["skeleton"]), str(args.checkpoint))
    src = Path(args.speech)
    inputs = (sorted(src.glob("*" + SPEECH_SUFFIX)) if src.is_dir() else [src])
    if not inputs:
        raise InputError(f"no speech caches ({SPEECH_SUFFIX}) under {src}")
    out = Path(args.out)
    if src.is_dir() or args.samples > 1:
        out.mkdir(parents=True, exist_ok=True)
    info = provenance(meta.get("config_hash", ""), args.seed)
    for i, path in enumerate(inputs):
        speech = load_speech_features(path)
        name = path.name[:-len(SPEECH_SUFFIX)] if path.name.endswith(SPEECH_SUFFIX) else path.stem
        for k in range(args.samples):
            rng = np.random.default_rng([args.seed, i, k])
            motion = generate(speech, params, rng, skeleton=skeleton)
            if src.is_dir():
                suffix = f".{k}" if args.samples > 1 else ""
                target = out / f"{name}{suffix}{MOTION_SUFFIX}"
            elif args.samples > 1:
                target = out / f"{name}.{k}{MOTION_SUFFIX}"
            else:
                target = out
            write_motion(motion, target, {**info, "sample": k, "source": path.name})
    print(f"generated {len(inputs) * args.samples} motion file(s) into {out}")
    return 0


# -------------------------------------------------------------- evaluate

def _motions(directory, what):
    return {name: read_motion(p) for name, p in _index(directory, (MOTION_SUFFIX,), what).items()}


def cmd_evaluate(args):
    preds = _motions(args.pred, "prediction")
    truths = _motions(args.truth, "reference")
    if set(preds) != set(truths):
        only_p = sorted(set(preds) - set(truths))
        only_t = sorted(set(truths) - set(preds))
        raise InputError("prediction/reference pairing failed; "
                         f"only predicted: {only_p or 'none'}; only reference: {only_t or 'none'}")
    seg_dir = Path(args.segments or args.truth)
    segments = {}
    for n in sorted(truths):
        p = seg_dir / (n + SPEECH_SUFFIX)
        if not p.is_file():
            raise InputError(f"no segment source {p} for {n}")
        segments[n] = load_speech_features(p).segments
    _, _, cfg_hash = load_config(args.config)
    names = sorted(truths)
    pairs = []
    for n in names:
        T = min(len(preds[n]), len(truths[n]))
        if len(preds[n]) != len(truths[n]):
            log.warning("%s: %d predicted vs %d reference frames; truncating", n,
                        len(preds[n]), len(truths[n]))
        pairs.append((MotionSequence(preds[n].frames[:T], preds[n].skeleton, 20.0),
                      MotionSequence(truths[n].frames[:T], truths[n].skeleton, 20.0)))
    w = min([args.window] + [len(t) for _, t in pairs])
    frames = sum(len(t) for _, t in pairs)
    per_axis = sum(maje(p, t) * len(t) for p, t in pairs) / frames
    per_joint = sum(maje(p, t, per_joint=True) * len(t) for p, t in pairs) / frames
    fgd_value = motion_fgd([p for p, _ in pairs], [t for _, t in pairs], window=w)

    def clip(segs, T):
        return [s for s in segs if s.stop_frame <= T]

    report = VelocityReport({
        "Ground Truth": pooled_velocity_stats([(t, clip(segments[n], len(t)))
                                               for n, (_, t) in zip(names, pairs)]),
        "Generated": pooled_velocity_stats([(p, clip(segments[n], len(p)))
                                            for n, (p, _) in zip(names, pairs)]),
    })
    info = provenance(cfg_hash, args.seed)
    metrics = {"maje": per_axis, "maje_per_joint": per_joint, "maje_variant": "per-axis",
               "fgd": fgd_value, "fgd_window": w, "pairs": names}
    if args.format == "json":
        doc = {**info, **metrics, "velocity": report.records()}
        text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    elif args.format == "jsonl":
        rows = [{"kind": "provenance", **info}, {"kind": "metrics", **metrics}]
        rows += [{"kind": "velocity", **r} for r in report.records()]
        text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows)
    else:
        head = "".join(f"# {k}: {info[k]}\n" for k in sorted(info))
        body = (f"MAJE (per-axis mean absolute): {per_axis:.6f}\n"
                f"MAJE (per-joint Euclidean):    {per_joint:.6f}\n"
                f"FGD (window {w}):               {fgd_value:.6g}\n"
                f"pairs: {', '.join(names)}\n\n")
        text = head + body + report.table()
    Path(args.out).write_text(text, encoding="utf-8")
    print(f"report written to {args.out}")
    return 0


# ------------------------------------------------------------------ main

def build_parser():
    p = argparse.ArgumentParser(prog="bodyformer", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"bodyformer {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_help):
        sp.add_argument("--config", help="flat key = value file (model and schedule fields)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", required=True, help=out_help)

    sp = sub.add_parser("preprocess", help="build speech/motion feature caches")
    sp.add_argument("--audio", required=True)
    sp.add_argument("--transcripts", required=True)
    sp.add_argument("--motion", required=True)
    common(sp, "cache directory")
    sp.set_defaults(func=cmd_preprocess)

    for name, func, extra in (("pretrain", cmd_pretrain, True), ("train", cmd_train, False)):
        sp = sub.add_parser(name, help="intra-modal pre-training" if extra
                            else "cross-modal learning")
        if extra:
            sp.add_argument("--phase", choices=("encoder", "decoder"), required=True)
        sp.add_argument("--cache", required=True)
        sp.add_argument("--init", help="checkpoint to start from")
        sp.add_argument("--resume", help="checkpoint of an interrupted run of this phase")
        sp.add_argument("--steps", type=int, help="stop after this many more steps")
        common(sp, "checkpoint path")
        sp.set_defaults(func=func)

    sp = sub.add_parser("generate", help="sample gestures for speech caches")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--speech", required=True, help="a .speech.bftn file or a cache directory")
    sp.add_argument("--samples", type=int, default=1)
    common(sp, "motion file, or directory for several outputs")
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("evaluate", help="MAJE, FGD and per-mode velocity report")
    sp.add_argument("--pred", required=True)
    sp.add_argument("--truth", required=True)
    sp.add_argument("--segments", help="directory with .speech.bftn files (default: --truth)")
    sp.add_argument("--window", type=int, default=10)
    sp.add_argument("--format", choices=("text", "json", "jsonl"), default="text")
    common(sp, "report path")
    sp.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None):
    level = os.environ.get("BODYFORMER_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if getattr(args, "samples", 1) < 1:
        print("error: --samples must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except BodyFormerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
