"""Speech side of the pipeline: log-mel audio, word vectors and speaking modes.

Builds a short synthetic clip, turns it into the 59-channel speech stream
at 20 frames per second, and shows how frames are labelled NS / SS / LS with
a local clock that restarts at every segment.

    python3 demos/01_speech_features.py
"""
import numpy as np

from bodyformer.features import (AudioClip, WordToken, attach_embeddings, build_speech_features,
                                 fit_pca)

sr = 16000
t = np.arange(4 * sr) / sr
audio = 0.3 * np.sin(2 * np.pi * 200 * t) * (t > 0.5)  # silent for the first half second

words = [WordToken("so", 0.6, 0.8), WordToken("this", 0.85, 1.1), WordToken("is", 1.15, 1.3),
         WordToken("big", 1.4, 1.7), WordToken("then", 2.6, 2.9), WordToken("stop", 3.0, 3.3)]
attach_embeddings(words)  # no sidecar: deterministic stub vectors

# The word projection needs more rows than output dims; pad the fit set with
# stub vectors for a small vocabulary.
vocab = [WordToken(w, 0.0, 0.1) for w in "a b c d e f g h i j k l m n o p q r s t u v w x y z".split()]
attach_embeddings(vocab)
pca = fit_pca(np.stack([w.embedding for w in words + vocab + vocab[:4]]))

feats = build_speech_features(AudioClip(audio, sr), words, pca)
print("frames x channels:", feats.frames.shape)  # 4 s at 20 fps -> 80 frames
print("mel block:", feats.audio.shape, " word block:", feats.words.shape)

# first frames are silent: log(1 + 0) = 0 in every mel band
print("mel energy, frame 0 vs frame 20:", feats.audio[0].sum(), round(feats.audio[20].sum(), 2))

for seg in feats.segments:
    print(f"{seg.mode}  frames {seg.start_frame:3d}-{seg.stop_frame - 1:3d}")
print("local clock:", feats.local_clocks.tolist())
