"""Speech features: log-mel audio, PCA-reduced word vectors, speaking modes."""
from ..motion.sequence import ModeSegment
from .audio import mel_band_centers, mel_filterbank, mel_spectrogram, read_wav, write_wav
from .modes import MODE_INDEX, label_modes, local_clocks, segments_from_labels, speech_spans
from .pipeline import (FPS, N_MELS, SPEECH_DIM, WORD_DIM, AudioClip, SpeechFeatureSequence,
                       build_speech_features, load_speech_features, save_speech_features,
                       spec_augment)
from .words import (EMBED_DIM, PcaProjection, WordToken, align_words, attach_embeddings,
                    fit_pca, read_embeddings, read_transcript, stub_word_embedder,
                    word_frame_index, write_embeddings, write_transcript)

__all__ = [
    "EMBED_DIM", "FPS", "MODE_INDEX", "N_MELS", "SPEECH_DIM", "WORD_DIM", "AudioClip",
    "ModeSegment", "PcaProjection", "SpeechFeatureSequence", "WordToken", "align_words",
    "attach_embeddings", "build_speech_features", "fit_pca", "label_modes",
    "load_speech_features", "local_clocks", "mel_band_centers", "mel_filterbank",
    "mel_spectrogram", "read_embeddings", "read_transcript", "read_wav",
    "save_speech_features", "segments_from_labels", "spec_augment", "speech_spans",
    "stub_word_embedder", "word_frame_index", "write_embeddings", "write_transcript",
    "write_wav",
]
