"""Variational transformer mapping speech features to 6D joint-rotation sequences."""
from .config import EMBED_SCALE, ModelConfig, tiny_config
from .network import (decode_hidden, decode_step_train, decoder_inputs, embed, encode,
                      encode_features, generate, gpe, mab, motion_tokens, mpe, posterior, prior,
                      projection_net, reparameterize, sample_prior, sequence_embed, sinusoid)
from .params import (DECODER_GROUP, ENCODER_GROUP, LATENT_GROUP, ModelParams,
                     frequency_ladder, init_params)

__all__ = [
    "DECODER_GROUP", "EMBED_SCALE", "ENCODER_GROUP", "LATENT_GROUP", "ModelConfig",
    "ModelParams", "decode_hidden", "decode_step_train", "decoder_inputs", "embed", "encode",
    "encode_features", "frequency_ladder", "generate", "gpe", "init_params", "mab",
    "motion_tokens", "mpe", "posterior", "prior", "projection_net", "reparameterize",
    "sample_prior", "sequence_embed", "sinusoid", "tiny_config",
]
