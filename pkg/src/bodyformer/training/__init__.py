"""Objectives, schedules and the three training phases."""
from .loops import (PHASES, Batch, Trainer, TrainingSample, crossmodal_loss, full_batch,
                    masked_reconstruction_error, params_from_checkpoint, pretrain_decoder,
                    pretrain_encoder, prior_sigma_witness, read_checkpoint, reconstruction_loss, teacher_forced_error,
                    train_crossmodal)
from .losses import (joint_prediction_loss, kl_divergence, kl_from_logvar, magnitude_loss,
                     masked_mse, total_loss)
from .masking import corrupt_for_masked_modeling, frame_keep_mask, round_half_up
from .schedules import (TrainingSchedule, cyclical_lambda3, dropout_annealing_p,
                        warmup_cosine_lr)

__all__ = [
    "PHASES", "Batch", "Trainer", "TrainingSample", "TrainingSchedule",
    "corrupt_for_masked_modeling", "crossmodal_loss", "cyclical_lambda3", "dropout_annealing_p",
    "frame_keep_mask", "full_batch", "joint_prediction_loss", "kl_divergence", "kl_from_logvar",
    "magnitude_loss", "masked_mse", "masked_reconstruction_error", "params_from_checkpoint",
    "pretrain_decoder", "pretrain_encoder", "prior_sigma_witness", "read_checkpoint", "reconstruction_loss",
    "round_half_up", "teacher_forced_error", "total_loss", "train_crossmodal", "warmup_cosine_lr",
]
