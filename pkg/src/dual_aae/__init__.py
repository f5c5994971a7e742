"""Dual adversarial auto-encoder clustering.

A generative clustering model trained by a pair of auto-encoders sharing one
set of networks: one path reconstructs observed data, the dual path
reconstructs latent codes drawn from the priors. A weight-clipped Wasserstein
critic matches the aggregated (h, z) posterior to its Gaussian prior, and an
entropy-based clustering regularizer keeps per-sample assignments confident
while balancing the batch marginal over clusters.
"""

from .autodiff import Tape, Tensor
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .data_io import Dataset, load_features_csv, load_idx, scale_unit, synth_gmm
from .distributions import (LatentCode, PriorSpec, batch_marginal,
                            entropy_categorical, kl_categorical,
                            sample_gaussian, sample_multinoulli)
from .errors import (CheckpointError, ConfigError, DataFormatError,
                     DimensionError, DualAaeError, NumericError)
from .evaluation import (ClusterReport, clustering_accuracy, hungarian_map,
                         kmeans_baseline, mode_coverage, reject_evaluate)
from .gradcheck import grad_check
from .losses import (LossBreakdown, LossWeights, clip_weights, cr_loss,
                     recon_c_loss, recon_x_loss, total_encoder_decoder_loss,
                     wgan_critic_loss, wgan_encoder_loss)
from .networks import (LayerSpec, ModelState, build_model, decode,
                       discriminate, embed, encode)
from .optim import AdamState, adam_step
from .trainer import (EpochMetrics, TrainConfig, build_state, load_model,
                      predict_proba, resume, train, train_step)

__version__ = "0.1.0"

__all__ = [
    "AdamState", "Checkpoint", "CheckpointError", "ClusterReport",
    "ConfigError", "DataFormatError", "Dataset", "DimensionError",
    "DualAaeError", "EpochMetrics", "LatentCode", "LayerSpec",
    "LossBreakdown", "LossWeights", "ModelState", "NumericError", "PriorSpec",
    "Tape", "Tensor", "TrainConfig", "adam_step", "batch_marginal",
    "build_model", "build_state", "clip_weights", "clustering_accuracy",
    "cr_loss", "decode", "discriminate", "embed", "encode",
    "entropy_categorical", "grad_check", "hungarian_map", "kl_categorical",
    "kmeans_baseline", "load_checkpoint", "load_features_csv", "load_idx",
    "load_model", "mode_coverage", "predict_proba", "recon_c_loss",
    "recon_x_loss", "reject_evaluate", "resume", "sample_gaussian",
    "sample_multinoulli", "save_checkpoint", "scale_unit", "synth_gmm",
    "total_encoder_decoder_loss", "train", "train_step", "wgan_critic_loss",
    "wgan_encoder_loss",
]
