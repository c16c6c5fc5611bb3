"""Incomplete multi-view clustering: per-view autoencoders, adversarial
completion of missing views, double contrastive consistency learning, and
k-means evaluation with standard clustering metrics."""

from .clustering import ClusteringReport, accuracy, ari, evaluate, kmeans, nmi
from .datamodel import (MultiViewDataset, NormalizationStats, SynthConfig,
                        apply_missing_mask, load_dataset, mean_fill, normalize,
                        save_dataset, split_views, synth_generate)
from .errors import ArgumentError, DataError, FormatError, NumericError
from .losses import (JointDistribution, LossWeights, composite_network1_loss,
                     consistency_loss, contrastive_consistency_loss,
                     discriminator_loss, generator_loss, joint_distribution,
                     prediction_direction_loss, prediction_loss,
                     reconstruction_loss)
from .networks import (Autoencoder, Discriminator, MLPSpec, PredictionPair,
                       build_autoencoder, ema_update, parameter_vector,
                       set_parameter_vector)
from .training import (PipelineResult, PseudoComplete, TrainConfig,
                       TrainedModel, build_model, fill_latents,
                       generate_missing, load_model, run_pipeline, save_model,
                       train_step1, train_step2, train_step3)

__version__ = "0.1.0"

__all__ = [
    "ArgumentError", "Autoencoder", "ClusteringReport", "DataError",
    "Discriminator", "FormatError", "JointDistribution", "LossWeights",
    "MLPSpec", "MultiViewDataset", "NormalizationStats", "NumericError",
    "PipelineResult", "PredictionPair", "PseudoComplete", "SynthConfig",
    "TrainConfig", "TrainedModel", "accuracy", "apply_missing_mask", "ari",
    "build_autoencoder", "build_model", "composite_network1_loss",
    "consistency_loss", "contrastive_consistency_loss", "discriminator_loss",
    "ema_update", "evaluate", "fill_latents", "generate_missing",
    "generator_loss", "joint_distribution", "kmeans", "load_dataset",
    "load_model", "mean_fill", "nmi", "normalize", "parameter_vector",
    "prediction_direction_loss", "prediction_loss", "reconstruction_loss",
    "run_pipeline", "save_dataset", "save_model", "set_parameter_vector",
    "split_views", "synth_generate", "train_step1", "train_step2",
    "train_step3",
]
