"""Cross-sensory representation learning and evaluation."""

from .embeddings import EmbeddingTable, Modality
from .evaluate import (
    EvalConfig,
    LocalizationResult,
    RetrievalResult,
    format_grid,
    localization_eval,
    ordered_pairs,
    results_to_json,
    retrieval_eval,
)
from .losses import (
    cross_sensory_loss,
    cross_sensory_loss_grad,
    image_loss,
    image_loss_grad,
    info_nce_symmetric,
    info_nce_symmetric_grad,
    mse_align_loss,
    mse_align_loss_grad,
)
from .training import (
    AdamW,
    FeatureSet,
    LinearEncoderSet,
    SweepPoint,
    TrainConfig,
    TrainResult,
    TrainingDiverged,
    scaling_sweep,
    synthetic_shared_latent_features,
    table_from_encoders,
    train_linear,
)

__all__ = [
    "AdamW",
    "EmbeddingTable",
    "EvalConfig",
    "FeatureSet",
    "LinearEncoderSet",
    "LocalizationResult",
    "Modality",
    "RetrievalResult",
    "SweepPoint",
    "TrainConfig",
    "TrainResult",
    "TrainingDiverged",
    "cross_sensory_loss",
    "cross_sensory_loss_grad",
    "format_grid",
    "image_loss",
    "image_loss_grad",
    "info_nce_symmetric",
    "info_nce_symmetric_grad",
    "localization_eval",
    "mse_align_loss",
    "mse_align_loss_grad",
    "ordered_pairs",
    "results_to_json",
    "retrieval_eval",
    "scaling_sweep",
    "synthetic_shared_latent_features",
    "table_from_encoders",
    "train_linear",
]
