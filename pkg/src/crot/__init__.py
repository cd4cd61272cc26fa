"""Cluster-regularized optimal-transport imputation for patch-wise missing data."""

__version__ = "0.1.0"

from .core import (
    AUTO,
    CrotConfig,
    CrotWarning,
    DataMatrix,
    MaskSpec,
    NumericError,
    RngStream,
    ValidationError,
    column_mean,
    sample_indices,
)
from .ot import (
    CostMatrix,
    SinkhornResult,
    auto_epsilon,
    cost_matrix,
    entropic_ot_cost,
    exact_ot_oracle,
    sinkhorn,
    sinkhorn_divergence,
    sinkhorn_divergence_grad,
)
from .clustering import (
    ClusterModel,
    cluster_centroids,
    elbow_select_k,
    kmeans,
    kmeans_restarts,
)
from .optim import AdamState, RowwiseAdam, adam_step
from .imputer import (
    CrotLossResult,
    ImputationRun,
    LossRecord,
    NumericAbort,
    crot_impute,
    crot_loss,
    crot_loss_given_labels,
    initialize_missing,
)
from .metrics import AgreementScores, RecoveryScores, agreement_scores, recovery_scores
from .synth import (
    GenerationError,
    MixtureSpec,
    apply_patch_mask,
    default_mask_cols,
    generate_batch_pair,
)

__all__ = [
    "AUTO",
    "AdamState",
    "AgreementScores",
    "ClusterModel",
    "CostMatrix",
    "CrotConfig",
    "CrotLossResult",
    "CrotWarning",
    "DataMatrix",
    "GenerationError",
    "ImputationRun",
    "LossRecord",
    "MaskSpec",
    "MixtureSpec",
    "NumericAbort",
    "NumericError",
    "RecoveryScores",
    "RngStream",
    "RowwiseAdam",
    "SinkhornResult",
    "ValidationError",
    "adam_step",
    "agreement_scores",
    "apply_patch_mask",
    "auto_epsilon",
    "cluster_centroids",
    "column_mean",
    "cost_matrix",
    "crot_impute",
    "crot_loss",
    "crot_loss_given_labels",
    "default_mask_cols",
    "elbow_select_k",
    "entropic_ot_cost",
    "exact_ot_oracle",
    "generate_batch_pair",
    "initialize_missing",
    "kmeans",
    "kmeans_restarts",
    "recovery_scores",
    "sample_indices",
    "sinkhorn",
    "sinkhorn_divergence",
    "sinkhorn_divergence_grad",
]
