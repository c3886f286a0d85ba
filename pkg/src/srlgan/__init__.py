"""Sparse-regularized conditional GAN for user cold-start recommendation."""

from .data import (
    DatasetSplit,
    RatingTriple,
    build_purchase_matrix,
    parse_ratings,
    sparsity_percent,
    split_users,
)
from .evaluate import (
    MetricReport,
    evaluate_report,
    item_pop_ranking,
    mrr_at,
    ndcg_at,
    precision_at,
    rank_items,
)
from .features import (
    AttributeSchema,
    inverse_document_frequency,
    term_frequency,
    tfidf_vector,
)
from .model import (
    build_discriminator,
    build_generator,
    loss_lsgan,
    loss_reconstruction,
    mean_purchase,
    sparsity_regularizer,
    total_generator_objective,
)
from .train import TrainConfig, Trainer, cross_validate_beta, fit

__version__ = "0.1.0"

__all__ = [
    "AttributeSchema",
    "DatasetSplit",
    "MetricReport",
    "RatingTriple",
    "TrainConfig",
    "Trainer",
    "build_discriminator",
    "build_generator",
    "build_purchase_matrix",
    "cross_validate_beta",
    "evaluate_report",
    "fit",
    "inverse_document_frequency",
    "item_pop_ranking",
    "loss_lsgan",
    "loss_reconstruction",
    "mean_purchase",
    "mrr_at",
    "ndcg_at",
    "parse_ratings",
    "precision_at",
    "rank_items",
    "sparsity_percent",
    "sparsity_regularizer",
    "split_users",
    "term_frequency",
    "tfidf_vector",
    "total_generator_objective",
]
