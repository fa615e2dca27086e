"""Bayesian rank-clustered Bradley-Terry-Luce inference."""

__version__ = "0.1.0"

from .analysis import PosteriorSummary, cluster_recovery_rates, mae_against_truth, rhat, summarize
from .btl import dataset_log_likelihood, log_likelihood, pairwise_prob, sample_ranking
from .data import DataError, Dataset, OrdinalObservation, parse_dataset
from .prior import Hyperparameters, Partition, omega_from, sample_prior, stirling_weighted_k_pmf
from .sampler import ChainConfig, PosteriorSamples, run_chain, run_chains

__all__ = [
    "ChainConfig",
    "DataError",
    "Dataset",
    "Hyperparameters",
    "OrdinalObservation",
    "Partition",
    "PosteriorSamples",
    "PosteriorSummary",
    "cluster_recovery_rates",
    "dataset_log_likelihood",
    "log_likelihood",
    "mae_against_truth",
    "omega_from",
    "pairwise_prob",
    "parse_dataset",
    "rhat",
    "run_chain",
    "run_chains",
    "sample_prior",
    "sample_ranking",
    "stirling_weighted_k_pmf",
    "summarize",
]
