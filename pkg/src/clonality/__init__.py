"""Clonality estimation from replicate sequencing libraries.

Estimates the sum of squared clone frequencies of an unseen population from
replicate libraries of one sample, combining cross-replicate products under
data-driven covariance models with jackknife bias removal, plus a simulator
and a seeded Monte-Carlo benchmark harness.
"""

from .combine import (
    ESTIMATOR_ORDER,
    REGULARIZERS,
    EstimatorQuintet,
    JackknifeEnsemble,
    MixtureOutcome,
    bias_correct,
    estimate_quintet,
    inter_clonality,
    jackknife_ensemble,
)
from .covariance import (
    PairCovarianceModel,
    blue_combine,
    blue_pairs,
    blue_weights,
    build_T,
    build_sigma0,
    pair_order,
    regularize_replicate_cov,
)
from .errors import (
    ClonalityError,
    DegenerateDraw,
    DegenerateWeights,
    DuplicateCloneId,
    EmptyReplicate,
    MalformedLine,
    NegativeCount,
    SingularCovariance,
    TooFewReplicates,
)
from .estimators import (
    EpsilonProfile,
    PairwiseThetaTable,
    chao_richness,
    epsilon_profile,
    naive_plugin,
    pairwise_theta,
    theta_star,
)
from .io import ClonalityReport, build_report, parse_replicates, write_report
from .model import (
    CloneFrequencyVector,
    ReplicateObservation,
    ReplicateStudy,
    frequencies,
    from_counts,
    squared_norm,
)
from .simulate import (
    DEFAULT_CELLS,
    BenchmarkResult,
    PopulationSpec,
    ReplicateSpec,
    RunRecord,
    run_experiment,
    sample_population,
    sample_replicate,
    simulate_study,
)

__version__ = "0.1.0"

__all__ = [
    "BenchmarkResult",
    "ClonalityError",
    "ClonalityReport",
    "CloneFrequencyVector",
    "DEFAULT_CELLS",
    "DegenerateDraw",
    "DegenerateWeights",
    "DuplicateCloneId",
    "EmptyReplicate",
    "EpsilonProfile",
    "ESTIMATOR_ORDER",
    "EstimatorQuintet",
    "JackknifeEnsemble",
    "MalformedLine",
    "MixtureOutcome",
    "NegativeCount",
    "PairCovarianceModel",
    "PairwiseThetaTable",
    "PopulationSpec",
    "REGULARIZERS",
    "ReplicateObservation",
    "ReplicateSpec",
    "ReplicateStudy",
    "RunRecord",
    "SingularCovariance",
    "TooFewReplicates",
    "bias_correct",
    "blue_combine",
    "blue_pairs",
    "blue_weights",
    "build_T",
    "build_report",
    "build_sigma0",
    "chao_richness",
    "epsilon_profile",
    "estimate_quintet",
    "frequencies",
    "from_counts",
    "inter_clonality",
    "jackknife_ensemble",
    "naive_plugin",
    "pair_order",
    "pairwise_theta",
    "parse_replicates",
    "regularize_replicate_cov",
    "run_experiment",
    "sample_population",
    "sample_replicate",
    "simulate_study",
    "squared_norm",
    "theta_star",
    "write_report",
]
