"""Basic clonality estimators on replicate studies.

The workhorse quantities are the cross-replicate inner products: for two
distinct replicates the expected inner product of their frequency vectors is
the population clonality, with no squared-error (Jensen) bias.  The weighted
average of all such pairs, with weights C_l * C_m (products of per-replicate
distinct-clone counts), is the exactly unbiased baseline estimator that the
covariance-weighted machinery downstream must beat.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .errors import DegenerateWeights, TooFewReplicates
from .model import ReplicateObservation, ReplicateStudy

#: Accepted thresholding modes for per-replicate error-norm estimates.
PROFILE_REGULARIZERS = ("raw", "positive-expectation", "spherical-shells")


@dataclass(frozen=True)
class PairwiseThetaTable:
    """Cross products theta[(k, l)] and weights C_k * C_l over unordered pairs.

    Pairs are 0-based replicate indices with k < l, ordered lexicographically;
    that ordering is shared with the pair-covariance matrices downstream.
    """

    n: int
    values: Mapping[tuple[int, int], float]
    weights: Mapping[tuple[int, int], int]

    @property
    def pairs(self) -> tuple[tuple[int, int], ...]:
        return tuple(sorted(self.values))

    def values_in_order(self) -> list[float]:
        return [self.values[p] for p in self.pairs]


@dataclass(frozen=True)
class EpsilonProfile:
    """Per-replicate estimates of the expected squared error norm.

    `mean` is the plain average of the entries and `minimum` the smallest
    entry.  Entries may be negative when built with the ``raw`` regularizer;
    the thresholded variants are nonnegative by construction.
    """

    per_replicate: tuple[float, ...]
    mean: float
    minimum: float


def _pair_product(a: ReplicateObservation, b: ReplicateObservation) -> float:
    """Inner product of two replicates' frequency vectors.

    Iterates the smaller support; the numerator is an exact integer sum, so
    the result is reproducible bit-for-bit across platforms.
    """
    small, large = (a.counts, b.counts) if len(a.counts) <= len(b.counts) else (b.counts, a.counts)
    dot = 0
    for clone, count in small.items():
        other = large.get(clone)
        if other is not None:
            dot += count * other
    return dot / (a.total_reads * b.total_reads)


def pairwise_theta(study: ReplicateStudy) -> PairwiseThetaTable:
    """Cross-replicate clonality estimates for every unordered pair."""
    if study.n < 2:
        raise TooFewReplicates("pairwise estimates need at least 2 replicates")
    reps = study.replicates
    values: dict[tuple[int, int], float] = {}
    weights: dict[tuple[int, int], int] = {}
    for k in range(study.n):
        for l in range(k + 1, study.n):
            values[(k, l)] = _pair_product(reps[k], reps[l])
            weights[(k, l)] = reps[k].distinct_clones * reps[l].distinct_clones
    return PairwiseThetaTable(n=study.n, values=values, weights=weights)


def theta_star(table: PairwiseThetaTable) -> float:
    """Weighted average of the pairwise estimates with weights C_k * C_l.

    Exactly unbiased for the population clonality given the population and
    the per-replicate distinct-clone counts.
    """
    total_weight = sum(table.weights.values())
    if total_weight <= 0:
        raise DegenerateWeights("all pairwise weights are zero")
    return sum(table.weights[p] * table.values[p] for p in table.values) / total_weight


def epsilon_profile(
    study: ReplicateStudy,
    theta_ref: float,
    regularizer: str = "raw",
    chao_c: float | None = None,
) -> EpsilonProfile:
    """Estimate each replicate's expected squared error norm.

    A replicate's own squared frequency norm exceeds the true clonality by
    its expected squared error norm, so `||p_k||^2 - b` is the moment-matching
    estimate, with baseline `b = theta_ref - chao_c**-2` when a richness
    estimate is supplied and `b = theta_ref` otherwise.  ``raw`` keeps the
    differences as they are (possibly negative), ``positive-expectation``
    clips at zero, ``spherical-shells`` takes absolute values.
    """
    if regularizer not in PROFILE_REGULARIZERS:
        raise ValueError(f"unknown regularizer {regularizer!r}; expected one of {PROFILE_REGULARIZERS}")
    if not 0.0 <= theta_ref <= 1.0:
        raise ValueError(f"theta_ref must lie in [0, 1], got {theta_ref!r}")
    baseline = theta_ref if chao_c is None else theta_ref - chao_c ** -2
    entries = []
    for rep in study.replicates:
        value = rep.squared_frequency_norm - baseline
        if regularizer == "positive-expectation":
            value = max(value, 0.0)
        elif regularizer == "spherical-shells":
            value = abs(value)
        entries.append(value)
    per_replicate = tuple(entries)
    return EpsilonProfile(
        per_replicate=per_replicate,
        mean=sum(per_replicate) / len(per_replicate),
        minimum=min(per_replicate),
    )


def pairwise_difference_epsilon_profile(
    study: ReplicateStudy,
    table: PairwiseThetaTable,
    regularizer: str = "raw",
    chao_c: float | None = None,
) -> EpsilonProfile:
    """Per-replicate error norms from pairwise squared distances.

    The squared distance between two replicates' frequency vectors equals the
    sum of their realized squared error norms minus twice a zero-mean cross
    term: the unknown population cancels exactly, so no reference estimate of
    the clonality enters.  Averaging the distances per replicate and solving
    the resulting linear system recovers each replicate's realized error norm
    with noise far below the moment-matching route through the replicate's own
    squared norm (whose realized population-alignment term dominates there).
    Thresholding modes are shared with `epsilon_profile`.
    """
    if regularizer not in PROFILE_REGULARIZERS:
        raise ValueError(f"unknown regularizer {regularizer!r}; expected one of {PROFILE_REGULARIZERS}")
    n = study.n
    if n < 3:
        raise TooFewReplicates("the pairwise-difference profile needs at least 3 replicates")
    norms = [rep.squared_frequency_norm for rep in study.replicates]
    dist_mean = [0.0] * n
    for (k, l), value in table.values.items():
        d = norms[k] + norms[l] - 2.0 * value
        dist_mean[k] += d
        dist_mean[l] += d
    dist_mean = [d / (n - 1) for d in dist_mean]
    total = sum(dist_mean) / 2.0
    bump = 0.0 if chao_c is None else chao_c ** -2
    entries = []
    for k in range(n):
        value = ((n - 1) * dist_mean[k] - total) / (n - 2) + bump
        if regularizer == "positive-expectation":
            value = max(value, 0.0)
        elif regularizer == "spherical-shells":
            value = abs(value)
        entries.append(value)
    per_replicate = tuple(entries)
    return EpsilonProfile(
        per_replicate=per_replicate,
        mean=sum(per_replicate) / n,
        minimum=min(per_replicate),
    )


def chao_richness(study: ReplicateStudy) -> float:
    """Incidence-based richness estimate with replicates as capture occasions.

    Bias-corrected form: S_obs + Q1 (Q1 - 1) / (2 (Q2 + 1)), where Q1 and Q2
    count clones seen in exactly one and exactly two replicates.  Finite even
    when Q2 = 0, and never below the observed richness.
    """
    if study.n < 2:
        raise TooFewReplicates("richness estimation needs at least 2 replicates")
    incidence: dict[str, int] = {}
    for rep in study.replicates:
        for clone in rep.counts:
            incidence[clone] = incidence.get(clone, 0) + 1
    s_obs = len(incidence)
    q1 = sum(1 for v in incidence.values() if v == 1)
    q2 = sum(1 for v in incidence.values() if v == 2)
    return s_obs + q1 * (q1 - 1) / (2 * (q2 + 1))


def naive_plugin(study: ReplicateStudy) -> float:
    """Average of the replicates' own squared frequency norms.

    Diagnostic only: upward biased for the population clonality (a convex
    function of the noisy frequencies), so it is reported but never mixed
    into the final estimate.
    """
    return sum(rep.squared_frequency_norm for rep in study.replicates) / study.n
