"""Jackknife machinery and the five-estimator mixture.

For a given thresholding method the engine produces five clonality estimates:
the straight covariance-weighted combination of the cross products, the
weighted baseline, and three variants whose pair covariance is averaged with a
structured stabilizer.  Deleting one replicate at a time yields per-estimator
pseudo-estimates, from which a 5x5 covariance is formed; the final estimate is
the minimum-variance combination of the (bias-corrected) five under that
covariance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .covariance import blue_combine_stable, blue_weights, build_T, build_sigma0
from .errors import SingularCovariance, TooFewReplicates
from .estimators import (
    PairwiseThetaTable,
    chao_richness,
    pairwise_difference_epsilon_profile,
    pairwise_theta,
    theta_star,
)
from .model import ReplicateStudy

#: Canonical ordering of the five component estimates.
ESTIMATOR_ORDER = ("theta0", "theta_star", "theta1", "theta2", "theta3")

#: Covariance-regularization method -> error-norm thresholding mode.
PROFILE_FOR_METHOD = {"hard": "positive-expectation", "soft": "spherical-shells", "shrink": "raw"}

REGULARIZERS = tuple(PROFILE_FOR_METHOD)

FLAG_OK = "ok"
FLAG_LOADED = "diag-loaded"
FLAG_SINGULAR = "fallback-singular-covariance"
FLAG_TOO_FEW = "fallback-too-few-replicates"
FLAG_NO_JACKKNIFE = "fallback-jackknife-needs-five-replicates"


def clip_unit(x: float) -> float:
    """Clip to [0, 1]; applied to estimates at final reporting only."""
    return min(1.0, max(0.0, x))


@dataclass(frozen=True)
class EstimatorQuintet:
    """The five component estimates plus per-estimator validity flags."""

    theta0: float
    theta_star: float
    theta1: float
    theta2: float
    theta3: float
    flags: Mapping[str, str]

    def as_vector(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in ESTIMATOR_ORDER])


@dataclass(frozen=True)
class JackknifeEnsemble:
    """Full-study quintet, its delete-one pseudo-estimates, and their covariance."""

    full: EstimatorQuintet
    leave_one_out: tuple[EstimatorQuintet, ...]
    cov5: np.ndarray

    def __post_init__(self):
        cov5 = np.ascontiguousarray(np.asarray(self.cov5, dtype=float))
        cov5.flags.writeable = False
        object.__setattr__(self, "cov5", cov5)
        object.__setattr__(self, "leave_one_out", tuple(self.leave_one_out))


@dataclass(frozen=True)
class MixtureOutcome:
    """Everything the final report needs about one regularizer's mixture."""

    regularizer: str
    final: float
    quintet: EstimatorQuintet
    corrected: tuple[float, ...] | None
    cov5: np.ndarray | None
    weights: tuple[float, ...] | None
    flags: Mapping[str, str]
    cov5_shrink: float | None = None


def shrink_sample_cov(samples: np.ndarray) -> tuple[np.ndarray, float]:
    """Sample covariance with off-diagonal entries shrunk toward zero.

    The intensity is the ratio of the summed estimation variances of the
    off-diagonal entries (from the spread of per-sample centered products) to
    their summed squares, clamped to [0, 1].  With few samples of strongly
    correlated coordinates the plain sample covariance is near-singular in
    directions that are pure estimation noise; inverse-weighting through it
    then amplifies those directions, so the off-diagonal is trusted only as
    far as it is estimated.
    """
    samples = np.asarray(samples, dtype=float)
    n, m = samples.shape
    if n < 2:
        raise ValueError("need at least 2 samples")
    centered = samples - samples.mean(axis=0)
    products = centered[:, :, None] * centered[:, None, :]
    mean_products = products.mean(axis=0)
    cov = n / (n - 1) * mean_products
    var_entries = n / (n - 1) ** 3 * ((products - mean_products) ** 2).sum(axis=0)
    off = ~np.eye(m, dtype=bool)
    numerator = var_entries[off].sum()
    denominator = (cov[off] ** 2).sum()
    if numerator <= 0.0:
        lam = 0.0
    elif denominator <= 0.0:
        lam = 1.0
    else:
        lam = min(1.0, numerator / denominator)
    shrunk = cov.copy()
    shrunk[off] *= 1.0 - lam
    return shrunk, lam


def _resolve_chao(study: ReplicateStudy, chao_c: float | None, chao_correction: bool) -> float | None:
    if not chao_correction:
        return None
    return chao_richness(study) if chao_c is None else chao_c


def _fallback_quintet(tstar: float) -> EstimatorQuintet:
    flags = {name: FLAG_TOO_FEW for name in ESTIMATOR_ORDER}
    flags["theta_star"] = FLAG_OK
    return EstimatorQuintet(tstar, tstar, tstar, tstar, tstar, flags=flags)


def estimate_quintet(
    study: ReplicateStudy,
    regularizer: str = "hard",
    *,
    chao_c: float | None = None,
    chao_correction: bool = True,
    table: PairwiseThetaTable | None = None,
) -> EstimatorQuintet:
    """Compute the five component estimates for one thresholding method.

    Needs at least 4 replicates (the structured stabilizers distinguish pairs
    with four distinct indices); below that every slot falls back to the
    weighted baseline and is flagged.  `chao_c` lets delete-one passes reuse
    the richness estimate of the full study.
    """
    if regularizer not in PROFILE_FOR_METHOD:
        raise ValueError(f"unknown regularizer {regularizer!r}; expected one of {REGULARIZERS}")
    if table is None:
        table = pairwise_theta(study)
    tstar = theta_star(table)
    if study.n < 4:
        return _fallback_quintet(tstar)

    chao = _resolve_chao(study, chao_c, chao_correction)
    profile = pairwise_difference_epsilon_profile(
        study, table, PROFILE_FOR_METHOD[regularizer], chao
    )
    sigma0 = build_sigma0(profile, study.n)
    values = table.values_in_order()

    covariances = {"theta0": sigma0.matrix}
    for slot, kind in (("theta1", "T1"), ("theta2", "T2"), ("theta3", "T3")):
        covariances[slot] = 0.5 * (sigma0.matrix + build_T(kind, sigma0, profile).matrix)

    estimates = {"theta_star": tstar}
    flags = {"theta_star": FLAG_OK}
    for slot, matrix in covariances.items():
        try:
            estimate, loaded = blue_combine_stable(values, matrix)
            estimates[slot] = estimate
            flags[slot] = FLAG_LOADED if loaded else FLAG_OK
        except SingularCovariance:
            estimates[slot] = tstar
            flags[slot] = FLAG_SINGULAR
    return EstimatorQuintet(flags=flags, **estimates)


def _subset_table(table: PairwiseThetaTable, drop: int) -> PairwiseThetaTable:
    """Pairwise table with replicate `drop` removed and indices renumbered."""
    values: dict[tuple[int, int], float] = {}
    weights: dict[tuple[int, int], int] = {}
    for (k, l), value in table.values.items():
        if drop in (k, l):
            continue
        pair = (k - (k > drop), l - (l > drop))
        values[pair] = value
        weights[pair] = table.weights[(k, l)]
    return PairwiseThetaTable(n=table.n - 1, values=values, weights=weights)


def jackknife_ensemble(
    study: ReplicateStudy,
    regularizer: str = "hard",
    *,
    chao_correction: bool = True,
) -> JackknifeEnsemble:
    """Delete-one quintets and their covariance, replicates as sampling units.

    Needs at least 5 replicates so every delete-one pass still has 4.  The
    richness estimate is computed once on the full study and reused in every
    pass.  cov5 = ((n-1)/n) * sum of centered outer products of the delete-one
    quintets; positive semidefinite by construction.
    """
    if study.n < 5:
        raise TooFewReplicates("jackknifing needs at least 5 replicates")
    table = pairwise_theta(study)
    chao = chao_richness(study) if chao_correction else None
    full = estimate_quintet(
        study, regularizer, chao_c=chao, chao_correction=chao_correction, table=table
    )
    loo = tuple(
        estimate_quintet(
            study.drop_replicate(i),
            regularizer,
            chao_c=chao,
            chao_correction=chao_correction,
            table=_subset_table(table, i),
        )
        for i in range(study.n)
    )
    vectors = np.array([q.as_vector() for q in loo])
    centered = vectors - vectors.mean(axis=0)
    cov5 = (study.n - 1) / study.n * (centered.T @ centered)
    cov5 = np.triu(cov5) + np.triu(cov5, 1).T
    return JackknifeEnsemble(full=full, leave_one_out=loo, cov5=cov5)


def bias_correct(full: float, loo: Sequence[float]) -> float:
    """Classical delete-one jackknife point estimate: n*full - (n-1)*mean(loo).

    Removes the first-order (1/n) term of a smooth bias expansion; applied to
    the covariance-weighted estimators but never to the weighted baseline,
    which is exactly unbiased already.
    """
    n = len(loo)
    if n < 2:
        raise TooFewReplicates("bias correction needs at least 2 delete-one estimates")
    return n * full - (n - 1) * (sum(loo) / n)


def inter_clonality(
    study: ReplicateStudy,
    regularizer: str = "hard",
    *,
    chao_correction: bool = True,
    bias_correction: bool = True,
) -> tuple[float, MixtureOutcome]:
    """Final mixture estimate for one regularizer, with report details.

    Bias-corrects the four covariance-weighted estimators against their
    delete-one pseudo-estimates, then combines the five estimates under the
    jackknife 5x5 covariance.  Falls back to the weighted baseline (flagged)
    when there are too few replicates or the covariance cannot be solved.
    """
    if study.n < 5:
        table = pairwise_theta(study)
        quintet = estimate_quintet(study, regularizer, chao_correction=chao_correction, table=table)
        flag = FLAG_TOO_FEW if study.n < 4 else FLAG_NO_JACKKNIFE
        outcome = MixtureOutcome(
            regularizer=regularizer,
            final=quintet.theta_star,
            quintet=quintet,
            corrected=None,
            cov5=None,
            weights=None,
            flags={"mixture": flag},
        )
        return outcome.final, outcome

    ensemble = jackknife_ensemble(study, regularizer, chao_correction=chao_correction)
    full_vec = ensemble.full.as_vector()
    loo_vecs = np.array([q.as_vector() for q in ensemble.leave_one_out])
    corrected = full_vec.copy()
    if bias_correction:
        star = ESTIMATOR_ORDER.index("theta_star")
        for i in range(len(ESTIMATOR_ORDER)):
            if i != star:
                corrected[i] = bias_correct(full_vec[i], loo_vecs[:, i])

    # cov5 is reported as-is; combining uses its off-diagonal only as far as
    # the delete-one sample supports it, else the solve rides noise contrasts.
    combined_r, lam = shrink_sample_cov(loo_vecs)
    flags = {}
    weights = None
    try:
        final, loaded = blue_combine_stable(corrected, combined_r)
        flags["mixture"] = FLAG_LOADED if loaded else FLAG_OK
        weights = tuple(float(w) for w in blue_weights(combined_r))
    except SingularCovariance:
        final = ensemble.full.theta_star
        flags["mixture"] = FLAG_SINGULAR

    outcome = MixtureOutcome(
        regularizer=regularizer,
        final=float(final),
        quintet=ensemble.full,
        corrected=tuple(float(v) for v in corrected),
        cov5=ensemble.cov5,
        weights=weights,
        flags=flags,
        cov5_shrink=lam,
    )
    return outcome.final, outcome
