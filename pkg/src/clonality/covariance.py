"""Covariance models over pairwise estimates and the BLUE combiner.

The covariance of two cross-replicate products, conditional on the population,
depends only on which replicate indices the two pairs share: it vanishes when
all four indices are distinct, equals the shared replicate's error-norm level
when exactly one index is common, and equals the sum of both replicates'
levels on the diagonal.  A common positive factor multiplies every entry; the
combiner is invariant to that factor, so all matrices here drop it and carry
entries in plain error-norm units.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import SingularCovariance, TooFewReplicates
from .estimators import EpsilonProfile, PairwiseThetaTable, _pair_product
from .model import ReplicateStudy

#: Condition-number threshold beyond which a solve is retried with a ridge.
CONDITION_LIMIT = 1e12
#: Ridge size relative to the mean diagonal entry.
RIDGE_SCALE = 1e-10

T_KINDS = ("T1", "T2", "T3")

SCALE_NOTE = "entries omit a common positive factor; valid for scale-invariant combining only"


def pair_order(n: int) -> tuple[tuple[int, int], ...]:
    """Lexicographic enumeration of unordered index pairs (k < l).

    This ordering is part of the public contract: tables, covariance rows and
    serialized dumps all follow it.
    """
    return tuple((k, l) for k in range(n) for l in range(k + 1, n))


@lru_cache(maxsize=None)
def _incidence(n: int) -> np.ndarray:
    """Pairs-by-replicates 0/1 matrix: row (k, l) has ones at columns k and l."""
    pairs = pair_order(n)
    b = np.zeros((len(pairs), n))
    for row, (k, l) in enumerate(pairs):
        b[row, k] = 1.0
        b[row, l] = 1.0
    b.flags.writeable = False
    return b


@dataclass(frozen=True)
class PairCovarianceModel:
    """Symmetric covariance model over the unordered replicate pairs."""

    pair_index: tuple[tuple[int, int], ...]
    matrix: np.ndarray
    scale_note: str = field(default=SCALE_NOTE)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (len(self.pair_index), len(self.pair_index)):
            raise ValueError(f"matrix shape {m.shape} does not match {len(self.pair_index)} pairs")
        if not np.allclose(m, m.T, atol=1e-12, rtol=0.0):
            raise ValueError("pair covariance must be symmetric")
        m = np.ascontiguousarray(m)
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)


def build_sigma0(profile: EpsilonProfile, n: int) -> PairCovarianceModel:
    """Unregularized pair covariance from per-replicate error-norm estimates.

    Entry for pairs (k, l) and (k', l'): 0 when the index sets are disjoint,
    the shared replicate's entry when exactly one index is common, and the sum
    of both entries on the diagonal.  Equivalently B diag(e) B' with B the
    pair/replicate incidence matrix, which makes the result positive
    semidefinite whenever the profile is nonnegative -- and rank-deficient for
    n >= 4, which is what the structured stabilizer matrices exist to fix.
    """
    if n < 3:
        raise TooFewReplicates("pair covariance needs at least 3 replicates")
    if len(profile.per_replicate) != n:
        raise ValueError(f"profile has {len(profile.per_replicate)} entries, expected {n}")
    b = _incidence(n)
    matrix = (b * np.asarray(profile.per_replicate)) @ b.T
    # exact symmetry and exact zeros regardless of the matmul's block order
    matrix = np.triu(matrix) + np.triu(matrix, 1).T
    return PairCovarianceModel(pair_index=pair_order(n), matrix=matrix)


def build_T(kind: str, sigma0: PairCovarianceModel, profile: EpsilonProfile) -> PairCovarianceModel:
    """Structured stabilizer matrices mixed 50/50 with the unregularized model.

    T1 is the mean error-norm level times the identity; T2 keeps only the
    diagonal of the unregularized model; T3 keeps that diagonal, zeroes the
    index-disjoint entries, and replaces every shared-index entry with the
    minimum error-norm level.
    """
    if kind not in T_KINDS:
        raise ValueError(f"unknown T-matrix kind {kind!r}; expected one of {T_KINDS}")
    pairs = sigma0.pair_index
    m = len(pairs)
    if kind == "T1":
        matrix = profile.mean * np.eye(m)
    elif kind == "T2":
        matrix = np.diag(np.diag(sigma0.matrix))
    else:
        matrix = np.zeros((m, m))
        for i, (k, l) in enumerate(pairs):
            matrix[i, i] = profile.per_replicate[k] + profile.per_replicate[l]
            for j in range(i + 1, m):
                shared = len({k, l} & set(pairs[j]))
                if shared == 1:
                    matrix[i, j] = matrix[j, i] = profile.minimum
    return PairCovarianceModel(pair_index=pairs, matrix=matrix)


def _solve_ones(r: np.ndarray) -> np.ndarray:
    """Solve R w = 1, raising SingularCovariance when the system is unusable."""
    ones = np.ones(r.shape[0])
    try:
        w = np.linalg.solve(r, ones)
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance(str(exc)) from exc
    if not np.isfinite(w).all():
        raise SingularCovariance("solve produced non-finite weights")
    denom = w.sum()
    if denom <= 1e-12 * max(np.abs(w).sum(), np.finfo(float).tiny):
        raise SingularCovariance(f"ones-vector quadratic form is not positive ({denom!r})")
    return w


def _needs_ridge(r: np.ndarray) -> bool:
    # Non-positive pivot (failed Cholesky) or a hopeless condition number.
    try:
        np.linalg.cholesky(r)
    except np.linalg.LinAlgError:
        return True
    cond = np.linalg.cond(r)
    return not np.isfinite(cond) or cond > CONDITION_LIMIT


def blue_combine(estimates, r) -> float:
    """Minimum-variance combination of estimates with covariance R.

    Returns (1' R^-1 x) / (1' R^-1 1), computed by solving R w = 1 -- never by
    explicit inversion.  Invariant to positive rescaling of R, so R only needs
    to be known up to a constant factor.
    """
    x = np.asarray(estimates, dtype=float)
    r = np.asarray(r, dtype=float)
    if r.shape != (x.size, x.size):
        raise ValueError(f"covariance shape {r.shape} does not match {x.size} estimates")
    w = _solve_ones(r)
    return float(w @ x / w.sum())


def _is_positive_definite(r: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(r)
    except np.linalg.LinAlgError:
        return False
    return True


def blue_combine_stable(estimates, r) -> tuple[float, bool]:
    """`blue_combine` restricted to positive-definite systems, with one retry.

    The combination formula is only meaningful for positive-definite R, so a
    failed factorization or a hopeless condition number triggers one
    diagonal-loading retry; if the loaded matrix is still not positive
    definite, SingularCovariance is raised (an indefinite model would let the
    solve ride noise directions rather than fail loudly).  Returns
    (estimate, loaded) where `loaded` records whether the ridge was applied.
    """
    r = np.asarray(r, dtype=float)
    if not _needs_ridge(r):
        try:
            return blue_combine(estimates, r), False
        except SingularCovariance:
            pass
    loaded = r + (RIDGE_SCALE * np.trace(r) / r.shape[0]) * np.eye(r.shape[0])
    if not _is_positive_definite(loaded):
        raise SingularCovariance("covariance is not positive definite even after loading")
    return blue_combine(estimates, loaded), True


def blue_weights(r) -> np.ndarray:
    """Normalized combining weights for covariance R (with the loading retry)."""
    r = np.asarray(r, dtype=float)
    if _needs_ridge(r):
        r = r + (RIDGE_SCALE * np.trace(r) / r.shape[0]) * np.eye(r.shape[0])
        if not _is_positive_definite(r):
            raise SingularCovariance("covariance is not positive definite even after loading")
    w = _solve_ones(r)
    return w / w.sum()


def blue_pairs(table: PairwiseThetaTable, cov: PairCovarianceModel) -> float:
    """Combine the pairwise estimates in pair-index order under `cov`.

    Raises SingularCovariance if the matrix stays unusable after the loading
    retry; callers substitute the weighted baseline and flag the report.
    """
    if cov.pair_index != table.pairs:
        raise ValueError("table and covariance model index different pairs")
    estimate, _ = blue_combine_stable(table.values_in_order(), cov.matrix)
    return estimate


def _gram(study: ReplicateStudy) -> np.ndarray:
    """Gram matrix of the replicates' frequency vectors (exact integer cores)."""
    n = study.n
    g = np.zeros((n, n))
    for k in range(n):
        g[k, k] = study.replicates[k].squared_frequency_norm
        for l in range(k + 1, n):
            g[k, l] = g[l, k] = _pair_product(study.replicates[k], study.replicates[l])
    return g


def _pair_second_moment(study: ReplicateStudy, k: int, l: int) -> float:
    """Sum over clones of the squared per-clone frequency products."""
    a, b = study.replicates[k], study.replicates[l]
    small, large = (a.counts, b.counts) if len(a.counts) <= len(b.counts) else (b.counts, a.counts)
    dot = 0
    for clone, count in small.items():
        other = large.get(clone)
        if other is not None:
            dot += (count * other) ** 2
    return dot / (a.total_reads * b.total_reads) ** 2


def shrink_intensity(study: ReplicateStudy, baseline: float) -> float:
    """Data-driven shrinkage weight for pulling cross products toward `baseline`.

    Ratio of the summed estimation variances of the off-diagonal gram entries
    (each entry is a sum of per-clone contributions over the shared universe;
    its variance is estimated from the spread of those contributions) to their
    summed squared distances from the common level, clamped to [0, 1].
    """
    s = len(study.universe)
    if s < 2:
        return 0.0
    g = _gram(study)
    var_sum = 0.0
    dist_sum = 0.0
    for k in range(study.n):
        for l in range(k + 1, study.n):
            second = _pair_second_moment(study, k, l)
            # spread of per-clone contributions, zeros outside the intersection included
            var_sum += s / (s - 1) * (second - g[k, l] ** 2 / s)
            dist_sum += (g[k, l] - baseline) ** 2
    if var_sum <= 0.0:
        return 0.0
    if dist_sum <= 0.0:
        return 1.0
    return min(1.0, var_sum / dist_sum)


def regularize_replicate_cov(
    study: ReplicateStudy,
    theta_star: float,
    chao_c: float | None = None,
    method: str = "hard",
) -> np.ndarray:
    """Regularized common covariance model of the replicate frequency rows.

    With G the gram matrix of frequency vectors and b the common off-diagonal
    level (the weighted baseline estimate, less the inverse squared richness
    when supplied):

    * ``hard``   -- b everywhere off-diagonal, diagonal b + max(G_kk - b, 0);
    * ``soft``   -- b everywhere off-diagonal, diagonal b + |G_kk - b|;
    * ``shrink`` -- off-diagonal entries pulled toward b with data-driven
      intensity, diagonal left at G_kk.

    The diagonal excess over b of each method is the per-replicate error-norm
    profile that drives the pair covariance for that method.
    """
    if method not in ("hard", "soft", "shrink"):
        raise ValueError(f"unknown method {method!r}; expected hard, soft or shrink")
    n = study.n
    if n < 2:
        raise TooFewReplicates("replicate covariance needs at least 2 replicates")
    g = _gram(study)
    b = theta_star if chao_c is None else theta_star - chao_c ** -2
    if method == "shrink":
        lam = shrink_intensity(study, b)
        out = (1.0 - lam) * g + lam * b * np.ones((n, n))
        np.fill_diagonal(out, np.diag(g))
        return out
    excess = np.diag(g) - b
    if method == "hard":
        excess = np.clip(excess, 0.0, None)
    else:
        excess = np.abs(excess)
    return b * np.ones((n, n)) + np.diag(excess)
