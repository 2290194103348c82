"""Data model for populations and replicate libraries.

Clone ids are opaque strings so that real receptor-rearrangement labels and
synthetic labels share one code path.  Everything is stored sparsely: only
strictly positive counts/frequencies are kept, and inner products downstream
iterate over the smaller support of each pair.  All types are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping

from .errors import EmptyReplicate, TooFewReplicates

#: Absolute tolerance for "frequencies sum to one".
FREQUENCY_SUM_TOL = 1e-9


@dataclass(frozen=True)
class CloneFrequencyVector:
    """Sparse clone-id -> relative frequency map summing to one."""

    entries: Mapping[str, float]

    def __post_init__(self):
        entries = {c: float(f) for c, f in self.entries.items() if f != 0.0}
        for clone, freq in entries.items():
            if freq < 0.0:
                raise ValueError(f"negative frequency for clone {clone!r}: {freq}")
        total = sum(entries.values())
        if abs(total - 1.0) > FREQUENCY_SUM_TOL:
            raise ValueError(f"frequencies sum to {total!r}, expected 1")
        object.__setattr__(self, "entries", entries)

    @property
    def support_size(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class ReplicateObservation:
    """One sequencing library: sparse clone-id -> positive read count."""

    counts: Mapping[str, int]

    def __post_init__(self):
        cleaned: dict[str, int] = {}
        for clone, count in self.counts.items():
            if count != int(count) or count < 0:
                raise ValueError(f"count for clone {clone!r} must be a nonnegative integer, got {count!r}")
            if count > 0:
                cleaned[clone] = int(count)
        if not cleaned:
            raise EmptyReplicate("replicate has zero total reads")
        object.__setattr__(self, "counts", cleaned)

    @cached_property
    def total_reads(self) -> int:
        return sum(self.counts.values())

    @property
    def distinct_clones(self) -> int:
        return len(self.counts)

    @cached_property
    def squared_frequency_norm(self) -> float:
        """Sum of squared relative frequencies of this replicate."""
        total = self.total_reads
        return sum(c * c for c in self.counts.values()) / (total * total)


@dataclass(frozen=True)
class ReplicateStudy:
    """Aligned, ordered collection of replicates over a shared clone universe."""

    replicates: tuple[ReplicateObservation, ...]

    def __post_init__(self):
        object.__setattr__(self, "replicates", tuple(self.replicates))
        if len(self.replicates) < 1:
            raise TooFewReplicates("a study needs at least one replicate")

    @property
    def n(self) -> int:
        return len(self.replicates)

    @cached_property
    def universe(self) -> frozenset[str]:
        clones: set[str] = set()
        for rep in self.replicates:
            clones.update(rep.counts)
        return frozenset(clones)

    def drop_replicate(self, index: int) -> "ReplicateStudy":
        """New study without replicate `index`; observations are shared, not copied."""
        reps = self.replicates[:index] + self.replicates[index + 1:]
        if not reps:
            raise TooFewReplicates("cannot drop the only replicate")
        return ReplicateStudy(reps)


def from_counts(raw: Iterable[Mapping[str, int]]) -> ReplicateStudy:
    """Build a validated study from per-replicate count maps.

    Zero counts are dropped at ingestion (an absent clone and a zero count are
    treated identically).  Requires at least two replicates.
    """
    observations = tuple(ReplicateObservation(counts) for counts in raw)
    if len(observations) < 2:
        raise TooFewReplicates(f"estimation needs at least 2 replicates, got {len(observations)}")
    return ReplicateStudy(observations)


def frequencies(rep: ReplicateObservation) -> CloneFrequencyVector:
    """Relative frequencies of one replicate: counts divided by total reads."""
    total = rep.total_reads
    return CloneFrequencyVector({clone: count / total for clone, count in rep.counts.items()})


def squared_norm(v: CloneFrequencyVector) -> float:
    """Sum of squared frequencies; 1 exactly when the vector is a point mass."""
    return sum(f * f for f in v.entries.values())
