import numpy as np
import pytest

from clonality import (
    CloneFrequencyVector,
    EmptyReplicate,
    ReplicateObservation,
    ReplicateStudy,
    TooFewReplicates,
    frequencies,
    from_counts,
    squared_norm,
)


def test_from_counts_bookkeeping():
    study = from_counts([{"a": 2, "b": 2}, {"a": 1, "c": 3}])
    assert study.n == 2
    assert study.universe == {"a", "b", "c"}
    assert [r.distinct_clones for r in study.replicates] == [2, 2]
    assert [r.total_reads for r in study.replicates] == [4, 4]


def test_from_counts_rejects_single_replicate():
    with pytest.raises(TooFewReplicates):
        from_counts([{"a": 5}])


def test_explicit_zero_counts_are_dropped():
    study = from_counts([{"a": 1, "b": 0}, {"a": 2}])
    assert study.replicates[0].counts == {"a": 1}
    assert study.replicates[0].distinct_clones == 1
    assert study.universe == {"a"}


def test_negative_and_fractional_counts_rejected():
    with pytest.raises(ValueError):
        ReplicateObservation({"a": -1})
    with pytest.raises(ValueError):
        ReplicateObservation({"a": 1.5})


def test_frequencies_examples():
    assert frequencies(ReplicateObservation({"a": 2, "b": 2})).entries == {"a": 0.5, "b": 0.5}
    assert frequencies(ReplicateObservation({"a": 4})).entries == {"a": 1.0}
    assert frequencies(ReplicateObservation({"a": 1, "b": 3})).entries == {"a": 0.25, "b": 0.75}


def test_empty_replicate_rejected():
    with pytest.raises(EmptyReplicate):
        ReplicateObservation({"a": 0})
    with pytest.raises(EmptyReplicate):
        ReplicateObservation({})


def test_squared_norm_examples():
    assert squared_norm(CloneFrequencyVector({"a": 1.0})) == 1.0
    assert squared_norm(CloneFrequencyVector({"a": 0.5, "b": 0.5})) == 0.5
    uniform4 = CloneFrequencyVector({c: 0.25 for c in "abcd"})
    assert squared_norm(uniform4) == pytest.approx(0.25, abs=1e-15)


def test_frequency_vector_validation():
    with pytest.raises(ValueError):
        CloneFrequencyVector({"a": 0.5, "b": 0.4})  # does not sum to 1
    with pytest.raises(ValueError):
        CloneFrequencyVector({"a": 1.5, "b": -0.5})
    # zero entries are dropped, not stored
    v = CloneFrequencyVector({"a": 1.0, "b": 0.0})
    assert v.support_size == 1


def test_squared_norm_bounds_random():
    rng = np.random.default_rng(6)
    for _ in range(50):
        size = int(rng.integers(1, 40))
        counts = {f"c{j}": int(c) for j, c in enumerate(rng.integers(1, 100, size=size))}
        v = frequencies(ReplicateObservation(counts))
        s = squared_norm(v)
        assert 1.0 / v.support_size - 1e-12 <= s <= 1.0 + 1e-12


def test_relabeling_clones_leaves_squared_norm_unchanged():
    rng = np.random.default_rng(7)
    counts = {f"c{j}": int(c) for j, c in enumerate(rng.integers(1, 50, size=20))}
    relabeled = {f"x-{k}": v for k, v in counts.items()}
    a = squared_norm(frequencies(ReplicateObservation(counts)))
    b = squared_norm(frequencies(ReplicateObservation(relabeled)))
    assert a == b


def test_frequencies_invariant_to_count_scaling():
    counts = {"a": 3, "b": 5, "c": 2}
    scaled = {k: 7 * v for k, v in counts.items()}
    assert frequencies(ReplicateObservation(counts)).entries == pytest.approx(
        frequencies(ReplicateObservation(scaled)).entries
    )


def test_drop_replicate_shares_observations():
    study = from_counts([{"a": 1}, {"b": 2}, {"c": 3}])
    reduced = study.drop_replicate(1)
    assert reduced.n == 2
    assert reduced.replicates[0] is study.replicates[0]
    assert reduced.replicates[1] is study.replicates[2]
    assert reduced.universe == {"a", "c"}


def test_single_replicate_study_constructible_directly():
    study = ReplicateStudy((ReplicateObservation({"a": 1, "b": 1}),))
    assert study.n == 1
    with pytest.raises(TooFewReplicates):
        study.drop_replicate(0)
