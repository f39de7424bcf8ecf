"""The sampler: HD median, median partition, online and offline selection."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmark.errors import (
    BudgetNotDivisibleError,
    EmptyCandidateSetError,
    EmptyInputError,
    OddSetSizeError,
)
from pmark.geometry import normalize, sample_sphere
from pmark.keys import MasterKey
from pmark.oracles import enumerate_selection_probabilities
from pmark.rng import stream
from pmark.selection import (
    CandidateSet,
    evidence_counts,
    hd_median,
    hd_median_columns,
    median_partition,
    offline_select,
    offline_signature,
    online_select,
)

# frozen from an arbitrary-precision incomplete-beta oracle:
# weights for n=4 are the Beta(2.5, 2.5) masses of [i/4, (i+1)/4]
HD_0_0_0_10 = 1.2658499755016131


def test_hd_median_symmetric_samples():
    assert hd_median([1, 2, 3]) == pytest.approx(2.0, abs=1e-12)
    assert hd_median([0, 1]) == pytest.approx(0.5, abs=1e-12)
    assert hd_median([7.25]) == 7.25


def test_hd_median_skewed_sample_frozen_oracle():
    assert hd_median([0, 0, 0, 10]) == pytest.approx(HD_0_0_0_10, abs=1e-12)


def test_hd_median_errors_and_columns():
    with pytest.raises(EmptyInputError):
        hd_median([])
    matrix = stream(1, 0).normals(64 * 3).reshape(64, 3)
    columns = hd_median_columns(matrix)
    for j in range(3):
        assert columns[j] == pytest.approx(hd_median(matrix[:, j]))


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-100, 100), min_size=2, max_size=40),
    st.floats(-50, 50),
    st.integers(0, 39),
    st.floats(0.01, 10),
)
def test_hd_median_monotone_and_translation(values, shift, index, bump):
    base = hd_median(values)
    assert hd_median([v + shift for v in values]) == pytest.approx(base + shift, abs=1e-7)
    raised = list(values)
    raised[index % len(values)] += bump
    assert hd_median(raised) >= base - 1e-9


def test_median_partition_examples():
    scores = np.array([-0.3, -0.1, 0.2, 0.4])
    upper, median = median_partition(scores, 1)
    assert upper.tolist() == [2, 3]
    assert median == pytest.approx(0.05)
    lower, _ = median_partition(scores, 0)
    assert lower.tolist() == [0, 1]
    with pytest.raises(OddSetSizeError):
        median_partition(np.array([1.0, 2.0, 3.0]), 1)
    with pytest.raises(OddSetSizeError):
        median_partition(np.array([]), 1)


def test_median_partition_tie_balance_and_frequency():
    scores = np.array([0.1, 0.1, 0.1, 0.1])
    rng = stream(21, 0)
    counts = np.zeros(4)
    trials = 20_000
    for _ in range(trials):
        kept, _ = median_partition(scores, 1, rng)
        assert kept.size == 2
        counts[kept] += 1
    assert np.max(np.abs(counts / trials - 0.5)) <= 0.02


def test_median_partition_partial_ties_exact_halves():
    scores = np.array([0.0, 0.5, 0.5, 0.5, 0.5, 1.0])
    rng = stream(21, 1)
    for bit in (0, 1):
        kept, _ = median_partition(scores, bit, rng)
        assert kept.size == 3
    lower, _ = median_partition(scores, 0, rng)
    assert 0 in lower and 5 not in lower


def test_online_select_single_channel_budget_two():
    key = MasterKey(seed=3, dim=8, channels=1)
    pivots = key.pivots()
    emb = np.vstack([pivots.pivot(1), -pivots.pivot(1)])
    candidates = CandidateSet(embeddings=emb)
    for _ in range(5):
        index, trace = online_select(candidates, [1], pivots, stream(1, 1))
        assert index == 0
    index, _ = online_select(candidates, [0], pivots, stream(1, 1))
    assert index == 1


def test_online_select_exhaustive_budget_four():
    scores = stream(14, 2).normals(4 * 2).reshape(4, 2)
    probs, leaves = enumerate_selection_probabilities(scores)
    assert all(p == Fraction(1, 4) for p in probs)
    covered = np.sort(np.concatenate(leaves))
    assert covered.tolist() == [0, 1, 2, 3]
    for a in range(len(leaves)):
        for b in range(a + 1, len(leaves)):
            assert not set(leaves[a]) & set(leaves[b])


def test_online_select_trace_shape_n64_b4():
    key = MasterKey(seed=8, dim=32, channels=4)
    candidates = CandidateSet(embeddings=sample_sphere(stream(4, 4), 32, size=64))
    index, trace = online_select(candidates, [1, 0, 1, 0], key.pivots(), stream(4, 5))
    assert [step.size_after for step in trace.channels] == [32, 16, 8, 4]
    assert 0 <= index < 64


def test_online_select_budget_divisibility():
    key = MasterKey(seed=8, dim=32, channels=4)
    candidates = CandidateSet(embeddings=sample_sphere(stream(4, 6), 32, size=60))
    with pytest.raises(BudgetNotDivisibleError):
        online_select(candidates, [1, 0, 1, 0], key.pivots(), stream(4, 7))


def test_offline_signature_examples():
    from pmark.geometry import PivotSet

    pivots = PivotSet(matrix=np.eye(2), derivation_seed=0)
    v1 = np.array([1.0, 0.0])
    v2 = np.array([0.0, 1.0])
    # exact zero projection counts as bit 0 (strictly-positive rule)
    assert offline_signature(v1, pivots).tolist() == [1, 0]
    assert offline_signature(-v1, pivots).tolist() == [0, 0]
    assert offline_signature(normalize(v1 + v2), pivots).tolist() == [1, 1]
    qr_pivots = MasterKey(seed=12, dim=8, channels=2).pivots()
    mixed = normalize(qr_pivots.pivot(1) + qr_pivots.pivot(2))
    assert offline_signature(mixed, qr_pivots).tolist() == [1, 1]


def test_offline_select_examples():
    key = MasterKey(seed=12, dim=8, channels=2)
    pivots = key.pivots()
    v1, v2 = pivots.pivot(1), pivots.pivot(2)
    emb = np.vstack([normalize(v1 - v2), normalize(v2 - v1), normalize(v1 + v2)])
    candidates = CandidateSet(embeddings=emb)
    counts = evidence_counts(candidates, [1, 1], pivots)
    assert counts.tolist() == [1, 1, 2]
    index, trace = offline_select(candidates, [1, 1], pivots, stream(2, 2))
    assert index == 2
    assert trace.evidence == 2
    assert trace.candidates_scanned == 3
    with pytest.raises(EmptyCandidateSetError):
        offline_select(CandidateSet(embeddings=np.empty((0, 8))), [1, 1], pivots, stream(2, 3))


def test_offline_select_early_exit_scan_count():
    key = MasterKey(seed=12, dim=8, channels=2)
    pivots = key.pivots()
    v1, v2 = pivots.pivot(1), pivots.pivot(2)
    emb = np.vstack([normalize(-v1 - v2), normalize(v1 + v2), normalize(v1 + v2)])
    index, trace = offline_select(CandidateSet(embeddings=emb), [1, 1], pivots, stream(2, 4))
    assert index == 1  # first full match wins, scanning in order
    assert trace.candidates_scanned == 2


def test_offline_select_all_tied_uniform():
    key = MasterKey(seed=12, dim=8, channels=1)
    pivots = key.pivots()
    emb = np.vstack([-pivots.pivot(1)] * 4)  # every candidate evidence 0
    rng = stream(2, 5)
    counts = np.zeros(4)
    for _ in range(8000):
        index, _ = offline_select(CandidateSet(embeddings=emb), [1], pivots, rng)
        counts[index] += 1
    assert np.max(np.abs(counts / 8000 - 0.25)) < 0.03


def test_offline_select_never_below_max():
    key = MasterKey(seed=19, dim=16, channels=3)
    pivots = key.pivots()
    rng = stream(6, 6)
    for trial in range(50):
        candidates = CandidateSet(embeddings=sample_sphere(stream(6, 7, trial), 16, size=8))
        bits = stream(6, 8, trial).bits(3)
        counts = evidence_counts(candidates, bits, pivots)
        index, _ = offline_select(candidates, bits, pivots, rng)
        assert counts[index] == counts.max()


def test_signature_bits_match_random_seeds_half_the_time():
    key = MasterKey(seed=23, dim=64, channels=4)
    n = 20_000
    candidates = CandidateSet(embeddings=sample_sphere(stream(7, 1), 64, size=n))
    bits = stream(7, 2).bits(4)
    counts = evidence_counts(candidates, bits, key.pivots())
    match_rate = counts.mean() / 4.0
    assert abs(match_rate - 0.5) <= 5.0 / (2.0 * np.sqrt(n * 4))
