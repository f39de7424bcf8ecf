"""Soft-count z-test detection, online and offline."""

import math
from statistics import NormalDist

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmark.detection import (
    DetectionReport,
    detect_offline,
    detect_online,
    soft_count,
    z_statistic,
    z_threshold,
)
from pmark.errors import (
    DomainError,
    EmptyInputError,
    InvalidCountError,
    MissingResampleError,
    SeedCoverageError,
)
from pmark.geometry import sample_sphere
from pmark.keys import ChannelSeeds, MasterKey
from pmark.rng import stream
from pmark.selection import CandidateSet

Z_48_OF_48 = 6.92820323027551
EXP_MINUS_1_5 = 0.22313016014842982


def test_soft_count_examples():
    assert soft_count(x=0.2, m_hat=0.2, r=1, delta=0.001, K=150.0) == 1.0
    assert soft_count(x=0.19, m_hat=0.2, r=1, delta=0.001, K=150.0) == pytest.approx(
        EXP_MINUS_1_5, abs=1e-12
    )
    assert soft_count(x=-0.3, m_hat=0.2, r=0, delta=0.001, K=150.0) == 1.0
    with pytest.raises(DomainError):
        soft_count(0.0, 0.0, 1, delta=0.001, K=0.0)
    with pytest.raises(DomainError):
        soft_count(0.0, 0.0, 1, delta=-0.1, K=10.0)


def test_soft_count_boundary_jump_is_bounded():
    delta, K = 0.01, 50.0
    just_inside = soft_count(-delta + 1e-12, 0.0, 1, delta, K)
    just_outside = soft_count(-delta - 1e-12, 0.0, 1, delta, K)
    assert just_inside == 1.0
    assert abs(just_outside - math.exp(-K * delta)) < 1e-9
    assert abs(just_outside - 1.0) <= 1.0 - math.exp(-K * delta) + 1e-9


@settings(max_examples=80, deadline=None)
@given(
    st.floats(-1, 1),
    st.floats(-1, 1),
    st.floats(-0.5, 0.5),
    st.floats(0.0, 0.05),
    st.floats(1.0, 300.0),
)
def test_soft_count_monotone(x, x2, m_hat, delta, K):
    lo, hi = sorted((x, x2))
    assert soft_count(hi, m_hat, 1, delta, K) >= soft_count(lo, m_hat, 1, delta, K) - 1e-12
    assert soft_count(hi, m_hat, 0, delta, K) <= soft_count(lo, m_hat, 0, delta, K) + 1e-12


def test_z_statistic_examples_and_symmetry():
    assert z_statistic(24.0, 48) == 0.0
    assert z_statistic(48.0, 48) == pytest.approx(Z_48_OF_48, abs=1e-4)
    assert z_statistic(0.0, 48) == pytest.approx(Z_48_OF_48, abs=1e-4)
    for n_g in (0.0, 7.3, 20.0):
        assert z_statistic(n_g, 48) == pytest.approx(z_statistic(48 - n_g, 48))
    with pytest.raises(InvalidCountError):
        z_statistic(49.0, 48)
    with pytest.raises(InvalidCountError):
        z_statistic(-0.1, 48)
    with pytest.raises(InvalidCountError):
        z_statistic(0.0, 0)


def test_z_threshold_inverse_normal():
    oracle = NormalDist()
    assert z_threshold(0.5) == pytest.approx(0.0, abs=1e-12)
    assert z_threshold(0.01) == pytest.approx(2.3263, abs=1e-3)
    assert z_threshold(0.05) == pytest.approx(1.6449, abs=1e-3)
    for alpha in (0.001, 0.01, 0.05, 0.2):
        assert z_threshold(alpha) == pytest.approx(oracle.inv_cdf(1 - alpha), abs=1e-9)
    with pytest.raises(DomainError):
        z_threshold(0.0)
    with pytest.raises(DomainError):
        z_threshold(1.0)


@pytest.fixture(scope="module")
def key():
    return MasterKey(seed=606, dim=32, channels=4)


def _seeded_side_embeddings(key, T):
    """Embeddings whose channel scores sit firmly on each seeded side."""
    pivots = key.pivots()
    bits = key.seed_matrix(T)
    rows = []
    for t in range(T):
        direction = np.zeros(key.dim)
        for j in range(key.channels):
            direction += (1.0 if bits[t, j] else -1.0) * pivots.matrix[j]
        rows.append(direction / np.linalg.norm(direction))
    return np.asarray(rows)


def test_detect_online_full_evidence(key):
    T = 12
    sentences = _seeded_side_embeddings(key, T)
    resampled = [
        CandidateSet(embeddings=sample_sphere(stream(5, 3, t), key.dim, size=64))
        for t in range(T)
    ]
    report = detect_online(sentences, resampled, ChannelSeeds.from_key(key), key.pivots())
    assert report.n_g == pytest.approx(48.0, abs=0.2)
    assert report.z == pytest.approx(Z_48_OF_48, abs=0.1)
    assert report.verdict is True
    assert report.mode == "online"
    assert len(report.cells) == 48


def test_detect_online_input_validation(key):
    with pytest.raises(EmptyInputError):
        detect_online(np.empty((0, 32)), [], ChannelSeeds.from_key(key), key.pivots())
    sentences = _seeded_side_embeddings(key, 2)
    sets = [CandidateSet(embeddings=sample_sphere(stream(5, 4), key.dim, size=8))]
    with pytest.raises(MissingResampleError):
        detect_online(sentences, sets, ChannelSeeds.from_key(key), key.pivots())
    with pytest.raises(MissingResampleError):
        detect_online(
            sentences,
            [CandidateSet(embeddings=np.empty((0, 32))), sets[0]],
            ChannelSeeds.from_key(key),
            key.pivots(),
        )


def test_detect_offline_full_and_boundary(key):
    T = 12
    sentences = _seeded_side_embeddings(key, T)
    seeds = ChannelSeeds.from_key(key)
    report = detect_offline(sentences, seeds, key.pivots())
    assert report.n_g == pytest.approx(48.0)
    assert report.verdict is True
    # x exactly zero for every cell: both margin conditions admit it
    zero_scores = np.zeros((T, key.dim))
    boundary = detect_offline(zero_scores, seeds, key.pivots())
    assert boundary.n_g == pytest.approx(48.0)
    assert boundary.z == pytest.approx(Z_48_OF_48, abs=1e-6)


def test_detect_offline_deterministic_and_serializable(key):
    sentences = sample_sphere(stream(5, 5), key.dim, size=6)
    seeds = ChannelSeeds.from_key(key)
    first = detect_offline(sentences, seeds, key.pivots())
    second = detect_offline(sentences, seeds, key.pivots())
    assert first.to_dict() == second.to_dict()
    doc = first.to_dict()
    assert set(doc) == {"mode", "T", "b", "N_g", "z", "z_alpha", "verdict", "cells"}
    assert set(doc["cells"][0]) == {"t", "j", "x", "m_hat", "r", "c"}
    assert doc["T"] == 6 and doc["b"] == 4


def test_detect_offline_seed_coverage(key):
    sentences = sample_sphere(stream(5, 6), key.dim, size=3)
    partial = ChannelSeeds.from_bits({(1, j): 1 for j in range(1, 5)}, channels=4)
    with pytest.raises(SeedCoverageError):
        detect_offline(sentences, partial, key.pivots())


def test_null_hard_condition_rate_at_least_half(key):
    sentences = sample_sphere(stream(5, 7), key.dim, size=400)
    report = detect_offline(sentences, ChannelSeeds.from_key(key), key.pivots())
    hard = np.mean([cell.c == 1.0 for cell in report.cells])
    assert hard >= 0.45  # 1/2 minus Monte Carlo slack; delta only enlarges
    assert report.n_g >= 0.5 * report.n_total - 3.0 * np.sqrt(0.25 * report.n_total)
