"""Executable statistical ground truth.

The watermark's guarantees reduce to a handful of checkable statements about
green-region rejection sampling over a finite score range, median-split
selection, and score stability under bounded embedding perturbations. This
module implements those statements directly — closed forms by exhaustive
subset enumeration, procedures by brute-force simulation, exact selection
probabilities by rational arithmetic — so tests and the ``verify`` command
can compare the production code paths against independent computations.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from math import comb, sqrt
from typing import List, Sequence, Tuple

import numpy as np

from pmark.errors import (
    EnumerationTooLargeError,
    OddSetSizeError,
    ZeroGreenMassError,
)
from pmark.rng import Stream
from pmark.selection import median_partition

ENUMERATION_GUARD = 22  # exact subset enumeration only up to this range size
_REJECTION_ROUND_CAP = 10_000


def _validate_masses(q) -> np.ndarray:
    arr = np.asarray(q, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError("empty mass vector")
    if np.any(arr < 0.0) or abs(arr.sum() - 1.0) > 1e-9:
        raise ValueError("masses must be non-negative and sum to 1")
    return arr


def green_scaling(q, S: Sequence[int], s_mass: float, u: int) -> float:
    """Output mass of a sentence under rejection sampling into green set S.

    ``q`` is the natural mass over score values 1..M, ``S`` the green values,
    ``s_mass`` the sentence's own natural mass, and ``u`` its score value.
    Conditioning on landing in S scales the mass by 1/q(S) inside S and
    zeroes it outside, independent of the sampling budget.
    """
    arr = _validate_masses(q)
    green = set(int(v) for v in S)
    q_s = float(sum(arr[v - 1] for v in green))
    if q_s <= 0.0:
        raise ZeroGreenMassError("green set has zero mass")
    return s_mass / q_s if int(u) in green else 0.0


def _green_subsets(M: int, m: int) -> np.ndarray:
    if not 1 <= m <= M:
        raise ValueError(f"green size {m} outside 1..{M}")
    if M > ENUMERATION_GUARD:
        raise EnumerationTooLargeError(
            f"exact enumeration capped at M <= {ENUMERATION_GUARD}, got {M}"
        )
    return np.array(list(itertools.combinations(range(M), m)), dtype=np.int8)


def pmf_scaling_factors(q, m: int) -> np.ndarray:
    """The factor A(u) multiplying each value's natural mass when the green
    set is a uniformly random size-m subset of {1..M}:

        A(u) = C(M, m)^-1 * sum over { S : |S|=m, u in S } of 1/q(S)

    Computed by exhaustive enumeration of all size-m subsets.
    """
    arr = _validate_masses(q)
    M = arr.size
    combs = _green_subsets(M, m)
    q_s = arr[combs.astype(np.int64)].sum(axis=1)
    if np.any(q_s <= 0.0):
        raise ZeroGreenMassError("some size-m green set has zero mass")
    inv = 1.0 / q_s
    factors = np.empty(M, dtype=np.float64)
    for u in range(M):
        factors[u] = inv[(combs == u).any(axis=1)].sum()
    return factors / comb(M, m)


def watermarked_pmf_factor(q, m: int, u: int) -> float:
    """A(u) for a single 1-based value ``u`` (see pmf_scaling_factors)."""
    return float(pmf_scaling_factors(q, m)[int(u) - 1])


def distortion_gap(q, m: int) -> float:
    """max_u |A(u) - 1|: zero iff the output distribution is undistorted,
    which happens exactly when q is uniform."""
    return float(np.max(np.abs(pmf_scaling_factors(q, m) - 1.0)))


def semstamp_monte_carlo(q, m: int, trials: int, rng: Stream) -> np.ndarray:
    """Estimate A(u) by simulating the green-set rejection sampler.

    Per trial: draw a uniformly random size-m green set, draw values from q
    until one lands in the set, record it. Rejection rounds are capped (the
    conditional law is identical past any cap); leftovers draw directly from
    the conditional distribution. Returns freq(u) / (trials * q(u)).
    """
    arr = _validate_masses(q)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    M = arr.size
    combs = _green_subsets(M, m)
    member = np.zeros((combs.shape[0], M), dtype=bool)
    member[np.arange(combs.shape[0])[:, None], combs.astype(np.int64)] = True
    subset_ids = np.asarray(rng.integers(combs.shape[0], trials))
    cum = np.cumsum(arr)
    selected = np.full(trials, -1, dtype=np.int64)
    active = np.arange(trials)
    for _ in range(_REJECTION_ROUND_CAP):
        if active.size == 0:
            break
        draws = np.searchsorted(cum, rng.uniforms(active.size), side="right")
        draws = np.minimum(draws, M - 1)
        hit = member[subset_ids[active], draws]
        selected[active[hit]] = draws[hit]
        active = active[~hit]
    if active.size:  # astronomically small green mass: draw conditionally
        for idx in active:
            sub = combs[subset_ids[idx]].astype(np.int64)
            cond = arr[sub] / arr[sub].sum()
            selected[idx] = sub[np.searchsorted(np.cumsum(cond), rng.uniforms(1)[0], side="right")]
    counts = np.bincount(selected, minlength=M).astype(np.float64)
    return counts / (trials * arr)


def robustness_band_bound(score_samples, m_v: float, d: float) -> float:
    """Fraction of scores within sqrt(2d) of ``m_v``.

    An attacker constrained to cosine distance d moves any score by at most
    sqrt(2d), so only sentences scoring inside this band can have their
    evidence flipped; the band's empirical mass bounds the flip rate.
    """
    if d < 0.0:
        raise ValueError(f"distance budget must be >= 0, got {d}")
    arr = np.asarray(score_samples, dtype=np.float64).ravel()
    half_width = sqrt(2.0 * d)
    return float(np.mean(np.abs(arr - m_v) <= half_width))


def single_channel_distortion_check(N: int, trials: int, rng: Stream) -> float:
    """Simulate single-channel median-split selection and report the largest
    deviation of any candidate's selection frequency from 1/N."""
    if N < 2 or N % 2 != 0:
        raise OddSetSizeError(f"budget must be even and >= 2, got {N}")
    scores = rng.normals(N)
    order = np.argsort(scores)
    lower, upper = order[: N // 2], order[N // 2 :]
    ks = np.asarray(rng.bits(trials), dtype=bool)
    picks = np.asarray(rng.integers(N // 2, trials))
    labels = np.where(ks, upper[picks], lower[picks])
    freqs = np.bincount(labels, minlength=N) / trials
    return float(np.max(np.abs(freqs - 1.0 / N)))


def enumerate_selection_probabilities(
    scores: np.ndarray,
) -> Tuple[List[Fraction], List[np.ndarray]]:
    """Exact per-candidate selection probability of the multi-channel
    selector, by enumerating all seed-bit vectors.

    ``scores`` is an (N, b) matrix that must be tie-free per channel (so the
    halving is deterministic). For each of the 2**b equiprobable seed
    vectors the surviving leaf is computed with the production partition
    routine; the candidate's probability is the sum of (2**-b) / leaf_size
    over leaves containing it. Returns (probabilities, leaves).
    """
    arr = np.asarray(scores, dtype=np.float64)
    n, b = arr.shape
    for j in range(b):
        if np.unique(arr[:, j]).size != n:
            raise ValueError(f"channel {j + 1} scores must be tie-free")
    probs = [Fraction(0)] * n
    leaves: List[np.ndarray] = []
    for bits in itertools.product((0, 1), repeat=b):
        alive = np.arange(n)
        for j, bit in enumerate(bits):
            kept, _ = median_partition(arr[alive, j], bit, rng=None)
            alive = alive[kept]
        leaves.append(alive)
        share = Fraction(1, (1 << b) * alive.size)
        for i in alive:
            probs[int(i)] += share
    return probs, leaves
