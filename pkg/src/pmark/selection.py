"""Candidate selection: the watermark sampler.

Online mode halves the candidate set once per channel, keeping the half of
the score distribution named by that channel's secret seed bit, then draws
uniformly from what survives. Averaged over uniform seed bits this selects
every candidate with probability exactly 1/N, so the output distribution
matches unwatermarked sampling. Offline mode instead picks the candidate
whose score-sign pattern best matches the seed bits; it is cheaper and needs
no median estimates, at the price of a small, measured distribution shift.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import betainc

from pmark.errors import (
    BudgetNotDivisibleError,
    DimMismatchError,
    EmptyCandidateSetError,
    EmptyInputError,
    OddSetSizeError,
)
from pmark.geometry import PivotSet
from pmark.proxies import channel_scores, offline_signature_bits
from pmark.rng import Stream


@dataclass
class CandidateSet:
    """N candidate sentences as an (N, d) embedding matrix plus optional texts."""

    embeddings: np.ndarray
    texts: Optional[List[str]] = None

    def __post_init__(self):
        self.embeddings = np.asarray(self.embeddings, dtype=np.float64)
        if self.embeddings.ndim != 2:
            raise EmptyCandidateSetError("embeddings must be a 2-D (N, d) array")
        if self.texts is not None and len(self.texts) != len(self):
            raise EmptyCandidateSetError("texts and embeddings disagree on N")

    def __len__(self) -> int:
        return self.embeddings.shape[0]


@dataclass
class ChannelStep:
    """One halving step of the online selector."""

    bit: int
    median: float
    kept_upper: bool
    size_after: int

    def to_dict(self) -> dict:
        return {
            "bit": self.bit,
            "median": self.median,
            "kept_upper": self.kept_upper,
            "size_after": self.size_after,
        }


@dataclass
class SelectionTrace:
    """Audit record of one selection round."""

    mode: str
    chosen_index: int
    channels: List[ChannelStep] = field(default_factory=list)
    evidence: Optional[int] = None
    candidates_scanned: Optional[int] = None

    def to_dict(self) -> dict:
        out = {"mode": self.mode, "chosen_index": self.chosen_index}
        if self.channels:
            out["channels"] = [c.to_dict() for c in self.channels]
        if self.evidence is not None:
            out["evidence"] = self.evidence
        if self.candidates_scanned is not None:
            out["candidates_scanned"] = self.candidates_scanned
        return out


@lru_cache(maxsize=256)
def _hd_weights(n: int) -> np.ndarray:
    """Median weights for n order statistics.

    Weight i is the mass the Beta((n+1)/2, (n+1)/2) distribution puts on
    [ (i-1)/n, i/n ], evaluated through the regularized incomplete beta
    function.
    """
    a = (n + 1) / 2.0
    grid = np.arange(n + 1, dtype=np.float64) / n
    cdf = betainc(a, a, grid)
    return np.diff(cdf)


def hd_median(values: Sequence[float]) -> float:
    """Harrell-Davis estimate of the median: a Beta-weighted average of the
    order statistics. Smoother than the sample median, which is why the
    detector uses it to reconstruct per-channel medians from a resample."""
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise EmptyInputError("hd_median needs at least one value")
    return float(np.sort(arr) @ _hd_weights(arr.size))


def hd_median_columns(matrix: np.ndarray) -> np.ndarray:
    """hd_median applied to each column of an (N, b) score matrix."""
    arr = np.asarray(matrix, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise EmptyInputError("need a non-empty (N, b) matrix")
    return _hd_weights(arr.shape[0]) @ np.sort(arr, axis=0)


def median_partition(
    scores: np.ndarray, k: int, rng: Optional[Stream] = None
) -> Tuple[np.ndarray, float]:
    """Split an even-sized score set at its median and keep one half.

    Returns (kept_indices, median) where the median is the midpoint of the
    two central order statistics. ``k=1`` keeps the upper half (scores >=
    median), ``k=0`` the lower half. When ties straddle the cut, the tied
    elements are assigned to sides uniformly at random so both halves end up
    with exactly N/2 elements; that randomization consumes ``rng``.
    """
    arr = np.asarray(scores, dtype=np.float64).ravel()
    n = arr.size
    if n == 0 or n % 2 != 0:
        raise OddSetSizeError(f"median partition needs an even set size, got {n}")
    half = n // 2
    order = np.argsort(arr, kind="stable")
    lo, hi = arr[order[half - 1]], arr[order[half]]
    median = 0.5 * (lo + hi)
    if lo != hi:
        kept = order[half:] if k else order[:half]
        return np.sort(kept), median
    # Ties straddle the cut: rebuild the boundary from scratch.
    boundary = lo
    below = np.flatnonzero(arr < boundary)
    above = np.flatnonzero(arr > boundary)
    tied = np.flatnonzero(arr == boundary)
    need_low = half - below.size
    if rng is None:
        raise ValueError("tied median split requires an rng stream")
    perm = rng.permutation(tied.size)
    tied_low = tied[perm[:need_low]]
    tied_high = tied[perm[need_low:]]
    kept = np.concatenate([above, tied_high]) if k else np.concatenate([below, tied_low])
    return np.sort(kept), median


def online_select(
    candidates: CandidateSet,
    seed_bits: Sequence[int],
    pivots: PivotSet,
    rng: Stream,
) -> Tuple[int, SelectionTrace]:
    """Nested median halving over all channels, then a uniform draw.

    ``seed_bits`` holds one bit per channel. Requires len(candidates)
    divisible by 2**channels so every halving is exact. Returns the chosen
    candidate's index into the original set plus a full trace.
    """
    n = len(candidates)
    b = len(seed_bits)
    if n == 0:
        raise EmptyCandidateSetError("no candidates to select from")
    if b != pivots.channel_count:
        raise DimMismatchError(f"got {b} seed bits for {pivots.channel_count} channels")
    if n % (1 << b) != 0:
        raise BudgetNotDivisibleError(
            f"budget {n} is not divisible by 2**{b} = {1 << b}"
        )
    scores = channel_scores(candidates.embeddings, pivots)
    alive = np.arange(n)
    steps: List[ChannelStep] = []
    for j, bit in enumerate(seed_bits):
        kept_local, median = median_partition(scores[alive, j], int(bit), rng)
        alive = alive[kept_local]
        steps.append(
            ChannelStep(bit=int(bit), median=median, kept_upper=bool(bit), size_after=alive.size)
        )
    chosen = int(alive[rng.integers(alive.size)])
    return chosen, SelectionTrace(mode="online", chosen_index=chosen, channels=steps)


def offline_signature(embedding: np.ndarray, pivots: PivotSet) -> np.ndarray:
    """Sign pattern of one embedding's channel scores: 1 where score > 0."""
    emb = np.asarray(embedding, dtype=np.float64)
    return offline_signature_bits(emb[None, :], pivots)[0]


def evidence_counts(candidates: CandidateSet, seed_bits: Sequence[int], pivots: PivotSet) -> np.ndarray:
    """Per-candidate count of channels whose signature bit equals the seed bit."""
    sig = offline_signature_bits(candidates.embeddings, pivots)
    bits = np.asarray(seed_bits, dtype=np.int64)
    return (sig == bits[None, :]).sum(axis=1)


def offline_select(
    candidates: CandidateSet,
    seed_bits: Sequence[int],
    pivots: PivotSet,
    rng: Stream,
) -> Tuple[int, SelectionTrace]:
    """Pick the candidate whose signature best matches the seed bits.

    Scans in order and stops at the first candidate matching on every
    channel (mirroring sequential sampling, where a full match ends the
    round early); otherwise ties among the maximal-evidence candidates break
    uniformly at random.
    """
    n = len(candidates)
    if n == 0:
        raise EmptyCandidateSetError("no candidates to select from")
    b = len(seed_bits)
    counts = evidence_counts(candidates, seed_bits, pivots)
    full = np.flatnonzero(counts == b)
    if full.size:
        chosen = int(full[0])
        return chosen, SelectionTrace(
            mode="offline",
            chosen_index=chosen,
            evidence=int(counts[chosen]),
            candidates_scanned=chosen + 1,
        )
    best = np.flatnonzero(counts == counts.max())
    chosen = int(best[rng.integers(best.size)])
    return chosen, SelectionTrace(
        mode="offline",
        chosen_index=chosen,
        evidence=int(counts[chosen]),
        candidates_scanned=n,
    )
