"""Watermark detection via a soft-count z-test.

Each (sentence, channel) cell contributes evidence 1 when the sentence's
channel score lands on the side of the estimated median named by that cell's
secret seed bit (with a small margin ``delta`` absorbing median-estimation
error), and exp(-K * |score - median|) otherwise, so near misses still count
partially. The evidence total is tested against the null mean 0.5 per cell
with a binomial-variance z statistic.

Online detection estimates each cell's median from a fresh resample of the
model; offline detection fixes the prior median at zero and needs neither
model access nor the original prompt.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt
from typing import List, Sequence

import numpy as np
from scipy.stats import norm

from pmark.errors import (
    DomainError,
    EmptyInputError,
    InvalidCountError,
    MissingResampleError,
)
from pmark.geometry import PivotSet
from pmark.keys import ChannelSeeds
from pmark.proxies import channel_scores
from pmark.selection import CandidateSet, hd_median_columns

DEFAULT_DELTA = 0.001
DEFAULT_K = 150.0
DEFAULT_ALPHA = 0.01


def soft_count(x: float, m_hat: float, r: int, delta: float = DEFAULT_DELTA, K: float = DEFAULT_K) -> float:
    """Evidence contributed by one cell.

    1 when the score is on the seeded side of the median within margin
    ``delta`` (strict inequalities), else exp(-K * |x - m_hat|).
    """
    if K <= 0.0:
        raise DomainError(f"K must be positive, got {K}")
    if delta < 0.0:
        raise DomainError(f"delta must be non-negative, got {delta}")
    if (r == 1 and x > m_hat - delta) or (r == 0 and x < m_hat + delta):
        return 1.0
    return float(np.exp(-K * abs(x - m_hat)))


def _soft_count_cells(
    x: np.ndarray, m_hat: np.ndarray, r: np.ndarray, delta: float, K: float
) -> np.ndarray:
    if K <= 0.0:
        raise DomainError(f"K must be positive, got {K}")
    if delta < 0.0:
        raise DomainError(f"delta must be non-negative, got {delta}")
    hard = np.where(r == 1, x > m_hat - delta, x < m_hat + delta)
    return np.where(hard, 1.0, np.exp(-K * np.abs(x - m_hat)))


def z_statistic(n_g: float, n_total: int) -> float:
    """|n_g - 0.5*n_total| / sqrt(0.25*n_total)."""
    if n_total < 1:
        raise InvalidCountError(f"n_total must be >= 1, got {n_total}")
    if not 0.0 <= n_g <= n_total:
        raise InvalidCountError(f"n_g={n_g} outside [0, {n_total}]")
    return abs(n_g - 0.5 * n_total) / sqrt(0.25 * n_total)


def z_threshold(alpha: float) -> float:
    """Upper alpha-quantile of the standard normal."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must be in (0, 1), got {alpha}")
    return float(norm.isf(alpha))


@dataclass
class EvidenceCell:
    t: int
    j: int
    x: float
    m_hat: float
    r: int
    c: float

    def to_dict(self) -> dict:
        return {"t": self.t, "j": self.j, "x": self.x, "m_hat": self.m_hat, "r": self.r, "c": self.c}


@dataclass
class DetectionReport:
    """Outcome of one detection run, including the per-cell evidence."""

    mode: str
    T: int
    b: int
    n_g: float
    z: float
    z_alpha: float
    verdict: bool
    cells: List[EvidenceCell] = field(default_factory=list)

    @property
    def n_total(self) -> int:
        return self.T * self.b

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "T": self.T,
            "b": self.b,
            "N_g": self.n_g,
            "z": self.z,
            "z_alpha": self.z_alpha,
            "verdict": self.verdict,
            "cells": [cell.to_dict() for cell in self.cells],
        }


def _sentence_matrix(sentences) -> np.ndarray:
    if isinstance(sentences, np.ndarray):
        arr = sentences
    else:
        rows = [getattr(s, "embedding", s) for s in sentences]
        arr = np.asarray(rows, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise EmptyInputError("need at least one sentence embedding")
    return arr


def _assemble_report(
    mode: str,
    scores: np.ndarray,
    medians: np.ndarray,
    seed_bits: np.ndarray,
    delta: float,
    K: float,
    alpha: float,
) -> DetectionReport:
    T, b = scores.shape
    cells_c = _soft_count_cells(scores, medians, seed_bits, delta, K)
    n_g = float(cells_c.sum())
    z = z_statistic(n_g, T * b)
    z_a = z_threshold(alpha)
    cells = [
        EvidenceCell(
            t=t + 1,
            j=j + 1,
            x=float(scores[t, j]),
            m_hat=float(medians[t, j]),
            r=int(seed_bits[t, j]),
            c=float(cells_c[t, j]),
        )
        for t in range(T)
        for j in range(b)
    ]
    return DetectionReport(
        mode=mode, T=T, b=b, n_g=n_g, z=z, z_alpha=z_a, verdict=bool(z > z_a), cells=cells
    )


def detect_online(
    sentences,
    resampled: Sequence[CandidateSet],
    seeds: ChannelSeeds,
    pivots: PivotSet,
    delta: float = DEFAULT_DELTA,
    K: float = DEFAULT_K,
    alpha: float = DEFAULT_ALPHA,
) -> DetectionReport:
    """Detect with per-cell medians estimated from resampled candidates.

    ``resampled[t-1]`` must hold the candidates drawn from the model under
    the same context used when sentence t was generated.
    """
    emb = _sentence_matrix(sentences)
    T = emb.shape[0]
    if len(resampled) != T:
        raise MissingResampleError(f"need {T} resample sets, got {len(resampled)}")
    for t, cand in enumerate(resampled, start=1):
        if cand is None or len(cand) == 0:
            raise MissingResampleError(f"empty resample set for sentence {t}")
    scores = channel_scores(emb, pivots)
    medians = np.vstack(
        [hd_median_columns(channel_scores(c.embeddings, pivots)) for c in resampled]
    )
    seed_bits = seeds.matrix(T)
    return _assemble_report("online", scores, medians, seed_bits, delta, K, alpha)


def detect_offline(
    sentences,
    seeds: ChannelSeeds,
    pivots: PivotSet,
    delta: float = DEFAULT_DELTA,
    K: float = DEFAULT_K,
    alpha: float = DEFAULT_ALPHA,
) -> DetectionReport:
    """Detect with the prior median fixed at zero; no model access needed."""
    emb = _sentence_matrix(sentences)
    scores = channel_scores(emb, pivots)
    medians = np.zeros_like(scores)
    seed_bits = seeds.matrix(emb.shape[0])
    return _assemble_report("offline", scores, medians, seed_bits, delta, K, alpha)
