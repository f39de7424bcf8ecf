"""Sentence scoring functions.

The watermark channels score a sentence by the cosine between its embedding
and a secret pivot direction. The three baseline scorers below (hyperplane
sign hash, nearest-cluster index, consecutive-sentence similarity) exist so
the comparison harness and the distribution-distortion checks can be run
against the schemes they model; none of them is used by the watermark
itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pmark.geometry import PivotSet, cosine

# Fixed validity interval used by the consecutive-similarity baseline.
SIMMARK_VALID_REGION = (0.68, 0.76)


@dataclass(frozen=True)
class EmbeddedSentence:
    """A sentence together with its unit-norm embedding."""

    text: str
    embedding: np.ndarray


def _embedding_of(s) -> np.ndarray:
    emb = s.embedding if isinstance(s, EmbeddedSentence) else s
    return np.asarray(emb, dtype=np.float64)


def pivot_proxy(s, pivots: PivotSet, j: int) -> float:
    """Cosine between the sentence embedding and pivot j (1-based)."""
    return cosine(pivots.pivot(j), _embedding_of(s))


def channel_scores(embeddings: np.ndarray, pivots: PivotSet) -> np.ndarray:
    """Pivot scores for a batch: (N, d) embeddings -> (N, b) scores."""
    emb = np.asarray(embeddings, dtype=np.float64)
    return np.clip(emb @ pivots.matrix.T, -1.0, 1.0)


def lsh_proxy(s, hyperplanes: np.ndarray) -> int:
    """Sign-hash of the embedding against h hyperplane normals.

    Bit i is 1 iff the projection on hyperplane i is > 0 (a projection of
    exactly 0 counts as +1 so the rule is deterministic). Bits are read
    most-significant-first and shifted into {1, ..., 2**h}.
    """
    emb = _embedding_of(s)
    planes = np.asarray(hyperplanes, dtype=np.float64)
    if planes.ndim == 1:
        planes = planes[None, :]
    bits = (planes @ emb) >= 0.0
    value = 0
    for bit in bits:
        value = (value << 1) | int(bit)
    return value + 1


def cluster_proxy(s, centers: np.ndarray) -> int:
    """1-based index of the center with maximal cosine similarity.

    Ties break toward the lowest index.
    """
    emb = _embedding_of(s)
    sims = np.asarray(centers, dtype=np.float64) @ emb
    return int(np.argmax(sims)) + 1


def simmark_proxy(s_prev, s) -> float:
    """Cosine similarity between consecutive sentence embeddings."""
    return cosine(_embedding_of(s_prev), _embedding_of(s))


def offline_signature_bits(embeddings: np.ndarray, pivots: PivotSet) -> np.ndarray:
    """Sign pattern of pivot scores: (N, d) -> (N, b) in {0, 1}.

    Bit j is 1 iff the channel-j score is strictly positive.
    """
    return (channel_scores(embeddings, pivots) > 0.0).astype(np.int64)


__all__ = [
    "EmbeddedSentence",
    "SIMMARK_VALID_REGION",
    "channel_scores",
    "cluster_proxy",
    "lsh_proxy",
    "offline_signature_bits",
    "pivot_proxy",
    "simmark_proxy",
]
