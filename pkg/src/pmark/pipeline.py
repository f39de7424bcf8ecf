"""End-to-end watermarked text generation and detection.

Composes the endpoint clients with the selection and detection modules:
sentences are generated one at a time conditioned on everything so far,
selected among N sampled candidates per the active mode, and detection
replays the same segmentation, seed bits, and (online) per-step resampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from pmark.detection import (
    DEFAULT_ALPHA,
    DEFAULT_DELTA,
    DEFAULT_K,
    DetectionReport,
    detect_offline,
    detect_online,
)
from pmark.endpoint import Endpoint, embed_sentences, sample_candidates, split_sentences
from pmark.errors import EmptyInputError
from pmark.keys import ChannelSeeds, MasterKey
from pmark.rng import Stream
from pmark.selection import CandidateSet, offline_select, online_select

SENTENCE_JOINER = " "


@dataclass
class GenerationResult:
    """A watermarked continuation plus its audit trail."""

    prompt: str
    sentences: List[str]
    traces: List[dict] = field(default_factory=list)
    candidates_per_sentence: List[int] = field(default_factory=list)
    tokens_per_sentence: List[int] = field(default_factory=list)

    @property
    def text(self) -> str:
        return SENTENCE_JOINER.join(self.sentences)

    def to_payload(self) -> dict:
        return {
            "prompt": self.prompt,
            "text": self.text,
            "sentences": self.sentences,
            "traces": self.traces,
            "candidates_per_sentence": self.candidates_per_sentence,
            "tokens_per_sentence": self.tokens_per_sentence,
        }


def _token_count(text: str) -> int:
    return len(text.split())


def _extend_context(context: str, sentence: str) -> str:
    return sentence if not context else context + SENTENCE_JOINER + sentence


def generate_watermarked(
    prompt: str,
    key: MasterKey,
    mode: str,
    T: int,
    N: int,
    endpoint: Endpoint,
    rng: Stream,
) -> GenerationResult:
    """Append T watermarked sentences to ``prompt``.

    Online mode samples all N candidates per sentence and runs the median
    halving selector. Offline mode samples lazily and stops as soon as a
    candidate's sign pattern matches the seed bits on every channel, so it
    usually consumes far fewer than N candidates; the per-sentence
    candidate and token counts are recorded either way.
    """
    pivots = key.pivots()
    result = GenerationResult(prompt=prompt, sentences=[])
    context = prompt
    for t in range(1, T + 1):
        bits = [key.channel_bit(t, j) for j in range(1, key.channels + 1)]
        if mode == "online":
            texts = sample_candidates(endpoint, context, N)
            embeddings = embed_sentences(endpoint, texts, expect_dim=key.dim)
            candidates = CandidateSet(embeddings=embeddings, texts=texts)
            index, trace = online_select(candidates, bits, pivots, rng)
            sampled = N
            tokens = sum(_token_count(text) for text in texts)
        else:
            texts = []
            rows: List[np.ndarray] = []
            tokens = 0
            index = None
            bits_arr = np.asarray(bits)
            for _ in range(N):
                text = sample_candidates(endpoint, context, 1)[0]
                vector = embed_sentences(endpoint, [text], expect_dim=key.dim)[0]
                texts.append(text)
                rows.append(vector)
                tokens += _token_count(text)
                signature = (pivots.matrix @ vector > 0.0).astype(np.int64)
                if int((signature == bits_arr).sum()) == key.channels:
                    break
            candidates = CandidateSet(embeddings=np.vstack(rows), texts=texts)
            index, trace = offline_select(candidates, bits, pivots, rng)
            sampled = len(texts)
        chosen = candidates.texts[index]
        result.sentences.append(chosen)
        result.traces.append({"t": t, **trace.to_dict()})
        result.candidates_per_sentence.append(sampled)
        result.tokens_per_sentence.append(tokens)
        context = _extend_context(context, chosen)
    return result


def generate_natural(prompt: str, T: int, endpoint: Endpoint) -> GenerationResult:
    """Unwatermarked continuation: one natural sample per sentence step.

    The calibration baseline for detection experiments.
    """
    result = GenerationResult(prompt=prompt, sentences=[])
    context = prompt
    for t in range(1, T + 1):
        sentence = sample_candidates(endpoint, context, 1)[0]
        result.sentences.append(sentence)
        result.candidates_per_sentence.append(1)
        result.tokens_per_sentence.append(_token_count(sentence))
        context = _extend_context(context, sentence)
    return result


def detect_text(
    text: str,
    key: MasterKey,
    mode: str,
    endpoint: Endpoint,
    prompt: Optional[str] = None,
    N: int = 64,
    delta: float = DEFAULT_DELTA,
    K: float = DEFAULT_K,
    alpha: float = DEFAULT_ALPHA,
) -> DetectionReport:
    """Detect the watermark in ``text``.

    Offline mode needs only the embedding endpoint. Online mode additionally
    resamples N candidates per sentence from the completion endpoint under
    the original context, so it requires ``prompt`` (the text preceding the
    first generated sentence).
    """
    sentences = split_sentences(text).sentences
    if not sentences:
        raise EmptyInputError("no sentences to score")
    embeddings = embed_sentences(endpoint, sentences, expect_dim=key.dim)
    seeds = ChannelSeeds.from_key(key)
    pivots = key.pivots()
    if mode == "offline":
        return detect_offline(embeddings, seeds, pivots, delta=delta, K=K, alpha=alpha)
    if prompt is None:
        raise EmptyInputError("online detection requires the original prompt")
    resampled: List[CandidateSet] = []
    context = prompt
    for sentence in sentences:
        texts = sample_candidates(endpoint, context, N)
        resampled.append(
            CandidateSet(embeddings=embed_sentences(endpoint, texts, expect_dim=key.dim), texts=texts)
        )
        context = _extend_context(context, sentence)
    return detect_online(embeddings, resampled, seeds, pivots, delta=delta, K=K, alpha=alpha)
