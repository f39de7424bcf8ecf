"""Model access: sentence segmentation, completion and embedding clients.

Generation and detection talk to OpenAI-compatible ``/completions`` and
``/embeddings`` endpoints; the engine never loads model weights itself. A
deterministic in-process mock endpoint ships here too, so every pipeline
path can run (and be tested byte-for-byte reproducibly) with zero network
access.

Segmentation is a fixed rule shared by generation and detection: the two
sides must slice text identically or the per-sentence evidence would not
line up.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import time
from dataclasses import dataclass
from typing import List, Optional, Protocol, Sequence

import numpy as np

from pmark.errors import (
    ConfigError,
    DimMismatchError,
    EmptyCompletionError,
    EndpointUnavailableError,
)
from pmark.rng import DOMAIN_MOCK_COMPLETIONS, DOMAIN_MOCK_EMBEDDINGS, Stream, stream

ENV_API_BASE = "PMARK_API_BASE"
ENV_API_KEY = "PMARK_API_KEY"
ENV_EMBED_BASE = "PMARK_EMBED_BASE"
ENV_EMBED_KEY = "PMARK_EMBED_KEY"

# Multi-letter tokens that end with a period without ending a sentence.
_ABBREVIATIONS = {
    "dr", "mr", "mrs", "ms", "prof", "sr", "jr", "st", "vs", "etc",
    "fig", "eq", "no", "e.g", "i.e", "al", "approx", "dept", "inc", "ltd",
}

_BOUNDARY = re.compile(r"[.!?]+(?=\s)|[.!?]+$")


@dataclass
class SentenceSplit:
    """Sentences plus enough bookkeeping to reconstruct the source exactly.

    ``separators`` has length len(sentences)+1: the text before the first
    sentence, between consecutive sentences, and after the last.
    """

    sentences: List[str]
    offsets: List[tuple]
    separators: List[str]

    def join(self) -> str:
        parts = [self.separators[0]]
        for sentence, sep in zip(self.sentences, self.separators[1:]):
            parts.append(sentence)
            parts.append(sep)
        return "".join(parts)


def _is_abbreviation(text: str, end: int) -> bool:
    """True when the terminal punctuation at ``end`` closes an abbreviation."""
    word_start = end
    while word_start > 0 and not text[word_start - 1].isspace():
        word_start -= 1
    word = text[word_start:end].rstrip(".!?").lower()
    return word in _ABBREVIATIONS


def split_sentences(text: str) -> SentenceSplit:
    """Split on terminal punctuation (., !, ?) followed by whitespace or end
    of text, guarding a fixed list of abbreviations. Deterministic; both
    generation and detection must use this exact rule."""
    sentences: List[str] = []
    offsets: List[tuple] = []
    separators: List[str] = []
    cursor = 0

    def _take(end: int) -> None:
        nonlocal cursor
        segment = text[cursor:end]
        stripped = segment.strip()
        if not stripped:
            return
        lead = len(segment) - len(segment.lstrip())
        begin = cursor + lead
        separators.append(text[cursor:begin])
        sentences.append(stripped)
        offsets.append((begin, begin + len(stripped)))
        cursor = begin + len(stripped)

    for match in _BOUNDARY.finditer(text):
        if _is_abbreviation(text, match.start()):
            continue
        _take(match.end())
    _take(len(text))  # trailing text without terminal punctuation
    separators.append(text[cursor:])
    return SentenceSplit(sentences=sentences, offsets=offsets, separators=separators)


@dataclass
class EndpointConfig:
    """Connection and sampling settings for the completion/embedding APIs.

    URL and API-key fields fall back to the PMARK_* environment variables
    when left empty.
    """

    base_url: str = ""
    api_key: str = ""
    model: str = "default"
    embed_base_url: str = ""
    embed_api_key: str = ""
    embed_model: str = "default-embed"
    temperature: float = 0.7
    top_p: float = 0.95
    max_tokens: int = 64
    timeout: float = 30.0
    max_retries: int = 3
    backoff: float = 0.5

    def __post_init__(self):
        if self.temperature < 0.0:
            raise ConfigError(f"temperature must be >= 0, got {self.temperature}")
        if not 0.0 < self.top_p <= 1.0:
            raise ConfigError(f"top_p must be in (0, 1], got {self.top_p}")
        if self.max_retries < 0 or self.backoff < 0:
            raise ConfigError("retry policy values must be non-negative")

    def resolved_base_url(self) -> str:
        return self.base_url or os.environ.get(ENV_API_BASE, "")

    def resolved_api_key(self) -> str:
        return self.api_key or os.environ.get(ENV_API_KEY, "")

    def resolved_embed_base_url(self) -> str:
        return self.embed_base_url or os.environ.get(ENV_EMBED_BASE, "") or self.resolved_base_url()

    def resolved_embed_api_key(self) -> str:
        return self.embed_api_key or os.environ.get(ENV_EMBED_KEY, "") or self.resolved_api_key()

    @classmethod
    def from_dict(cls, raw: dict) -> "EndpointConfig":
        known = {f: raw[f] for f in cls.__dataclass_fields__ if f in raw}
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown endpoint config keys: {sorted(unknown)}")
        return cls(**known)


class Endpoint(Protocol):  # pragma: no cover - typing only
    dim: Optional[int]

    def complete(self, context: str, n: int) -> List[str]: ...

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


class HttpEndpoint:
    """OpenAI-compatible HTTP client with bounded exponential-backoff retry."""

    def __init__(self, config: EndpointConfig):
        import httpx

        self.config = config
        self.dim: Optional[int] = None
        self._client = httpx.Client(timeout=config.timeout)

    def _post(self, url: str, api_key: str, payload: dict) -> dict:
        import httpx

        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        last_error: Optional[Exception] = None
        for attempt in range(self.config.max_retries + 1):
            try:
                response = self._client.post(url, json=payload, headers=headers)
                if response.status_code >= 500 or response.status_code == 429:
                    raise httpx.HTTPStatusError(
                        f"status {response.status_code}", request=response.request, response=response
                    )
                response.raise_for_status()
                return response.json()
            except (httpx.HTTPError, json.JSONDecodeError) as exc:
                last_error = exc
                if attempt < self.config.max_retries:
                    time.sleep(self.config.backoff * (2**attempt))
        raise EndpointUnavailableError(
            f"{url} failed after {self.config.max_retries + 1} attempts: {last_error}"
        )

    def complete(self, context: str, n: int) -> List[str]:
        base = self.config.resolved_base_url()
        if not base:
            raise EndpointUnavailableError(f"no completion endpoint configured (set {ENV_API_BASE})")
        payload = {
            "model": self.config.model,
            "prompt": context,
            "n": n,
            "temperature": self.config.temperature,
            "top_p": self.config.top_p,
            "max_tokens": self.config.max_tokens,
        }
        doc = self._post(base.rstrip("/") + "/completions", self.config.resolved_api_key(), payload)
        texts = [choice.get("text", "") for choice in doc.get("choices", [])]
        while len(texts) < n:  # some servers cap n per request
            doc = self._post(
                base.rstrip("/") + "/completions",
                self.config.resolved_api_key(),
                {**payload, "n": n - len(texts)},
            )
            more = [choice.get("text", "") for choice in doc.get("choices", [])]
            if not more:
                raise EndpointUnavailableError("completion endpoint returned no choices")
            texts.extend(more)
        return texts[:n]

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        base = self.config.resolved_embed_base_url()
        if not base:
            raise EndpointUnavailableError(f"no embedding endpoint configured (set {ENV_EMBED_BASE})")
        payload = {"model": self.config.embed_model, "input": list(texts)}
        doc = self._post(base.rstrip("/") + "/embeddings", self.config.resolved_embed_api_key(), payload)
        rows = sorted(doc.get("data", []), key=lambda item: item.get("index", 0))
        vectors = np.asarray([row["embedding"] for row in rows], dtype=np.float64)
        if vectors.shape[0] != len(texts):
            raise EndpointUnavailableError("embedding endpoint returned wrong arity")
        norms = np.linalg.norm(vectors, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            raise EndpointUnavailableError("embedding endpoint returned a zero vector")
        vectors /= norms
        if self.dim is None:
            self.dim = vectors.shape[1]
        return vectors


_LEXICON = (
    "amber basin cedar delta ember fjord garnet harbor inlet juniper kestrel "
    "lagoon marble nectar onyx prairie quartz ridge sierra timber umber vale "
    "willow zephyr anchor beacon canyon drift ember flint grove hollow island "
    "jetty knoll ledge meadow notch orchard pillar quarry reef summit thicket "
    "upland vista wharf yonder atlas breeze cairn dune eddy fern glade heath"
).split()


class MockEndpoint:
    """Deterministic stand-in for both model endpoints.

    Completions are pseudo-sentences built from a fixed lexicon; the draw
    stream is keyed by (seed, call index), so a fresh instance replays the
    identical sequence of responses. Embeddings are a pure function of
    (sentence text, dim): the text is hashed to a stream key that yields a
    normalized Gaussian vector. The per-call distribution is context
    independent, i.e. candidates are i.i.d. across and within steps.
    """

    def __init__(self, seed: int, dim: int):
        if dim < 2:
            raise ConfigError(f"mock dim must be >= 2, got {dim}")
        self.seed = seed
        self.dim = dim
        self._calls = 0

    def complete(self, context: str, n: int) -> List[str]:
        draws = stream(self.seed, DOMAIN_MOCK_COMPLETIONS, self._calls)
        self._calls += 1
        raw = draws.raw(n * 10)
        out = []
        for i in range(n):
            length = 6 + int(raw[i * 10] % np.uint64(4))
            words = [
                _LEXICON[int(raw[i * 10 + 1 + k] % np.uint64(len(_LEXICON)))]
                for k in range(length)
            ]
            out.append(" " + words[0].capitalize() + " " + " ".join(words[1:]) + ".")
        return out

    def _text_stream(self, text: str) -> Stream:
        digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
        return stream(int.from_bytes(digest, "big"), DOMAIN_MOCK_EMBEDDINGS, self.dim)

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        out = np.empty((len(texts), self.dim), dtype=np.float64)
        for i, text in enumerate(texts):
            g = self._text_stream(text).normals(self.dim)
            out[i] = g / np.linalg.norm(g)
        return out


def sample_candidates(endpoint: Endpoint, context: str, n: int) -> List[str]:
    """n single-sentence continuations of ``context``.

    Each completion is truncated at its first sentence boundary; a
    completion with no sentence at all is an error rather than a silent
    shortfall.
    """
    if n < 1:
        raise ConfigError(f"candidate count must be >= 1, got {n}")
    completions = endpoint.complete(context, n)
    sentences = []
    for text in completions:
        split = split_sentences(text)
        if not split.sentences:
            raise EmptyCompletionError("completion contained no sentence")
        sentences.append(split.sentences[0])
    return sentences


def embed_sentences(
    endpoint: Endpoint, sentences: Sequence[str], expect_dim: Optional[int] = None
) -> np.ndarray:
    """Unit-norm embeddings for a batch of sentences, checked against the
    key's dimension when given."""
    if len(sentences) < 1:
        raise ConfigError("need at least one sentence to embed")
    vectors = endpoint.embed(sentences)
    if expect_dim is not None and vectors.shape[1] != expect_dim:
        raise DimMismatchError(
            f"endpoint embeds into dim {vectors.shape[1]}, key expects {expect_dim}"
        )
    return vectors
