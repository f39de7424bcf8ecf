"""Watermark key material.

A master key is a single 64-bit seed plus the embedding dimension and the
number of channels. Everything else — the orthogonal pivots and the binary
seed bit for every (sentence index, channel) cell — is re-derived from it on
demand, so a key file never stores derived material.

Key file format (JSON, seed kept as a decimal string so it survives parsers
without 64-bit integers):

    {"seed": "12345", "dim": 768, "channels": 4, "format_version": 1}
"""

from __future__ import annotations

import hashlib
import json
import secrets
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Mapping, Optional, Tuple, Union

import numpy as np

from pmark.errors import ConfigError, InvalidShapeError, SeedCoverageError
from pmark.geometry import PivotSet, generate_pivots
from pmark.rng import DOMAIN_CHANNEL_SEEDS, stream

KEY_FILE_VERSION = 1

_SEED_BOUND = 1 << 64


@dataclass(frozen=True)
class MasterKey:
    """Private watermark key: seed plus pivot-space shape."""

    seed: int
    dim: int
    channels: int

    def __post_init__(self):
        if not 0 <= self.seed < _SEED_BOUND:
            raise InvalidShapeError("seed must be an unsigned 64-bit integer")
        if self.dim < 2:
            raise InvalidShapeError(f"dim must be >= 2, got {self.dim}")
        if not 1 <= self.channels <= self.dim:
            raise InvalidShapeError(
                f"channels must be in 1..dim, got {self.channels} with dim {self.dim}"
            )

    def pivots(self) -> PivotSet:
        return _pivots_cached(self.seed, self.dim, self.channels)

    def channel_bit(self, t: int, j: int) -> int:
        """Seed bit r for sentence index t >= 1, channel j in 1..channels."""
        if t < 1 or not 1 <= j <= self.channels:
            raise SeedCoverageError(f"no seed bit for (t={t}, j={j})")
        return int(stream(self.seed, DOMAIN_CHANNEL_SEEDS, t, j).raw(1)[0] & 1)

    def seed_matrix(self, T: int) -> np.ndarray:
        """Seed bits for sentences 1..T, shape (T, channels)."""
        bits = np.empty((T, self.channels), dtype=np.int64)
        for t in range(1, T + 1):
            for j in range(1, self.channels + 1):
                bits[t - 1, j - 1] = self.channel_bit(t, j)
        return bits


@lru_cache(maxsize=64)
def _pivots_cached(seed: int, dim: int, channels: int) -> PivotSet:
    return generate_pivots(MasterKey(seed=seed, dim=dim, channels=channels))


class ChannelSeeds:
    """Lookup for the binary channel seeds r[(t, j)].

    Either derived from a master key (total: any t >= 1 is covered) or
    backed by an explicit mapping, in which case missing cells raise
    SeedCoverageError.
    """

    def __init__(
        self,
        key: Optional[MasterKey] = None,
        bits: Optional[Mapping[Tuple[int, int], int]] = None,
        channels: Optional[int] = None,
    ):
        if (key is None) == (bits is None):
            raise ConfigError("provide exactly one of key= or bits=")
        self._key = key
        self._bits = dict(bits) if bits is not None else None
        if key is not None:
            self.channels = key.channels
        else:
            if channels is None:
                raise ConfigError("channels= is required with explicit bits")
            self.channels = channels

    @classmethod
    def from_key(cls, key: MasterKey) -> "ChannelSeeds":
        return cls(key=key)

    @classmethod
    def from_bits(cls, bits: Mapping[Tuple[int, int], int], channels: int) -> "ChannelSeeds":
        return cls(bits=bits, channels=channels)

    def bit(self, t: int, j: int) -> int:
        if self._key is not None:
            return self._key.channel_bit(t, j)
        try:
            return int(self._bits[(t, j)])  # type: ignore[index]
        except KeyError:
            raise SeedCoverageError(f"no seed bit for (t={t}, j={j})") from None

    def matrix(self, T: int) -> np.ndarray:
        """Bits for t=1..T, shape (T, channels)."""
        out = np.empty((T, self.channels), dtype=np.int64)
        for t in range(1, T + 1):
            for j in range(1, self.channels + 1):
                out[t - 1, j - 1] = self.bit(t, j)
        return out


def random_master_key(dim: int, channels: int) -> MasterKey:
    """A fresh key with a seed from OS entropy."""
    return MasterKey(seed=secrets.randbits(64), dim=dim, channels=channels)


def write_key_file(path: Union[str, Path], key: MasterKey) -> None:
    doc = {
        "seed": str(key.seed),
        "dim": key.dim,
        "channels": key.channels,
        "format_version": KEY_FILE_VERSION,
    }
    Path(path).write_text(json.dumps(doc) + "\n", encoding="utf-8")


def read_key_file(path: Union[str, Path]) -> MasterKey:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read key file {path}: {exc}") from exc
    try:
        version = doc["format_version"]
        if version != KEY_FILE_VERSION:
            raise ConfigError(f"unsupported key file version {version}")
        return MasterKey(seed=int(doc["seed"]), dim=int(doc["dim"]), channels=int(doc["channels"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed key file {path}: {exc}") from exc


def key_fingerprint(path: Union[str, Path]) -> str:
    """First 16 hex chars of the SHA-256 of the key file bytes.

    Safe to embed in output records; never reveals the seed.
    """
    digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
    return digest[:16]
