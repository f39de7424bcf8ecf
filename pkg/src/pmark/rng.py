"""Deterministic, splittable random streams on Philox4x64-10.

Every random draw in the package flows through a named *stream*: a Philox
key derived from a 64-bit master seed plus a tuple of integer components.
Re-deriving the same stream always reproduces the same sequence regardless
of what else the process has drawn, which is what makes key files, mock
runs, and simulation trials bit-reproducible.

Stream-splitting rule (documented so another implementation can match it):
the components tuple is absorbed into a SplitMix64-style accumulator,

    acc <- seed
    for part in (len(components), *components):
        acc <- fin64((acc + GOLDEN + part) mod 2**64)
    key = (fin64(acc + GOLDEN), fin64(acc + 2*GOLDEN))

where ``fin64`` is the SplitMix64 finalizer and GOLDEN = 0x9E3779B97F4A7C15.
Block ``i`` of the stream is the Philox4x64-10 output block for counter
``(i, 0, 0, 0)`` under that key; draws consume whole blocks (4 uint64 each).

Reserved top-level stream domains:

    0  orthogonal pivot derivation          (key material)
    1  per-(sentence, channel) seed bits    (key material)
    2  simulation harness trials
    3  mock endpoint completions
    4  mock endpoint embeddings
    5  tie-breaking / auxiliary draws

The compiled kernels are used when importable; set ``PMARK_NO_EXT=1`` to
force the NumPy backend. Both produce identical bit streams.
"""

from __future__ import annotations

import os
from typing import Optional, Sequence

import numpy as np

if os.environ.get("PMARK_NO_EXT") == "1":
    from pmark import _philox_numpy as _backend
else:
    try:
        from pmark import _kernels as _backend  # type: ignore[no-redef]
    except ImportError:
        from pmark import _philox_numpy as _backend

BACKEND = _backend.BACKEND_NAME

DOMAIN_PIVOTS = 0
DOMAIN_CHANNEL_SEEDS = 1
DOMAIN_SIMULATION = 2
DOMAIN_MOCK_COMPLETIONS = 3
DOMAIN_MOCK_EMBEDDINGS = 4
DOMAIN_AUX = 5

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _fin64(z: int) -> int:
    """SplitMix64 finalizer; a bijection on 64-bit integers."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_stream_key(seed: int, components: Sequence[int]) -> tuple[int, int]:
    """Map (seed, components) to a Philox key per the module docstring."""
    acc = seed & _MASK
    for part in (len(components), *components):
        if part < 0:
            raise ValueError("stream components must be non-negative")
        acc = _fin64(acc + _GOLDEN + (part & _MASK))
    return _fin64(acc + _GOLDEN), _fin64(acc + 2 * _GOLDEN)


class Stream:
    """A consumable cursor over one Philox stream.

    Instances are cheap; callers own them and must not share one mutable
    stream across concurrent consumers. All draw methods advance the cursor
    by whole 4-output blocks so the consumption pattern is identical across
    backends.
    """

    __slots__ = ("key0", "key1", "_block")

    def __init__(self, key0: int, key1: int, block: int = 0):
        self.key0 = key0
        self.key1 = key1
        self._block = block

    @property
    def block(self) -> int:
        return self._block

    def _advance(self, n_raw: int) -> int:
        start = self._block
        self._block += (n_raw + 3) // 4
        return start

    def raw(self, n: int) -> np.ndarray:
        """n raw uint64 values."""
        start = self._advance(n)
        return _backend.philox_raw(self.key0, self.key1, start, n)

    def uniforms(self, n: int) -> np.ndarray:
        """n doubles uniform on [0, 1)."""
        start = self._advance(n)
        return _backend.philox_uniforms(self.key0, self.key1, start, n)

    def normals(self, n: int) -> np.ndarray:
        """n standard normal doubles.

        Box-Muller over consecutive uniform pairs: pair i gives
        ``r*cos(theta), r*sin(theta)`` with ``r = sqrt(-2*log1p(-u[2i]))``
        and ``theta = 2*pi*u[2i+1]``. Odd n consumes a full final pair. The
        transform runs here (not in the backends) so every backend yields
        bit-identical normal streams.
        """
        if n <= 0:
            return np.empty(0, dtype=np.float64)
        pairs = (n + 1) // 2
        u = self.uniforms(2 * pairs)
        radius = np.sqrt(-2.0 * np.log1p(-u[0::2]))
        theta = (2.0 * np.pi) * u[1::2]
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = radius * np.cos(theta)
        out[1::2] = radius * np.sin(theta)
        return out[:n]

    def bits(self, n: int) -> np.ndarray:
        """n uniform {0,1} values (low bit of raw outputs)."""
        return (self.raw(n) & np.uint64(1)).astype(np.int64)

    def integers(self, bound: int, size: Optional[int] = None) -> "int | np.ndarray":
        """Unbiased integers in [0, bound) via 64-bit rejection sampling."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        n = 1 if size is None else int(size)
        out = np.empty(n, dtype=np.int64)
        threshold = np.uint64((1 << 64) % bound)
        ubound = np.uint64(bound)
        filled = 0
        while filled < n:
            draws = self.raw(n - filled)
            good = draws[draws >= threshold] if threshold else draws
            take = good[: n - filled]
            out[filled : filled + take.size] = (take % ubound).astype(np.int64)
            filled += take.size
        return int(out[0]) if size is None else out

    def permutation(self, n: int) -> np.ndarray:
        """A uniformly random permutation of range(n) (Fisher-Yates)."""
        perm = np.arange(n)
        for i in range(n - 1, 0, -1):
            j = self.integers(i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return perm

    def __repr__(self) -> str:  # pragma: no cover
        return f"Stream(key0={self.key0:#018x}, key1={self.key1:#018x}, block={self._block})"


def stream(seed: int, *components: int) -> Stream:
    """The stream identified by ``seed`` and ``components``, at block 0."""
    key0, key1 = derive_stream_key(seed, components)
    return Stream(key0, key1)
