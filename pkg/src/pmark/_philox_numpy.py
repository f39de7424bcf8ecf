"""NumPy backend for the Philox4x64-10 kernels.

Bit-compatible with the compiled backend in ``pmark._kernels``: block ``i``
of a stream is the Philox4x64-10 output for counter ``(i, 0, 0, 0)`` (with
carry) under the stream key. ``numpy.random.Philox`` increments its counter
before producing each block, so we seed it with ``start_block - 1`` modulo
2**256.

Backends produce only integer-exact outputs (raw words and their uniform
mapping); all floating-point transforms live in ``pmark.rng`` so the bit
streams cannot diverge across backends.

A per-thread ``Philox`` instance is reused by reassigning its state, which
is several times cheaper than constructing one per call and matters for the
many tiny draws the text pipeline makes.
"""

import threading

import numpy as np

_COUNTER_MOD = 1 << 256
_WORD = (1 << 64) - 1

BACKEND_NAME = "numpy"

_local = threading.local()


def _generator(key0: int, key1: int, start_block: int) -> np.random.Philox:
    bg = getattr(_local, "bit_generator", None)
    if bg is None:
        bg = np.random.Philox(counter=0, key=0)
        _local.bit_generator = bg
    counter = (start_block - 1) % _COUNTER_MOD
    state = bg.state
    inner = state["state"]
    for word in range(4):
        inner["counter"][word] = (counter >> (64 * word)) & _WORD
    inner["key"][0] = key0
    inner["key"][1] = key1
    state["buffer_pos"] = 4  # discard any buffered outputs
    bg.state = state
    return bg


def philox_raw(key0: int, key1: int, start_block: int, n: int) -> np.ndarray:
    """Return ``n`` raw uint64 outputs starting at ``start_block``."""
    if n <= 0:
        return np.empty(0, dtype=np.uint64)
    return _generator(key0, key1, start_block).random_raw(n)


def philox_uniforms(key0: int, key1: int, start_block: int, n: int) -> np.ndarray:
    """Uniform doubles in [0, 1) with 53-bit resolution: (raw >> 11) * 2**-53."""
    raw = philox_raw(key0, key1, start_block, n)
    return (raw >> np.uint64(11)) * (1.0 / (1 << 53))
