"""Bit-level and statistical tests for the Philox stream layer."""

import numpy as np
import pytest

from pmark import rng

MASK = (1 << 64) - 1
M0, M1 = 0xD2E7470EE14C6C93, 0xCA5A826395121157
W0, W1 = 0x9E3779B97F4A7C15, 0xBB67AE8584CAA73B


def reference_philox4x64_10(counter, key):
    """Independent pure-Python implementation of the block function."""
    c0, c1, c2, c3 = counter
    k0, k1 = key
    for r in range(10):
        p0 = M0 * c0
        p1 = M1 * c2
        c0, c1, c2, c3 = (
            ((p1 >> 64) ^ c1 ^ k0) & MASK,
            p1 & MASK,
            ((p0 >> 64) ^ c3 ^ k1) & MASK,
            p0 & MASK,
        )
        if r < 9:
            k0, k1 = (k0 + W0) & MASK, (k1 + W1) & MASK
    return [c0, c1, c2, c3]


def _backends():
    from pmark import _philox_numpy

    backends = [("numpy", _philox_numpy)]
    try:
        from pmark import _kernels

        backends.append(("compiled", _kernels))
    except ImportError:
        pass
    return backends


BACKENDS = _backends()


# Known-answer block for the all-zero key, frozen from the reference above.
KAT_KEY0_BLOCK0 = [
    0x16554D9ECA36314C,
    0xDB20FE9D672D0FDC,
    0xD7E772CEE186176B,
    0x7E68B68AEC7BA23B,
]


@pytest.mark.parametrize("name,backend", BACKENDS)
def test_known_answer_block(name, backend):
    got = backend.philox_raw(0, 0, 0, 4)
    assert [int(x) for x in got] == KAT_KEY0_BLOCK0
    assert reference_philox4x64_10((0, 0, 0, 0), (0, 0)) == KAT_KEY0_BLOCK0


@pytest.mark.parametrize("name,backend", BACKENDS)
@pytest.mark.parametrize(
    "key,start",
    [((0, 0), 0), ((0xDEADBEEF, 0x12345), 0), ((1, 2), 7), ((MASK, 3), MASK - 1)],
)
def test_backend_matches_reference(name, backend, key, start):
    got = backend.philox_raw(key[0], key[1], start, 12)
    expected = []
    for i in range(3):
        block = start + i
        counter = (block & MASK, (block >> 64) & MASK, 0, 0)
        expected.extend(reference_philox4x64_10(counter, key))
    assert [int(x) for x in got] == expected


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernels not built")
def test_backends_bit_identical():
    a, b = BACKENDS[0][1], BACKENDS[1][1]
    for key, start, n in [((3, 4), 0, 1), ((9, 9), 5, 1003), ((MASK, MASK), 0, 64)]:
        assert np.array_equal(a.philox_raw(*key, start, n), b.philox_raw(*key, start, n))
        assert np.array_equal(a.philox_uniforms(*key, start, n), b.philox_uniforms(*key, start, n))


def test_derive_stream_key_separates_streams():
    base = rng.derive_stream_key(42, (1, 5, 2))
    assert base == rng.derive_stream_key(42, (1, 5, 2))
    assert base != rng.derive_stream_key(43, (1, 5, 2))
    assert base != rng.derive_stream_key(42, (1, 5, 3))
    assert rng.derive_stream_key(42, (1,)) != rng.derive_stream_key(42, (1, 0))
    assert rng.derive_stream_key(42, ()) != rng.derive_stream_key(42, (0,))
    with pytest.raises(ValueError):
        rng.derive_stream_key(42, (-1,))


def test_stream_determinism_and_cursor():
    s1 = rng.stream(7, 2, 1)
    s2 = rng.stream(7, 2, 1)
    assert np.array_equal(s1.raw(10), s2.raw(10))
    # draws consume whole blocks: 10 raws -> 3 blocks
    assert s1.block == 3
    assert np.array_equal(s1.uniforms(5), s2.uniforms(5))
    assert np.array_equal(s1.normals(5), s2.normals(5))


def test_uniforms_range_and_resolution():
    u = rng.stream(1, 9).uniforms(10_000)
    assert u.min() >= 0.0 and u.max() < 1.0
    # all values are multiples of 2**-53
    assert np.all(u * (1 << 53) == np.floor(u * (1 << 53)))


def test_normals_prefix_consistency_and_moments():
    s = rng.stream(11, 3)
    a = s.normals(5)
    b = rng.stream(11, 3).normals(6)
    assert np.array_equal(a, b[:5])
    z = rng.stream(11, 4).normals(200_000)
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1.0) < 0.01


def test_integers_unbiased_and_bounded():
    s = rng.stream(5, 8)
    draws = s.integers(7, size=70_000)
    assert draws.min() >= 0 and draws.max() < 7
    counts = np.bincount(draws, minlength=7)
    assert np.max(np.abs(counts / 70_000 - 1 / 7)) < 0.01
    assert s.integers(1) == 0
    with pytest.raises(ValueError):
        s.integers(0)


def test_permutation_is_uniform_enough():
    s = rng.stream(6, 1)
    seen = np.zeros((4, 4))
    for _ in range(4000):
        perm = s.permutation(4)
        assert sorted(perm.tolist()) == [0, 1, 2, 3]
        for position, value in enumerate(perm):
            seen[position, value] += 1
    assert np.max(np.abs(seen / 4000 - 0.25)) < 0.05
