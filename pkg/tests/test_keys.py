"""Key material: files, fingerprints, channel seed bits."""

import json

import numpy as np
import pytest

from pmark.errors import ConfigError, InvalidShapeError, SeedCoverageError
from pmark.keys import (
    ChannelSeeds,
    MasterKey,
    key_fingerprint,
    random_master_key,
    read_key_file,
    write_key_file,
)


def test_master_key_validation():
    with pytest.raises(InvalidShapeError):
        MasterKey(seed=-1, dim=8, channels=2)
    with pytest.raises(InvalidShapeError):
        MasterKey(seed=1 << 64, dim=8, channels=2)
    with pytest.raises(InvalidShapeError):
        MasterKey(seed=0, dim=8, channels=0)
    with pytest.raises(InvalidShapeError):
        MasterKey(seed=0, dim=8, channels=9)
    with pytest.raises(InvalidShapeError):
        MasterKey(seed=0, dim=1, channels=1)


def test_key_file_round_trip(tmp_path):
    path = tmp_path / "key.json"
    key = MasterKey(seed=987654321, dim=96, channels=3)
    write_key_file(path, key)
    doc = json.loads(path.read_text())
    assert doc == {"seed": "987654321", "dim": 96, "channels": 3, "format_version": 1}
    loaded = read_key_file(path)
    assert loaded == key
    assert np.array_equal(loaded.pivots().matrix, key.pivots().matrix)


def test_key_file_errors(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("not json")
    with pytest.raises(ConfigError):
        read_key_file(path)
    path.write_text(json.dumps({"seed": "1", "dim": 8, "channels": 2, "format_version": 99}))
    with pytest.raises(ConfigError):
        read_key_file(path)
    with pytest.raises(ConfigError):
        read_key_file(tmp_path / "missing.json")


def test_fingerprint_is_stable_and_short(tmp_path):
    path = tmp_path / "key.json"
    write_key_file(path, MasterKey(seed=123456789123456789, dim=8, channels=2))
    fp = key_fingerprint(path)
    assert len(fp) == 16 and int(fp, 16) >= 0
    assert fp == key_fingerprint(path)
    assert "123456789123456789" not in fp
    other = tmp_path / "other.json"
    write_key_file(other, MasterKey(seed=2, dim=8, channels=2))
    assert key_fingerprint(other) != fp


def test_random_master_key_shape():
    key = random_master_key(dim=32, channels=4)
    assert 0 <= key.seed < (1 << 64)
    assert (key.dim, key.channels) == (32, 4)


def test_channel_bits_deterministic_and_uniform():
    key = MasterKey(seed=77, dim=16, channels=4)
    again = MasterKey(seed=77, dim=16, channels=4)
    matrix = key.seed_matrix(20)
    assert np.array_equal(matrix, again.seed_matrix(20))
    assert set(np.unique(matrix)) <= {0, 1}
    # marginal uniformity across keys
    bits = [MasterKey(seed=s, dim=4, channels=2).channel_bit(3, 1) for s in range(2000)]
    assert abs(np.mean(bits) - 0.5) < 0.05
    with pytest.raises(SeedCoverageError):
        key.channel_bit(0, 1)
    with pytest.raises(SeedCoverageError):
        key.channel_bit(1, 5)


def test_channel_seeds_wrappers():
    key = MasterKey(seed=9, dim=8, channels=2)
    derived = ChannelSeeds.from_key(key)
    assert derived.bit(4, 2) == key.channel_bit(4, 2)
    explicit = ChannelSeeds.from_bits({(1, 1): 1, (1, 2): 0}, channels=2)
    assert explicit.matrix(1).tolist() == [[1, 0]]
    with pytest.raises(SeedCoverageError):
        explicit.bit(2, 1)
    with pytest.raises(ConfigError):
        ChannelSeeds()
