"""Generate/detect round trips over the mock endpoint."""

import numpy as np
import pytest

from pmark.endpoint import MockEndpoint, split_sentences
from pmark.errors import EmptyInputError
from pmark.keys import MasterKey
from pmark.pipeline import detect_text, generate_natural, generate_watermarked
from pmark.rng import stream

DIM = 48
PROMPT = "The field notes start with a short summary."


@pytest.fixture(scope="module")
def key():
    return MasterKey(seed=1337, dim=DIM, channels=4)


def test_generate_zero_sentences(key):
    result = generate_watermarked(
        PROMPT, key, "offline", T=0, N=16, endpoint=MockEndpoint(seed=1, dim=DIM), rng=stream(0, 0)
    )
    assert result.sentences == [] and result.text == ""
    assert result.prompt == PROMPT


def test_offline_generation_counts_and_early_exit(key):
    result = generate_watermarked(
        PROMPT, key, "offline", T=10, N=64, endpoint=MockEndpoint(seed=2, dim=DIM), rng=stream(0, 1)
    )
    assert len(result.sentences) == 10
    assert all(1 <= used <= 64 for used in result.candidates_per_sentence)
    assert np.mean(result.candidates_per_sentence) < 64
    assert all(tokens > 0 for tokens in result.tokens_per_sentence)
    for t, trace in enumerate(result.traces, start=1):
        assert trace["t"] == t and trace["mode"] == "offline"


def test_online_generation_uses_full_budget(key):
    result = generate_watermarked(
        PROMPT, key, "online", T=4, N=32, endpoint=MockEndpoint(seed=3, dim=DIM), rng=stream(0, 2)
    )
    assert result.candidates_per_sentence == [32, 32, 32, 32]
    assert len(split_sentences(result.text).sentences) == 4


def test_generation_reproducible(key):
    first = generate_watermarked(
        PROMPT, key, "offline", T=6, N=32, endpoint=MockEndpoint(seed=4, dim=DIM), rng=stream(0, 3)
    )
    second = generate_watermarked(
        PROMPT, key, "offline", T=6, N=32, endpoint=MockEndpoint(seed=4, dim=DIM), rng=stream(0, 3)
    )
    assert first.text == second.text
    assert first.to_payload() == second.to_payload()


def test_offline_round_trip_detects(key):
    result = generate_watermarked(
        PROMPT, key, "offline", T=12, N=64, endpoint=MockEndpoint(seed=5, dim=DIM), rng=stream(0, 4)
    )
    report = detect_text(result.text, key, "offline", MockEndpoint(seed=6, dim=DIM))
    assert report.verdict is True
    assert report.T == 12 and report.b == 4


def test_online_round_trip_detects(key):
    result = generate_watermarked(
        PROMPT, key, "online", T=12, N=64, endpoint=MockEndpoint(seed=7, dim=DIM), rng=stream(0, 5)
    )
    report = detect_text(
        result.text, key, "online", MockEndpoint(seed=8, dim=DIM), prompt=PROMPT, N=64
    )
    assert report.verdict is True
    # online-generated text still shows elevated offline evidence
    offline_report = detect_text(result.text, key, "offline", MockEndpoint(seed=9, dim=DIM))
    assert offline_report.z > 1.0


def test_detection_requirements(key):
    endpoint = MockEndpoint(seed=10, dim=DIM)
    with pytest.raises(EmptyInputError):
        detect_text("", key, "offline", endpoint)
    with pytest.raises(EmptyInputError):
        detect_text("One sentence here.", key, "online", endpoint, prompt=None)


def test_wrong_key_reads_as_null(key):
    result = generate_watermarked(
        PROMPT, key, "offline", T=12, N=64, endpoint=MockEndpoint(seed=11, dim=DIM), rng=stream(0, 6)
    )
    other = MasterKey(seed=4242, dim=DIM, channels=4)
    report = detect_text(result.text, other, "offline", MockEndpoint(seed=12, dim=DIM))
    assert report.verdict is False


def test_natural_generation_is_null(key):
    doc = generate_natural(PROMPT, 12, MockEndpoint(seed=13, dim=DIM))
    assert len(doc.sentences) == 12
    assert doc.candidates_per_sentence == [1] * 12
    report = detect_text(doc.text, key, "offline", MockEndpoint(seed=14, dim=DIM))
    assert report.z < 3.5


def test_seed_bits_agree_between_generation_and_detection(key):
    # detection derives the same per-(t, j) bits from the key alone
    fresh = MasterKey(seed=key.seed, dim=key.dim, channels=key.channels)
    assert np.array_equal(key.seed_matrix(20), fresh.seed_matrix(20))
