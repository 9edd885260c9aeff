import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wiretap_ot.hashing import (
    LinearHash,
    apply_hash,
    n_words,
    pack_bits,
    sample_linear_hash,
    unpack_bits,
)


def dense_apply(h: LinearHash, x: np.ndarray) -> np.ndarray:
    return (h.bits().astype(np.int64) @ x.astype(np.int64) % 2).astype(np.uint8)


def test_shape_of_small_hash(rng):
    h = sample_linear_hash(4, 2, rng)
    assert (h.rows, h.cols) == (2, 4)
    assert h.bits().shape == (2, 4)


def test_seed_determinism():
    a = sample_linear_hash(300, 20, np.random.default_rng(5))
    b = sample_linear_hash(300, 20, np.random.default_rng(5))
    assert a == b and hash(a) == hash(b)


@pytest.mark.parametrize("m,l", [(3, 4), (0, 1), (5, 0)])
def test_rejects_bad_dimensions(rng, m, l):
    with pytest.raises(ValueError):
        sample_linear_hash(m, l, rng)


def test_identity_and_zero():
    ident = LinearHash.from_bits(np.eye(3, dtype=np.uint8))
    assert ident(np.array([1, 0, 1])).tolist() == [1, 0, 1]
    zero = LinearHash.from_bits(np.zeros((4, 70), dtype=np.uint8))
    assert not zero(np.ones(70, np.uint8)).any()


def test_length_mismatch(rng):
    h = sample_linear_hash(10, 3, rng)
    with pytest.raises(ValueError):
        apply_hash(h, np.zeros(11, np.uint8))


def test_padding_bits_are_zero(rng):
    h = sample_linear_hash(130, 7, rng)
    assert h.words.shape == (7, 3)
    assert not np.any(h.words[:, -1] >> np.uint64(2))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 300), st.integers(1, 40), st.integers(0, 2**32))
def test_matches_dense_reference_and_is_linear(m, l, seed):
    l = min(l, m)
    rng = np.random.default_rng(seed)
    h = sample_linear_hash(m, l, rng)
    a = rng.integers(0, 2, m, dtype=np.uint8)
    b = rng.integers(0, 2, m, dtype=np.uint8)
    for backend in ("numpy", "numba"):
        ha = apply_hash(h, a, backend=backend)
        assert ha.shape == (l,)
        assert np.array_equal(ha, dense_apply(h, a))
        assert np.array_equal(apply_hash(h, a ^ b, backend=backend), ha ^ apply_hash(h, b, backend=backend))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 200), st.integers(0, 2**32))
def test_pack_roundtrip(m, seed):
    bits = np.random.default_rng(seed).integers(0, 2, m, dtype=np.uint8)
    words = pack_bits(bits)
    assert words.shape == (n_words(m),)
    assert np.array_equal(unpack_bits(words, m), bits)


def test_serialization_format():
    h = LinearHash.from_bits(np.array([[1, 0, 1], [1, 1, 0]], dtype=np.uint8))
    # row-major bits 101110 packed MSB first -> 0b10111000
    assert h.serialize() == "2,3:b8"
    assert LinearHash.deserialize("2,3:b8") == h
    assert h.serialized_size() == len(h.serialize())


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 150), st.integers(1, 20), st.integers(0, 2**32))
def test_serialization_roundtrip(m, l, seed):
    h = sample_linear_hash(m, min(l, m), np.random.default_rng(seed))
    text = h.serialize()
    assert LinearHash.deserialize(text) == h
    assert h.serialized_size() == len(text)


@pytest.mark.parametrize("text", ["garbage", "2,3:zz", "2,3:b8b8", "2:b8"])
def test_malformed_serialization(text):
    with pytest.raises(ValueError):
        LinearHash.deserialize(text)


def test_hash_is_immutable(rng):
    h = sample_linear_hash(64, 8, rng)
    with pytest.raises(ValueError):
        h.words[0, 0] = 1


def test_collision_rate_small_l(rng):
    # l = 4: Pr[collision] for distinct inputs is 1/16 exactly for uniform linear maps
    m, l, trials = 40, 4, 40_000
    a = rng.integers(0, 2, m, dtype=np.uint8)
    b = a.copy()
    b[3] ^= 1
    hits = 0
    for _ in range(trials):
        h = sample_linear_hash(m, l, rng)
        hits += np.array_equal(h(a), h(b))
    p = 2.0**-l
    assert abs(hits / trials - p) <= 4 * np.sqrt(p * (1 - p) / trials)


def test_batch_matches_single(rng):
    from wiretap_ot.hashing import apply_hash_batch, sample_hash_batch

    words = sample_hash_batch(50, 100, 16, rng)
    xs = rng.integers(0, 2, (50, 100), dtype=np.uint8)
    packed = np.stack([pack_bits(x) for x in xs])
    out = apply_hash_batch(words, packed)
    for i in range(50):
        assert np.array_equal(out[i], apply_hash(LinearHash(16, 100, words[i].copy()), xs[i]))
    with pytest.raises(ValueError):
        sample_hash_batch(1, 4, 5, rng)
