"""Universal hashing with uniformly random linear maps over GF(2).

Matrices are stored bit-packed: row ``i`` occupies ``ceil(cols / 64)``
``uint64`` words, column ``j`` at bit ``j % 64`` of word ``j // 64``
(least-significant bit first).  Padding bits are always zero.

Wire format (``LinearHash.serialize``): ``"<l>,<m>:<hex>"`` where ``l`` and
``m`` are the decimal row and column counts and ``hex`` is the row-major
concatenation of all ``l * m`` bits, packed MSB-first into bytes, zero
padded at the end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels


def n_words(m: int) -> int:
    return (m + 63) // 64


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a 0/1 vector into little-endian-bit ``uint64`` words."""
    bits = np.asarray(bits, dtype=np.uint8)
    by = np.packbits(bits, bitorder="little")
    pad = (-by.size) % 8
    if pad:
        by = np.concatenate([by, np.zeros(pad, dtype=np.uint8)])
    return by.view("<u8").astype(np.uint64)


def unpack_bits(words: np.ndarray, m: int) -> np.ndarray:
    by = np.ascontiguousarray(words, dtype="<u8").view(np.uint8)
    return np.unpackbits(by, bitorder="little", axis=-1)[..., :m]


@dataclass(frozen=True, eq=False)
class LinearHash:
    rows: int
    cols: int
    words: np.ndarray

    def __post_init__(self):
        if self.words.shape != (self.rows, n_words(self.cols)) or self.words.dtype != np.uint64:
            raise ValueError("packed matrix has the wrong shape or dtype")
        self.words.flags.writeable = False

    def __eq__(self, other):
        if not isinstance(other, LinearHash):
            return NotImplemented
        return (self.rows, self.cols) == (other.rows, other.cols) and np.array_equal(
            self.words, other.words
        )

    def __hash__(self):
        return hash((self.rows, self.cols, self.words.tobytes()))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return apply_hash(self, x)

    @classmethod
    def from_bits(cls, bits: np.ndarray) -> "LinearHash":
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.ndim != 2:
            raise ValueError("expected a 2-D bit matrix")
        rows, cols = bits.shape
        words = np.stack([pack_bits(r) for r in bits]) if rows else np.zeros((0, n_words(cols)), np.uint64)
        return cls(rows, cols, words.reshape(rows, n_words(cols)))

    def bits(self) -> np.ndarray:
        return unpack_bits(self.words, self.cols)

    def serialize(self) -> str:
        flat = self.bits().reshape(-1)
        return f"{self.rows},{self.cols}:{np.packbits(flat).tobytes().hex()}"

    def serialized_size(self) -> int:
        """Length of ``serialize()`` without building it."""
        return len(f"{self.rows},{self.cols}:") + 2 * ((self.rows * self.cols + 7) // 8)

    @classmethod
    def deserialize(cls, text: str) -> "LinearHash":
        try:
            dims, hexpart = text.split(":", 1)
            l_str, m_str = dims.split(",")
            rows, cols = int(l_str), int(m_str)
            raw = np.frombuffer(bytes.fromhex(hexpart), dtype=np.uint8)
        except ValueError as exc:
            raise ValueError(f"malformed hash encoding: {text[:40]!r}") from exc
        if raw.size != (rows * cols + 7) // 8:
            raise ValueError("hash payload length does not match its dimensions")
        flat = np.unpackbits(raw)[: rows * cols]
        return cls.from_bits(flat.reshape(rows, cols))


def sample_linear_hash(m: int, l: int, rng: np.random.Generator) -> LinearHash:
    """Draw a uniformly random ``l x m`` binary matrix (a map {0,1}^m -> {0,1}^l)."""
    if m < 1 or l < 1:
        raise ValueError(f"hash dimensions must be positive, got m={m}, l={l}")
    if l > m:
        raise ValueError(f"output length {l} exceeds input length {m}; the hash must compress")
    return LinearHash(l, m, _random_words((l,), m, rng))


def _random_words(lead: tuple, m: int, rng: np.random.Generator) -> np.ndarray:
    words = rng.integers(0, np.iinfo(np.uint64).max, size=(*lead, n_words(m)), dtype=np.uint64, endpoint=True)
    tail = m % 64
    if tail:
        words[..., -1] &= np.uint64((1 << tail) - 1)
    return words


def sample_hash_batch(count: int, m: int, l: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` independent uniform ``l x m`` maps as packed words, shape ``(count, l, n_words(m))``."""
    if m < 1 or l < 1 or l > m:
        raise ValueError(f"need 1 <= l <= m, got m={m}, l={l}")
    return _random_words((count, l), m, rng)


def apply_hash_batch(words: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Apply map ``i`` to packed input ``xs[i]``; returns ``(count, l)`` bits."""
    acc = np.bitwise_xor.reduce(words & xs[:, None, :], axis=-1)
    return (np.bitwise_count(acc) & 1).astype(np.uint8)


def apply_hash(h: LinearHash, x: np.ndarray, backend: str | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=np.uint8)
    if x.shape != (h.cols,):
        raise ValueError(f"input length {x.shape} does not match hash domain {h.cols}")
    return kernels.gf2_matvec(h.words, pack_bits(x), backend=backend)
