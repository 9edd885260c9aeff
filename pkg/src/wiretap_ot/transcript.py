"""Public-channel messages and their serialization.

A transcript serializes to JSON Lines, one record per message, keys sorted
and no insignificant whitespace, so a given seed always yields identical
bytes.  Encodings:

* index sets -- JSON arrays of strictly ascending integers in [0, 2**32);
* hashes -- the ``LinearHash.serialize`` string;
* bit strings -- ``{"bits": <length>, "hex": <MSB-first packed bytes>}``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .hashing import LinearHash

SCHEMA = "wiretap-ot/transcript/1"


def encode_bits(bits: np.ndarray) -> dict:
    bits = np.asarray(bits, dtype=np.uint8)
    return {"bits": int(bits.size), "hex": np.packbits(bits).tobytes().hex()}


def decode_bits(obj: dict) -> np.ndarray:
    n = int(obj["bits"])
    raw = np.frombuffer(bytes.fromhex(obj["hex"]), dtype=np.uint8)
    if raw.size != (n + 7) // 8:
        raise ValueError("bit string payload does not match its declared length")
    return np.unpackbits(raw)[:n].copy()


def encode_index_set(idx: np.ndarray) -> list[int]:
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size and (idx[0] < 0 or idx[-1] >= 2**32 or np.any(np.diff(idx) <= 0)):
        raise ValueError("index set must be strictly ascending 32-bit unsigned integers")
    return idx.tolist()


def decode_index_set(values: list[int]) -> np.ndarray:
    idx = np.asarray(values, dtype=np.int64)
    encode_index_set(idx)  # validates
    return idx


@dataclass(frozen=True, eq=False)
class ResendRequest:
    """Bob's abort: the received block failed the typicality check."""

    attempt: int
    kind = "resend"

    def to_record(self, enc_hash=LinearHash.serialize) -> dict:
        return {"type": self.kind, "attempt": self.attempt}


@dataclass(frozen=True, eq=False)
class SharedBitMessage:
    l_alpha: np.ndarray
    f_alpha: LinearHash
    masked_s: int
    kind = "shared_bit"

    def to_record(self, enc_hash=LinearHash.serialize) -> dict:
        return {
            "type": self.kind,
            "l_alpha": encode_index_set(self.l_alpha),
            "f_alpha": enc_hash(self.f_alpha),
            "masked_s": encode_bits(np.array([self.masked_s], dtype=np.uint8)),
        }


@dataclass(frozen=True, eq=False)
class LabelMessage:
    l0: np.ndarray
    l1: np.ndarray
    kind = "labels"

    def to_record(self, enc_hash=LinearHash.serialize) -> dict:
        return {"type": self.kind, "l0": encode_index_set(self.l0), "l1": encode_index_set(self.l1)}


@dataclass(frozen=True, eq=False)
class CiphertextMessage:
    f0: LinearHash
    f1: LinearHash
    ct_first: np.ndarray
    ct_second: np.ndarray
    kind = "ciphertexts"

    def ciphertext(self, position: int) -> np.ndarray:
        return self.ct_first if position == 0 else self.ct_second

    def hash_at(self, position: int) -> LinearHash:
        return self.f0 if position == 0 else self.f1

    def to_record(self, enc_hash=LinearHash.serialize) -> dict:
        return {
            "type": self.kind,
            "f0": enc_hash(self.f0),
            "f1": enc_hash(self.f1),
            "ct_first": encode_bits(self.ct_first),
            "ct_second": encode_bits(self.ct_second),
        }


def message_from_record(rec: dict):
    kind = rec.get("type")
    if kind == "resend":
        return ResendRequest(int(rec["attempt"]))
    if kind == "shared_bit":
        return SharedBitMessage(
            decode_index_set(rec["l_alpha"]),
            LinearHash.deserialize(rec["f_alpha"]),
            int(decode_bits(rec["masked_s"])[0]),
        )
    if kind == "labels":
        return LabelMessage(decode_index_set(rec["l0"]), decode_index_set(rec["l1"]))
    if kind == "ciphertexts":
        return CiphertextMessage(
            LinearHash.deserialize(rec["f0"]),
            LinearHash.deserialize(rec["f1"]),
            decode_bits(rec["ct_first"]),
            decode_bits(rec["ct_second"]),
        )
    raise ValueError(f"unknown transcript record type {kind!r}")


@dataclass(eq=False)
class Transcript:
    """Ordered log of everything sent on the public channel (seen by all three parties)."""

    messages: list = field(default_factory=list)

    def append(self, msg) -> None:
        self.messages.append(msg)

    def _last(self, cls):
        for msg in reversed(self.messages):
            if isinstance(msg, cls):
                return msg
        return None

    @property
    def shared_bit(self) -> SharedBitMessage | None:
        return self._last(SharedBitMessage)

    @property
    def labels(self) -> LabelMessage | None:
        return self._last(LabelMessage)

    @property
    def ciphertexts(self) -> CiphertextMessage | None:
        return self._last(CiphertextMessage)

    @property
    def resend_count(self) -> int:
        return sum(isinstance(m, ResendRequest) for m in self.messages)

    def to_jsonl(self, enc_hash=LinearHash.serialize) -> str:
        lines = [json.dumps({"schema": SCHEMA}, sort_keys=True, separators=(",", ":"))]
        for msg in self.messages:
            lines.append(json.dumps(msg.to_record(enc_hash), sort_keys=True, separators=(",", ":")))
        return "\n".join(lines) + "\n"

    def encoded_size(self) -> int:
        """Byte length of ``to_jsonl()``, computed without expanding the hash matrices."""
        hex_total = 0

        def header_only(h: LinearHash) -> str:
            nonlocal hex_total
            head = f"{h.rows},{h.cols}:"
            hex_total += h.serialized_size() - len(head)
            return head

        return len(self.to_jsonl(header_only).encode()) + hex_total

    @classmethod
    def from_jsonl(cls, text: str) -> "Transcript":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or json.loads(lines[0]).get("schema") != SCHEMA:
            raise ValueError("missing or unsupported transcript schema header")
        return cls([message_from_record(json.loads(ln)) for ln in lines[1:]])

    def digest(self) -> str:
        return hashlib.sha256(self.to_jsonl().encode()).hexdigest()
