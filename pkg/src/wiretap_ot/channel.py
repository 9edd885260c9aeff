"""Binary erasure symmetric broadcast channel (BESBC).

Bob's output is erased with probability ``eps1``.  Given Bob's status, Eve's
output is erased with probability ``eps2`` (Bob erased) or ``eps3`` (Bob not
erased).  Non-erased outputs always equal the input bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ERASURE = 2
"""Symbol used for an erased position in a trit vector (``uint8`` 0, 1, 2)."""


@dataclass(frozen=True)
class ChannelParams:
    eps1: float
    eps2: float
    eps3: float

    def __post_init__(self):
        for name in ("eps1", "eps2", "eps3"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v) or not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be a probability in [0, 1], got {v!r}")
            object.__setattr__(self, name, float(v))

    @property
    def is_iebc(self) -> bool:
        """Independent erasures (eps2 == eps3)."""
        return self.eps2 == self.eps3

    @property
    def is_debc(self) -> bool:
        """Physically degraded: Bob erased forces Eve erased."""
        return self.eps2 == 1.0

    def astuple(self) -> tuple[float, float, float]:
        return (self.eps1, self.eps2, self.eps3)


@dataclass(frozen=True)
class ErasurePatternDistribution:
    """Joint law of (Bob status, Eve status); ``ok`` = not erased, ``e`` = erased."""

    p_ok_ok: float
    p_ok_e: float
    p_e_ok: float
    p_e_e: float

    def as_array(self) -> np.ndarray:
        return np.array([self.p_ok_ok, self.p_ok_e, self.p_e_ok, self.p_e_e])

    @property
    def bob_erasure(self) -> float:
        return self.p_e_ok + self.p_e_e


def joint_law(params: ChannelParams) -> ErasurePatternDistribution:
    e1, e2, e3 = params.astuple()
    return ErasurePatternDistribution(
        p_ok_ok=(1.0 - e1) * (1.0 - e3),
        p_ok_e=(1.0 - e1) * e3,
        p_e_ok=e1 * (1.0 - e2),
        p_e_e=e1 * e2,
    )


def transmit(
    x: np.ndarray, params: ChannelParams, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Send bit vector ``x`` through the channel; returns ``(y, z)`` trit vectors.

    Bob's erasure is drawn first, then Eve's conditionally on it.
    """
    x = np.asarray(x, dtype=np.uint8)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("x must be a non-empty 1-D bit vector")
    n = x.size
    bob_erased = rng.random(n) < params.eps1
    u = rng.random(n)
    eve_erased = np.where(bob_erased, u < params.eps2, u < params.eps3)
    y = np.where(bob_erased, np.uint8(ERASURE), x).astype(np.uint8)
    z = np.where(eve_erased, np.uint8(ERASURE), x).astype(np.uint8)
    return y, z


def erased_mask(v: np.ndarray) -> np.ndarray:
    return np.asarray(v) == ERASURE
