"""Honest-but-curious 1-of-2 string OT over the BESBC.

One run, in order:

1. Alice sends a uniform block ``x``; Bob sees ``y``, Eve sees ``z``.  Bob
   aborts (Alice resends a fresh block) unless his erasure counts are
   typical.
2. Shared-bit phase: Bob hashes ``x`` on ``n_alpha`` of his clean positions,
   masks a private uniform bit ``S`` with the first hash bit and publishes
   the mask; Alice recomputes the hash and unmasks ``S``.
3. Bob forms a clean set ``G`` and a set ``B`` containing at least ``n*r``
   erasures (three constructions depending on ``beta = r / eps3``), and
   publishes ``(L0, L1) = (G, B)`` if ``C xor S == 0`` else ``(B, G)``.
4. Alice hashes ``x`` on both label sets with fresh universal hashes and
   sends the two encrypted strings; the order of the plaintexts is swapped
   when ``S == 1``.
5. Bob decrypts the string sitting at position ``C xor S``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .channel import ERASURE, ChannelParams, transmit
from .hashing import apply_hash, sample_linear_hash
from .transcript import CiphertextMessage, LabelMessage, ResendRequest, SharedBitMessage, Transcript


class InfeasibleConfigError(ValueError):
    """The requested rate/slack combination cannot be run at this block length."""


class ResendLimitExceeded(RuntimeError):
    pass


class ProtocolViolation(RuntimeError):
    """An internal invariant broke (pool exhaustion, erased key position, ...)."""


def _floor(x: float) -> int:
    # guard against products like 0.29 * 100 landing just below an integer
    return int(math.floor(x + 1e-9))


def _ceil(x: float) -> int:
    return int(math.ceil(x - 1e-9))


@dataclass(frozen=True)
class ProtocolConfig:
    n: int
    r: float
    eps: ChannelParams
    alpha: float = 0.02
    delta: float = 0.05
    delta_bar: float = 0.001
    delta_tilde: float = 0.01
    max_resends: int = 16
    seed: int = 0
    mask_order: bool = True  # False reproduces the fixed-order baseline (ablation only)

    @classmethod
    def from_rate_fraction(cls, n: int, fraction: float, eps: ChannelParams, **kwargs) -> "ProtocolConfig":
        from .bounds import upper_bound

        return cls(n=n, r=fraction * upper_bound(eps), eps=eps, **kwargs)

    @property
    def beta(self) -> float:
        return self.r / self.eps.eps3 if self.eps.eps3 > 0 else math.inf


@dataclass(frozen=True)
class ProtocolDimensions:
    n_alpha: int
    n_beta: int
    k: int
    f_alpha_out: int
    case_id: int
    overlap: int
    beta: float
    min_erased: int
    min_nonerased: int


def typicality_thresholds(n: int, eps1: float, delta: float) -> tuple[int, int]:
    """Minimum (erased, non-erased) counts Bob accepts."""
    return max(_ceil(n * (eps1 - delta)), 0), max(_ceil(n * (1.0 - eps1 - delta)), 0)


def derive_dimensions(config: ProtocolConfig) -> ProtocolDimensions:
    """Integral set sizes and the set-formation case for ``config``.

    Raises ``InfeasibleConfigError`` unless every pool Bob draws from is
    guaranteed large enough once the typicality check has passed.
    """
    n, r = config.n, config.r
    e1, e2, e3 = config.eps.astuple()
    delta = config.delta

    def bad(msg):
        raise InfeasibleConfigError(msg)

    if n < 1:
        bad("block length must be positive")
    if not 0.0 < r < 1.0:
        bad(f"rate must lie in (0, 1), got {r}")
    if e2 < e3:
        bad("the protocol requires eps2 >= eps3")
    if e3 <= 0.0:
        bad("eps3 = 0 leaves no positions hidden from Eve")
    if not r < e3 * (1.0 - e1):
        bad(f"rate {r} is not below eps3*(1-eps1) = {e3 * (1 - e1)}")
    if not r < 0.5 * (e1 * e2 + e3 * (1.0 - e1)):
        bad(f"rate {r} is not below (eps1*eps2 + eps3*(1-eps1))/2")
    if not r <= e1 - 2.0 * delta + 1e-12:
        bad(f"rate {r} exceeds eps1 - 2*delta = {e1 - 2 * delta}")
    if not 0.0 < config.alpha < 1.0 or not 0.0 < delta < 1.0:
        bad("alpha and delta must lie in (0, 1)")
    if not 0.0 < config.delta_tilde < r:
        bad("delta_tilde must lie in (0, r)")
    if not 0.0 < config.delta_bar < config.alpha * (e3 - delta):
        bad("delta_bar must lie in (0, alpha*(eps3 - delta))")
    if config.max_resends < 0:
        bad("max_resends must be non-negative")

    beta = r / e3
    if not beta < 1.0 - e1:
        bad(f"beta = r/eps3 = {beta} must be below 1 - eps1 = {1 - e1}")
    if beta + config.alpha > 1.0:
        bad("beta + alpha exceeds 1")

    n_alpha = _floor(config.alpha * n)
    n_beta = _floor(beta * n)
    k = _floor(n * (r - config.delta_tilde))
    f_out = _floor((config.alpha * (e3 - delta) - config.delta_bar) * n)
    min_erased, min_nonerased = typicality_thresholds(n, e1, delta)

    if k < 1:
        bad("string length k = floor(n(r - delta_tilde)) is zero")
    if f_out < 1 or n_alpha < f_out:
        bad("shared-bit hash output length is zero; increase n or alpha")
    if n_alpha + n_beta > min_nonerased:
        bad("not enough guaranteed clean positions for L_alpha and G")

    if beta <= e1 and beta <= 0.5:
        case_id, overlap = 1, 0
        if n_beta > min_erased:
            bad("case 1 needs n_beta erased positions but typicality guarantees fewer")
        if n_beta < n * r - 1e-9:
            bad("case 1 set B would hold fewer than n*r erasures")
    elif 2 * n_beta + n_alpha <= n:
        case_id, overlap = 2, 0
        if n - min_nonerased > n_beta:
            bad("case 2 needs every erased position in B but typicality allows more than n_beta")
    else:
        case_id, overlap = 3, 2 * n_beta + n_alpha - n

    return ProtocolDimensions(
        n_alpha=n_alpha,
        n_beta=n_beta,
        k=k,
        f_alpha_out=f_out,
        case_id=case_id,
        overlap=overlap,
        beta=beta,
        min_erased=min_erased,
        min_nonerased=min_nonerased,
    )


class Typicality(enum.Enum):
    PROCEED = "proceed"
    ABORT = "abort"


def check_typicality(y: np.ndarray, config: ProtocolConfig) -> Typicality:
    min_e, min_ne = typicality_thresholds(y.size, config.eps.eps1, config.delta)
    n_erased = int(np.count_nonzero(y == ERASURE))
    if n_erased < min_e or y.size - n_erased < min_ne:
        return Typicality.ABORT
    return Typicality.PROCEED


# ---------------------------------------------------------------------------
# shared-bit phase
# ---------------------------------------------------------------------------


def bob_shared_bit(
    y: np.ndarray, dims: ProtocolDimensions, rng: np.random.Generator, mask_order: bool = True
) -> tuple[SharedBitMessage, int]:
    clean = np.flatnonzero(y != ERASURE)
    if clean.size < dims.n_alpha:
        raise ProtocolViolation("fewer clean positions than n_alpha; typicality check skipped?")
    l_alpha = np.sort(rng.choice(clean, dims.n_alpha, replace=False))
    f_alpha = sample_linear_hash(dims.n_alpha, dims.f_alpha_out, rng)
    k_alpha = int(apply_hash(f_alpha, y[l_alpha])[0])
    s = int(rng.integers(2)) if mask_order else 0
    return SharedBitMessage(l_alpha, f_alpha, k_alpha ^ s), s


def alice_recover_s(x: np.ndarray, msg: SharedBitMessage) -> int:
    return msg.masked_s ^ int(apply_hash(msg.f_alpha, x[msg.l_alpha])[0])


def phase1_shared_bit(
    x: np.ndarray,
    y: np.ndarray,
    dims: ProtocolDimensions,
    rng_bob: np.random.Generator,
    mask_order: bool = True,
) -> tuple[SharedBitMessage, int, int]:
    """Run both sides of the shared-bit phase; returns ``(msg, s_bob, s_alice)``."""
    msg, s_bob = bob_shared_bit(y, dims, rng_bob, mask_order)
    return msg, s_bob, alice_recover_s(x, msg)


# ---------------------------------------------------------------------------
# set formation and labels
# ---------------------------------------------------------------------------


def form_sets(
    y: np.ndarray, l_alpha: np.ndarray, dims: ProtocolDimensions, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Bob's sets ``(G, B)``, each sorted ascending and of size ``n_beta``."""
    n = y.size
    erased = np.flatnonzero(y == ERASURE)
    clean = np.setdiff1d(np.flatnonzero(y != ERASURE), l_alpha, assume_unique=True)
    if clean.size < dims.n_beta:
        raise ProtocolViolation("clean pool exhausted while forming G")
    g = np.sort(rng.choice(clean, dims.n_beta, replace=False))

    if dims.case_id == 1:
        if erased.size < dims.n_beta:
            raise ProtocolViolation("erased pool exhausted while forming B (case 1)")
        b = rng.choice(erased, dims.n_beta, replace=False)
    elif dims.case_id == 2:
        need = dims.n_beta - erased.size
        fresh = np.setdiff1d(clean, g, assume_unique=True)
        if need < 0 or fresh.size < need:
            raise ProtocolViolation("pool exhausted while forming B (case 2)")
        b = np.concatenate([erased, rng.choice(fresh, need, replace=False)])
    else:
        rest = np.setdiff1d(np.arange(n), np.union1d(g, l_alpha), assume_unique=True)
        if rest.size + dims.overlap != dims.n_beta:
            raise ProtocolViolation("case 3 overlap does not balance |B| with |G|")
        b = np.concatenate([rest, rng.choice(g, dims.overlap, replace=False)])
    return g, np.sort(b)


def assign_labels(g: np.ndarray, b: np.ndarray, c: int, s: int) -> tuple[np.ndarray, np.ndarray]:
    return (g, b) if (c ^ s) == 0 else (b, g)


# ---------------------------------------------------------------------------
# Alice's answer and Bob's decoding
# ---------------------------------------------------------------------------


def alice_respond(
    x: np.ndarray,
    l0: np.ndarray,
    l1: np.ndarray,
    s: int,
    k0: np.ndarray,
    k1: np.ndarray,
    dims: ProtocolDimensions,
    rng: np.random.Generator,
) -> CiphertextMessage:
    if k0.size != dims.k or k1.size != dims.k:
        raise ValueError(f"strings must be {dims.k} bits long")
    if l0.size != l1.size:
        raise ProtocolViolation("label sets differ in size")
    f0 = sample_linear_hash(l0.size, dims.k, rng)
    f1 = sample_linear_hash(l1.size, dims.k, rng)
    pad0 = apply_hash(f0, x[l0])
    pad1 = apply_hash(f1, x[l1])
    first, second = (k0, k1) if s == 0 else (k1, k0)
    return CiphertextMessage(f0, f1, first ^ pad0, second ^ pad1)


def bob_decode(
    y: np.ndarray, l0: np.ndarray, l1: np.ndarray, msg: CiphertextMessage, c: int, s: int
) -> np.ndarray:
    pos = c ^ s
    idx = l0 if pos == 0 else l1
    seen = y[idx]
    if np.any(seen == ERASURE):
        raise ProtocolViolation("Bob's decoding set contains an erased position")
    return msg.ciphertext(pos) ^ apply_hash(msg.hash_at(pos), seen)


# ---------------------------------------------------------------------------
# full run
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AliceView:
    k0: np.ndarray
    k1: np.ndarray
    x: np.ndarray
    private_seed: np.random.SeedSequence
    s: int
    transcript: Transcript


@dataclass(frozen=True, eq=False)
class BobView:
    c: int
    y: np.ndarray
    private_seed: np.random.SeedSequence
    s: int
    g_set: np.ndarray
    b_set: np.ndarray
    transcript: Transcript


@dataclass(frozen=True, eq=False)
class EveView:
    z: np.ndarray
    transcript: Transcript


@dataclass(eq=False)
class ProtocolRun:
    config: ProtocolConfig
    dims: ProtocolDimensions
    transcript: Transcript
    alice: AliceView
    bob: BobView
    eve: EveView
    k_hat: np.ndarray
    resend_count: int

    @property
    def c(self) -> int:
        return self.bob.c

    @property
    def k_c(self) -> np.ndarray:
        return self.alice.k1 if self.bob.c else self.alice.k0

    @property
    def decoded_correctly(self) -> bool:
        return bool(np.array_equal(self.k_hat, self.k_c))


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def child_seed(ss: np.random.SeedSequence, i: int) -> np.random.SeedSequence:
    """Deterministic i-th child (unlike ``spawn``, independent of call history)."""
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (i,))


def run_protocol(
    config: ProtocolConfig,
    k0: np.ndarray,
    k1: np.ndarray,
    c: int,
    rng: np.random.SeedSequence | int | None = None,
) -> ProtocolRun:
    """Execute one run.  ``rng`` defaults to ``config.seed``.

    Alice's private randomness, Bob's private randomness and the channel
    each get their own substream of the run seed.
    """
    dims = derive_dimensions(config)
    k0 = np.asarray(k0, dtype=np.uint8)
    k1 = np.asarray(k1, dtype=np.uint8)
    if c not in (0, 1):
        raise ValueError("choice bit must be 0 or 1")
    if k0.shape != (dims.k,) or k1.shape != (dims.k,):
        raise ValueError(f"strings must be {dims.k} bits long")

    ss = as_seed_sequence(config.seed if rng is None else rng)
    alice_ss, bob_ss, chan_ss = (child_seed(ss, i) for i in range(3))
    alice_rng = np.random.default_rng(alice_ss)
    bob_rng = np.random.default_rng(bob_ss)
    chan_rng = np.random.default_rng(chan_ss)

    transcript = Transcript()
    for attempt in range(config.max_resends + 1):
        x = alice_rng.integers(0, 2, config.n, dtype=np.uint8)
        y, z = transmit(x, config.eps, chan_rng)
        if check_typicality(y, config) is Typicality.PROCEED:
            break
        transcript.append(ResendRequest(attempt))
    else:
        raise ResendLimitExceeded(f"typicality failed {config.max_resends + 1} times in a row")

    msg1, s_bob = bob_shared_bit(y, dims, bob_rng, config.mask_order)
    transcript.append(msg1)
    s_alice = alice_recover_s(x, msg1)
    if s_alice != s_bob:
        raise ProtocolViolation("Alice failed to recover the shared bit")

    g, b = form_sets(y, msg1.l_alpha, dims, bob_rng)
    l0, l1 = assign_labels(g, b, c, s_bob)
    transcript.append(LabelMessage(l0, l1))

    msg2 = alice_respond(x, l0, l1, s_alice, k0, k1, dims, alice_rng)
    transcript.append(msg2)
    k_hat = bob_decode(y, l0, l1, msg2, c, s_bob)

    return ProtocolRun(
        config=config,
        dims=dims,
        transcript=transcript,
        alice=AliceView(k0, k1, x, alice_ss, s_alice, transcript),
        bob=BobView(c, y, bob_ss, s_bob, g, b, transcript),
        eve=EveView(z, transcript),
        k_hat=k_hat,
        resend_count=transcript.resend_count,
    )


def random_inputs(k: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, int]:
    """Uniform, independent ``(K0, K1, C)``."""
    k0 = rng.integers(0, 2, k, dtype=np.uint8)
    k1 = rng.integers(0, 2, k, dtype=np.uint8)
    return k0, k1, int(rng.integers(2))


def run_trial(config: ProtocolConfig, root: np.random.SeedSequence, i: int) -> ProtocolRun:
    """Trial ``i`` under ``root``: fresh uniform inputs, then one run.  Independent of other trials."""
    dims = derive_dimensions(config)
    trial_ss = child_seed(root, i)
    k0, k1, c = random_inputs(dims.k, np.random.default_rng(child_seed(trial_ss, 0)))
    return run_protocol(config, k0, k1, c, rng=child_seed(trial_ss, 1))


def generate_runs(config: ProtocolConfig, trials: int, seed=None, start: int = 0):
    """Yield runs ``start .. start + trials - 1`` with fresh uniform inputs."""
    derive_dimensions(config)
    root = as_seed_sequence(config.seed if seed is None else seed)
    for i in range(start, start + trials):
        yield run_trial(config, root, i)
