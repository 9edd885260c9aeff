"""Empirical privacy and correctness checks over batches of protocol runs.

Each attacker is a fixed, documented strategy that turns one party's view
into a single guessed bit.  Over runs with uniform independent inputs the
guess accuracy should sit at 1/2.  Confidence half-widths are 4 sigma.

Attackers
---------
``alice-c``
    Alice knows ``X`` and ``S``.  She counts ones of ``X`` on each label set,
    calls the set with more ones ``G`` and guesses ``C = S`` if that is
    ``L0``, else ``1 - S``.
``eve-c``
    Eve compares her erasure counts on ``L0 \\ L1`` and ``L1 \\ L0``.  The
    denser side is taken to be ``B``, which fixes her guess of ``C xor S``.
    She guesses ``S`` by evaluating the shared-bit hash on ``Z`` restricted
    to ``L_alpha`` (erased bits filled uniformly).  When the run was made
    with order masking disabled she knows ``S = 0``.
``bob-unselected``
    Bob decrypts the ciphertext he did not select using his own ``Y`` with
    erased bits filled uniformly, and guesses bit 0 of ``K_{1-C}``.
``eve-key``
    Eve decrypts the ciphertext whose label set she saw the fewest erasures
    on (filling uniformly) and guesses bit 0 of the string sent there.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import kernels
from .channel import ERASURE
from .hashing import LinearHash, pack_bits
from .protocol import ProtocolRun, as_seed_sequence, child_seed, typicality_thresholds


class AttackerId(enum.Enum):
    ALICE_GUESSES_C = "alice-c"
    EVE_GUESSES_C = "eve-c"
    BOB_GUESSES_UNSELECTED_BIT = "bob-unselected"
    EVE_GUESSES_KEY_BIT = "eve-key"

    @classmethod
    def parse(cls, value: "str | AttackerId") -> "AttackerId":
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            try:
                return cls[str(value).upper().replace("-", "_")]
            except KeyError:
                raise ValueError(f"unknown attacker {value!r}") from None


@dataclass(frozen=True)
class AdvantageEstimate:
    accuracy: float
    trials: int
    ci_halfwidth: float

    @classmethod
    def from_counts(cls, hits: int, trials: int) -> "AdvantageEstimate":
        if trials <= 0:
            raise ValueError("no trials to estimate from")
        acc = hits / trials
        return cls(acc, trials, 4.0 * math.sqrt(acc * (1.0 - acc) / trials))

    @property
    def consistent_with_half(self) -> bool:
        """True when 1/2 lies within the 4-sigma interval."""
        return abs(self.accuracy - 0.5) <= self.ci_halfwidth

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "trials": self.trials,
            "ci_halfwidth": self.ci_halfwidth,
            "pass": self.consistent_with_half,
        }


# ---------------------------------------------------------------------------
# attack helpers
# ---------------------------------------------------------------------------


def _hash_bit0(h: LinearHash, observed: np.ndarray, rng: np.random.Generator) -> int:
    """First output bit of ``h`` on a trit vector, erasures replaced by coin flips."""
    bits = observed.copy()
    er = bits == ERASURE
    if er.any():
        bits[er] = rng.integers(0, 2, int(er.sum()), dtype=np.uint8)
    return int(kernels.gf2_matvec(h.words[:1], pack_bits(bits))[0])


def _coin_or(value: int, rng: np.random.Generator) -> int:
    """``value`` when it is 0/1, a fair coin when it is -1 (tie)."""
    return int(rng.integers(2)) if value < 0 else value


def _compare(a: int, b: int) -> int:
    """1 if a > b, 0 if a < b, -1 on a tie."""
    return -1 if a == b else int(a > b)


def _sym_diff(run: ProtocolRun) -> tuple[np.ndarray, np.ndarray]:
    lab = run.transcript.labels
    return (
        np.setdiff1d(lab.l0, lab.l1, assume_unique=True),
        np.setdiff1d(lab.l1, lab.l0, assume_unique=True),
    )


def eve_label_feature(run: ProtocolRun) -> int:
    """Eve's coarse feature: 1 if ``L0`` carries more of her erasures than ``L1`` (ties -> 0)."""
    only0, only1 = _sym_diff(run)
    z = run.eve.z
    return int(np.count_nonzero(z[only0] == ERASURE) > np.count_nonzero(z[only1] == ERASURE))


def _alice_c(run: ProtocolRun, rng: np.random.Generator) -> tuple[int, int]:
    lab = run.transcript.labels
    x = run.alice.x
    l0_is_g = _coin_or(_compare(int(x[lab.l0].sum()), int(x[lab.l1].sum())), rng)
    guess = run.alice.s if l0_is_g else 1 - run.alice.s
    return guess, run.c


def _eve_s_guess(run: ProtocolRun, rng: np.random.Generator) -> int:
    if not run.config.mask_order:
        return 0
    sb = run.transcript.shared_bit
    return sb.masked_s ^ _hash_bit0(sb.f_alpha, run.eve.z[sb.l_alpha], rng)


def _eve_c(run: ProtocolRun, rng: np.random.Generator) -> tuple[int, int]:
    only0, only1 = _sym_diff(run)
    z = run.eve.z
    # L0 denser in erasures -> L0 is B -> c xor s == 1
    l0_is_b = _coin_or(
        _compare(int(np.count_nonzero(z[only0] == ERASURE)), int(np.count_nonzero(z[only1] == ERASURE))), rng
    )
    return l0_is_b ^ _eve_s_guess(run, rng), run.c


def _bob_unselected(run: ProtocolRun, rng: np.random.Generator) -> tuple[int, int]:
    lab, ct = run.transcript.labels, run.transcript.ciphertexts
    pos = 1 - (run.bob.c ^ run.bob.s)
    idx = lab.l0 if pos == 0 else lab.l1
    guess = int(ct.ciphertext(pos)[0]) ^ _hash_bit0(ct.hash_at(pos), run.bob.y[idx], rng)
    target = run.alice.k0 if run.c == 1 else run.alice.k1
    return guess, int(target[0])


def _eve_key(run: ProtocolRun, rng: np.random.Generator) -> tuple[int, int]:
    lab, ct = run.transcript.labels, run.transcript.ciphertexts
    z = run.eve.z
    e0 = int(np.count_nonzero(z[lab.l0] == ERASURE))
    e1 = int(np.count_nonzero(z[lab.l1] == ERASURE))
    pos = _coin_or(_compare(e0, e1), rng)  # the side with fewer erasures
    idx = lab.l0 if pos == 0 else lab.l1
    guess = int(ct.ciphertext(pos)[0]) ^ _hash_bit0(ct.hash_at(pos), z[idx], rng)
    # position 0 carries K_S, position 1 carries K_{1-S}
    sent = run.alice.k0 if (pos ^ run.alice.s) == 0 else run.alice.k1
    return guess, int(sent[0])


_STRATEGIES = {
    AttackerId.ALICE_GUESSES_C: _alice_c,
    AttackerId.EVE_GUESSES_C: _eve_c,
    AttackerId.BOB_GUESSES_UNSELECTED_BIT: _bob_unselected,
    AttackerId.EVE_GUESSES_KEY_BIT: _eve_key,
}


def _validate(run: ProtocolRun) -> None:
    k = run.dims.k
    tr = run.transcript
    if tr.labels is None or tr.ciphertexts is None or tr.shared_bit is None:
        raise ValueError("run transcript is incomplete")
    if run.alice.k0.shape != (k,) or run.alice.k1.shape != (k,):
        raise ValueError("run strings do not match the configured key length")
    n = run.config.n
    if run.alice.x.shape != (n,) or run.bob.y.shape != (n,) or run.eve.z.shape != (n,):
        raise ValueError("run views do not match the configured block length")


def attack(run: ProtocolRun, attacker: AttackerId | str, rng: np.random.Generator) -> bool:
    """Run one attacker on one run; True when its guess was right."""
    _validate(run)
    guess, truth = _STRATEGIES[AttackerId.parse(attacker)](run, rng)
    return guess == truth


def attacker_rng(seed, attacker: AttackerId, index: int) -> np.random.Generator:
    """Coin-flip stream for ``attacker`` on trial ``index``; independent of evaluation order."""
    root = as_seed_sequence(seed)
    slot = list(AttackerId).index(attacker)
    return np.random.default_rng(child_seed(child_seed(root, slot), index))


def score_run(run: ProtocolRun, attackers: Iterable[AttackerId], seed, index: int) -> dict[AttackerId, bool]:
    _validate(run)
    out = {}
    for a in attackers:
        guess, truth = _STRATEGIES[a](run, attacker_rng(seed, a, index))
        out[a] = guess == truth
    return out


def estimate_advantages(
    runs: Iterable[ProtocolRun], attackers: Iterable[AttackerId | str], seed=0
) -> dict[AttackerId, AdvantageEstimate]:
    """Stream ``runs`` once, scoring every attacker on each run.

    Trial ``j`` of the stream uses the coin flips ``attacker_rng(seed, a, j)``.
    """
    ids = [AttackerId.parse(a) for a in attackers]
    hits = dict.fromkeys(ids, 0)
    trials = 0
    for j, run in enumerate(runs):
        for a, ok in score_run(run, ids, seed, j).items():
            hits[a] += ok
        trials += 1
    return {a: AdvantageEstimate.from_counts(hits[a], trials) for a in ids}


def estimate_advantage(runs: Iterable[ProtocolRun], attacker: AttackerId | str, seed=0) -> AdvantageEstimate:
    attacker = AttackerId.parse(attacker)
    return estimate_advantages(runs, [attacker], seed)[attacker]


# ---------------------------------------------------------------------------
# mutual information on coarse features
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MIEstimate:
    mi: float
    bias: float
    n: int


MAX_ALPHABET = 64


def plugin_mi(a, b, size_a: int | None = None, size_b: int | None = None) -> MIEstimate:
    """Plug-in I(A;B) in bits from paired samples over ``{0..size-1}``.

    ``bias`` is the first-order (Miller-Madow) upward bias
    ``(|A|-1)(|B|-1) / (2 N ln 2)``; it is reported, not subtracted.
    """
    a = np.asarray(a, dtype=np.int64).ravel()
    b = np.asarray(b, dtype=np.int64).ravel()
    if a.size == 0:
        raise ValueError("empty sample set")
    if a.size != b.size:
        raise ValueError("sample arrays differ in length")
    size_a = int(a.max()) + 1 if size_a is None else size_a
    size_b = int(b.max()) + 1 if size_b is None else size_b
    if not (1 <= size_a <= MAX_ALPHABET and 1 <= size_b <= MAX_ALPHABET):
        raise ValueError(f"alphabets must have between 1 and {MAX_ALPHABET} symbols")
    if a.min() < 0 or a.max() >= size_a or b.min() < 0 or b.max() >= size_b:
        raise ValueError("sample outside the declared alphabet")
    n = a.size
    joint = np.bincount(a * size_b + b, minlength=size_a * size_b).reshape(size_a, size_b) / n
    pa = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    mi = float(np.sum(joint[nz] * np.log2(joint[nz] / (pa @ pb)[nz])))
    bias = (size_a - 1) * (size_b - 1) / (2.0 * n * math.log(2))
    return MIEstimate(max(mi, 0.0), bias, n)


# ---------------------------------------------------------------------------
# erasure audit and abort statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ErasureAudit:
    bob_erased_in_b: int
    eve_erased_in_b_private: int
    threshold: float

    @property
    def bob_ok(self) -> bool:
        return self.bob_erased_in_b >= self.threshold

    @property
    def eve_ok(self) -> bool:
        return self.eve_erased_in_b_private >= self.threshold


def renyi_erasure_audit(run: ProtocolRun) -> ErasureAudit:
    """Erasure counts on Bob's B set: Bob's own, and Eve's outside ``L0 & L1``."""
    b = run.bob.b_set
    lab = run.transcript.labels
    private = np.setdiff1d(b, np.intersect1d(lab.l0, lab.l1, assume_unique=True), assume_unique=True)
    return ErasureAudit(
        int(np.count_nonzero(run.bob.y[b] == ERASURE)),
        int(np.count_nonzero(run.eve.z[private] == ERASURE)),
        run.config.n * run.config.r,
    )


def chernoff_abort_bound(n: int, eps1: float, delta: float) -> float:
    return math.exp(-n * eps1 * delta**2 / 2) + math.exp(-n * (1.0 - eps1) * delta**2 / 2)


@dataclass(frozen=True)
class AbortStatistics:
    abort_rate: float
    chernoff_bound: float
    attempts: int
    aborts: int


MIN_RUNS = 100


def abort_statistics(runs: Iterable[ProtocolRun]) -> AbortStatistics:
    """Per-attempt abort frequency over a batch that shares one configuration."""
    aborts = attempts = count = 0
    cfg = None
    for run in runs:
        if cfg is None:
            cfg = run.config
        elif (run.config.n, run.config.eps.eps1, run.config.delta) != (cfg.n, cfg.eps.eps1, cfg.delta):
            raise ValueError("runs come from different configurations")
        count += 1
        aborts += run.resend_count
        attempts += run.resend_count + 1
    if count < MIN_RUNS:
        raise ValueError(f"need at least {MIN_RUNS} runs, got {count}")
    return AbortStatistics(aborts / attempts, chernoff_abort_bound(cfg.n, cfg.eps.eps1, cfg.delta), attempts, aborts)


def sample_abort_rate(n: int, eps1: float, delta: float, attempts: int, rng: np.random.Generator) -> AbortStatistics:
    """Typicality-check abort frequency from erasure counts alone, without running the protocol."""
    min_erased, min_clean = typicality_thresholds(n, eps1, delta)
    erased = rng.binomial(n, eps1, size=attempts)
    aborted = int(np.count_nonzero((erased < min_erased) | (n - erased < min_clean)))
    return AbortStatistics(aborted / attempts, chernoff_abort_bound(n, eps1, delta), attempts, aborted)
