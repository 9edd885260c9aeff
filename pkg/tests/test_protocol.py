import numpy as np
import pytest

from wiretap_ot import protocol as P
from wiretap_ot.channel import ERASURE, ChannelParams
from wiretap_ot.protocol import (
    InfeasibleConfigError,
    ProtocolConfig,
    ProtocolViolation,
    ResendLimitExceeded,
    Typicality,
    assign_labels,
    bob_decode,
    check_typicality,
    derive_dimensions,
    form_sets,
    generate_runs,
    phase1_shared_bit,
    run_protocol,
    run_trial,
)
from wiretap_ot.transcript import ResendRequest

CASES = {
    1: ProtocolConfig(20000, 0.2, ChannelParams(0.5, 1.0, 0.5)),
    2: ProtocolConfig(20000, 0.2, ChannelParams(0.3, 1.0, 0.5)),
    3: ProtocolConfig(20000, 0.104, ChannelParams(0.45, 1.0, 0.2), delta=0.01),
}


@pytest.mark.parametrize("case_id", [1, 2, 3])
def test_case_selection(case_id):
    dims = derive_dimensions(CASES[case_id])
    assert dims.case_id == case_id
    assert dims.k >= 100
    assert dims.n_alpha + dims.n_beta <= dims.min_nonerased
    assert (dims.overlap > 0) == (case_id == 3)


def test_beta_is_rate_over_eps3():
    dims = derive_dimensions(CASES[1])
    assert dims.n_beta == 8000 and abs(dims.beta - 0.4) < 1e-12


@pytest.mark.parametrize(
    "cfg",
    [
        ProtocolConfig(20000, 0.1, ChannelParams(0.4, 0.2, 0.5)),  # eps2 < eps3
        ProtocolConfig(20000, 0.25, ChannelParams(0.5, 0.9, 0.4)),  # above the bound
        ProtocolConfig(20000, 0.1, ChannelParams(0.5, 0.9, 0.0)),  # eps3 = 0
        ProtocolConfig(20000, 0.1, ChannelParams(0.5, 0.9, 0.4), delta_tilde=0.2),
        ProtocolConfig(50, 0.1, ChannelParams(0.5, 0.9, 0.4)),  # k rounds to nothing
    ],
)
def test_infeasible_configs(cfg):
    with pytest.raises(InfeasibleConfigError):
        derive_dimensions(cfg)


def test_rate_fraction_constructor():
    cfg = ProtocolConfig.from_rate_fraction(20000, 0.8, ChannelParams(0.5, 0.9, 0.4))
    assert abs(cfg.r - 0.16) < 1e-12


def test_typicality():
    cfg = CASES[1]
    assert check_typicality(np.full(20000, ERASURE, np.uint8), cfg) is Typicality.ABORT
    assert check_typicality(np.zeros(20000, np.uint8), cfg) is Typicality.ABORT
    y = np.zeros(20000, np.uint8)
    y[:10000] = ERASURE
    assert check_typicality(y, cfg) is Typicality.PROCEED


def _channel_output(cfg, seed):
    from wiretap_ot.channel import transmit

    rng = np.random.default_rng(seed)
    x = rng.integers(0, 2, cfg.n, dtype=np.uint8)
    y, z = transmit(x, cfg.eps, rng)
    return x, y, z, rng


@pytest.mark.parametrize("mask", [True, False])
def test_shared_bit_agreement(mask):
    cfg = CASES[1]
    dims = derive_dimensions(cfg)
    for seed in range(20):
        x, y, _, rng = _channel_output(cfg, seed)
        msg, s_bob, s_alice = phase1_shared_bit(x, y, dims, rng, mask)
        assert s_bob == s_alice
        assert msg.l_alpha.size == dims.n_alpha and np.all(y[msg.l_alpha] != ERASURE)
        if not mask:
            assert s_bob == 0


@pytest.mark.parametrize("case_id", [1, 2, 3])
def test_set_formation(case_id):
    cfg = CASES[case_id]
    dims = derive_dimensions(cfg)
    x, y, _, rng = _channel_output(cfg, case_id)
    msg, _, _ = phase1_shared_bit(x, y, dims, rng)
    g, b = form_sets(y, msg.l_alpha, dims, rng)
    assert g.size == b.size == dims.n_beta
    assert np.all(np.diff(g) > 0) and np.all(np.diff(b) > 0)
    assert np.all(y[g] != ERASURE)
    assert np.intersect1d(g, msg.l_alpha).size == 0
    assert np.count_nonzero(y[b] == ERASURE) >= cfg.n * cfg.r
    if case_id == 1:
        assert np.all(y[b] == ERASURE)
    elif case_id == 2:
        assert np.all(np.isin(np.flatnonzero(y == ERASURE), b))
        assert np.intersect1d(g, b).size == 0
    else:
        assert np.intersect1d(g, b).size == dims.overlap


@pytest.mark.parametrize("c,s,first_is_g", [(0, 0, True), (1, 1, True), (0, 1, False), (1, 0, False)])
def test_label_rule(c, s, first_is_g):
    g, b = np.array([1, 2]), np.array([3, 4])
    l0, l1 = assign_labels(g, b, c, s)
    assert np.array_equal(l0, g if first_is_g else b)
    assert np.array_equal(l1, b if first_is_g else g)


def test_decode_refuses_erased_positions(small_config):
    run = next(generate_runs(small_config, 1))
    y = run.bob.y.copy()
    lab = run.transcript.labels
    pos = run.c ^ run.bob.s
    y[(lab.l0 if pos == 0 else lab.l1)[0]] = ERASURE
    with pytest.raises(ProtocolViolation):
        bob_decode(y, lab.l0, lab.l1, run.transcript.ciphertexts, run.c, run.bob.s)


@pytest.mark.parametrize("case_id", [1, 2, 3])
def test_runs_decode_exactly(case_id):
    for run in generate_runs(CASES[case_id], 15, seed=case_id):
        assert run.decoded_correctly
        assert run.alice.s == run.bob.s
        assert run.alice.transcript is run.bob.transcript is run.eve.transcript


def test_views_are_consistent(small_config):
    run = next(generate_runs(small_config, 1))
    x, y, z = run.alice.x, run.bob.y, run.eve.z
    assert np.array_equal(y[y != ERASURE], x[y != ERASURE])
    assert np.array_equal(z[z != ERASURE], x[z != ERASURE])
    assert np.array_equal(run.k_hat, run.k_c)


def test_wrong_inputs_rejected(small_config):
    dims = derive_dimensions(small_config)
    k = np.zeros(dims.k, np.uint8)
    with pytest.raises(ValueError):
        run_protocol(small_config, k, k, 2)
    with pytest.raises(ValueError):
        run_protocol(small_config, k[:-1], k, 0)


def test_trial_is_reproducible_in_isolation(small_config):
    runs = list(generate_runs(small_config, 4, seed=3))
    lone = run_trial(small_config, np.random.SeedSequence(3), 2)
    assert lone.transcript.to_jsonl() == runs[2].transcript.to_jsonl()
    assert [r.transcript.digest() for r in generate_runs(small_config, 2, seed=3, start=2)] == [
        r.transcript.digest() for r in runs[2:]
    ]


def test_resend_uses_fresh_block(small_config, monkeypatch):
    seen = []
    real_check = P.check_typicality
    real_transmit = P.transmit

    def spy_transmit(x, params, rng):
        seen.append(x.copy())
        return real_transmit(x, params, rng)

    def flaky_check(y, config):
        return Typicality.ABORT if len(seen) <= 2 else real_check(y, config)

    monkeypatch.setattr(P, "transmit", spy_transmit)
    monkeypatch.setattr(P, "check_typicality", flaky_check)
    run = next(generate_runs(small_config, 1))
    assert run.resend_count == 2
    assert [type(m) for m in run.transcript.messages[:2]] == [ResendRequest, ResendRequest]
    assert len(seen) == 3
    assert not np.array_equal(seen[0], seen[1]) and not np.array_equal(seen[1], seen[2])
    assert np.array_equal(run.alice.x, seen[2])
    assert run.decoded_correctly


def test_resend_limit(small_config, monkeypatch):
    monkeypatch.setattr(P, "check_typicality", lambda y, c: Typicality.ABORT)
    with pytest.raises(ResendLimitExceeded):
        next(generate_runs(small_config, 1))
