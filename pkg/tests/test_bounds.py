import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wiretap_ot.bounds import (
    GeneralChannelSpec,
    corner_point,
    besbc_constants,
    channel_constants,
    compute_bounds,
    corollary_rate,
    general_lower_bound,
    general_objective,
    grid_lower_bound,
    is_feasible,
    lower_bound_besbc,
    mutual_information,
    upper_bound,
)
from wiretap_ot.channel import ChannelParams

probs = st.floats(0.0, 1.0, allow_nan=False)
TENTHS = [round(0.1 * i, 1) for i in range(1, 10)]


def test_spot_values():
    assert math.isclose(upper_bound(ChannelParams(0.5, 1.0, 0.5)), 0.25, abs_tol=1e-12)
    assert math.isclose(upper_bound(ChannelParams(0.4, 0.9, 0.5)), 0.30, abs_tol=1e-12)
    assert math.isclose(upper_bound(ChannelParams(0.5, 0.9, 0.4)), 0.20, abs_tol=1e-12)


def test_upper_bound_terms():
    # each of the three terms can be the binding one
    assert upper_bound(ChannelParams(0.9, 1.0, 0.9)) == pytest.approx(0.09)  # eps3(1-eps1)
    assert upper_bound(ChannelParams(0.1, 1.0, 1.0)) == pytest.approx(0.1)  # eps1
    assert upper_bound(ChannelParams(0.4, 0.2, 0.5)) == pytest.approx(0.19)  # half-sum


def test_lower_meets_upper_when_eps2_ge_eps3():
    for e1, e3 in itertools.product(TENTHS, TENTHS):
        for e2 in [v for v in TENTHS + [1.0] if v >= e3]:
            p = ChannelParams(e1, e2, e3)
            assert lower_bound_besbc(p) == upper_bound(p)


def test_lower_not_applicable_when_eps2_lt_eps3():
    assert lower_bound_besbc(ChannelParams(0.4, 0.2, 0.5)) is None


def test_corollary_branches():
    assert corollary_rate(ChannelParams(0.4, 0.2, 0.5)) == pytest.approx(0.18, abs=1e-15)
    assert corollary_rate(ChannelParams(0.6, 0.2, 0.5)) == pytest.approx(0.08, abs=1e-15)
    p = ChannelParams(0.4, 0.9, 0.5)
    assert corollary_rate(p) == pytest.approx(upper_bound(p), abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(probs, probs, probs)
def test_ordering_of_bounds(e1, e2, e3):
    p = ChannelParams(e1, e2, e3)
    rb = compute_bounds(p)
    assert rb.corollary <= rb.upper + 1e-12
    assert rb.corollary <= rb.lower_t3 + 1e-12
    assert rb.lower_t3 <= rb.upper + 1e-12
    assert rb.gap >= -1e-12
    if e2 >= e3:
        assert rb.lower_t3 == pytest.approx(rb.upper, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(probs, probs, probs)
def test_corner_point_gives_the_corollary(e1, e2, e3):
    p = ChannelParams(e1, e2, e3)
    corner = corner_point(e1)
    assert is_feasible(*corner, e1)
    assert general_objective(*corner, besbc_constants(p), e1) == pytest.approx(corollary_rate(p), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(probs, probs, probs)
def test_argmax_is_feasible_and_attains_the_rate(e1, e2, e3):
    p = ChannelParams(e1, e2, e3)
    c = besbc_constants(p)
    res = general_lower_bound(c, e1, grid_resolution=None)
    assert is_feasible(*res.argmax, e1)
    assert general_objective(*res.argmax, c, e1) == pytest.approx(res.rate, abs=1e-9)


def test_optimum_beats_corner_off_the_diagonal():
    # (0.5, 0, 1): gamma1 = 1/2, gamma2 = 1/4, tau1 = 0 reaches 1/4 while every corner gives 0
    p = ChannelParams(0.5, 0.0, 1.0)
    res = general_lower_bound(besbc_constants(p), 0.5)
    assert res.rate == pytest.approx(0.25, abs=1e-12)
    assert corollary_rate(p) == 0.0
    assert general_objective(0.5, 0.25, 0.0, 0.25, besbc_constants(p), 0.5) == pytest.approx(0.25)


def test_vertex_enumeration_against_brute_force(rng):
    # random constants (including C_B > 0) against a dense 4-D scan
    for _ in range(5):
        c0, cg, cb = rng.uniform(-0.5, 1.0, 3)
        e1 = float(rng.uniform(0.05, 0.95))
        from wiretap_ot.bounds import RateConstants

        consts = RateConstants(c0, 0, 0, 0, 0, cg, cb, cb + c0)
        exact = general_lower_bound(consts, e1, grid_resolution=None).rate
        best = -np.inf
        g = 1 - e1
        for g1 in np.linspace(0, g, 41):
            for g2 in np.linspace(0, g1, 41):
                for t1 in np.linspace(0, e1, 41):
                    t2 = g1 - g2 + t1
                    if is_feasible(g1, g2, t1, t2, e1, tol=0):
                        best = max(best, general_objective(g1, g2, t1, t2, consts, e1))
        assert best <= exact + 1e-9
        assert exact - best < 0.05


@pytest.mark.parametrize("point", [(0.4, 0.2, 0.5), (0.6, 0.2, 0.5), (0.5, 1.0, 0.4), (0.2, 0.7, 0.9)])
def test_grid_never_beats_vertices(point):
    p = ChannelParams(*point)
    c = besbc_constants(p)
    exact = general_lower_bound(c, p.eps1, grid_resolution=1000)
    grid = grid_lower_bound(c, p.eps1, 1000)
    assert grid.rate <= exact.rate + 1e-9
    assert exact.rate - grid.rate < 2e-3


def test_backends_agree():
    for point in [(0.4, 0.2, 0.5), (0.7, 0.1, 0.6), (0.5, 0.5, 0.5)]:
        p = ChannelParams(*point)
        c = besbc_constants(p)
        a = general_lower_bound(c, p.eps1, 200, backend="numpy")
        b = general_lower_bound(c, p.eps1, 200, backend="numba")
        assert a.rate == pytest.approx(b.rate, abs=1e-12)
        assert np.allclose(a.argmax, b.argmax, atol=1e-9)


def test_grid_resolution_validation():
    c = besbc_constants(ChannelParams(0.4, 0.2, 0.5))
    with pytest.raises(ValueError):
        general_lower_bound(c, 0.4, grid_resolution=10)


def test_mutual_information_basics():
    u = np.array([0.5, 0.5])
    assert mutual_information(u, np.eye(2)) == pytest.approx(1.0)
    assert mutual_information(u, np.ones((2, 1))) == 0.0
    bec = np.array([[0.7, 0.0, 0.3], [0.0, 0.7, 0.3]])
    assert mutual_information(u, bec) == pytest.approx(0.7)
    bsc = np.array([[0.9, 0.1], [0.1, 0.9]])
    h = -(0.9 * math.log2(0.9) + 0.1 * math.log2(0.1))
    assert mutual_information(u, bsc) == pytest.approx(1 - h)


def test_besbc_constants():
    c = besbc_constants(ChannelParams(0.4, 0.9, 0.5))
    assert (c.C0, c.C11, c.C12, c.C21, c.C22) == (1.0, 0.0, 1.0, -1.0, 0.0)
    assert c.CG == pytest.approx(0.5)
    assert c.CB == pytest.approx(-0.1)
    assert c.CN == pytest.approx(c.CB + c.C0)


def test_general_spec_validation():
    with pytest.raises(ValueError):
        GeneralChannelSpec(np.eye(2), np.eye(2) * 0.9, np.eye(2), np.eye(2), 0.5, 0.5, 0.5, np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        GeneralChannelSpec(np.eye(2), np.eye(2), np.eye(2), np.eye(2), 0.5, 0.5, 0.5, np.array([0.6, 0.6]))
    with pytest.raises(ValueError):
        GeneralChannelSpec(np.eye(2), np.eye(2), np.eye(2), np.eye(2), 1.5, 0.5, 0.5, np.array([0.5, 0.5]))


def test_general_channel_with_noisy_subchannels():
    # Bob: BSC(0.05) when good, BSC(0.4) when bad; Eve: BSC(0.2) / erased
    def bsc(p):
        return np.array([[1 - p, p], [p, 1 - p]])

    spec = GeneralChannelSpec(bsc(0.05), bsc(0.4), bsc(0.2), np.ones((2, 1)), 0.4, 0.8, 0.3, np.array([0.5, 0.5]))
    c = channel_constants(spec)
    assert c.C0 > 0
    res = general_lower_bound(c, 0.4)
    assert res.rate >= 0
    assert is_feasible(*res.argmax, 0.4)
