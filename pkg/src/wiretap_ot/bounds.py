"""Capacity bounds for wiretapped OT.

* ``upper_bound`` / ``lower_bound_besbc`` -- closed forms for the BESBC; the
  lower bound only holds when ``eps2 >= eps3`` and then equals the upper one.
* ``channel_constants`` + ``general_lower_bound`` -- the max-min lower bound
  for erasure-like broadcast channels built from sub-channel pairs
  ``(W0, W1)`` for Bob and ``(V0, V1)`` for Eve.
* ``corollary_rate`` -- the three-branch closed form obtained by evaluating
  the max-min at the corner points ``g1 = 1 - eps1``,
  ``g1 - g2 = min(eps1, 1 - eps1)``, ``t1 = 0``.

The max-min is solved exactly by enumerating vertices of four small LPs
(one per branch of the two inner ``min`` terms).  A dense grid scan is kept
as an independent cross-check.  Note that in the ``eps2 < eps3`` region
the max-min optimum generally lies off those corners, so it can exceed
``corollary_rate``; ``corollary_rate`` is still a valid achievable rate.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from . import kernels
from .channel import ChannelParams

ROW_TOL = 1e-12


def _besbc_rate(e1: float, e2: float, e3: float) -> float:
    return min(e3 * (1.0 - e1), e1, 0.5 * (e1 * e2 + e3 * (1.0 - e1)))


def upper_bound(params: ChannelParams) -> float:
    return _besbc_rate(*params.astuple())


def lower_bound_besbc(params: ChannelParams) -> float | None:
    """Achievable rate of the BESBC protocol, or ``None`` when ``eps2 < eps3``."""
    e1, e2, e3 = params.astuple()
    if e2 < e3:
        return None
    return _besbc_rate(e1, e2, e3)


def corollary_rate(params: ChannelParams) -> float:
    e1, e2, e3 = params.astuple()
    if e2 >= e3:
        return min(e1, (1.0 - e1) * e3, 0.5 * ((1.0 - e1) * e3 + e1 * e2))
    if e1 <= 0.5:
        return min(e1, (1.0 - 2.0 * e1) * e3 + e1 * e2, 0.5 * ((1.0 - e1) * e3 + e1 * e2))
    return (1.0 - e1) * e2


# ---------------------------------------------------------------------------
# general channels
# ---------------------------------------------------------------------------


def _check_stochastic(name: str, m: np.ndarray, n_inputs: int) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != n_inputs or m.shape[1] < 1:
        raise ValueError(f"{name} must be a {n_inputs} x |output| matrix, got shape {m.shape}")
    if np.any(m < 0) or np.any(np.abs(m.sum(axis=1) - 1.0) > ROW_TOL):
        raise ValueError(f"{name} is not row-stochastic")
    return m


@dataclass(frozen=True, eq=False)
class GeneralChannelSpec:
    """Mixture channels: Bob uses W0 w.p. 1-eps1 and W1 w.p. eps1; Eve's V0/V1
    are selected with the conditional probabilities eps2 / eps3 as in the BESBC."""

    W0: np.ndarray
    W1: np.ndarray
    V0: np.ndarray
    V1: np.ndarray
    eps1: float
    eps2: float
    eps3: float
    P: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.P, dtype=np.float64)
        if P.ndim != 1 or np.any(P < 0) or abs(P.sum() - 1.0) > ROW_TOL:
            raise ValueError("P must be a probability vector")
        object.__setattr__(self, "P", P)
        for name in ("W0", "W1", "V0", "V1"):
            object.__setattr__(self, name, _check_stochastic(name, getattr(self, name), P.size))
        ChannelParams(self.eps1, self.eps2, self.eps3)  # range check

    @classmethod
    def besbc(cls, params: ChannelParams) -> "GeneralChannelSpec":
        ident = np.eye(2)
        const = np.ones((2, 1))
        return cls(ident, const, ident, const, *params.astuple(), P=np.array([0.5, 0.5]))


def mutual_information(p: np.ndarray, W: np.ndarray) -> float:
    """I(X;Y) in bits for input law ``p`` and channel matrix ``W``."""
    p = np.asarray(p, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    joint = p[:, None] * W
    q = p @ W
    mask = joint > 0
    ratio = W[mask] / np.broadcast_to(q, W.shape)[mask]
    return float(np.sum(joint[mask] * np.log2(ratio)))


@dataclass(frozen=True)
class RateConstants:
    C0: float
    C11: float
    C12: float
    C21: float
    C22: float
    CG: float
    CB: float
    CN: float


def channel_constants(spec: GeneralChannelSpec) -> RateConstants:
    iw0 = mutual_information(spec.P, spec.W0)
    iw1 = mutual_information(spec.P, spec.W1)
    iv0 = mutual_information(spec.P, spec.V0)
    iv1 = mutual_information(spec.P, spec.V1)
    c11, c12 = iw0 - iv0, iw0 - iv1
    c21, c22 = iw1 - iv0, iw1 - iv1
    return RateConstants(
        C0=iw0 - iw1,
        C11=c11,
        C12=c12,
        C21=c21,
        C22=c22,
        CG=(1.0 - spec.eps3) * c11 + spec.eps3 * c12,
        CB=(1.0 - spec.eps2) * c21 + spec.eps2 * c22,
        CN=(1.0 - spec.eps2) * c11 + spec.eps2 * c12,
    )


def besbc_constants(params: ChannelParams) -> RateConstants:
    return channel_constants(GeneralChannelSpec.besbc(params))


def general_objective(g1: float, g2: float, t1: float, t2: float, consts: RateConstants, eps1: float) -> float:
    """Min of the four rate expressions at one point (the fourth carries its factor 1/2)."""
    d = g1 - g2
    return min(
        d * consts.C0,
        g1 * consts.CG + t1 * consts.CB,
        g2 * consts.CG + t2 * consts.CB + d * consts.C0,
        0.5 * (min(g1 + g2, 1.0 - eps1) * consts.CG + min(t1 + t2, eps1) * consts.CB + d * consts.C0),
    )


def _project(pts: np.ndarray, eps1: float) -> np.ndarray:
    """Clip solver output onto the feasible set (removes round-off beyond the bounds)."""
    g1 = np.clip(pts[:, 0], 0.0, 1.0 - eps1)
    g2 = np.clip(pts[:, 1], np.maximum(g1 - eps1, 0.0), g1)
    t1 = np.clip(pts[:, 2], 0.0, np.maximum(np.minimum(eps1 - (g1 - g2), 1.0 - g1), 0.0))
    out = np.stack([g1, g2, t1], axis=1)
    out[np.abs(out) < 1e-15] = 0.0
    return out + 0.0


def _objective_many(pts: np.ndarray, consts: RateConstants, eps1: float) -> np.ndarray:
    g1, g2, t1 = pts.T
    d = g1 - g2
    t2 = d + t1
    return np.minimum.reduce(
        [
            d * consts.C0,
            g1 * consts.CG + t1 * consts.CB,
            g2 * consts.CG + t2 * consts.CB + d * consts.C0,
            0.5 * (np.minimum(g1 + g2, 1.0 - eps1) * consts.CG + np.minimum(t1 + t2, eps1) * consts.CB + d * consts.C0),
        ]
    )


def is_feasible(g1: float, g2: float, t1: float, t2: float, eps1: float, tol: float = 1e-9) -> bool:
    return (
        abs((g1 + t1) - (g2 + t2)) <= tol
        and -tol <= g2 <= g1 + tol
        and g1 <= 1.0 - eps1 + tol
        and -tol <= t1 <= eps1 + tol
        and -tol <= t2 <= eps1 + tol
        and g1 + t1 <= 1.0 + tol
    )


def corner_point(eps1: float) -> tuple[float, float, float, float]:
    g1 = 1.0 - eps1
    d = min(eps1, 1.0 - eps1)
    return (g1, g1 - d, 0.0, d)


class GeneralLowerBound(NamedTuple):
    rate: float
    argmax: tuple[float, float, float, float]  # (g1, g2, t1, t2)


@lru_cache(maxsize=None)
def _subsets(m: int, d: int) -> np.ndarray:
    return np.array(list(itertools.combinations(range(m), d)), dtype=np.int64)


def _lp_system(consts: RateConstants, eps1: float) -> tuple[np.ndarray, np.ndarray]:
    """Constraint rows ``A v <= b`` for v = (g1, g2, t1, t), one LP per branch pair."""
    g = 1.0 - eps1
    c0, cg, cb = consts.C0, consts.CG, consts.CB
    shared = [
        ([0, -1, 0, 0], 0.0),  # g2 >= 0
        ([-1, 1, 0, 0], 0.0),  # g2 <= g1
        ([1, 0, 0, 0], g),  # g1 <= 1 - eps1
        ([0, 0, -1, 0], 0.0),  # t1 >= 0
        ([0, 0, 1, 0], eps1),  # t1 <= eps1
        ([1, -1, 1, 0], eps1),  # t2 = g1 - g2 + t1 <= eps1
        ([1, 0, 1, 0], 1.0),  # beta <= 1
        ([-c0, c0, 0, 1], 0.0),  # t <= e1
        ([-cg, 0, -cb, 1], 0.0),  # t <= e2
        ([-(cb + c0), -(cg - cb - c0), -cb, 1], 0.0),  # t <= e3
    ]
    As, bs = [], []
    for a_low in (True, False):
        for t_low in (True, False):
            rows = list(shared)
            rows.append(([1, 1, 0, 0], g) if a_low else ([-1, -1, 0, 0], -g))
            rows.append(([1, -1, 2, 0], eps1) if t_low else ([-1, 1, -2, 0], -eps1))
            # t <= e4 = (A'*CG + T'*CB + d*C0)/2 with A', T' linear or constant per branch
            coef = np.array([c0, -c0, 0.0])
            const = 0.0
            if a_low:
                coef += [cg, cg, 0.0]
            else:
                const += g * cg
            if t_low:
                coef += [cb, -cb, 2 * cb]
            else:
                const += eps1 * cb
            rows.append(([*(-0.5 * coef), 1.0], 0.5 * const))
            As.append([r[0] for r in rows])
            bs.append([r[1] for r in rows])
    return np.array(As, dtype=np.float64), np.array(bs, dtype=np.float64)


def _vertex_optimum(consts: RateConstants, eps1: float, backend: str | None) -> GeneralLowerBound:
    A, b = _lp_system(consts, eps1)
    cands = kernels.lp_vertex_candidates(A, b, _subsets(A.shape[1], A.shape[2]), tol=1e-11, backend=backend)
    if cands.shape[0] == 0:
        raise RuntimeError("max-min feasible set is empty; constraint construction is broken")
    # rank by the objective itself, not the LP's t, so solver slack cannot inflate the rate
    pts = _project(cands[:, :3], eps1)
    vals = _objective_many(pts, consts, eps1)
    best = vals.max()
    top = pts[vals >= best - (1e-13 + 1e-9 * abs(best))]
    # ties: use as many clean positions as possible, then the widest G/B gap, then fewest t1
    key = np.round(top, 9)
    order = np.lexsort((key[:, 2], -(key[:, 0] - key[:, 1]), -key[:, 0]))
    g1, g2, t1 = (float(v) for v in top[order[0]])
    t2 = g1 - g2 + t1
    rate = general_objective(g1, g2, t1, t2, consts, eps1) + 0.0
    return GeneralLowerBound(rate, (g1, g2, t1, t2))


def general_lower_bound(
    consts: RateConstants,
    eps1: float,
    grid_resolution: int | None = 1000,
    backend: str | None = None,
) -> GeneralLowerBound:
    """Maximize the min of the four rate expressions over the feasible polytope.

    The exact optimum comes from LP vertex enumeration.  When
    ``grid_resolution`` is given (>= 100), a dense grid scan with that many
    steps per axis is run as a cross-check; it can never beat the exact
    optimum, and a violation raises ``RuntimeError``.
    """
    if not np.all(np.isfinite([consts.C0, consts.CG, consts.CB])):
        raise ValueError("rate constants must be finite")
    if not 0.0 <= eps1 <= 1.0:
        raise ValueError("eps1 must be a probability")
    result = _vertex_optimum(consts, eps1, backend)
    if grid_resolution is not None:
        if grid_resolution < 100:
            raise ValueError("grid_resolution must be at least 100")
        grid_val, _ = kernels.grid_maxmin(consts.C0, consts.CG, consts.CB, eps1, grid_resolution, backend)
        if grid_val > result.rate + 1e-9:
            raise RuntimeError(f"grid value {grid_val} beats vertex optimum {result.rate}")
    return result


def grid_lower_bound(
    consts: RateConstants, eps1: float, grid_resolution: int = 1000, backend: str | None = None
) -> GeneralLowerBound:
    """Dense-grid estimate of the same max-min (accuracy about 1/grid_resolution)."""
    val, (g1, g2, t1) = kernels.grid_maxmin(consts.C0, consts.CG, consts.CB, eps1, grid_resolution, backend)
    return GeneralLowerBound(val, (g1, g2, t1, g1 - g2 + t1))


@dataclass(frozen=True)
class RateBounds:
    upper: float
    lower_t2: float | None
    lower_t3: float
    argmax: tuple[float, float, float, float]
    corollary: float

    @property
    def best_lower(self) -> float:
        return max(self.lower_t3, self.corollary, self.lower_t2 if self.lower_t2 is not None else 0.0)

    @property
    def gap(self) -> float:
        return self.upper - self.best_lower


def compute_bounds(params: ChannelParams, grid_resolution: int | None = None, backend: str | None = None) -> RateBounds:
    gl = general_lower_bound(besbc_constants(params), params.eps1, grid_resolution, backend)
    return RateBounds(
        upper=upper_bound(params),
        lower_t2=lower_bound_besbc(params),
        lower_t3=gl.rate,
        argmax=gl.argmax,
        corollary=corollary_rate(params),
    )
