"""Hot numeric loops, each with a numba path and a pure-numpy path.

Three kernels dominate runtime:

* ``gf2_matvec`` -- bit-packed matrix-vector product over GF(2); called for
  every universal hash evaluation (several per protocol run, matrices of
  ``k x n_beta`` bits).
* ``lp_vertex_candidates`` -- brute-force vertex enumeration of the small
  linear programs behind the general lower bound.
* ``grid_maxmin`` -- dense grid scan of the same max-min objective, used as
  the oracle for the vertex path.

The numba path is used when numba imports and ``WIRETAP_OT_DISABLE_NUMBA``
is unset (or ``0``/``false``).  Every public function also accepts an
explicit ``backend="numba" | "numpy"`` so tests and the benchmark can
compare both.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

ENV_FLAG = "WIRETAP_OT_DISABLE_NUMBA"


def _disabled_by_env() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() not in ("", "0", "false", "no")


USE_NUMBA = HAVE_NUMBA and not _disabled_by_env()


def default_backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


def _resolve(backend: str | None) -> str:
    if backend is None:
        return default_backend()
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    return backend


def _njit(fn):
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


# ---------------------------------------------------------------------------
# GF(2) matrix-vector product
# ---------------------------------------------------------------------------


def _gf2_matvec_numpy(words: np.ndarray, vec: np.ndarray) -> np.ndarray:
    acc = np.bitwise_xor.reduce(words & vec[None, :], axis=1)
    return (np.bitwise_count(acc) & 1).astype(np.uint8)


@_njit
def _gf2_matvec_numba(words, vec):
    rows, nw = words.shape
    out = np.zeros(rows, dtype=np.uint8)
    s32 = np.uint64(32)
    s16 = np.uint64(16)
    s8 = np.uint64(8)
    s4 = np.uint64(4)
    s2 = np.uint64(2)
    s1 = np.uint64(1)
    for i in range(rows):
        acc = np.uint64(0)
        for w in range(nw):
            acc ^= words[i, w] & vec[w]
        acc ^= acc >> s32
        acc ^= acc >> s16
        acc ^= acc >> s8
        acc ^= acc >> s4
        acc ^= acc >> s2
        acc ^= acc >> s1
        out[i] = np.uint8(acc & s1)
    return out


def gf2_matvec(words: np.ndarray, vec: np.ndarray, backend: str | None = None) -> np.ndarray:
    """Parity of ``row AND vec`` for every row of a packed bit matrix.

    ``words`` has shape ``(rows, n_words)`` and ``vec`` shape ``(n_words,)``,
    both ``uint64`` with identical packing.  Returns a ``uint8`` 0/1 array of
    length ``rows``.
    """
    if words.ndim != 2 or vec.ndim != 1 or words.shape[1] != vec.shape[0]:
        raise ValueError(f"shape mismatch: matrix {words.shape} vs vector {vec.shape}")
    if _resolve(backend) == "numba":
        return _gf2_matvec_numba(words, vec)
    return _gf2_matvec_numpy(words, vec)


# ---------------------------------------------------------------------------
# Vertex enumeration for tiny LPs  (maximize last coordinate s.t. A v <= b)
# ---------------------------------------------------------------------------


def _lp_vertices_numpy(A, b, subsets, tol):
    # A: (R, M, D), b: (R, M), subsets: (S, D) row indices
    out = []
    for r in range(A.shape[0]):
        As = A[r][subsets]  # (S, D, D)
        bs = b[r][subsets]
        det = np.linalg.det(As)
        ok = np.abs(det) > 1e-12
        if not ok.any():
            continue
        v = np.linalg.solve(As[ok], bs[ok][..., None])[..., 0]
        slack = v @ A[r].T - b[r][None, :]
        feas = np.all(slack <= tol, axis=1)
        out.append(v[feas])
    if not out:
        return np.empty((0, A.shape[2]))
    return np.concatenate(out, axis=0)


@_njit
def _lp_vertices_numba(A, b, subsets, tol):
    R, M, D = A.shape
    S = subsets.shape[0]
    out = np.empty((R * S, D))
    count = 0
    mat = np.empty((D, D))
    rhs = np.empty(D)
    for r in range(R):
        for s in range(S):
            for i in range(D):
                row = subsets[s, i]
                for j in range(D):
                    mat[i, j] = A[r, row, j]
                rhs[i] = b[r, row]
            # Gaussian elimination with partial pivoting
            singular = False
            for col in range(D):
                piv = col
                best = abs(mat[col, col])
                for i in range(col + 1, D):
                    if abs(mat[i, col]) > best:
                        best = abs(mat[i, col])
                        piv = i
                if best < 1e-12:
                    singular = True
                    break
                if piv != col:
                    for j in range(D):
                        tmp = mat[col, j]
                        mat[col, j] = mat[piv, j]
                        mat[piv, j] = tmp
                    tmp = rhs[col]
                    rhs[col] = rhs[piv]
                    rhs[piv] = tmp
                for i in range(col + 1, D):
                    f = mat[i, col] / mat[col, col]
                    for j in range(col, D):
                        mat[i, j] -= f * mat[col, j]
                    rhs[i] -= f * rhs[col]
            if singular:
                continue
            for i in range(D - 1, -1, -1):
                acc = rhs[i]
                for j in range(i + 1, D):
                    acc -= mat[i, j] * out[count, j]
                out[count, i] = acc / mat[i, i]
            feasible = True
            for m in range(M):
                lhs = 0.0
                for j in range(D):
                    lhs += A[r, m, j] * out[count, j]
                if lhs - b[r, m] > tol:
                    feasible = False
                    break
            if feasible:
                count += 1
    return out[:count].copy()


def lp_vertex_candidates(
    A: np.ndarray, b: np.ndarray, subsets: np.ndarray, tol: float = 1e-9, backend: str | None = None
) -> np.ndarray:
    """All feasible basic solutions of ``A[r] v <= b[r]`` over a batch of LPs.

    Each row of ``subsets`` names ``D`` constraints taken as tight; the
    resulting square system is solved and kept if it satisfies every
    constraint of its LP within ``tol``.  Candidates from all ``R`` LPs are
    stacked into one ``(K, D)`` array.
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    subsets = np.ascontiguousarray(subsets, dtype=np.int64)
    if _resolve(backend) == "numba":
        return _lp_vertices_numba(A, b, subsets, tol)
    return _lp_vertices_numpy(A, b, subsets, tol)


# ---------------------------------------------------------------------------
# Dense grid for the general lower bound
# ---------------------------------------------------------------------------
#
# Objective at (g1, g2, t1) with t2 = g1 + t1 - g2 and d = g1 - g2:
#   e1 = d*C0
#   e2 = g1*CG + t1*CB
#   e3 = g2*CG + t2*CB + d*C0
#   e4 = (min(g1+g2, 1-eps1)*CG + min(t1+t2, eps1)*CB + d*C0) / 2
# Every expression is monotone in t1 with the sign of CB, so for fixed
# (g1, g2) the best t1 is an endpoint of its feasible interval
# [0, min(eps1 - d, 1 - g1)]; both endpoints are scanned.


def _grid_numpy(c0, cg, cb, eps1, res):
    g = 1.0 - eps1
    ax = g * np.arange(res + 1) / res
    g1, g2 = np.meshgrid(ax, ax, indexing="ij")
    d = g1 - g2
    valid = (g2 <= g1) & (d <= eps1 + 1e-12)
    best = -np.inf
    arg = (0.0, 0.0, 0.0)
    for hi in (False, True):
        t1 = np.maximum(np.minimum(eps1 - d, 1.0 - g1), 0.0) if hi else np.zeros_like(d)
        t2 = d + t1
        val = np.minimum(
            np.minimum(d * c0, g1 * cg + t1 * cb),
            np.minimum(
                g2 * cg + t2 * cb + d * c0,
                0.5 * (np.minimum(g1 + g2, g) * cg + np.minimum(t1 + t2, eps1) * cb + d * c0),
            ),
        )
        val = np.where(valid, val, -np.inf)
        idx = int(np.argmax(val))
        if val.flat[idx] > best:
            best = float(val.flat[idx])
            arg = (float(g1.flat[idx]), float(g2.flat[idx]), float(t1.flat[idx]))
    return best, arg


@_njit
def _grid_numba(c0, cg, cb, eps1, res):
    g = 1.0 - eps1
    best = -np.inf
    b1 = 0.0
    b2 = 0.0
    bt = 0.0
    for i in range(res + 1):
        g1 = g * i / res
        for j in range(i + 1):
            g2 = g * j / res
            d = g1 - g2
            if d > eps1 + 1e-12:
                continue
            t_hi = max(min(eps1 - d, 1.0 - g1), 0.0)
            for k in range(2):
                t1 = t_hi if k == 1 else 0.0
                t2 = d + t1
                v = d * c0
                e = g1 * cg + t1 * cb
                if e < v:
                    v = e
                e = g2 * cg + t2 * cb + d * c0
                if e < v:
                    v = e
                e = 0.5 * (min(g1 + g2, g) * cg + min(t1 + t2, eps1) * cb + d * c0)
                if e < v:
                    v = e
                if v > best:
                    best = v
                    b1 = g1
                    b2 = g2
                    bt = t1
    return best, b1, b2, bt


def grid_maxmin(
    c0: float, cg: float, cb: float, eps1: float, resolution: int, backend: str | None = None
) -> tuple[float, tuple[float, float, float]]:
    """Dense grid maximum of the four-expression min; returns ``(value, (g1, g2, t1))``."""
    if resolution < 1:
        raise ValueError("resolution must be positive")
    if _resolve(backend) == "numba":
        best, g1, g2, t1 = _grid_numba(float(c0), float(cg), float(cb), float(eps1), int(resolution))
        return float(best), (float(g1), float(g2), float(t1))
    return _grid_numpy(float(c0), float(cg), float(cb), float(eps1), int(resolution))
