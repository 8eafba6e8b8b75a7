"""Small dense linear algebra: LU inversion, cofactors and norms.

Vectors and matrices are plain float64 numpy arrays, frozen (read-only)
after construction by :func:`as_vector` / :func:`as_matrix`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import PowerIterationStall, SingularMatrix

SINGULAR_RTOL = 1e-14
POWER_TOL = 1e-12
POWER_MAX_ITER = 10_000

MatrixNormKind = Literal["spectral", "frobenius", "max_row_sum"]
VectorNormKind = Literal["max", "euclidean"]


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def as_vector(values) -> np.ndarray:
    v = np.array(values, dtype=float).reshape(-1)
    if v.size == 0:
        raise ValueError("vector must have dimension >= 1")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    return _freeze(v)


def as_matrix(values) -> np.ndarray:
    m = np.array(values, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise ValueError(f"expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    return _freeze(m)


@dataclass(frozen=True)
class LUFactors:
    lu: np.ndarray
    perm: np.ndarray
    sign: float

    @property
    def determinant(self) -> float:
        return self.sign * float(np.prod(np.diag(self.lu)))


@dataclass(frozen=True)
class InverseResult:
    inverse: np.ndarray
    determinant: float


def lu_factor(m) -> LUFactors:
    """Doolittle LU with partial pivoting; ``perm`` maps rows of L@U to rows of m."""
    a = np.array(m, dtype=float)
    n = a.shape[0]
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    perm = np.arange(n)
    sign = 1.0
    for col in range(n):
        p = col + int(np.argmax(np.abs(a[col:, col])))
        if abs(a[p, col]) <= SINGULAR_RTOL * scale or scale == 0.0:
            raise SingularMatrix(
                f"pivot {a[p, col]:.3e} in column {col} below {SINGULAR_RTOL:g} x max entry {scale:.3e}"
            )
        if p != col:
            a[[col, p]] = a[[p, col]]
            perm[[col, p]] = perm[[p, col]]
            sign = -sign
        a[col + 1:, col] /= a[col, col]
        a[col + 1:, col + 1:] -= np.outer(a[col + 1:, col], a[col, col + 1:])
    return LUFactors(_freeze(a), _freeze(perm), sign)


def lu_solve(factors: LUFactors, b) -> np.ndarray:
    lu, perm = factors.lu, factors.perm
    y = np.array(b, dtype=float)[perm]
    n = lu.shape[0]
    for i in range(1, n):
        y[i:] -= lu[i:, i - 1] * y[i - 1]
    for i in range(n - 1, -1, -1):
        y[i] /= lu[i, i]
        y[:i] -= lu[:i, i] * y[i]
    return y


def invert(m) -> InverseResult:
    """Invert ``m`` through one LU factorization; also returns det(m)."""
    m = as_matrix(m)
    f = lu_factor(m)
    n = m.shape[0]
    inv = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        with np.errstate(over="ignore", invalid="ignore"):
            inv[:, j] = lu_solve(f, e)
    if not np.all(np.isfinite(inv)):
        raise SingularMatrix("inverse overflows float64")
    return InverseResult(_freeze(inv), f.determinant)


def _det_expansion(a: np.ndarray) -> float:
    n = a.shape[0]
    if n == 0:
        return 1.0
    if n == 1:
        return float(a[0, 0])
    if n == 2:
        return float(a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0])
    total = 0.0
    for j in range(n):
        if a[0, j] != 0.0:
            sub = np.delete(a[1:], j, axis=1)
            total += (-1) ** j * a[0, j] * _det_expansion(sub)
    return total


def determinant(m) -> float:
    m = as_matrix(m)
    if m.shape[0] <= 4:
        return _det_expansion(m)
    try:
        return lu_factor(m).determinant
    except SingularMatrix:
        return 0.0


def cofactor(m, i: int, k: int) -> float:
    """Signed (i, k) cofactor of ``m``, zero-based indices.

    Minor expansion for n <= 4; larger matrices go through the adjugate
    relation cofactor = det * inverse[k, i].
    """
    m = as_matrix(m)
    n = m.shape[0]
    if not (0 <= i < n and 0 <= k < n):
        raise IndexError(f"cofactor index ({i}, {k}) out of range for n={n}")
    if n == 1:
        return 1.0
    if n <= 4:
        minor = np.delete(np.delete(m, i, axis=0), k, axis=1)
        return (-1) ** (i + k) * _det_expansion(minor)
    r = invert(m)
    return r.determinant * float(r.inverse[k, i])


def cofactor_matrix(m) -> np.ndarray:
    m = as_matrix(m)
    n = m.shape[0]
    return _freeze(np.array([[cofactor(m, i, k) for k in range(n)] for i in range(n)]))


def symmetric_eigenvalues_2x2(g) -> tuple[float, float]:
    """Both eigenvalues (largest first) of a symmetric 2x2 matrix, via the quadratic."""
    a, b, d = float(g[0][0]), float(g[0][1]), float(g[1][1])
    mid = 0.5 * (a + d)
    rad = math.hypot(0.5 * (a - d), b)
    return mid + rad, mid - rad


def _power_iteration(g: np.ndarray, seed: np.ndarray) -> float | None:
    scale = float(np.max(np.abs(g)))
    if scale == 0.0:
        return 0.0
    # work on g / max|g| so vector norms neither underflow nor overflow
    lam = _power_iteration_unit(g / scale, seed)
    return None if lam is None else lam * scale


def _power_iteration_unit(g: np.ndarray, seed: np.ndarray) -> float | None:
    v = seed / np.linalg.norm(seed)
    lam = float(v @ g @ v)
    for _ in range(POWER_MAX_ITER):
        w = g @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # seed in the null space of a nonzero matrix
            return None
        v = w / nw
        lam_new = float(v @ g @ v)
        if abs(lam_new - lam) <= POWER_TOL * abs(lam_new):
            return lam_new
        lam = lam_new
    return None


def largest_gram_eigenvalue(m) -> float:
    """Largest eigenvalue of m @ m.T (closed form for n <= 2, power iteration otherwise)."""
    m = as_matrix(m)
    n = m.shape[0]
    g = m @ m.T
    if n == 1:
        return float(g[0, 0])
    if n == 2:
        return max(symmetric_eigenvalues_2x2(g)[0], 0.0)
    # lambda_max >= max g_ii, so anything smaller means the seed missed the top eigenvector
    floor = (1.0 - 1e-9) * float(np.max(np.diag(g)))
    lam = _power_iteration(g, np.ones(n))
    if lam is None or lam < floor:
        rng = np.random.default_rng(12345)
        lam = _power_iteration(g, rng.standard_normal(n))
    if lam is None or lam < floor:
        raise PowerIterationStall(f"power iteration did not settle in {POWER_MAX_ITER} steps")
    return max(lam, 0.0)


def matrix_norm(m, kind: MatrixNormKind = "spectral") -> float:
    m = as_matrix(m)
    if kind == "spectral":
        return math.sqrt(largest_gram_eigenvalue(m))
    if kind == "frobenius":
        return float(np.sqrt(np.sum(m * m)))
    if kind == "max_row_sum":
        return float(np.max(np.sum(np.abs(m), axis=1)))
    raise ValueError(f"unknown matrix norm {kind!r}")


def vector_norm(v, kind: VectorNormKind = "max") -> float:
    v = np.asarray(v, dtype=float)
    if kind == "max":
        return float(np.max(np.abs(v))) if v.size else 0.0
    if kind == "euclidean":
        return float(np.sqrt(np.sum(v * v)))
    raise ValueError(f"unknown vector norm {kind!r}")


def induced_norm(m, kind: VectorNormKind) -> float:
    """Operator norm matching a vector norm: row sums for max, spectral for euclidean."""
    return matrix_norm(m, "max_row_sum" if kind == "max" else "spectral")
