"""Semilocal convergence certificates for the inverse-free iteration.

Every certificate reduces to constants (B, eta, K) and the product h. The
inverse-free theorems accept when h = B^2 eta K <= a, where a is the real
root of a^3 + 2a^2 + 3a - 2 = 0; the Newton-Kantorovich baseline accepts when
h = B eta K <= 1/2.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal, Sequence

import numpy as np

from .errors import CertificateFailed, HOutOfRange, PowerIterationStall
from .linalg import (
    as_vector,
    cofactor_matrix,
    invert,
    largest_gram_eigenvalue,
    matrix_norm,
    symmetric_eigenvalues_2x2,
    vector_norm,
)
from .problem import NormKind, ProblemSpec, evaluate_jacobian, evaluate_residual

Theorem = Literal["T1", "T2", "T3", "NK"]


def _cubic(a: float) -> float:
    return ((a + 2.0) * a + 3.0) * a - 2.0


@dataclass(frozen=True)
class KoganConstants:
    a: float
    radius_factor: float


@lru_cache(maxsize=None)
def kogan_constant() -> KoganConstants:
    """Bisect the increasing cubic on [0.4, 0.6] down to width 1e-15."""
    lo, hi = 0.4, 0.6
    while hi - lo > 1e-15:
        mid = 0.5 * (lo + hi)
        if _cubic(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    a = lo if abs(_cubic(lo)) <= abs(_cubic(hi)) else hi
    factor = (2.0 - a - a * a) / (2.0 * (1.0 - a - a * a))
    return KoganConstants(a, factor)


def s_and_n1(h: float) -> tuple[float, float]:
    d = h * h + 2.0 * h + 3.0
    return 2.0 * (1.0 + h) / d, d / 2.0


@dataclass(frozen=True)
class Certificate:
    theorem: Theorem
    B: float
    eta: float
    K: float
    h: float
    passed: bool
    ball_center: np.ndarray
    ball_radius: float
    S: float
    N1: float
    norm: NormKind = "euclidean"
    details: str = ""
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def a(self) -> float:
        return kogan_constant().a

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "passed": self.passed,
            "B": _num(self.B),
            "eta": _num(self.eta),
            "K": _num(self.K),
            "h": _num(self.h),
            "a": _num(self.a),
            "S": _num(self.S),
            "N1": _num(self.N1),
            "ball": {
                "center": [_num(v) for v in self.ball_center],
                "radius": _num(self.ball_radius),
                "norm": self.norm,
            },
            "details": self.details,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _num(v):
    """Round-trip a float through 17 significant digits; non-finite becomes null."""
    v = float(v)
    if not math.isfinite(v):
        return None
    return float(f"{v:.17g}")


def theorem1_certificate(B: float, eta: float, K: float, center, norm: NormKind = "euclidean", details: str = "", theorem: Theorem = "T1", diagnostics=None) -> Certificate:
    """Check h = B^2 eta K <= a and size the existence ball G around ``center``."""
    if min(B, eta, K) < 0:
        raise ValueError("B, eta and K must be non-negative")
    kc = kogan_constant()
    h = B * B * eta * K
    S, N1 = s_and_n1(h)
    passed = h <= kc.a
    verdict = "h <= a" if passed else "h > a"
    text = f"h = {h:.6g} vs a = {kc.a:.6g}: {verdict}"
    return Certificate(
        theorem,
        float(B),
        float(eta),
        float(K),
        h,
        passed,
        as_vector(center),
        kc.radius_factor * B * eta,
        S,
        N1,
        norm,
        f"{details}; {text}" if details else text,
        dict(diagnostics or {}),
    )


def _point(p: ProblemSpec, at) -> np.ndarray:
    return p.initial_point if at is None else as_vector(at)


def theorem2_certificate(p: ProblemSpec, L: float, at=None) -> Certificate:
    """Max-norm certificate: B is the sum of all |cofactors| over |det|.

    The sharper bound, the max row sum of U0, is reported in ``details`` and
    ``diagnostics['B_rowsum']``.
    """
    x0 = _point(p, at)
    n = p.n
    J = evaluate_jacobian(p, x0)
    inv = invert(J)
    delta = abs(inv.determinant)
    cof = np.abs(cofactor_matrix(J))
    B = float(np.sum(cof)) / delta
    # rows of U0 = adj/det are columns of the cofactor matrix
    B_rowsum = float(np.max(np.sum(cof, axis=0))) / delta
    eta = vector_norm(evaluate_residual(p, x0), "max")
    K = n * n * L
    diag = {"determinant": inv.determinant, "B_rowsum": B_rowsum, "L": L}
    details = (
        f"Theorem 2 (max norm): det = {inv.determinant:.6g}, B = sum|A_ik|/|det| = {B:.6g}, "
        f"row-sum bound = {B_rowsum:.6g}, eta = {eta:.6g}, K = n^2 L = {K:.6g}"
    )
    return theorem1_certificate(B, eta, K, x0, "max", details, "T2", diag)


def theorem3_certificate(p: ProblemSpec, L: float, at=None) -> Certificate:
    """Euclidean certificate: B is the spectral norm of U_0 (Frobenius on stall)."""
    x0 = _point(p, at)
    n = p.n
    J = evaluate_jacobian(p, x0)
    U0 = invert(J).inverse
    gram = U0 @ U0.T
    diag = {"gram": gram.tolist(), "L": L}
    try:
        lam = largest_gram_eigenvalue(U0)
        B = math.sqrt(lam)
        bsrc = "sqrt(lambda_max(U0 U0^T))"
        diag["lambda_max"] = lam
    except PowerIterationStall:
        B = matrix_norm(U0, "frobenius")
        bsrc = "Frobenius fallback"
    if n == 2:
        diag["gram_eigenvalues"] = list(symmetric_eigenvalues_2x2(gram))
    eta = vector_norm(evaluate_residual(p, x0), "euclidean")
    K = n * math.sqrt(n) * L
    g = "; ".join(", ".join(f"{v:.6g}" for v in row) for row in gram)
    details = f"Theorem 3 (euclidean): U0 U0^T = [{g}], B = {bsrc} = {B:.6g}, eta = {eta:.6g}, K = n sqrt(n) L = {K:.6g}"
    if "gram_eigenvalues" in diag:
        details += ", eigenvalues = " + ", ".join(f"{v:.6g}" for v in diag["gram_eigenvalues"])
    return theorem1_certificate(B, eta, K, x0, "euclidean", details, "T3", diag)


def problem_theorem1_certificate(p: ProblemSpec, L: float, norm: NormKind | None = None, at=None) -> Certificate:
    """Theorem 1 with induced-norm constants in the problem's own norm."""
    norm = norm or p.options.norm
    x0 = _point(p, at)
    n = p.n
    U0 = invert(evaluate_jacobian(p, x0)).inverse
    B = matrix_norm(U0, "max_row_sum" if norm == "max" else "spectral")
    eta = vector_norm(evaluate_residual(p, x0), norm)
    K = (n * n if norm == "max" else n * math.sqrt(n)) * L
    return theorem1_certificate(B, eta, K, x0, norm, f"Theorem 1 ({norm} norm)", "T1", {"L": L})


def newton_kantorovich_certificate(B0: float, eta0: float, K: float, center, norm: NormKind = "euclidean", details: str = "") -> Certificate:
    """Classical baseline: h0 = B0 eta0 K <= 1/2, ball radius N(h0) eta0."""
    if min(B0, eta0, K) < 0:
        raise ValueError("B0, eta0 and K must be non-negative")
    h = B0 * eta0 * K
    passed = h <= 0.5
    if h == 0.0:
        radius = eta0
    elif passed:
        radius = (1.0 - math.sqrt(max(0.0, 1.0 - 2.0 * h))) / h * eta0
    else:
        radius = math.nan
    S, N1 = s_and_n1(h)
    text = f"h0 = {h:.6g} vs 1/2: {'h0 <= 1/2' if passed else 'h0 > 1/2'}"
    return Certificate(
        "NK", float(B0), float(eta0), float(K), h, passed, as_vector(center), radius, S, N1, norm,
        f"{details}; {text}" if details else text,
    )


def problem_newton_kantorovich_certificate(p: ProblemSpec, L: float, norm: NormKind | None = None, at=None) -> Certificate:
    norm = norm or p.options.norm
    x0 = _point(p, at)
    n = p.n
    G0 = invert(evaluate_jacobian(p, x0)).inverse
    B0 = matrix_norm(G0, "max_row_sum" if norm == "max" else "spectral")
    eta0 = vector_norm(G0 @ evaluate_residual(p, x0), norm)
    K = (n * n if norm == "max" else n * math.sqrt(n)) * L
    return newton_kantorovich_certificate(B0, eta0, K, x0, norm, f"Newton-Kantorovich ({norm} norm)")


def apriori_error_bound(c: Certificate, n: int) -> float:
    """Upper bound on ||x_n - x*|| implied by a passing certificate."""
    if not c.passed:
        raise CertificateFailed(f"{c.theorem} certificate did not pass; no error bound")
    if n < 1:
        raise ValueError("n must be >= 1")
    if c.theorem == "NK":
        return (2.0 * c.h) ** (2**n - 1) * c.eta / 2 ** (n - 1)
    h = c.h
    if h == 0.0:
        return 0.0
    return h * (1.0 + h) / 2.0 * c.S ** (n - 1) / (1.0 - c.S) * (c.N1 * h) ** (2**n - 2) * c.B * c.eta


@dataclass(frozen=True)
class BoundRow:
    k: int
    alpha: float
    beta: float
    A: float
    c: float
    epsilon: float
    q: float
    gamma: float
    N: float
    overflow: bool = False
    underflow: bool = False


@dataclass(frozen=True)
class BoundSequences:
    h: float
    rows: tuple[BoundRow, ...]


def bound_sequences(h: float, k_max: int) -> BoundSequences:
    """Run the alpha/beta/A/c recurrences and their h-scaled companions.

    alpha, beta and A grow doubly exponentially and overflow to inf within
    a few dozen rows; epsilon, q and gamma are therefore carried by scaled
    recurrences that stay finite (epsilon_k = c_{k-1} beta_{k-1} h^(2^(k-1)-1),
    q_k = q_{k-1}^2 + c_{k-1} h epsilon_k).
    """
    a = kogan_constant().a
    if not 0.0 <= h <= a:
        raise HOutOfRange(f"h = {h!r} outside [0, a = {a!r}]")
    if not 1 <= k_max <= 30:
        raise ValueError("k_max must be in 1..30")

    alpha, beta, A, c = 1.0, 0.5, 1.0, 1.0 + h
    eps, beta_s, q = 1.0, 0.5 * h, h
    gamma = eps
    rows = [BoundRow(1, alpha, beta, A, c, eps, q, gamma, 1.0 + 0.5 * (1.0 + q) ** 2)]
    for k in range(2, k_max + 1):
        c_prev = c
        with np.errstate(over="ignore", invalid="ignore"):
            alpha = c_prev * beta
            beta = A * A * beta + 0.5 * alpha * alpha
            A = A * A + alpha * c_prev
        eps = c_prev * beta_s
        q_new = q * q + c_prev * h * eps
        beta_s = q * q * beta_s + 0.5 * h * eps * eps
        q = q_new
        c = c_prev * (1.0 + q)
        gamma += eps
        overflow = not all(math.isfinite(v) for v in (alpha, beta, A))
        underflow = h > 0.0 and (q == 0.0 or eps == 0.0)
        rows.append(BoundRow(k, alpha, beta, A, c, eps, q, gamma, 1.0 + 0.5 * (1.0 + q) ** 2, overflow, underflow))
    return BoundSequences(h, tuple(rows))


@dataclass(frozen=True)
class Ball:
    label: str
    center: np.ndarray
    radius: float
    norm: NormKind = "euclidean"


@dataclass(frozen=True)
class RegionGeometry:
    balls: tuple[Ball, ...]
    lower: np.ndarray
    upper: np.ndarray
    contained: tuple[bool, ...]

    def to_csv(self) -> str:
        n = self.lower.size
        lines = [",".join(["label"] + [f"center_{i + 1}" for i in range(n)] + ["radius", "contained"])]
        for ball, ok in zip(self.balls, self.contained):
            nums = [f"{float(v):.17g}" for v in ball.center] + [f"{ball.radius:.17g}"]
            lines.append(",".join([ball.label] + nums + [str(ok).lower()]))
        return "\n".join(lines) + "\n"


def ball_from_certificate(c: Certificate, label: str) -> Ball:
    return Ball(label, c.ball_center, c.ball_radius, c.norm)


def refined_ball(c: Certificate, x_k, k: int, label: str | None = None) -> Ball:
    """Ball around the k-th iterate with the a-priori radius; it holds x*."""
    return Ball(label or f"G{k}", as_vector(x_k), apriori_error_bound(c, k), c.norm)


def ball_in_box(ball: Ball, lower, upper) -> bool:
    # per-axis extent is exact for max-norm balls and the enclosing cube for euclidean ones
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    return bool(np.all(ball.center - ball.radius >= lower) and np.all(ball.center + ball.radius <= upper))


def region_geometry(items: Sequence[Certificate | Ball], lower, upper) -> RegionGeometry:
    """Label certificate balls G0, G1, ... and flag which ones fit in the box."""
    balls = []
    dim = None
    for i, item in enumerate(items):
        ball = ball_from_certificate(item, f"G{i}") if isinstance(item, Certificate) else item
        if dim is not None and ball.center.size != dim:
            raise ValueError("all balls must share one dimension")
        dim = ball.center.size
        balls.append(ball)
    lower, upper = as_vector(lower), as_vector(upper)
    return RegionGeometry(tuple(balls), lower, upper, tuple(ball_in_box(b, lower, upper) for b in balls))
