"""Chebyshev approximants to reciprocal-type targets.

Three targets are supported, all normalized so their value at the inner edge
of the validity domain is 3/4:

``scaled_inverse``  (3/4) delta / x            on delta <= |x| <= 1   (odd)
``ff_inverse``      (3/4) d_ff / (1 - x)        on -1 <= x <= 1 - d_ff,
                    with d_ff = 2 gap / r       (no parity)
``sqrt_inverse``    (3/4) sqrt(delta / x)       on delta <= x <= 1     (even)

Each is fitted by Chebyshev interpolation of a smoothed version of the target:
the singular factor is multiplied by ``W(y)**2`` where
``W(y) = (erf(k(y - c)) + erf(k(y + c))) / 2`` and ``c = 2 delta / 3``.  ``W`` is
odd, so ``W**2`` is even, vanishes at 0 and is within ``erfc(k (delta - c))``
of 1 outside the exclusion zone.  The smoothed target is bounded by 1 for
every ``k`` because ``W < 1/2`` below ``c``.  A degree-``d`` candidate is the
truncation of the interpolant at ``2d`` Lobatto points, and the minimal degree
is found by a doubling-then-bisection search against a dense sup-norm check.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dct
from scipy.special import erf, erfcinv

from .errors import DomainError, NormalizationError, ParameterError, ResourceCapError
from .operator_core import check_hermitian

MAX_DEGREE = 1 << 18
BOUND_SLACK = 1e-9
WINDOW_CENTER = 2.0 / 3.0
PARITIES = ("odd", "even", "none")
KINDS = ("scaled_inverse", "ff_inverse", "sqrt_inverse")


@dataclass
class ChebyshevPolynomial:
    coeffs: np.ndarray
    parity: str = "none"
    domain_note: dict = field(default_factory=dict)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float).ravel()
        if c.size == 0:
            c = np.zeros(1)
        if self.parity not in PARITIES:
            raise ValueError(f"parity must be one of {PARITIES}")
        if self.parity == "odd":
            c[0::2] = 0.0
        elif self.parity == "even":
            c[1::2] = 0.0
        self.coeffs = c

    @property
    def degree(self) -> int:
        nz = np.flatnonzero(self.coeffs)
        return int(nz[-1]) if nz.size else 0

    def __call__(self, x):
        return eval_scalar(self, x)

    def max_abs(self, grid_points: int = 10_000) -> float:
        _, y = _lobatto_values(self.coeffs, max(grid_points, 8 * self.degree))
        return float(np.max(np.abs(y)))

    def to_dict(self) -> dict:
        return {
            "coeffs": [float(c) for c in self.coeffs[: self.degree + 1]],
            "degree": self.degree,
            "parity": self.parity,
            "target": self.domain_note,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d) -> "ChebyshevPolynomial":
        return cls(np.asarray(d["coeffs"], dtype=float), d.get("parity", "none"), dict(d.get("target", {})))

    @classmethod
    def from_json(cls, s: str) -> "ChebyshevPolynomial":
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True)
class ApproxTarget:
    kind: str
    delta: float | None = None
    r: int | None = None
    gap: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown target kind {self.kind!r}")
        if self.kind == "ff_inverse":
            if self.r is None or self.gap is None:
                raise ParameterError("ff_inverse needs r and gap")
            if not 0 < self.gap <= self.r:
                raise ParameterError(f"gap must lie in (0, r], got {self.gap}")
        elif self.delta is None or not 0 < self.delta <= 1:
            raise ParameterError(f"delta must lie in (0, 1], got {self.delta}")

    @property
    def edge(self) -> float:
        """Width of the excluded region next to the singularity."""
        if self.kind == "ff_inverse":
            return 2.0 * self.gap / self.r
        return self.delta

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        e = self.edge
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.kind == "scaled_inverse":
                return 0.75 * e / x
            if self.kind == "ff_inverse":
                return 0.75 * e / (1.0 - x)
            return 0.75 * np.sqrt(e / x)

    def in_domain(self, x):
        x = np.asarray(x, dtype=float)
        e = self.edge
        if self.kind == "scaled_inverse":
            return np.abs(x) >= e
        if self.kind == "ff_inverse":
            return x <= 1.0 - e
        return x >= e

    def intervals(self) -> list[tuple[float, float]]:
        e = self.edge
        if self.kind == "scaled_inverse":
            return [(-1.0, -e), (e, 1.0)]
        if self.kind == "ff_inverse":
            return [(-1.0, 1.0 - e)]
        return [(e, 1.0)]

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        for k in ("delta", "r", "gap"):
            v = getattr(self, k)
            if v is not None:
                d[k] = v
        return d


# ----------------------------------------------------------------------------
# evaluation


def _clenshaw(c: np.ndarray, x):
    b1 = np.zeros_like(x)
    b2 = np.zeros_like(x)
    for ck in c[:0:-1]:
        b1, b2 = 2.0 * x * b1 - b2 + ck, b1
    return x * b1 - b2 + c[0]


def eval_scalar(p: ChebyshevPolynomial, x):
    """``sum_k c_k T_k(x)`` by the Clenshaw recurrence; ``x`` in [-1, 1]."""
    xa = np.asarray(x, dtype=float)
    if np.any(np.abs(xa) > 1.0 + 1e-12):
        raise DomainError("Chebyshev polynomials are evaluated on [-1, 1] only")
    xa = np.clip(xa, -1.0, 1.0)
    c = p.coeffs[: p.degree + 1]
    y = _clenshaw(c, xa)
    return float(y) if np.ndim(x) == 0 else y


def eval_matrix(p: ChebyshevPolynomial, A) -> np.ndarray:
    """``p(A) = V p(Lambda) V^dag`` for Hermitian ``A`` with spectrum in [-1, 1]."""
    A = np.asarray(A, dtype=complex)
    check_hermitian(A)
    w, V = np.linalg.eigh(0.5 * (A + A.conj().T))
    if np.any(np.abs(w) > 1.0 + 1e-10):
        raise NormalizationError(
            f"spectrum reaches {np.max(np.abs(w)):.12g}; normalize the matrix into [-1, 1]"
        )
    vals = eval_scalar(p, np.clip(w, -1.0, 1.0))
    return (V * vals) @ V.conj().T


def clenshaw_matrix(p: ChebyshevPolynomial, A) -> np.ndarray:
    """Matrix Clenshaw recurrence, independent of any eigendecomposition."""
    A = np.asarray(A, dtype=complex)
    eye = np.eye(A.shape[0])
    c = p.coeffs[: p.degree + 1]
    b1 = np.zeros_like(A)
    b2 = np.zeros_like(A)
    for ck in c[:0:-1]:
        b1, b2 = 2.0 * A @ b1 - b2 + ck * eye, b1
    return A @ b1 - b2 + c[0] * eye


def _lobatto_values(c: np.ndarray, M: int):
    """Values of ``sum c_k T_k`` at ``cos(pi j / M)``, j = 0..M, via a DCT-I."""
    M = max(int(M), len(c) - 1, 1)
    a = np.zeros(M + 1)
    a[: len(c)] = c
    a[1:-1] *= 0.5
    x = np.cos(np.pi * np.arange(M + 1) / M)
    return x, dct(a, type=1)


def _lobatto_interpolate(f, d: int) -> np.ndarray:
    """Chebyshev coefficients of the degree-``d`` interpolant at Lobatto points."""
    if d == 0:
        return np.array([float(f(np.array([0.0]))[0])])
    x = np.cos(np.pi * np.arange(d + 1) / d)
    c = dct(f(x), type=1) / d
    c[0] *= 0.5
    c[-1] *= 0.5
    return c


def sup_error(p: ChebyshevPolynomial, target: ApproxTarget, grid_points: int = 10_000) -> float:
    """Max ``|p - target|`` over a uniform grid on the target's validity domain."""
    if grid_points < 1000:
        raise ParameterError("grid_points must be at least 1000")
    ivs = target.intervals()
    total = sum(b - a for a, b in ivs)
    worst = 0.0
    for a, b in ivs:
        # a domain of zero width (delta = 1) collapses to its endpoints
        k = max(2, int(round(grid_points * (b - a) / total))) if total > 0 else 2
        x = np.linspace(a, b, k)
        worst = max(worst, float(np.max(np.abs(eval_scalar(p, x) - target(x)))))
    return worst


# ----------------------------------------------------------------------------
# smoothed targets and the degree search


def _window_sq(y, edge: float, share: float):
    # 1 - W**2 <= 2 erfc(s) outside the exclusion zone, and the targets are <= 3/4
    s = float(erfcinv(share / 1.5))
    c = WINDOW_CENTER * edge
    k = s / (edge - c)
    w = 0.5 * (erf(k * (y - c)) + erf(k * (y + c)))
    return w * w


def _smoothed(target: ApproxTarget, share: float):
    e = target.edge

    if target.kind == "scaled_inverse":
        def f(x):
            safe = np.where(x == 0, 1.0, x)
            return np.where(x == 0, 0.0, 0.75 * e * _window_sq(x, e, share) / safe)
    elif target.kind == "ff_inverse":
        def f(x):
            y = 1.0 - x
            safe = np.where(y == 0, 1.0, y)
            return np.where(y == 0, 0.0, 0.75 * e * _window_sq(y, e, share) / safe)
    else:
        def f(x):
            ax = np.abs(x)
            safe = np.where(ax == 0, 1.0, ax)
            return np.where(ax == 0, 0.0, 0.75 * np.sqrt(e) * _window_sq(x, e, share) / np.sqrt(safe))
    return f


def _check(c, target: ApproxTarget, tol: float, grid_points: int, pin) -> bool:
    d = len(c) - 1
    x, y = _lobatto_values(c, max(grid_points, 8 * d))
    if np.max(np.abs(y)) > 1.0:
        return False
    mask = target.in_domain(x)
    if np.max(np.abs(y[mask] - target(x[mask]))) > tol:
        return False
    # inner edges of the domain are not grid points in general
    edges = np.array([b for a, b in target.intervals()] + [a for a, b in target.intervals()])
    if np.max(np.abs(_clenshaw(c, edges) - target(edges))) > tol:
        return False
    # the excluded ground-state eigenvalue must map to (nearly) zero
    if pin is not None and abs(_clenshaw(c, np.array([pin]))[0]) > tol:
        return False
    return True


def _degree_of(j: int, parity: str) -> int:
    return {"odd": 2 * j + 1, "even": 2 * j}.get(parity, j)


def _minimal_fit(target: ApproxTarget, tol: float, parity: str, grid_points: int = 10_000,
                 pin: float | None = None, max_degree: int = MAX_DEGREE) -> np.ndarray:
    f = _smoothed(target, tol / 2.0)

    def attempt(j):
        d = _degree_of(j, parity)
        if d > max_degree:
            raise ResourceCapError(
                f"no admissible polynomial up to degree {max_degree} for {target.to_dict()} "
                f"at tolerance {tol:.3g}"
            )
        # truncating a higher-degree interpolant is close to the best
        # approximation and makes the pass/fail boundary monotone in d
        c = _lobatto_interpolate(f, max(2 * d, 64))[: d + 1].copy()
        if parity == "odd":
            c[0::2] = 0.0
        elif parity == "even":
            c[1::2] = 0.0
        return c if _check(c, target, tol, grid_points, pin) else None

    j = 1
    found = attempt(j)
    while found is None:
        lo, j = j, 2 * j
        found = attempt(j)
    hi = j
    lo = hi // 2 if hi > 1 else 0
    best = found
    while hi - lo > 1:
        mid = (lo + hi) // 2
        c = attempt(mid)
        if c is None:
            lo = mid
        else:
            hi, best = mid, c
    return best


def _check_unit(name, v, upper=0.5):
    if not 0 < v <= upper:
        raise ParameterError(f"{name} must lie in (0, {upper}], got {v}")


def fit_inverse(delta: float, eps: float, grid_points: int = 10_000) -> ChebyshevPolynomial:
    """Odd approximant to ``(3/4) delta / x``; ``delta`` may be anywhere in (0, 1]."""
    _check_unit("delta", delta, 1.0)
    _check_unit("eps", eps, 1.0)
    target = ApproxTarget("scaled_inverse", delta=delta)
    c = _minimal_fit(target, eps, "odd", grid_points)
    return ChebyshevPolynomial(c, "odd", {**target.to_dict(), "eps": eps})


def inverse_poly(delta: float, eps: float) -> ChebyshevPolynomial:
    """Minimal-degree odd polynomial with ``|p - (3/4) delta/x| <= eps`` for
    ``delta <= |x| <= 1`` and ``|p| <= 1`` on [-1, 1]."""
    _check_unit("delta", delta)
    _check_unit("eps", eps)
    return fit_inverse(delta, eps)


def ff_normalization(gap: float) -> float:
    """Scale ``K`` with ``K q(x) ~ 1/E`` at ``x = 1 - 2E/r``."""
    return 4.0 / (3.0 * gap)


def ff_inverse_poly(r: int, gap: float, eps: float) -> ChebyshevPolynomial:
    """Polynomial ``q`` with ``K q(1 - 2E/r)`` within ``eps`` of ``1/E`` for ``E >= gap``.

    ``K = 4/(3 gap)`` is stored under ``domain_note['K']``.  Equivalently
    ``|q(x) - (2/(r K)) / (1 - x)| <= eps/K`` on ``[-1, 1 - 2 gap/r]``; ``|q(1)|``
    is held to the same tolerance so the ground state is annihilated.
    """
    if r < 1:
        raise ParameterError("r must be a positive integer")
    if not 0 < gap <= r:
        raise ParameterError(f"gap must lie in (0, r], got {gap}")
    _check_unit("eps", eps)
    K = ff_normalization(gap)
    target = ApproxTarget("ff_inverse", r=int(r), gap=float(gap))
    c = _minimal_fit(target, eps / K, "none", pin=1.0)
    return ChebyshevPolynomial(c, "none", {**target.to_dict(), "eps": eps, "K": K})


def sqrt_inverse_poly(delta: float, eps: float) -> ChebyshevPolynomial:
    """Even approximant to ``(3/4) sqrt(delta / x)`` on ``[delta, 1]``.

    ``|p(0)|`` is held to ``eps`` so the kernel of a PSD argument is dropped.
    """
    _check_unit("delta", delta, 1.0)
    _check_unit("eps", eps, 1.0)
    target = ApproxTarget("sqrt_inverse", delta=delta)
    c = _minimal_fit(target, eps, "even", pin=0.0)
    return ChebyshevPolynomial(c, "even", {**target.to_dict(), "eps": eps})


def chebyshev_basis(k: int) -> ChebyshevPolynomial:
    c = np.zeros(k + 1)
    c[k] = 1.0
    return ChebyshevPolynomial(c, "odd" if k % 2 else "even", {"kind": f"T_{k}"})


def degree_bound_general(delta: float, eps: float) -> float:
    """Reference shape ``(1/delta) log(1/eps)`` of the inverse degree (no constant)."""
    return math.log(1.0 / eps) / delta
