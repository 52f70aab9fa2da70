"""Special functions and quadrature used by the cumulant formulas.

Polygamma functions are evaluated here directly (recurrence followed by
the Bernoulli asymptotic series) so that all four orders can be produced
from one pass over an array of arguments; the beta-regression cumulants
need orders 1 to 3 at three arguments per observation on every trial
point of the root finder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate as _integrate
from scipy import special as _special

from .errors import AccuracyError, DomainError, UnsupportedOrderError

__all__ = [
    "polygamma",
    "polygamma_orders",
    "std_normal",
    "norm_pdf",
    "norm_cdf",
    "norm_quantile",
    "chisq_quantile",
    "QuadratureProblem",
    "integrate",
]

# B_2, B_4, ..., B_20
_BERNOULLI = np.array([
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
])
_SHIFT_THRESHOLD = 10.0
_MAX_ORDER = 3


def _series_coeffs(m: int) -> np.ndarray:
    if m == 0:
        return np.array([b / (2 * k) for k, b in enumerate(_BERNOULLI, start=1)])
    return np.array([
        b * math.factorial(2 * k + m - 1) / math.factorial(2 * k)
        for k, b in enumerate(_BERNOULLI, start=1)
    ])


_COEFFS = [_series_coeffs(m) for m in range(_MAX_ORDER + 1)]
_FACT = [math.factorial(m) for m in range(_MAX_ORDER + 2)]


_COEFF_MATRIX = np.vstack(_COEFFS)


def _asymptotic(z: np.ndarray, orders) -> list[np.ndarray]:
    inv = 1.0 / z
    inv2 = inv * inv
    # series in 1/z^2 for all requested orders at once
    powers = np.cumprod(np.broadcast_to(inv2.reshape(-1), (len(_BERNOULLI), inv2.size)), axis=0)
    series = (_COEFF_MATRIX[list(orders)] @ powers).reshape((len(orders),) + z.shape)
    out = []
    for s, m in zip(series, orders):
        if m == 0:
            out.append(np.log(z) - 0.5 * inv - s)
            continue
        total = inv**m * (_FACT[m - 1] + 0.5 * _FACT[m] * inv + s)
        out.append(total if m % 2 == 1 else -total)
    return out


def polygamma_orders(x, orders=(0, 1, 2, 3)) -> list[np.ndarray]:
    """Evaluate several polygamma orders at once.

    Returns a list aligned with ``orders``; each entry has the shape of ``x``.
    """
    for m in orders:
        if m not in range(_MAX_ORDER + 1):
            raise UnsupportedOrderError(f"polygamma order {m} not in 0..{_MAX_ORDER}")
    x = np.asarray(x, dtype=float)
    if not np.all(x > 0):
        raise DomainError("polygamma requires strictly positive arguments")
    if not np.all(np.isfinite(x)):
        raise DomainError("polygamma requires finite arguments")
    shifts = np.ceil(np.maximum(_SHIFT_THRESHOLD - x, 0.0))
    n_shift = int(shifts.max()) if shifts.size else 0
    top = max(orders) + 1
    z = x + shifts
    # psi^(m)(x) = psi^(m)(x+1) - (-1)^m m! / x^(m+1), applied shifts times:
    # sum_j 1/(x+j)^(m+1) over the steps, one pass per power
    sums = [0.0] * top
    if n_shift:
        flat = x.reshape(-1)
        j = np.arange(n_shift, dtype=float)[:, None]
        inv = np.where(j < shifts.reshape(-1), 1.0 / (flat + j), 0.0)
        pw = inv
        for k in range(top):
            if k:
                pw = pw * inv
            sums[k] = pw.sum(axis=0).reshape(x.shape)
    series = _asymptotic(z, orders)
    return [a - (-1) ** m * _FACT[m] * sums[m] for a, m in zip(series, orders)]


def polygamma(order: int, x):
    """Polygamma function of order 0..3 (order 0 is the digamma function)."""
    out = polygamma_orders(x, (order,))[0]
    return float(out) if out.ndim == 0 else out


_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def norm_pdf(x):
    x = np.asarray(x, dtype=float)
    out = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return float(out) if out.ndim == 0 else out


def norm_cdf(x):
    out = _special.ndtr(np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def norm_quantile(p):
    p = np.asarray(p, dtype=float)
    if not np.all((p > 0) & (p < 1)):
        raise DomainError("normal quantile requires 0 < p < 1")
    out = _special.ndtri(p)
    return float(out) if out.ndim == 0 else out


def std_normal(kind: str, arg):
    """Standard normal ``pdf``, ``cdf`` or ``quantile``."""
    if kind == "pdf":
        return norm_pdf(arg)
    if kind == "cdf":
        return norm_cdf(arg)
    if kind == "quantile":
        return norm_quantile(arg)
    raise ValueError(f"unknown kind {kind!r}")


def chisq_quantile(p: float, df: float) -> float:
    """Quantile of the chi-squared distribution with ``df`` degrees of freedom."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"chi-squared quantile requires 0 < p < 1, got {p}")
    if not df > 0:
        raise DomainError(f"degrees of freedom must be positive, got {df}")
    return 2.0 * float(_special.gammaincinv(0.5 * df, p))


@dataclass(frozen=True)
class QuadratureProblem:
    """Integral of ``integrand`` over ``(lower, upper)``; either end may be infinite."""

    integrand: Callable[[float], float]
    lower: float = -math.inf
    upper: float = math.inf
    relative_tolerance: float = 1e-10
    absolute_tolerance: float = 1e-13
    points: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.relative_tolerance > 0:
            raise DomainError("relative_tolerance must be positive")
        if not self.lower < self.upper:
            raise DomainError("integration limits must satisfy lower < upper")


def integrate(problem: QuadratureProblem, limit: int = 400) -> float:
    """Adaptive Gauss-Kronrod quadrature (QUADPACK).

    Half-line and full-line domains are mapped onto (0, 1] with the
    rational change of variable x = a + (1 - t)/t (full lines are split at
    zero first), so Gaussian and algebraic tails need no truncation.
    """
    p = problem
    kwargs = dict(epsabs=p.absolute_tolerance, epsrel=p.relative_tolerance,
                  limit=limit, full_output=1)
    if p.points and math.isfinite(p.lower) and math.isfinite(p.upper):
        kwargs["points"] = p.points
    res = _integrate.quad(p.integrand, p.lower, p.upper, **kwargs)
    value, err = float(res[0]), float(res[1])
    ier = 0 if len(res) == 3 else 1
    bound = max(p.absolute_tolerance, p.relative_tolerance * abs(value))
    if not math.isfinite(value) or (ier and err > bound):
        raise AccuracyError("quadrature did not converge", value, err)
    return value
