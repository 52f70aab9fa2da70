"""One- and two-parameter i.i.d. models with closed-form or quadrature cumulants."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .cumulants import CumulantSet
from .errors import DomainError
from .solver import ConfidenceInterval, ScoreModel, _tail_alphas
from .specialfn import QuadratureProblem, chisq_quantile, integrate

__all__ = [
    "ExpFamilySpec",
    "ExpFamilyModel",
    "NormalVarianceModel",
    "SkewNormalModel",
    "ReparameterizedModel",
    "SkewNormalMoments",
    "exponential_spec",
    "exponential_model",
    "normal_variance_model",
    "skew_normal_model",
    "skew_normal_moments",
    "gamma_model",
    "exact_interval",
]


def _as_data(data) -> np.ndarray:
    y = np.asarray(data, dtype=float).ravel()
    if y.size == 0:
        raise DomainError("empty sample")
    if not np.all(np.isfinite(y)):
        raise DomainError("data contain non-finite values")
    return y


@dataclass(frozen=True)
class ExpFamilySpec:
    """One-parameter exponential family f(y) = exp{theta T(y) - A(theta)} h(y).

    ``dA`` holds the first four derivatives of the log-partition function.
    """

    T: Callable[[np.ndarray], np.ndarray]
    A: Callable[[float], float]
    dA: tuple[Callable[[float], float], ...]
    bounds: tuple[float, float]
    support: Callable[[np.ndarray], bool] = lambda y: True


def exponential_spec() -> ExpFamilySpec:
    return ExpFamilySpec(
        T=lambda y: -y,
        A=lambda t: -math.log(t),
        dA=(lambda t: -1.0 / t,
            lambda t: 1.0 / t**2,
            lambda t: -2.0 / t**3,
            lambda t: 6.0 / t**4),
        bounds=(0.0, math.inf),
        support=lambda y: bool(np.all(y > 0)),
    )


class ExpFamilyModel(ScoreModel):
    def __init__(self, spec: ExpFamilySpec, data, name: str = "theta"):
        y = _as_data(data)
        if not spec.support(y):
            raise DomainError("data outside the support of the family")
        self.spec = spec
        self.y = y
        self.n = y.size
        self.sum_T = float(np.sum(spec.T(y)))
        self.names = (name,)
        self.bounds = (spec.bounds,)

    def _check(self, theta) -> float:
        t = float(np.asarray(theta).ravel()[0])
        lo, hi = self.spec.bounds
        if not lo < t < hi:
            raise DomainError(f"theta={t} outside ({lo}, {hi})")
        return t

    def score(self, theta):
        t = self._check(theta)
        return np.array([self.sum_T - self.n * self.spec.dA[0](t)])

    def information(self, theta):
        t = self._check(theta)
        return np.array([[self.n * self.spec.dA[1](t)]])

    def cumulants(self, theta, psi=0):
        t = self._check(theta)
        n, d = self.n, self.spec.dA
        return CumulantSet(0.0, n * d[1](t), n * d[2](t), n * d[3](t))

    def loglik(self, theta):
        t = float(np.asarray(theta).ravel()[0])
        return t * self.sum_T - self.n * self.spec.A(t)

    def start(self):
        # exponential: closed form; Fisher scoring polishes it anyway
        return np.array([self.n / -self.sum_T]) if self.sum_T < 0 else np.array([1.0])

    def exact_interval(self, level, kind="two-sided"):
        return exact_interval("exponential", self.y, level, kind)


def exponential_model(data) -> ExpFamilyModel:
    """Exponential sample with mean 1/theta."""
    y = _as_data(data)
    if not np.all(y > 0):
        raise DomainError("exponential data must be strictly positive")
    return ExpFamilyModel(exponential_spec(), y)


class NormalVarianceModel(ScoreModel):
    """N(0, theta) sample; theta is the variance."""

    names = ("theta",)
    bounds = ((0.0, math.inf),)

    def __init__(self, data):
        y = _as_data(data)
        self.n = y.size
        self.y = y
        self.ss = float(np.sum(y * y))

    def _check(self, theta):
        t = float(np.asarray(theta).ravel()[0])
        if not t > 0:
            raise DomainError(f"variance must be positive, got {t}")
        return t

    def score(self, theta):
        t = self._check(theta)
        return np.array([-self.n / (2 * t) + self.ss / (2 * t * t)])

    def information(self, theta):
        t = self._check(theta)
        return np.array([[self.n / (2 * t * t)]])

    def cumulants(self, theta, psi=0):
        t = self._check(theta)
        n = self.n
        return CumulantSet(0.0, n / (2 * t**2), n / t**3, 3 * n / t**4)

    def loglik(self, theta):
        t = float(np.asarray(theta).ravel()[0])
        return -0.5 * self.n * math.log(t) - self.ss / (2 * t)

    def start(self):
        return np.array([self.ss / self.n if self.ss > 0 else 1.0])

    def exact_interval(self, level, kind="two-sided"):
        return exact_interval("normal_variance", self.y, level, kind)


def normal_variance_model(data) -> NormalVarianceModel:
    return NormalVarianceModel(data)


# ---------------------------------------------------------------------------
# skew-normal shape parameter


def _zeta(x):
    """d/dx log(2 Phi(x)) = phi(x)/Phi(x), stable for very negative x."""
    return np.exp(-0.5 * np.square(x) - 0.5 * math.log(2 * math.pi) - special.log_ndtr(x))


@dataclass(frozen=True)
class SkewNormalMoments:
    """a_kl = E_theta(y^k zeta(theta y)^l) for the (k, l) pairs in ``a``."""

    theta: float
    a: dict

    def __post_init__(self):
        if not self.a[(2, 2)] > 0:
            raise DomainError("a_22 must be positive")


_SN_PAIRS = ((2, 2), (3, 3), (4, 4))


def _a_kl(theta: float, k: int, l: int, rel_tol: float) -> float:
    log_c = math.log(2.0) - 0.5 * math.log(2 * math.pi)

    def integrand(y):
        if y == 0.0:
            return 0.0
        x = theta * y
        # 2 phi(y) Phi(x) zeta(x)^l = 2 phi(y) phi(x)^l / Phi(x)^(l-1)
        lg = (log_c - 0.5 * y * y
              + l * (-0.5 * x * x - 0.5 * math.log(2 * math.pi))
              - (l - 1) * float(special.log_ndtr(x)))
        return y**k * math.exp(lg)

    neg = integrate(QuadratureProblem(integrand, -math.inf, 0.0, rel_tol, 1e-14))
    pos = integrate(QuadratureProblem(integrand, 0.0, math.inf, rel_tol, 1e-14))
    return neg + pos


@lru_cache(maxsize=4096)
def _sn_moments_cached(theta_key: float, rel_tol: float) -> SkewNormalMoments:
    return SkewNormalMoments(theta_key, {kl: _a_kl(theta_key, *kl, rel_tol) for kl in _SN_PAIRS})


def skew_normal_moments(theta: float, rel_tol: float = 1e-9) -> SkewNormalMoments:
    # memoised on theta rounded to 1e-12
    return _sn_moments_cached(round(float(theta), 12), rel_tol)


class SkewNormalModel(ScoreModel):
    """Shape parameter of the skew-normal density 2 phi(y) Phi(theta y)."""

    names = ("theta",)
    bounds = ((-math.inf, math.inf),)

    def __init__(self, data, rel_tol: float = 1e-9):
        self.y = _as_data(data)
        self.n = self.y.size
        self.rel_tol = rel_tol

    def score(self, theta):
        t = float(np.asarray(theta).ravel()[0])
        return np.array([float(np.sum(_zeta(t * self.y) * self.y))])

    def moments(self, theta) -> SkewNormalMoments:
        return skew_normal_moments(float(np.asarray(theta).ravel()[0]), self.rel_tol)

    def information(self, theta):
        return np.array([[self.n * self.moments(theta).a[(2, 2)]]])

    def cumulants(self, theta, psi=0):
        a = self.moments(theta).a
        n = self.n
        return CumulantSet(0.0, n * a[(2, 2)], n * a[(3, 3)], n * (a[(4, 4)] - 3 * a[(2, 2)] ** 2))

    def loglik(self, theta):
        t = float(np.asarray(theta).ravel()[0])
        return float(np.sum(special.log_ndtr(t * self.y)))

    def start(self):
        return np.array([0.0])

    def infinite_mle(self):
        # the score sum(zeta(theta y) y) keeps one sign when all nonzero
        # observations do
        nz = self.y[self.y != 0]
        if nz.size and (np.all(nz > 0) or np.all(nz < 0)):
            return int(np.sign(nz[0]))
        return 0


def skew_normal_model(data, rel_tol: float = 1e-9) -> SkewNormalModel:
    return SkewNormalModel(data, rel_tol)


# ---------------------------------------------------------------------------


class ReparameterizedModel(ScoreModel):
    """One-parameter model expressed in omega, with theta = theta(omega).

    The score picks up the factor theta'(omega) and the r-th cumulant the
    factor theta'(omega)^r.
    """

    def __init__(self, base: ScoreModel, to_theta: Callable[[float], float],
                 dtheta: Callable[[float], float], to_omega: Callable[[float], float],
                 bounds: tuple[float, float] = (-math.inf, math.inf), name: str = "omega"):
        if base.dim != 1:
            raise ValueError("only one-parameter models can be reparameterized")
        self.base = base
        self.to_theta, self.dtheta, self.to_omega = to_theta, dtheta, to_omega
        self.names = (name,)
        self.bounds = (bounds,)

    def _th(self, omega):
        w = float(np.asarray(omega).ravel()[0])
        return np.array([self.to_theta(w)]), self.dtheta(w)

    def score(self, omega):
        th, d = self._th(omega)
        return self.base.score(th) * d

    def information(self, omega):
        th, d = self._th(omega)
        return self.base.information(th) * d * d

    def cumulants(self, omega, psi=0):
        th, d = self._th(omega)
        return self.base.cumulants(th).scaled(d)

    def loglik(self, omega):
        th, _ = self._th(omega)
        return self.base.loglik(th)

    def start(self):
        return np.array([self.to_omega(float(self.base.start()[0]))])


# ---------------------------------------------------------------------------


def exact_interval(family: str, data, level: float, kind: str = "two-sided") -> ConfidenceInterval:
    """Exact chi-squared based interval for the exponential rate or normal variance."""
    y = _as_data(data)
    n = y.size
    a_lo, a_hi = _tail_alphas(level, kind)
    if family == "exponential":
        if not np.all(y > 0):
            raise DomainError("exponential data must be strictly positive")
        s = 2.0 * float(np.sum(y))
        # 2 theta sum(y) ~ chi2(2n)
        lo = chisq_quantile(1.0 - a_lo, 2 * n) / s if a_lo is not None else 0.0
        hi = chisq_quantile(1.0 - a_hi, 2 * n) / s if a_hi is not None else math.inf
    elif family == "normal_variance":
        ss = float(np.sum(y * y))
        # sum(y^2)/theta ~ chi2(n)
        lo = ss / chisq_quantile(a_lo, n) if a_lo is not None else 0.0
        hi = ss / chisq_quantile(a_hi, n) if a_hi is not None else math.inf
    else:
        raise ValueError(f"no exact interval for family {family!r}")
    return ConfidenceInterval("EXACT", kind, level, lo, hi)


def gamma_model(data):
    """Gamma sample with mean mu and shape phi (coefficient of variation phi^-1/2)."""
    from .regression import GammaModel

    return GammaModel(data)
