"""Per-observation distribution families for the two-parameter regression framework.

Each family supplies, for parameter vectors ``mu`` and ``phi`` of length n,
the joint cumulants of the first and second derivatives of
log f(y; mu, phi) with respect to (mu, phi).  Naming of the
:class:`ObsCumulants` fields: ``m`` stands for mu and ``p`` for phi, a
comma-free run of letters is one derivative per letter, and an underscore
separates a first derivative from a second one.  So ``mmp`` is
kappa_{mu,mu,phi} and ``p_mm`` is kappa_{phi,mu mu} = E(U_phi U_{mu mu}).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from functools import lru_cache

import numpy as np
import sympy as sp
from scipy import special

from .errors import DomainError, IncompleteConstantsError
from .specialfn import QuadratureProblem, integrate, polygamma_orders

__all__ = [
    "ObsCumulants",
    "BetaFamily",
    "SymmetricFamily",
    "GammaFamily",
    "DGF",
    "DeltaConstants",
    "DELTA_KEYS",
    "dgf",
    "compute_deltas",
    "beta_obs_cumulants",
    "symmetric_obs_cumulants",
    "gamma_obs_cumulants",
]


@dataclass
class ObsCumulants:
    """Cumulants of log-density derivatives, one entry per observation."""

    mm: np.ndarray
    mp: np.ndarray
    pp: np.ndarray
    mmm: np.ndarray
    mmp: np.ndarray
    mpp: np.ndarray
    ppp: np.ndarray
    mmmm: np.ndarray
    mmmp: np.ndarray
    mmpp: np.ndarray
    mppp: np.ndarray
    pppp: np.ndarray
    m_mm: np.ndarray
    m_mp: np.ndarray
    m_pp: np.ndarray
    p_mm: np.ndarray
    p_mp: np.ndarray
    p_pp: np.ndarray

    def __post_init__(self):
        n = np.broadcast(*[np.asarray(getattr(self, f.name)) for f in fields(self)]).shape
        for f in fields(self):
            setattr(self, f.name, np.broadcast_to(np.asarray(getattr(self, f.name), dtype=float), n))

    @property
    def n(self) -> int:
        return self.mm.shape[0] if self.mm.ndim else 1

    def by_count(self):
        """Distinct entries indexed by the number of phi slots.

        Returns ``(E2, E3, E4, F21)`` with shapes (3,n), (4,n), (5,n) and
        (2,3,n); ``F21[k, j]`` is kappa_{k, second derivative with j phi's}.
        """
        E2 = np.vstack([self.mm, self.mp, self.pp])
        E3 = np.vstack([self.mmm, self.mmp, self.mpp, self.ppp])
        E4 = np.vstack([self.mmmm, self.mmmp, self.mmpp, self.mppp, self.pppp])
        F21 = np.stack([np.vstack([self.m_mm, self.m_mp, self.m_pp]),
                        np.vstack([self.p_mm, self.p_mp, self.p_pp])])
        return E2, E3, E4, F21

    def tensors(self):
        """Stack into symmetric arrays indexed by 0 = mu, 1 = phi.

        Returns ``(c2, c3, c4, c21)`` with shapes (n,2,2), (n,2,2,2),
        (n,2,2,2,2) and (n,2,2,2); ``c21[i, k, l, m] = kappa_{k, lm}``.
        """
        return expand_by_count(*self.by_count())


def expand_by_count(E2, E3, E4, F21):
    c21 = np.moveaxis(F21[:, _COUNT2], -1, 0)
    return E2.T[:, _COUNT2], E3.T[:, _COUNT3], E4.T[:, _COUNT4], c21


# index maps from a symmetric array position to the number of phi slots
_COUNT2 = np.indices((2, 2)).sum(axis=0)
_COUNT3 = np.indices((2, 2, 2)).sum(axis=0)
_COUNT4 = np.indices((2, 2, 2, 2)).sum(axis=0)
_MIXED21 = 3 * np.indices((2, 2, 2))[0] + np.indices((2, 2, 2))[1:].sum(axis=0)


# ---------------------------------------------------------------------------
# beta


def _check_beta(mu, phi):
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    if not (np.all(mu > 0) and np.all(mu < 1)):
        raise DomainError("beta mean must lie in (0, 1)")
    if not np.all(phi > 0):
        raise DomainError("beta precision must be positive")
    return np.broadcast_arrays(mu, phi)


_POW = np.arange(5)[:, None]


def _beta_by_count(mu, phi):
    """Distinct beta cumulants of orders 2, 3 and 4, indexed by the number of
    phi slots j: phi^(r-j) [mu^j A + (-1)^(r-j) (1-mu)^j B] - [j = r] F with
    A, B, F the polygamma of order r-1 at mu phi, (1-mu) phi and phi."""
    n = mu.size
    args = np.concatenate([mu * phi, (1 - mu) * phi, phi])
    pg = polygamma_orders(args, (1, 2, 3))
    mu_pow = mu ** _POW
    q_pow = (1 - mu) ** _POW
    phi_pow = phi ** _POW
    out = []
    for r, t in zip((2, 3, 4), pg):
        A, B, F = t.reshape(3, n)
        sign = (-1.0) ** (r - _POW[: r + 1])
        E = phi_pow[r::-1] * (mu_pow[: r + 1] * A + sign * q_pow[: r + 1] * B)
        E[r] -= F
        out.append(E)
    return out


def _beta_by_count_all(mu, phi):
    E2, E3, E4 = _beta_by_count(mu, phi)
    F21 = np.zeros((2, 3, mu.size))
    F21[0, 1] = E2[0] / phi
    F21[1, 1] = E2[1] / phi
    return E2, E3, E4, F21


def beta_obs_cumulants(mu, phi) -> ObsCumulants:
    mu, phi = _check_beta(mu, phi)
    E2, E3, E4 = _beta_by_count(mu, phi)
    zero = np.zeros(mu.size)
    return ObsCumulants(
        mm=E2[0], mp=E2[1], pp=E2[2],
        mmm=E3[0], mmp=E3[1], mpp=E3[2], ppp=E3[3],
        mmmm=E4[0], mmmp=E4[1], mmpp=E4[2], mppp=E4[3], pppp=E4[4],
        m_mm=zero, m_mp=E2[0] / phi, m_pp=zero,
        p_mm=zero, p_mp=E2[1] / phi, p_pp=zero,
    )


class BetaFamily:
    """Beta distribution with mean mu in (0, 1) and precision phi > 0."""

    name = "beta"
    mean_range = (0.0, 1.0)
    disp_range = (0.0, math.inf)

    def check_response(self, y):
        if not (np.all(y > 0) and np.all(y < 1)):
            raise DomainError("beta responses must lie strictly inside (0, 1)")

    def obs_cumulants(self, mu, phi) -> ObsCumulants:
        return beta_obs_cumulants(mu, phi)

    def obs_by_count(self, mu, phi):
        return _beta_by_count_all(mu, phi)

    def derivatives(self, y, mu, phi):
        """Per-observation scores (n,2), second-order cumulants (n,2,2) and
        second derivatives of log f (n,2,2)."""
        n = y.size
        args = np.concatenate([mu * phi, (1 - mu) * phi, phi])
        d0, d1 = polygamma_orders(args, (0, 1))
        a0, b0, f0 = d0.reshape(3, n)
        a1, b1, f1 = d1.reshape(3, n)
        resid = np.log(y) - np.log1p(-y) - (a0 - b0)
        ydag = np.log1p(-y) - (b0 - f0)
        q = 1 - mu
        u = np.empty((n, 2))
        u[:, 0] = phi * resid
        u[:, 1] = mu * resid + ydag
        c2 = np.empty((n, 2, 2))
        c2[:, 0, 0] = phi**2 * (a1 + b1)
        c2[:, 0, 1] = c2[:, 1, 0] = phi * (mu * a1 - q * b1)
        c2[:, 1, 1] = mu**2 * a1 + q**2 * b1 - f1
        d2 = -c2
        d2[:, 0, 1] = d2[:, 1, 0] = resid - c2[:, 0, 1]
        return u, c2, d2

    def loglik(self, y, mu, phi) -> float:
        a, b = mu * phi, (1 - mu) * phi
        return float(np.sum(special.gammaln(phi) - special.gammaln(a) - special.gammaln(b)
                            + (a - 1) * np.log(y) + (b - 1) * np.log1p(-y)))

    def sample(self, rng: np.random.Generator, mu, phi):
        y = rng.beta(mu * phi, (1 - mu) * phi)
        # keep draws strictly inside (0, 1) so the log-likelihood stays finite
        return np.clip(y, 1e-12, 1 - 1e-12)


# ---------------------------------------------------------------------------
# symmetric (location-scale) families


_EPS = sp.Symbol("eps", positive=True)


class DGF:
    """Density generating function v(u) of a symmetric law phi^-1 v(((y-mu)/phi)^2).

    ``s_expr`` is s(eps) = log v(eps^2) for eps > 0; derivatives for
    negative eps follow from s being even.
    """

    def __init__(self, name: str, s_expr, params: dict | None = None, sampler=None):
        self.name = name
        self.params = params or {}
        self.s_expr = s_expr
        derivs = [s_expr]
        for _ in range(4):
            derivs.append(sp.diff(derivs[-1], _EPS))
        self._fns = [sp.lambdify(_EPS, d, "numpy") for d in derivs]
        self._sampler = sampler

    def __repr__(self):
        args = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return f"DGF({self.name}{', ' + args if args else ''})"

    def s(self, eps):
        return self._eval(0, eps)

    def deriv(self, r: int, eps):
        """r-th derivative of s at eps (any sign)."""
        return self._eval(r, eps)

    def _eval(self, r, eps):
        eps = np.asarray(eps, dtype=float)
        a = np.abs(eps)
        val = np.asarray(self._fns[r](a), dtype=float) * np.ones_like(a)
        if r % 2:
            val = np.where(eps < 0, -val, val)
        return val

    def sample(self, rng: np.random.Generator, size):
        if self._sampler is None:
            raise NotImplementedError(f"no sampler for {self.name}")
        return self._sampler(rng, size)


@lru_cache(maxsize=None)
def dgf(name: str, nu: float | None = None) -> DGF:
    """Build one of the standard density generating functions."""
    e = _EPS
    if name == "normal":
        return DGF(name, -e**2 / 2 - sp.log(2 * sp.pi) / 2,
                   sampler=lambda rng, size: rng.standard_normal(size))
    if name == "student_t":
        if nu is None or not nu > 0:
            raise DomainError("Student-t needs nu > 0")
        v = sp.nsimplify(nu)
        logc = v / 2 * sp.log(v) - sp.log(sp.beta(sp.Rational(1, 2), v / 2))
        return DGF(name, logc - (v + 1) / 2 * sp.log(v + e**2), {"nu": nu},
                   sampler=lambda rng, size: rng.standard_t(nu, size))
    if name == "logistic_I":
        # normalising constant c ~ 1.4843
        inner = integrate(QuadratureProblem(
            lambda u: u**-0.5 * math.exp(-u) / (1 + math.exp(-u)) ** 2, 0.0, math.inf))
        c = 1.0 / inner
        return DGF(name, sp.log(sp.Float(c, 17)) - e**2 - 2 * sp.log(1 + sp.exp(-e**2)),
                   {"c": c})
    if name == "logistic_II":
        return DGF(name, -e - 2 * sp.log(1 + sp.exp(-e)),
                   sampler=lambda rng, size: rng.logistic(0.0, 1.0, size))
    if name == "power_exp":
        if nu is None or not -1 < nu <= 1:
            raise DomainError("power exponential needs -1 < nu <= 1")
        v = sp.nsimplify(nu)
        logC = sp.log(sp.gamma((3 + v) / 2)) + (3 + v) / 2 * sp.log(2)
        k = 2 / (1 + v)

        def sampler(rng, size):
            g = rng.gamma((1 + nu) / 2, 1.0, size)
            return rng.choice([-1.0, 1.0], size) * (2 * g) ** ((1 + nu) / 2)

        return DGF(name, -e**k / 2 - logC, {"nu": nu}, sampler=sampler)
    raise DomainError(f"unknown density generating function {name!r}")


# delta_{abcde} = E(s1^a s2^b s3^c s4^d eps^e) needed by the symmetric cumulants
DELTA_KEYS = (
    "20000", "40000", "20002", "11001", "11003", "40001", "30001", "20001",
    "01000", "01002", "40002", "30000", "40004", "30003", "00103", "00101",
)


@dataclass(frozen=True)
class DeltaConstants:
    values: dict

    def __getitem__(self, key: str) -> float:
        try:
            return self.values[key]
        except KeyError:
            raise IncompleteConstantsError(f"delta_{key} not available") from None

    def __post_init__(self):
        if "20000" in self.values and not self.values["20000"] > 0:
            raise DomainError("delta_20000 must be positive")


def _delta(g: DGF, key: str, rel_tol: float) -> float:
    a, b, c, d, e = (int(ch) for ch in key)
    if (a + c + e) % 2:
        return 0.0
    log_norm = math.log(2.0)

    def integrand(x):
        val = math.exp(float(g.s(x)) + log_norm)
        if val == 0.0:
            return 0.0
        out = val * x**e
        for r, power in ((1, a), (2, b), (3, c), (4, d)):
            if power:
                out *= float(g._fns[r](x)) ** power
        return out

    return integrate(QuadratureProblem(integrand, 0.0, math.inf, rel_tol, 1e-14))


@lru_cache(maxsize=None)
def _deltas_cached(g: DGF, keys: tuple, rel_tol: float) -> DeltaConstants:
    return DeltaConstants({k: _delta(g, k, rel_tol) for k in keys})


def compute_deltas(g: DGF | str, keys=DELTA_KEYS, rel_tol: float = 1e-10,
                   nu: float | None = None) -> DeltaConstants:
    """delta constants of a symmetric law by quadrature over (0, inf).

    Odd integrands are set to zero exactly.
    """
    if isinstance(g, str):
        g = dgf(g, nu)
    return _deltas_cached(g, tuple(keys), rel_tol)


def symmetric_obs_cumulants(mu, phi, deltas: DeltaConstants) -> ObsCumulants:
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    if not np.all(phi > 0):
        raise DomainError("scale parameter must be positive")
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    phi = np.broadcast_to(phi, np.broadcast(mu, phi).shape)
    d = deltas
    p2, p3, p4 = phi**-2, phi**-3, phi**-4
    zero = np.zeros_like(phi)
    return ObsCumulants(
        mm=d["20000"] * p2,
        mp=zero,
        pp=(d["20002"] - 1) * p2,
        mmm=zero,
        mmp=2 * d["11001"] * p3,
        mpp=zero,
        ppp=2 * (d["11003"] + 1) * p3,
        mmmm=(d["40000"] - 3 * d["20000"] ** 2) * p4,
        mmmp=(d["30000"] + d["40001"]) * p4,
        mmpp=(2 * d["30001"] + d["40002"] - d["01000"] * d["01002"]) * p4,
        # E(U_mu U_phi^3) is an odd function of eps and vanishes
        mppp=zero,
        pppp=(d["40004"] + 4 * d["30003"] + 12 * d["20002"] - 3 * d["20002"] ** 2 - 6) * p4,
        m_mm=zero,
        m_mp=-(d["11001"] - d["01000"]) * p3,
        m_pp=zero,
        p_mm=d["00101"] * p3,
        p_mp=zero,
        p_pp=(4 * d["01002"] + d["00103"] - 2) * p3,
    )


class SymmetricFamily:
    """Location-scale symmetric law with density phi^-1 v(((y - mu)/phi)^2)."""

    mean_range = (-math.inf, math.inf)
    disp_range = (0.0, math.inf)

    def __init__(self, g: DGF):
        self.dgf = g
        self.name = g.name
        self.deltas = compute_deltas(g)

    def check_response(self, y):
        pass

    def obs_cumulants(self, mu, phi) -> ObsCumulants:
        return symmetric_obs_cumulants(mu, phi, self.deltas)

    def obs_by_count(self, mu, phi):
        return self.obs_cumulants(mu, phi).by_count()

    def derivatives(self, y, mu, phi):
        eps = (y - mu) / phi
        s1 = self.dgf.deriv(1, eps)
        s2 = self.dgf.deriv(2, eps)
        n = y.size
        u = np.empty((n, 2))
        u[:, 0] = -s1 / phi
        u[:, 1] = -(1 + s1 * eps) / phi
        c2 = np.zeros((n, 2, 2))
        c2[:, 0, 0] = self.deltas["20000"] / phi**2
        c2[:, 1, 1] = (self.deltas["20002"] - 1) / phi**2
        d2 = np.empty((n, 2, 2))
        d2[:, 0, 0] = s2 / phi**2
        d2[:, 0, 1] = d2[:, 1, 0] = (s1 + s2 * eps) / phi**2
        d2[:, 1, 1] = (1 + 2 * s1 * eps + s2 * eps**2) / phi**2
        return u, c2, d2

    def loglik(self, y, mu, phi) -> float:
        eps = (y - mu) / phi
        return float(np.sum(self.dgf.s(eps) - np.log(phi)))

    def sample(self, rng, mu, phi):
        return mu + phi * self.dgf.sample(rng, np.shape(mu))


# ---------------------------------------------------------------------------
# gamma with mean mu and shape phi


def _gamma_parts(mu, phi):
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    if not (np.all(mu > 0) and np.all(phi > 0)):
        raise DomainError("gamma mean and shape must be positive")
    mu, phi = np.broadcast_arrays(mu, phi)
    return mu, phi


def gamma_obs_cumulants(mu, phi) -> ObsCumulants:
    """Cumulants for y ~ Gamma(shape phi, rate phi/mu).

    The derivatives of log f are affine in (y, log y), whose joint
    cumulants follow from E(y^t e^{sy}); everything is a multilinear
    transform of those.
    """
    mu, phi = _gamma_parts(mu, phi)
    n = mu.size
    k, rate = phi, phi / mu
    t1, t2, t3 = polygamma_orders(k, (1, 2, 3))
    # joint cumulants of W = (y, log y), indexed by the number of log-y slots
    C2 = np.zeros((n, 2, 2))
    C3 = np.zeros((n, 2, 2, 2))
    C4 = np.zeros((n, 2, 2, 2, 2))
    c2_by = (k / rate**2, 1 / rate, t1)
    c3_by = (2 * k / rate**3, 1 / rate**2, np.zeros(n), t2)
    c4_by = (6 * k / rate**4, 2 / rate**3, np.zeros(n), np.zeros(n), t3)
    for idx in np.ndindex(2, 2):
        C2[(slice(None),) + idx] = c2_by[sum(idx)]
    for idx in np.ndindex(2, 2, 2):
        C3[(slice(None),) + idx] = c3_by[sum(idx)]
    for idx in np.ndindex(2, 2, 2, 2):
        C4[(slice(None),) + idx] = c4_by[sum(idx)]
    # coefficients of (y, log y) in U_mu, U_phi, U_mumu, U_muphi (U_phiphi is constant)
    A = np.zeros((n, 2, 2))
    A[:, 0, 0] = phi / mu**2
    A[:, 1, 0] = -1 / mu
    A[:, 1, 1] = 1.0
    B = np.zeros((n, 2, 2, 2))
    B[:, 0, 0, 0] = -2 * phi / mu**3
    B[:, 0, 1, 0] = B[:, 1, 0, 0] = 1 / mu**2
    c2 = np.einsum("ika,ilb,iab->ikl", A, A, C2)
    c3 = np.einsum("ika,ilb,imc,iabc->iklm", A, A, A, C3)
    c4 = np.einsum("ika,ilb,imc,ind,iabcd->iklmn", A, A, A, A, C4)
    c21 = np.einsum("ika,ilmb,iab->iklm", A, B, C2)
    return ObsCumulants(
        mm=c2[:, 0, 0], mp=c2[:, 0, 1], pp=c2[:, 1, 1],
        mmm=c3[:, 0, 0, 0], mmp=c3[:, 0, 0, 1], mpp=c3[:, 0, 1, 1], ppp=c3[:, 1, 1, 1],
        mmmm=c4[:, 0, 0, 0, 0], mmmp=c4[:, 0, 0, 0, 1], mmpp=c4[:, 0, 0, 1, 1],
        mppp=c4[:, 0, 1, 1, 1], pppp=c4[:, 1, 1, 1, 1],
        m_mm=c21[:, 0, 0, 0], m_mp=c21[:, 0, 0, 1], m_pp=c21[:, 0, 1, 1],
        p_mm=c21[:, 1, 0, 0], p_mp=c21[:, 1, 0, 1], p_pp=c21[:, 1, 1, 1],
    )


class GammaFamily:
    name = "gamma"
    mean_range = (0.0, math.inf)
    disp_range = (0.0, math.inf)

    def check_response(self, y):
        if not np.all(y > 0):
            raise DomainError("gamma responses must be positive")

    def obs_cumulants(self, mu, phi) -> ObsCumulants:
        return gamma_obs_cumulants(mu, phi)

    def obs_by_count(self, mu, phi):
        return self.obs_cumulants(mu, phi).by_count()

    def derivatives(self, y, mu, phi):
        d0, d1 = polygamma_orders(phi, (0, 1))
        n = y.size
        u = np.empty((n, 2))
        u[:, 0] = phi / mu**2 * (y - mu)
        u[:, 1] = np.log(phi / mu) + 1 + np.log(y) - y / mu - d0
        c2 = np.zeros((n, 2, 2))
        c2[:, 0, 0] = phi / mu**2
        c2[:, 1, 1] = d1 - 1 / phi
        d2 = np.empty((n, 2, 2))
        d2[:, 0, 0] = -2 * phi * y / mu**3 + phi / mu**2
        d2[:, 0, 1] = d2[:, 1, 0] = y / mu**2 - 1 / mu
        d2[:, 1, 1] = 1 / phi - d1
        return u, c2, d2

    def loglik(self, y, mu, phi) -> float:
        return float(np.sum(-special.gammaln(phi) + phi * np.log(phi / mu)
                            + (phi - 1) * np.log(y) - phi * y / mu))

    def sample(self, rng, mu, phi):
        return rng.gamma(phi, mu / phi)
