"""Two-parameter regression models: mean and dispersion each with their own predictor.

Observation i has mean mu_i = g^{-1}(eta_i) with eta_i = eta(x_i; beta) and
dispersion phi_i = h^{-1}(zeta_i) with zeta_i = zeta(z_i; gamma).  The
per-observation cumulants of the (mu, phi) derivatives are mapped to the
regression coefficients by the chain rule and summed.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import linalg, special

from .cumulants import CumulantSet, JointCumulantTable, table_from_tensors
from .errors import DomainError, PredictorRangeError, SingularInformationError
from .families import BetaFamily, GammaFamily, SymmetricFamily, dgf, expand_by_count
from .solver import ConfidenceInterval, Inference, ScoreModel

__all__ = [
    "Link",
    "LINKS",
    "get_link",
    "LinearPredictor",
    "NonlinearPredictor",
    "RegressionSpec",
    "RegressionModel",
    "GammaModel",
    "assemble_joint_cumulants",
    "regression_intervals",
    "beta_regression",
    "symmetric_regression",
]


# ---------------------------------------------------------------------------
# links


@dataclass(frozen=True)
class Link:
    """Link g with mu = g^{-1}(eta).

    ``mu_eta`` and ``mu_eta2`` are d mu/d eta and d^2 mu/d eta^2 written as
    functions of mu; ``deriv`` and ``deriv2`` are g' and g''.
    """

    name: str
    fun: Callable
    inverse: Callable
    mu_eta: Callable
    mu_eta2: Callable
    deriv: Callable
    deriv2: Callable


def _ones(m):
    return np.ones_like(np.asarray(m, dtype=float))


def _zeros(m):
    return np.zeros_like(np.asarray(m, dtype=float))


LINKS = {
    "identity": Link("identity", lambda m: np.asarray(m, dtype=float),
                     lambda e: np.asarray(e, dtype=float), _ones, _zeros, _ones, _zeros),
    "logit": Link("logit", special.logit, special.expit,
                  lambda m: m * (1 - m),
                  lambda m: m * (1 - m) * (1 - 2 * m),
                  lambda m: 1 / (m * (1 - m)),
                  lambda m: (2 * m - 1) / (m * (1 - m)) ** 2),
    "log": Link("log", np.log, np.exp, lambda m: m, lambda m: m,
                lambda m: 1 / m, lambda m: -1 / m**2),
}


def get_link(link) -> Link:
    if isinstance(link, Link):
        return link
    try:
        return LINKS[link]
    except KeyError:
        raise DomainError(f"unknown link {link!r}") from None


# ---------------------------------------------------------------------------
# predictors


class LinearPredictor:
    """eta = X b."""

    def __init__(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or not np.all(np.isfinite(X)):
            raise DomainError("design matrix must be a finite 2-d array")
        self.X = X
        self.n, self.k = X.shape
        self._outer = None

    def eta(self, b):
        return self.X @ b

    def jacobian(self, b):
        return self.X

    def hessian(self, b):
        return None

    def outer(self, b):
        """Row-wise outer products x_i x_i^T, shape (n, k, k)."""
        if self._outer is None:
            self._outer = np.einsum("is,it->ist", self.X, self.X)
        return self._outer


class NonlinearPredictor:
    """User-supplied predictor with its jacobian (n, k) and optional hessian (n, k, k)."""

    def __init__(self, fun, jacobian, n: int, k: int, hessian=None):
        self._fun, self._jac, self._hess = fun, jacobian, hessian
        self.n, self.k = n, k

    def eta(self, b):
        return np.asarray(self._fun(b), dtype=float)

    def jacobian(self, b):
        return np.asarray(self._jac(b), dtype=float)

    def hessian(self, b):
        return None if self._hess is None else np.asarray(self._hess(b), dtype=float)

    def outer(self, b):
        D = self.jacobian(b)
        return np.einsum("is,it->ist", D, D)


def _as_predictor(p):
    if isinstance(p, (LinearPredictor, NonlinearPredictor)):
        return p
    return LinearPredictor(p)


@dataclass
class RegressionSpec:
    family: object
    mean_predictor: object
    disp_predictor: object
    mean_link: Link | str = "identity"
    disp_link: Link | str = "log"
    names: Sequence[str] | None = None

    def __post_init__(self):
        self.mean_predictor = _as_predictor(self.mean_predictor)
        self.disp_predictor = _as_predictor(self.disp_predictor)
        self.mean_link = get_link(self.mean_link)
        self.disp_link = get_link(self.disp_link)
        if self.mean_predictor.n != self.disp_predictor.n:
            raise DomainError("mean and dispersion predictors have different lengths")
        q, m = self.mean_predictor.k, self.disp_predictor.k
        if self.names is None:
            self.names = tuple([f"beta{j}" for j in range(q)] + [f"gamma{j}" for j in range(m)])
        if len(self.names) != q + m:
            raise DomainError("wrong number of parameter names")
        self.names = tuple(self.names)

    @property
    def n(self) -> int:
        return self.mean_predictor.n

    @property
    def q(self) -> int:
        return self.mean_predictor.k

    @property
    def dim(self) -> int:
        return self.mean_predictor.k + self.disp_predictor.k


# ---------------------------------------------------------------------------


@dataclass
class _State:
    """Everything at one parameter value that does not depend on psi."""

    mu: np.ndarray
    phi: np.ndarray
    J: np.ndarray                 # (n, d, 2): d(mu, phi)/d theta
    H: np.ndarray | None = None   # (n, d, d, 2): second derivatives
    u: np.ndarray | None = None
    c2: np.ndarray | None = None
    d2: np.ndarray | None = None
    K2: np.ndarray | None = None
    observed: np.ndarray | None = None
    counts: tuple | None = field(default=None, repr=False)
    profile: dict = field(default_factory=dict, repr=False)


def _sandwich(A, C):
    """sum_i A_i C_i A_i^T for A of shape (n, d, 2) and C of shape (n, 2, 2)."""
    n, d, _ = A.shape
    AC = np.matmul(A, C)
    return A.transpose(1, 0, 2).reshape(d, -1) @ AC.transpose(1, 0, 2).reshape(d, -1).T


_COUNT2 = np.indices((2, 2)).sum(axis=0)
# binomial weights for contracting symmetric tensors stored by phi count
_B3 = np.array([1.0, 3.0, 3.0, 1.0])[:, None]
_B4 = np.array([1.0, 4.0, 6.0, 4.0, 1.0])[:, None]


def _monomials(v):
    """Rows v_mu^(r-j) v_phi^j for r = 3 and 4."""
    v0, v1 = v[:, 0], v[:, 1]
    p0 = np.vstack([np.ones_like(v0), v0, v0 * v0, v0 * v0 * v0, (v0 * v0) ** 2])
    p1 = np.vstack([np.ones_like(v1), v1, v1 * v1, v1 * v1 * v1, (v1 * v1) ** 2])
    return p0[3::-1] * p1[:4], p0[4::-1] * p1[:5]


def _check_range(values, rng, what):
    lo, hi = rng
    if values.min() > lo and values.max() < hi:
        return
    bad = ~((values > lo) & (values < hi) & np.isfinite(values))
    if np.any(bad):
        i = int(np.argmax(bad))
        raise PredictorRangeError(f"{what} of observation {i} is {values[i]!r}, outside {rng}", i)


class RegressionModel(ScoreModel):
    def __init__(self, spec: RegressionSpec, y):
        y = np.asarray(y, dtype=float).ravel()
        if y.size != spec.n:
            raise DomainError(f"{y.size} responses for {spec.n} predictor rows")
        if not np.all(np.isfinite(y)):
            raise DomainError("responses contain non-finite values")
        spec.family.check_response(y)
        self.spec = spec
        self.y = y
        self.names = spec.names
        self.bounds = getattr(self, "bounds", None) or tuple((-math.inf, math.inf) for _ in spec.names)
        self._cache: OrderedDict = OrderedDict()
        d = len(spec.names)
        self._nuisance_index = [np.array([j for j in range(d) if j != k], dtype=int) for k in range(d)]

    # -- evaluation -----------------------------------------------------

    def _state(self, theta, second=False) -> _State:
        theta = np.asarray(theta, dtype=float)
        key = theta.tobytes()
        st = self._cache.get(key)
        if st is None:
            st = self._make_state(theta)
            if len(self._cache) >= 64:
                self._cache.popitem(last=False)
            self._cache[key] = st
        else:
            self._cache.move_to_end(key)
        if second and st.H is None:
            st.H = self._second(theta, st)
        return st

    def _make_state(self, theta) -> _State:
        sp = self.spec
        q = sp.q
        b, g = theta[:q], theta[q:]
        fam = sp.family
        eta = sp.mean_predictor.eta(b)
        mu = sp.mean_link.inverse(eta)
        _check_range(mu, fam.mean_range, "mean")
        zeta = sp.disp_predictor.eta(g)
        phi = sp.disp_link.inverse(zeta)
        _check_range(phi, fam.disp_range, "dispersion")
        n, d = sp.n, sp.dim
        J = np.zeros((n, d, 2))
        J[:, :q, 0] = sp.mean_predictor.jacobian(b) * sp.mean_link.mu_eta(mu)[:, None]
        J[:, q:, 1] = sp.disp_predictor.jacobian(g) * sp.disp_link.mu_eta(phi)[:, None]
        return _State(mu, phi, J)

    def _second(self, theta, st: _State):
        sp = self.spec
        q, n, d = sp.q, sp.n, sp.dim
        b, g = theta[:q], theta[q:]
        H = np.zeros((n, d, d, 2))
        for sl, k, pred, link, par, val in ((slice(0, q), 0, sp.mean_predictor, sp.mean_link, b, st.mu),
                                             (slice(q, d), 1, sp.disp_predictor, sp.disp_link, g, st.phi)):
            block = pred.outer(par) * link.mu_eta2(val)[:, None, None]
            hess = pred.hessian(par)
            if hess is not None:
                block = block + hess * link.mu_eta(val)[:, None, None]
            H[:, sl, sl, k] = block
        return H

    def _first_order(self, theta):
        st = self._state(theta)
        if st.u is None:
            st.u, st.c2, st.d2 = self.spec.family.derivatives(self.y, st.mu, st.phi)
            st.K2 = _sandwich(st.J, st.c2)
        return st

    def _counts(self, st: _State):
        if st.counts is None:
            st.counts = self.spec.family.obs_by_count(st.mu, st.phi)
        return st.counts

    # -- ScoreModel interface --------------------------------------------

    def score(self, theta):
        st = self._first_order(theta)
        return np.einsum("irk,ik->r", st.J, st.u)

    def information(self, theta):
        return self._first_order(theta).K2

    def score_and_information(self, theta):
        st = self._first_order(theta)
        return np.einsum("irk,ik->r", st.J, st.u), st.K2

    def observed_information(self, theta):
        st = self._first_order(theta)
        if st.observed is None:
            self._state(theta, second=True)
            st.observed = -(_sandwich(st.J, st.d2) + np.einsum("irsk,ik->rs", st.H, st.u))
        return st.observed

    def score_and_hessian(self, theta):
        U = self.score(theta)
        return U, self.observed_information(theta)

    def loglik(self, theta):
        try:
            st = self._state(theta)
        except DomainError:
            return -math.inf
        return self.spec.family.loglik(self.y, st.mu, st.phi)

    def in_space(self, theta):
        if not super().in_space(theta):
            return False
        try:
            self._state(theta)
        except DomainError:
            return False
        return True

    def full_tensors(self, theta):
        """(K2, K21, K3, K4) over the full parameter vector."""
        st = self._first_order(theta)
        self._state(theta, second=True)
        c2, c3, c4, c21 = expand_by_count(*self._counts(st))
        J, H = st.J, st.H
        K3 = np.einsum("irk,isl,itm,iklm->rst", J, J, J, c3, optimize=True)
        K4 = np.einsum("irk,isl,itm,iun,iklmn->rstu", J, J, J, J, c4, optimize=True)
        K21 = (np.einsum("irk,isl,itm,iklm->rst", J, J, J, c21, optimize=True)
               + np.einsum("irk,istl,ikl->rst", J, H, c2, optimize=True))
        return st.K2, K21, K3, K4

    def joint_table(self, theta, psi=0) -> JointCumulantTable:
        return table_from_tensors(psi, *self.full_tensors(theta))

    def cumulants(self, theta, psi=0) -> CumulantSet:
        """Profile-score cumulants through the weight vector w = e_psi - beta.

        Equivalent to reducing :meth:`joint_table`, but only contracts the
        per-observation tensors along w.
        """
        st = self._first_order(theta)
        if psi in st.profile:
            return st.profile[psi]
        st.profile[psi] = out = self._profile_cumulants(st, theta, psi)
        return out

    def _profile_cumulants(self, st: _State, theta, psi: int) -> CumulantSet:
        self._state(theta, second=True)
        E2, E3, E4, F21 = self._counts(st)
        d = self.dim
        K2 = st.K2
        if d == 1:
            v = st.J[:, 0, :]
            P3, P4 = _monomials(v)
            return CumulantSet(0.0, float(K2[0, 0]), float(np.sum(_B3 * E3 * P3)),
                               float(np.sum(_B4 * E4 * P4)))
        nu = self._nuisance_index[psi]
        try:
            np.linalg.cholesky(K2[np.ix_(nu, nu)])
        except np.linalg.LinAlgError:
            raise SingularInformationError("nuisance information is not positive definite") from None
        kinv = np.linalg.inv(K2[np.ix_(nu, nu)])
        bcoef = kinv @ K2[nu, psi]
        w = np.zeros(d)
        w[psi] = 1.0
        w[nu] = -bcoef
        v = w @ st.J  # rows (v_mu, v_phi) of the efficient-score weights
        P3, P4 = _monomials(v)
        k2 = float(K2[psi, psi] - bcoef @ K2[nu, psi])
        k3 = float(np.sum(_B3 * E3 * P3))
        k4 = float(np.sum(_B4 * E4 * P4))
        # T_ab = sum_i [kappa_{w,a,b} + kappa_{w,ab}] over the nuisance block
        v0, v1 = v[:, 0], v[:, 1]
        G = v0 * (E3[:3] + F21[0]) + v1 * (E3[1:] + F21[1])
        g = np.column_stack([v0 * E2[0] + v1 * E2[1], v0 * E2[1] + v1 * E2[2]])
        Jn = st.J[:, nu, :]
        T = _sandwich(Jn, G.T[:, _COUNT2]) + np.tensordot(g, st.H, axes=([0, 1], [0, 3]))[np.ix_(nu, nu)]
        k1 = -0.5 * float(np.sum(kinv * T))
        return CumulantSet(k1, k2, k3, k4)

    def start(self):
        return _start_values(self)

    def sample(self, rng, theta):
        """Draw a response vector at parameter value ``theta``."""
        st = self._state(theta)
        return self.spec.family.sample(rng, st.mu, st.phi)


def _start_values(model: RegressionModel) -> np.ndarray:
    sp = model.spec
    y = model.y
    fam = sp.family
    if not isinstance(sp.mean_predictor, LinearPredictor) or not isinstance(sp.disp_predictor, LinearPredictor):
        raise NotImplementedError("nonlinear predictors need explicit starting values")
    X, Z = sp.mean_predictor.X, sp.disp_predictor.X
    n, q = X.shape
    gy = sp.mean_link.fun(y)
    b, *_ = np.linalg.lstsq(X, gy, rcond=None)
    mu = sp.mean_link.inverse(X @ b)
    lo, hi = fam.mean_range
    mu = np.clip(mu, lo + 1e-6 if math.isfinite(lo) else -np.inf, hi - 1e-6 if math.isfinite(hi) else np.inf)
    res = gy - X @ b
    if isinstance(fam, BetaFamily):
        sigma2 = res @ res / max(n - q, 1) * sp.mean_link.deriv(mu) ** -2
        phi0 = max(float(np.mean(mu * (1 - mu) / sigma2)) - 1.0, 1.0)
    elif isinstance(fam, GammaFamily):
        cv2 = float(np.mean((y / mu - 1) ** 2))
        phi0 = 1.0 / cv2 if cv2 > 0 else 1.0
    else:
        phi0 = math.sqrt(res @ res / max(n - q, 1)) or 1.0
    g, *_ = np.linalg.lstsq(Z, np.full(n, float(sp.disp_link.fun(np.array(phi0)))), rcond=None)
    return np.concatenate([b, g])


def assemble_joint_cumulants(spec: RegressionSpec, y, theta, psi: int) -> JointCumulantTable:
    return RegressionModel(spec, y).joint_table(np.asarray(theta, dtype=float), psi)


# ---------------------------------------------------------------------------
# convenience constructors


def beta_regression(y, X, Z, mean_link="logit", disp_link="log", names=None) -> RegressionModel:
    spec = RegressionSpec(BetaFamily(), X, Z, mean_link, disp_link, names)
    return RegressionModel(spec, y)


def symmetric_regression(y, X, Z, family="normal", nu=None, mean_link="identity",
                         disp_link="log", names=None) -> RegressionModel:
    spec = RegressionSpec(SymmetricFamily(dgf(family, nu)), X, Z, mean_link, disp_link, names)
    return RegressionModel(spec, y)


class GammaModel(RegressionModel):
    """Gamma sample parameterised directly by (mu, phi) = (mean, shape)."""

    bounds = ((0.0, math.inf), (0.0, math.inf))

    def __init__(self, data):
        y = np.asarray(data, dtype=float).ravel()
        if y.size < 2:
            raise DomainError("need at least two observations")
        ones = np.ones((y.size, 1))
        spec = RegressionSpec(GammaFamily(), ones, ones, "identity", "identity", ("mu", "phi"))
        super().__init__(spec, y)

    def start(self):
        m = float(np.mean(self.y))
        v = float(np.var(self.y))
        return np.array([m, m * m / v if v > 0 else 1.0])


def regression_intervals(model: ScoreModel, targets=None, levels=(0.95,),
                         methods=("ML", "MBR", "QBR"), kind="two-sided",
                         inference: Inference | None = None) -> list[tuple[str, ConfidenceInterval]]:
    """Intervals for each named target coefficient, level and method."""
    inf = inference or Inference(model)
    names = list(model.names)
    if targets is None:
        targets = names
    out = []
    for t in targets:
        psi = names.index(t) if isinstance(t, str) else int(t)
        for level in levels:
            for method in methods:
                out.append((names[psi], inf.interval(psi, level, kind, method)))
    return out
