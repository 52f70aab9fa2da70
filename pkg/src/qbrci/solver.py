"""Maximum likelihood fitting, quantile-estimator root finding and interval assembly."""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .cumulants import CumulantSet, JointCumulantTable, profile_cumulants
from .errors import (
    BoundaryError,
    ConvergenceError,
    DomainError,
    NestedConvergenceError,
    NoRootError,
    QbrciError,
    SingularInformationError,
)
from .scoremod import cornish_fisher_shift
from .specialfn import norm_quantile

__all__ = [
    "ScoreModel",
    "ConfidenceInterval",
    "SolveReport",
    "fit_mle",
    "fit_nuisance",
    "solve_quantile_estimator",
    "solve_profile_quantile",
    "mbr_estimates",
    "build_interval",
    "Inference",
    "METHODS",
    "KINDS",
]

METHODS = ("ML", "MBR", "QBR", "EXACT")
KINDS = ("lower", "upper", "two-sided")

MLE_TOL = 1e-8
NUISANCE_TOL = 1e-9
ROOT_TOL = 1e-10
MAX_SCORING_ITER = 200
_EXPANSION = 1.6
_MAX_EXPANSIONS = 80
# widest excursion from the starting point, in transformed coordinates
_LOG_SPAN = 40.0
_LINEAR_SPAN = 1e4


class ScoreModel(ABC):
    """A parametric model seen through its score and score cumulants.

    Subclasses set ``names`` and ``bounds`` (open interval per coordinate)
    and implement ``score``, ``information`` and ``cumulants``.  Positive
    coordinates, i.e. bounds ``(0, inf)``, are stepped on the log scale by
    the root finder.
    """

    names: tuple[str, ...] = ()
    bounds: tuple[tuple[float, float], ...] = ()

    @property
    def dim(self) -> int:
        return len(self.names)

    @abstractmethod
    def score(self, theta: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def information(self, theta: np.ndarray) -> np.ndarray:
        """Expected information matrix kappa_{r,s}."""

    @abstractmethod
    def cumulants(self, theta: np.ndarray, psi: int = 0) -> CumulantSet:
        """Cumulants of the (efficient) score for coordinate ``psi``."""

    def joint_table(self, theta: np.ndarray, psi: int = 0) -> JointCumulantTable:
        raise NotImplementedError

    def score_and_information(self, theta):
        return self.score(theta), self.information(theta)

    def score_and_hessian(self, theta):
        """Score and observed information (minus the log-likelihood Hessian).

        Defaults to the expected information, which turns the Newton steps
        of the fitting routines into Fisher scoring.
        """
        return self.score_and_information(theta)

    def loglik(self, theta) -> float | None:
        return None

    def start(self) -> np.ndarray:
        raise NotImplementedError

    def infinite_mle(self) -> int:
        """+1 or -1 when the data put the MLE at that end of a scalar
        parameter space; 0 when it is finite or not known to be infinite."""
        return 0

    def in_space(self, theta) -> bool:
        theta = np.asarray(theta, dtype=float)
        if not np.all(np.isfinite(theta)):
            return False
        return all(lo < t < hi for t, (lo, hi) in zip(theta, self.bounds))


# ---------------------------------------------------------------------------
# Fisher scoring


def _newton_direction(model, theta, free, Uf):
    """Newton step on the free coordinates; Fisher scoring if the observed
    information block is not positive definite."""
    _, J = model.score_and_hessian(theta)
    block = J[np.ix_(free, free)]
    try:
        return linalg.cho_solve(linalg.cho_factor(block), Uf)
    except (linalg.LinAlgError, ValueError):
        pass
    I = model.information(theta)
    try:
        return linalg.solve(I[np.ix_(free, free)], Uf, assume_a="pos")
    except (linalg.LinAlgError, ValueError):
        raise SingularInformationError("information matrix not positive definite") from None


def _fisher_scoring(model, theta, free, tol_fn, max_iter, what):
    theta = np.array(theta, dtype=float)
    free = np.asarray(free, dtype=int)
    trace = []
    ll = model.loglik(theta)
    for it in range(max_iter):
        Uf = model.score(theta)[free]
        gnorm = float(np.max(np.abs(Uf))) if Uf.size else 0.0
        trace.append((it, gnorm))
        if gnorm <= tol_fn(theta):
            return theta, it
        try:
            step = _newton_direction(model, theta, free, Uf)
        except SingularInformationError:
            raise SingularInformationError(f"{what}: information matrix not positive definite") from None
        lam = 1.0
        for _ in range(60):
            cand = theta.copy()
            cand[free] += lam * step
            if model.in_space(cand):
                ll_new = model.loglik(cand)
                if ll is None or ll_new is None or not math.isfinite(ll):
                    break
                if ll_new >= ll - 1e-10 * max(1.0, abs(ll)):
                    ll = ll_new
                    break
            lam *= 0.5
        else:
            raise ConvergenceError(f"{what}: step halving failed", trace)
        theta = cand
        big = np.abs(theta[free]) > 1e8
        if np.any(big):
            j = int(free[np.argmax(big)])
            raise BoundaryError(f"{what}: coordinate {j} diverges", int(np.sign(theta[j])), trace)
    raise ConvergenceError(f"{what}: no convergence after {max_iter} iterations", trace)


def fit_mle(model: ScoreModel, init=None, tol: float = MLE_TOL,
            max_iter: int = MAX_SCORING_ITER) -> np.ndarray:
    """Maximum likelihood estimate by Fisher scoring with step halving."""
    direction = model.infinite_mle()
    if direction:
        raise BoundaryError("MLE: the likelihood increases without bound", direction)
    theta = model.start() if init is None else np.array(init, dtype=float)
    if not model.in_space(theta):
        raise DomainError("initial value outside the parameter space")
    est, _ = _fisher_scoring(
        model, theta, np.arange(model.dim),
        lambda th: tol * max(1.0, float(np.max(np.abs(th)))), max_iter, "MLE")
    return est


def fit_nuisance(model: ScoreModel, psi: int, psi_value: float, init,
                 tol: float = NUISANCE_TOL, max_iter: int = MAX_SCORING_ITER) -> np.ndarray:
    """Constrained MLE of the nuisance parameters with coordinate ``psi`` fixed."""
    theta = np.array(init, dtype=float)
    theta[psi] = psi_value
    free = [j for j in range(model.dim) if j != psi]
    if not free:
        return theta
    try:
        est, _ = _fisher_scoring(model, theta, free, lambda th: tol, max_iter,
                                 f"nuisance fit at psi={psi_value!r}")
    except ConvergenceError as exc:
        raise NestedConvergenceError(str(exc), psi_value, exc.trace) from exc
    except SingularInformationError as exc:
        raise NestedConvergenceError(str(exc), psi_value) from exc
    return est


# ---------------------------------------------------------------------------
# root finding


@dataclass
class SolveReport:
    root: float
    iterations: int
    bracket: tuple[float, float]
    n_sign_changes_found: int
    residual: float = 0.0
    theta: np.ndarray | None = None
    cumulants: CumulantSet | None = None
    converged: bool = True


class _Coordinate:
    """Maps a bounded coordinate to an unbounded stepping variable."""

    def __init__(self, lo: float, hi: float):
        self.lo, self.hi = lo, hi
        if lo == 0.0 and hi == math.inf:
            self.kind = "log"
        elif lo == -math.inf and hi == math.inf:
            self.kind = "identity"
        elif math.isfinite(lo) and math.isfinite(hi):
            self.kind = "logit"
        else:
            self.kind = "shifted-log"

    def to_t(self, x):
        if self.kind == "log":
            return math.log(x)
        if self.kind == "identity":
            return x
        if self.kind == "logit":
            u = (x - self.lo) / (self.hi - self.lo)
            return math.log(u / (1 - u))
        return math.log(x - self.lo) if math.isfinite(self.lo) else -math.log(self.hi - x)

    def from_t(self, t):
        if self.kind == "log":
            return math.exp(t)
        if self.kind == "identity":
            return t
        if self.kind == "logit":
            return self.lo + (self.hi - self.lo) / (1 + math.exp(-t))
        return self.lo + math.exp(t) if math.isfinite(self.lo) else self.hi - math.exp(-t)

    def dx_dt(self, x):
        if self.kind == "log":
            return x
        if self.kind == "identity":
            return 1.0
        if self.kind == "logit":
            u = (x - self.lo) / (self.hi - self.lo)
            return (self.hi - self.lo) * u * (1 - u)
        return (x - self.lo) if math.isfinite(self.lo) else (self.hi - x)

    @property
    def span(self):
        return _LINEAR_SPAN if self.kind == "identity" else _LOG_SPAN


class _ModifiedProfileScore:
    """psi -> U_psi(psi, lambda_hat_psi) + M_{psi,alpha}(psi, lambda_hat_psi)."""

    def __init__(self, model: ScoreModel, psi: int, alpha: float, theta0,
                 nuisance_tol: float = NUISANCE_TOL):
        self.model = model
        self.psi = psi
        self.alpha = alpha
        self.nu = [j for j in range(model.dim) if j != psi]
        self.state = np.array(theta0, dtype=float)
        self.nuisance_tol = nuisance_tol
        self.history: list[np.ndarray] = []
        self.nfev = 0
        self.last = None

    def _warm_start(self, x: float) -> np.ndarray:
        hist = self.history
        if len(hist) >= 2:
            # interpolate the constrained MLEs seen so far (at most three,
            # the most recent ones) as a polynomial in psi
            pts = hist[-3:]
            xs = [h[self.psi] for h in pts]
            if len(set(xs)) == len(xs):
                guess = np.zeros_like(pts[0])
                for i, hi in enumerate(pts):
                    w = 1.0
                    for j, xj in enumerate(xs):
                        if j != i:
                            w *= (x - xj) / (xs[i] - xj)
                    guess += w * hi
                guess[self.psi] = x
                if self.model.in_space(guess):
                    return guess
        # first-order prediction along the constrained-MLE path:
        # d lambda / d psi = -J_ll^{-1} J_lpsi with J the observed information
        theta = self.state.copy()
        step = x - theta[self.psi]
        theta[self.psi] = x
        if step != 0.0:
            nu = self.nu
            _, info = self.model.score_and_hessian(self.state)
            try:
                slope = linalg.solve(info[np.ix_(nu, nu)], info[nu, self.psi], assume_a="pos")
                cand = theta.copy()
                cand[nu] -= slope * step
                if self.model.in_space(cand):
                    return cand
            except (linalg.LinAlgError, ValueError, QbrciError):
                pass
        return theta

    def __call__(self, x: float) -> float:
        m = self.model
        if m.dim > 1:
            theta = fit_nuisance(m, self.psi, x, self._warm_start(x), tol=self.nuisance_tol)
        else:
            theta = np.array([x])
        if not m.in_space(theta):
            raise DomainError(f"psi={x!r} outside the parameter space")
        U = float(m.score(theta)[self.psi])
        c = m.cumulants(theta, self.psi)
        f = U + cornish_fisher_shift(c, self.alpha).M
        if not math.isfinite(f):
            raise DomainError(f"modified score not finite at psi={x!r}")
        self.state = theta
        self.history.append(theta)
        self.nfev += 1
        self.last = (x, f, theta, c)
        return f


_EVAL_ERRORS = (QbrciError, FloatingPointError, OverflowError, ZeroDivisionError)


def _interpolate(points, a, b):
    """Inverse quadratic (or secant) estimate of the zero from the last
    iterates; ``None`` if it falls outside the bracket (a, b)."""
    (t1, f1), (t2, f2) = points[-2:]
    t = None
    if len(points) >= 3:
        t0, f0 = points[-3]
        if f0 != f1 and f1 != f2 and f0 != f2:
            t = (t0 * f1 * f2 / ((f0 - f1) * (f0 - f2))
                 + t1 * f0 * f2 / ((f1 - f0) * (f1 - f2))
                 + t2 * f0 * f1 / ((f2 - f0) * (f2 - f1)))
    if t is None or not min(a, b) < t < max(a, b):
        t = t2 - f2 * (t2 - t1) / (f2 - f1) if f2 != f1 else None
    if t is None or not min(a, b) < t < max(a, b):
        return None
    return t


def _root_search(fun: _ModifiedProfileScore, x0: float, coord: _Coordinate,
                 count_roots: bool = False, tol_factor: float = ROOT_TOL) -> SolveReport:
    f0 = fun(x0)
    c0 = fun.last[3]
    tol = tol_factor * math.sqrt(c0.k2)
    if abs(f0) <= tol:
        return SolveReport(x0, fun.nfev, (x0, x0), 0, abs(f0), fun.last[2], c0)
    # the modified score decreases through a regular root, so the sign at
    # the start tells which side to scan; the first crossing is taken
    direction = 1 if f0 > 0 else -1
    t0 = coord.to_t(x0)
    limit = t0 + direction * coord.span * (1.0 + abs(t0) if coord.kind == "identity" else 1.0)

    def slope_at(x, c):
        return -c.k2 * coord.dx_dt(x)

    ta, fa = t0, f0
    slope = slope_at(x0, c0)
    prev_step = 0.0
    bracket = None
    brackets = 0
    f_old = math.inf
    points = [(t0, f0)]
    for _ in range(_MAX_EXPANSIONS):
        # step to the extrapolated root with a small overshoot so it gets
        # bracketed; expand geometrically when progress stalls or the
        # extrapolation points the wrong way
        est = _interpolate(points, ta, ta + direction * 1e300) if len(points) >= 2 else None
        if est is not None:
            step = 1.1 * abs(est - ta)
        else:
            step = 1.1 * abs(fa / slope) if slope < 0 else 0.0
        if bracket is not None or abs(fa) > 0.5 * abs(f_old) or step == 0.0:
            step = max(step, _EXPANSION * prev_step)
        step = max(step, 1e-8 * (1.0 + abs(ta)))
        tb = ta + direction * step
        if (tb - limit) * direction > 0:
            tb = limit
        fb = None
        for _shrink in range(40):
            try:
                fb = fun(coord.from_t(tb))
                break
            except _EVAL_ERRORS:
                tb = ta + 0.5 * (tb - ta)
        if fb is None:
            break
        if bracket is None:
            points.append((tb, fb))
        if fb == 0.0 or (fb > 0) != (fa > 0):
            brackets += 1
            if bracket is None:
                bracket = (ta, tb, fa, fb)
                if not count_roots:
                    break
        if tb == limit:
            break
        sec = (fb - fa) / (tb - ta)
        slope = sec if (sec < 0 and math.isfinite(sec)) else slope_at(coord.from_t(tb), fun.last[3])
        prev_step = abs(tb - ta)
        f_old = fa
        ta, fa = tb, fb
    if bracket is None:
        raise NoRootError(
            f"no sign change of the modified score found scanning {'up' if direction > 0 else 'down'}"
            f" from {x0!r}", direction, coord.from_t(ta))
    a, b, fa, fb = bracket
    lo_b, hi_b = sorted((coord.from_t(a), coord.from_t(b)))
    # interpolation through the latest iterates, bisection when that fails
    # or the residual stops shrinking; stops on the residual
    stall = 0
    for _ in range(200):
        if abs(fb) <= tol or abs(b - a) <= 4e-16 * (1.0 + abs(b)):
            break
        tc = _interpolate(points, a, b)
        if tc is None or stall >= 2:
            tc = 0.5 * (a + b)
            stall = 0
        f_prev = fb
        fc = fun(coord.from_t(tc))
        points.append((tc, fc))
        if (fc > 0) != (fb > 0):
            a, fa = b, fb
        b, fb = tc, fc
        if abs(fa) < abs(fb):
            # keep b as the best point
            a, b, fa, fb = b, a, fb, fa
        stall = stall + 1 if abs(fb) > 0.5 * abs(f_prev) else 0
    if fun.last[0] != coord.from_t(b):
        fun(coord.from_t(b))
    x, f, theta, c = fun.last
    residual = abs(f)
    return SolveReport(x, fun.nfev, (lo_b, hi_b), brackets, residual, theta, c,
                       converged=residual <= max(tol, tol_factor * math.sqrt(c.k2)) * 1e3)


def solve_profile_quantile(model: ScoreModel, psi: int, alpha: float, init=None,
                           count_roots: bool = False, tol: float = ROOT_TOL) -> SolveReport:
    """Root of the alpha-quantile modified profile score for coordinate ``psi``.

    ``init`` is a full parameter vector (default: the MLE).  The nuisance
    parameters are re-fitted at every trial value of psi, warm-started
    from the previous trials.  The search stops once the modified score is
    within ``tol`` times its standard deviation of zero.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    theta0 = fit_mle(model) if init is None else np.array(init, dtype=float)
    lo, hi = model.bounds[psi]
    fun = _ModifiedProfileScore(model, psi, alpha, theta0, NUISANCE_TOL * tol / ROOT_TOL)
    return _root_search(fun, float(theta0[psi]), _Coordinate(lo, hi), count_roots, tol)


def solve_quantile_estimator(model: ScoreModel, alpha: float, init=None,
                             count_roots: bool = False) -> SolveReport:
    """Root of the alpha-quantile modified score of a one-parameter model."""
    if model.dim != 1:
        raise ValueError("solve_quantile_estimator needs a one-parameter model")
    if init is not None:
        init = np.atleast_1d(np.asarray(init, dtype=float))
    return solve_profile_quantile(model, 0, alpha, init, count_roots)


def mbr_estimates(model: ScoreModel, mle=None) -> np.ndarray:
    """Median bias reduced estimates: the alpha=0.5 root for each coordinate."""
    mle = fit_mle(model) if mle is None else np.asarray(mle, dtype=float)
    return np.array([solve_profile_quantile(model, j, 0.5, mle).root for j in range(model.dim)])


# ---------------------------------------------------------------------------
# intervals


@dataclass(frozen=True)
class ConfidenceInterval:
    method: str
    kind: str
    level: float
    lo: float
    hi: float
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        if not 0.0 < self.level < 1.0:
            raise DomainError(f"level must lie in (0, 1), got {self.level}")
        if not self.lo <= self.hi:
            raise ValueError(f"interval endpoints out of order: {self.lo} > {self.hi}")

    def __contains__(self, value: float) -> bool:
        return self.lo <= value <= self.hi

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def as_tuple(self) -> tuple[float, float]:
        return (self.lo, self.hi)


def _tail_alphas(level: float, kind: str) -> tuple[float | None, float | None]:
    """alpha for the lower and upper limit; None marks an open end.

    The limit solving the alpha-quantile equation is exceeded by the true
    value with probability ~alpha, so upper limits use small alphas.
    """
    if kind == "two-sided":
        return 1.0 - (1.0 - level) / 2.0, (1.0 - level) / 2.0
    if kind == "lower":
        return None, 1.0 - level
    if kind == "upper":
        return level, None
    raise ValueError(f"unknown kind {kind!r}")


class Inference:
    """Caches the MLE, MBR estimates and quantile roots for one model/data pair."""

    def __init__(self, model: ScoreModel, mle=None, tol: float = ROOT_TOL):
        self.model = model
        self.tol = tol
        self.infinite: BoundaryError | None = None
        if mle is None:
            try:
                mle = fit_mle(model)
            except BoundaryError as exc:
                if model.dim != 1:
                    raise
                # the quantile equations can still have roots; search from
                # the model's finite starting value
                self.infinite = exc
                mle = model.start()
        self.mle = np.asarray(mle, dtype=float)
        self._roots: dict[tuple[int, float], SolveReport | QbrciError] = {}
        self._mbr: np.ndarray | None = None

    def root(self, psi: int, alpha: float) -> SolveReport:
        key = (psi, alpha)
        if key not in self._roots:
            try:
                self._roots[key] = solve_profile_quantile(self.model, psi, alpha, self.mle,
                                                         tol=self.tol)
            except NoRootError as exc:
                self._roots[key] = exc
        res = self._roots[key]
        if isinstance(res, Exception):
            raise res
        return res

    @property
    def mbr(self) -> np.ndarray:
        if self._mbr is None:
            self._mbr = np.array([self.root(j, 0.5).root for j in range(self.model.dim)])
        return self._mbr

    def standard_error(self, theta, psi: int) -> float:
        info = self.model.information(np.asarray(theta, dtype=float))
        try:
            cov = linalg.inv(info)
        except linalg.LinAlgError:
            raise SingularInformationError("information matrix is singular")
        if not cov[psi, psi] > 0:
            raise SingularInformationError("non-positive variance from inverse information")
        return math.sqrt(cov[psi, psi])

    def interval(self, psi: int, level: float, kind: str = "two-sided",
                 method: str = "QBR") -> ConfidenceInterval:
        method = method.upper()
        if not 0.0 < level < 1.0:
            raise DomainError(f"level must lie in (0, 1), got {level}")
        a_lo, a_hi = _tail_alphas(level, kind)
        space_lo, space_hi = self.model.bounds[psi]
        diag: dict = {}
        if method in ("ML", "MBR"):
            if self.infinite is not None:
                raise self.infinite
            centre = self.mle if method == "ML" else self.mbr
            se = self.standard_error(centre, psi)
            est = float(centre[psi])
            lo = est - norm_quantile(a_lo) * se if a_lo is not None else space_lo
            hi = est - norm_quantile(a_hi) * se if a_hi is not None else space_hi
            diag.update(estimate=est, se=se)
        elif method == "QBR":
            ends = []
            for a, open_end in ((a_lo, space_lo), (a_hi, space_hi)):
                if a is None:
                    ends.append(open_end)
                    continue
                try:
                    rep = self.root(psi, a)
                    ends.append(rep.root)
                    diag[f"alpha={a}"] = {"iterations": rep.iterations,
                                          "sign_changes": rep.n_sign_changes_found,
                                          "converged": rep.converged}
                except NoRootError as exc:
                    ends.append(open_end)
                    diag[f"alpha={a}"] = {"no_root": True, "direction": exc.direction}
                    diag["open_endpoint"] = True
            lo, hi = ends
        elif method == "EXACT":
            exact = getattr(self.model, "exact_interval", None)
            if exact is None:
                raise ValueError("exact intervals are not available for this model")
            return exact(level, kind)
        else:
            raise ValueError(f"unknown method {method!r}")
        if lo > hi:
            raise ConvergenceError(f"{method} limits cross: lo={lo}, hi={hi}")
        return ConfidenceInterval(method, kind, level, float(lo), float(hi), diag)


def build_interval(model: ScoreModel, psi: int = 0, level: float = 0.95,
                   kind: str = "two-sided", method: str = "QBR",
                   inference: Inference | None = None) -> ConfidenceInterval:
    """Confidence interval for coordinate ``psi`` by the ML, MBR, QBR or EXACT method."""
    inf = inference or Inference(model)
    return inf.interval(psi, level, kind, method)
