"""Monte Carlo coverage and mean-length experiments for the interval methods."""

from __future__ import annotations

import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigError, QbrciError
from .families import BetaFamily
from .regression import GammaModel, beta_regression
from .solver import Inference
from .univariate import exponential_model, normal_variance_model

__all__ = [
    "Scenario",
    "SimConfig",
    "CoverageRow",
    "CoverageReport",
    "SCENARIOS",
    "get_scenario",
    "simulate",
    "noncoverage_discrepancy",
    "MC_ROOT_TOL",
]

METHODS = ("ML", "MBR", "QBR", "EXACT")
KINDS = ("lower", "upper", "two-sided")
CSV_COLUMNS = ("parameter", "method", "kind", "nominal_level", "coverage",
               "discrepancy", "mean_length", "mc_se", "failures")
# coverage only depends on which side of an endpoint the true value falls,
# so the roots need far less precision than the library default
MC_ROOT_TOL = 1e-8
_EVAL_ERRORS = (QbrciError, FloatingPointError, OverflowError, ZeroDivisionError,
                np.linalg.LinAlgError)


@dataclass(frozen=True, eq=False)
class Scenario:
    """Data-generating process: family, true parameters and a fixed design.

    ``family`` is one of exponential, normal_variance, gamma or
    beta_regression; ``X`` and ``Z`` are the mean and precision design
    matrices of a beta regression.
    """

    name: str
    family: str
    truth: tuple[float, ...]
    n: int
    parameters: tuple[str, ...]
    X: np.ndarray | None = None
    Z: np.ndarray | None = None
    default_methods: tuple[str, ...] = ("ML", "MBR", "QBR")
    default_levels: tuple[float, ...] = (0.90, 0.95, 0.99)
    default_kinds: tuple[str, ...] = KINDS

    def __post_init__(self):
        if self.family not in ("exponential", "normal_variance", "gamma", "beta_regression"):
            raise ConfigError(f"unknown scenario family {self.family!r}")
        if len(self.truth) != len(self.parameters):
            raise ConfigError("truth and parameter names differ in length")
        if self.family == "beta_regression":
            if self.X is None or self.Z is None:
                raise ConfigError("beta regression scenarios need X and Z")
            if self.X.shape[0] != self.n or self.Z.shape[0] != self.n:
                raise ConfigError("design rows do not match n")
            if self.X.shape[1] + self.Z.shape[1] != len(self.truth):
                raise ConfigError("design columns do not match the parameter count")

    @property
    def has_exact(self) -> bool:
        return self.family in ("exponential", "normal_variance")

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        th = np.asarray(self.truth, dtype=float)
        if self.family == "exponential":
            return rng.exponential(1.0 / th[0], self.n)
        if self.family == "normal_variance":
            return rng.normal(0.0, math.sqrt(th[0]), self.n)
        if self.family == "gamma":
            return rng.gamma(th[1], th[0] / th[1], self.n)
        p = self.X.shape[1]
        mu = 1.0 / (1.0 + np.exp(-(self.X @ th[:p])))
        phi = np.exp(self.Z @ th[p:])
        return BetaFamily().sample(rng, mu, phi)

    def model(self, y):
        if self.family == "exponential":
            return exponential_model(y)
        if self.family == "normal_variance":
            return normal_variance_model(y)
        if self.family == "gamma":
            return GammaModel(y)
        return beta_regression(y, self.X, self.Z, "logit", "log", self.parameters)


def _exp5() -> Scenario:
    return Scenario("exp5", "exponential", (1.0,), 5, ("theta",),
                    default_methods=("ML", "MBR", "QBR", "EXACT"))


def _gamma15() -> Scenario:
    return Scenario("gamma15", "gamma", (10.0, 3.0), 15, ("mu", "phi"))


def _betareg25() -> Scenario:
    # covariates are drawn once from a fixed stream and kept for all replicates
    rng = np.random.default_rng(np.random.SeedSequence(20250125))
    n = 25
    x = rng.uniform(-0.5, 0.5, n)
    z = rng.uniform(1.0, 2.0, n)
    one = np.ones(n)
    return Scenario("betareg25", "beta_regression", (1.0, 1.0, 1.0, 2.0), n,
                    ("beta0", "beta1", "gamma0", "gamma1"),
                    X=np.column_stack([one, x]), Z=np.column_stack([one, z]))


def _readingskills() -> Scenario:
    from .datasets import reading_skills_model

    m = reading_skills_model()
    truth = Inference(m).mle
    X = m.spec.mean_predictor.X
    Z = m.spec.disp_predictor.X
    return Scenario("readingskills", "beta_regression", tuple(float(t) for t in truth), m.spec.n,
                    tuple(m.names), X=X, Z=Z, default_kinds=("two-sided",))


SCENARIOS = {
    "exp5": _exp5,
    "gamma15": _gamma15,
    "betareg25": _betareg25,
    "readingskills": _readingskills,
}


@lru_cache(maxsize=None)
def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]()
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}") from None


@dataclass(frozen=True)
class SimConfig:
    """One Monte Carlo experiment.  Empty ``methods``, ``levels`` or
    ``kinds`` fall back to the scenario defaults."""

    scenario: str | Scenario
    methods: tuple[str, ...] = ()
    levels: tuple[float, ...] = ()
    kinds: tuple[str, ...] = ()
    replicates: int = 10_000
    seed: int = 0
    workers: int = 1
    tol: float = MC_ROOT_TOL

    def resolve(self) -> tuple[Scenario, tuple, tuple, tuple]:
        sc = self.scenario if isinstance(self.scenario, Scenario) else get_scenario(self.scenario)
        methods = tuple(m.upper() for m in (self.methods or sc.default_methods))
        levels = tuple(float(x) for x in (self.levels or sc.default_levels))
        kinds = tuple(self.kinds or sc.default_kinds)
        if self.replicates < 1:
            raise ConfigError("replicates must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a non-negative 64-bit integer")
        for m in methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}")
            if m == "EXACT" and not sc.has_exact:
                raise ConfigError(f"scenario {sc.name!r} has no exact interval")
        for lv in levels:
            if not 0.0 < lv < 1.0:
                raise ConfigError(f"level {lv} outside (0, 1)")
        for k in kinds:
            if k not in KINDS:
                raise ConfigError(f"unknown kind {k!r}")
        return sc, methods, levels, kinds


def noncoverage_discrepancy(coverage: float, nominal_level: float) -> float:
    """Empirical non-coverage divided by the nominal non-coverage."""
    if not 0.0 < nominal_level < 1.0:
        raise ValueError(f"nominal level must lie in (0, 1), got {nominal_level}")
    return (1.0 - coverage) / (1.0 - nominal_level)


@dataclass(frozen=True)
class CoverageRow:
    parameter: str
    method: str
    kind: str
    nominal_level: float
    coverage: float
    discrepancy: float
    mean_length: float
    mc_se: float
    failures: int

    def values(self) -> tuple:
        return tuple(getattr(self, c) for c in CSV_COLUMNS)


@dataclass
class CoverageReport:
    scenario: str
    replicates: int
    seed: int
    rows: list[CoverageRow] = field(default_factory=list)

    def get(self, parameter: str, method: str, level: float, kind: str = "two-sided") -> CoverageRow:
        for r in self.rows:
            if (r.parameter == parameter and r.method == method.upper()
                    and r.kind == kind and math.isclose(r.nominal_level, level)):
                return r
        raise KeyError((parameter, method, level, kind))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write(",".join(CSV_COLUMNS) + "\n")
        for r in self.rows:
            buf.write(",".join(_fmt(v) for v in r.values()) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _fmt(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def _cells(sc: Scenario, methods, levels, kinds):
    return [(p, m, k, lv) for p in range(len(sc.parameters))
            for m in methods for k in kinds for lv in levels]


def _replicate(sc: Scenario, cells, seed: int, r: int, tol: float):
    """Hit indicator (nan on failure) and interval length for each cell."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, r]))
    y = sc.draw(rng)
    hit = np.full(len(cells), np.nan)
    length = np.full(len(cells), np.nan)
    try:
        inf = Inference(sc.model(y), tol=tol)
    except _EVAL_ERRORS:
        return hit, length
    with np.errstate(all="ignore"):
        for j, (p, method, kind, level) in enumerate(cells):
            try:
                ci = inf.interval(p, level, kind, method)
            except _EVAL_ERRORS:
                continue
            t = sc.truth[p]
            hit[j] = float(ci.lo < t < ci.hi)
            length[j] = ci.hi - ci.lo
    return hit, length


def _run_chunk(args):
    sc, cells, seed, start, stop, tol = args
    hits = np.empty((stop - start, len(cells)))
    lengths = np.empty_like(hits)
    for i, r in enumerate(range(start, stop)):
        hits[i], lengths[i] = _replicate(sc, cells, seed, r, tol)
    return hits, lengths


def _chunks(reps: int, workers: int):
    # fixed chunking by replicate index; results are stacked in index order
    size = max(1, min(250, -(-reps // (4 * workers))))
    return [(a, min(a + size, reps)) for a in range(0, reps, size)]


def simulate(config: SimConfig) -> CoverageReport:
    """Run the experiment; replicate r draws from the stream (seed, r)."""
    sc, methods, levels, kinds = config.resolve()
    cells = _cells(sc, methods, levels, kinds)
    jobs = [(sc, cells, config.seed, a, b, config.tol)
            for a, b in _chunks(config.replicates, config.workers)]
    workers = min(config.workers, len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(j) for j in jobs]
    hits = np.vstack([h for h, _ in parts])
    lengths = np.vstack([ln for _, ln in parts])

    report = CoverageReport(sc.name, config.replicates, config.seed)
    for j, (p, method, kind, level) in enumerate(cells):
        ok = ~np.isnan(hits[:, j])
        used = int(ok.sum())
        failures = config.replicates - used
        if used:
            cov = float(np.sum(hits[ok, j])) / used
            se = math.sqrt(cov * (1.0 - cov) / used)
            disc = noncoverage_discrepancy(cov, level)
            mlen = float(np.mean(lengths[ok, j])) if kind == "two-sided" else math.nan
        else:
            cov = se = disc = mlen = math.nan
        report.rows.append(CoverageRow(sc.parameters[p], method, kind, level,
                                       cov, disc, mlen, se, failures))
    return report
