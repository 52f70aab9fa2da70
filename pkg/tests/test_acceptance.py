"""Acceptance checks, one pytest marker per criterion.

Run with ``pytest tests/test_acceptance.py`` (or ``python tests/test_acceptance.py``);
the terminal summary prints one PASS/FAIL/SKIP line per criterion.  Cells whose
reference value cannot be reproduced by a correct implementation are strict
xfails: pytest stays green and the criterion line reports FAIL with the reason.
"""

import io
import math
import sys
import time
from contextlib import redirect_stdout
from importlib import resources

import numpy as np
import pytest
from scipy import integrate, stats

from qbrci.cli import main
from qbrci.datasets import reading_skills_model
from qbrci.families import BetaFamily, SymmetricFamily, dgf
from qbrci.simulate import SimConfig, simulate
from qbrci.solver import Inference, solve_quantile_estimator
from qbrci.specialfn import norm_quantile
from qbrci.tables import interval_table
from qbrci.univariate import (ReparameterizedModel, exponential_model, normal_variance_model,
                              skew_normal_moments)

import oracles
from reference_tables import LEVELS, T1, T2

ALPHAS = (0.005, 0.01, 0.025, 0.05, 0.5, 0.95, 0.975, 0.99, 0.995)

# reference cells a correct implementation cannot reproduce
MISPRINT_T1 = {(7, "MBR", 0.99, "lo"): "n=7 99% adjusted lower limit is 0.0252, not 0.02"}
MISPRINT_T2 = {(20, "ML", 0.99, "lo"): "n=20 99% first-order lower limit is 0.1855, not 0.18"}
MBR_T2 = "adjusted normal-variance limits use standard error theta/sqrt(n) in place of theta*sqrt(2/n)"


def _cells(table, misprints, mbr_reason=None):
    out = []
    for n in table:
        for method in ("ML", "MBR", "QBR", "EXACT"):
            for j, level in enumerate(LEVELS):
                for side in ("lo", "hi"):
                    want = table[n][method][j][0 if side == "lo" else 1]
                    reason = misprints.get((n, method, level, side))
                    if method == "MBR" and mbr_reason:
                        reason = mbr_reason
                    marks = [pytest.mark.xfail(reason=reason, strict=True)] if reason else []
                    out.append(pytest.param(n, method, level, side, want, marks=marks,
                                            id=f"n{n}-{method}-{level}-{side}"))
    return out


def _grid(which):
    return {(r.n, r.method, r.level): r for r in interval_table(which)}


@pytest.fixture(scope="module")
def grid1():
    return _grid("table1")


@pytest.fixture(scope="module")
def grid2():
    return _grid("table2")


def _check_cell(grid, n, method, level, side, want):
    r = grid[(n, method, level)]
    got = r.lo if side == "lo" else r.hi
    assert abs(got - want) <= 0.005 + 1e-12, f"{got:.4f} vs {want}"


def _cli_timing(which):
    buf = io.StringIO()
    t0 = time.perf_counter()
    with redirect_stdout(buf):
        status = main(["table", "--which", which])
    return status, time.perf_counter() - t0, buf.getvalue()


def _cli_cells(text):
    cells = {}
    n = None
    labels = {"First-order": "ML", "Adjusted first-order": "MBR", "Third-order": "QBR", "Exact": "EXACT"}
    for line in text.splitlines()[1:]:
        if not line.strip():
            continue
        head, _, rest = line.partition("[")
        tok = head.split()
        if tok[0].isdigit():
            n = int(tok[0])
            tok = tok[1:]
        method = labels[" ".join(tok)]
        for level, part in zip(LEVELS, ("[" + rest).split("]")[:3]):
            lo, hi = (float(v) for v in part.strip(" [").split(","))
            cells[(n, method, level)] = (lo, hi)
    return cells


# ---------------------------------------------------------------------------
# 1-2: interval grids


@pytest.mark.criterion(1)
@pytest.mark.parametrize("n,method,level,side,want", _cells(T1, MISPRINT_T1))
def test_c1_table1_cell(grid1, n, method, level, side, want):
    _check_cell(grid1, n, method, level, side, want)


@pytest.mark.criterion(1)
def test_c1_table1_cli_runtime(grid1):
    status, elapsed, text = _cli_timing("table1")
    assert status == 0 and elapsed < 1.0
    cells = _cli_cells(text)
    assert len(cells) == 36
    for key, r in grid1.items():
        assert cells[key] == (round(r.lo, 2), round(r.hi, 2))


@pytest.mark.criterion(2)
@pytest.mark.parametrize("n,method,level,side,want", _cells(T2, MISPRINT_T2, MBR_T2))
def test_c2_table2_cell(grid2, n, method, level, side, want):
    _check_cell(grid2, n, method, level, side, want)


@pytest.mark.criterion(2)
def test_c2_table2_cli_runtime(grid2):
    status, elapsed, text = _cli_timing("table2")
    assert status == 0 and elapsed < 1.0
    assert len(_cli_cells(text)) == 36


# ---------------------------------------------------------------------------
# 3, 5, 6: closed forms and equivariance


def exp_closed(n, alpha):
    u = norm_quantile(alpha)
    return 1 - (u - (u * u - 1) / (3 * math.sqrt(n)) + (u**3 - 7 * u) / (36 * n)) / math.sqrt(n)


def nv_closed(n, alpha):
    u = norm_quantile(alpha)
    k = math.sqrt(2) * (u + math.sqrt(2) * (u * u - 1) / (3 * math.sqrt(n)) + (u**3 - 7 * u) / (18 * n))
    return 1 / (1 + k / math.sqrt(n))


@pytest.mark.criterion(3)
@pytest.mark.parametrize("family", ["exponential", "normal_variance"])
def test_c3_closed_form_roots(family):
    make, closed = ((exponential_model, exp_closed) if family == "exponential"
                    else (normal_variance_model, nv_closed))
    worst = 0.0
    for n in range(3, 51):
        m = make(np.ones(n))
        for a in ALPHAS:
            worst = max(worst, abs(solve_quantile_estimator(m, a).root - closed(n, a)))
    assert worst <= 1e-8, worst


@pytest.mark.criterion(5)
def test_c5_median_closed_forms():
    for n in range(3, 31):
        e = solve_quantile_estimator(exponential_model(np.ones(n)), 0.5).root
        v = solve_quantile_estimator(normal_variance_model(np.ones(n)), 0.5).root
        assert abs(e - (1 - 1 / (3 * n))) <= 1e-8
        assert abs(v - 1 / (1 - 2 / (3 * n))) <= 1e-8


@pytest.mark.criterion(6)
@pytest.mark.parametrize("alpha", [0.025, 0.5, 0.975])
def test_c6_log_equivariance(alpha):
    y = np.array([0.4, 1.3, 0.9, 2.2, 0.6])
    base = exponential_model(y)
    m = ReparameterizedModel(base, math.exp, math.exp, math.log)
    omega = solve_quantile_estimator(m, alpha).root
    assert abs(omega - math.log(solve_quantile_estimator(base, alpha).root)) <= 1e-8


# ---------------------------------------------------------------------------
# 4: exact coverage of the quantile estimator


@pytest.mark.criterion(4)
def test_c4_exact_coverage_exponential():
    n, alpha = 5, 0.975
    c = solve_quantile_estimator(exponential_model(np.ones(n)), alpha).root
    # theta_hat = n / S with S ~ Gamma(n, theta); the limit theta_hat c lies below theta iff S > n c
    qbr = stats.gamma.sf(n * c, n)
    ml = stats.gamma.sf(n * (1 - norm_quantile(alpha) / math.sqrt(n)), n)
    assert abs(qbr - 0.9740) <= 5e-4
    assert abs(qbr - alpha) <= 0.005
    assert abs(ml - alpha) > 0.01


# ---------------------------------------------------------------------------
# 7: per-observation cumulants against quadrature

BETA_POINTS = [(0.3, 5.0), (0.5, 2.0), (0.8, 10.0)]
SYM_POINTS = [(0.0, 1.0), (1.5, 0.7), (-2.0, 2.5)]


@pytest.mark.criterion(7)
def test_c7_bartlett_suite():
    t0 = time.perf_counter()
    for mu, phi in BETA_POINTS:
        want, checks = oracles.beta_oracle(mu, phi)
        oracles.assert_bartlett(checks)
        oracles.assert_matches(BetaFamily().obs_cumulants(mu, phi), want, tol=1e-6)
    cases = [("normal", None, oracles.normal_oracle),
             ("student_t", 3.0, lambda m, p: oracles.student_t_oracle(m, p, 3.0)),
             ("student_t", 5.0, lambda m, p: oracles.student_t_oracle(m, p, 5.0))]
    for name, nu, oracle in cases:
        fam = SymmetricFamily(dgf(name, nu))
        for mu, phi in SYM_POINTS:
            want, checks = oracle(mu, phi)
            oracles.assert_bartlett(checks)
            oracles.assert_matches(fam.obs_cumulants(mu, phi), want, tol=1e-6)
    assert time.perf_counter() - t0 < 30.0


# ---------------------------------------------------------------------------
# 8: reading-skills estimates and limits

T4 = {
    "beta0": (1.12, 1.11, (0.84, 1.40), (0.82, 1.40), (0.73, 1.42)),
    "beta1": (-0.74, -0.73, (-1.02, -0.46), (-1.02, -0.44), (-1.04, -0.35)),
    "beta2": (0.49, 0.47, (0.23, 0.75), (0.19, 0.75), (0.00, 0.86)),
    "beta3": (-0.58, -0.57, (-0.84, -0.32), (-0.84, -0.29), (-0.95, -0.04)),
    "gamma0": (3.30, 3.11, (2.87, 3.74), (2.67, 3.55), (2.41, 3.60)),
    "gamma1": (1.75, 1.69, (1.23, 2.26), (1.18, 2.21), (0.92, 2.27)),
    "gamma2": (1.23, 1.06, (0.71, 1.75), (0.53, 1.60), (-0.33, 2.38)),
}


@pytest.fixture(scope="module")
def reading_skills():
    m = reading_skills_model()
    return m, Inference(m)


@pytest.mark.criterion(8)
@pytest.mark.parametrize("name", list(T4))
def test_c8_reading_skills(reading_skills, name):
    m, inf = reading_skills
    p = m.names.index(name)
    ml, mbr, *limits = T4[name]
    assert abs(inf.mle[p] - ml) <= 0.02
    assert abs(inf.mbr[p] - mbr) <= 0.02
    for method, want in zip(("ML", "MBR", "QBR"), limits):
        got = inf.interval(p, 0.95, method=method).as_tuple()
        np.testing.assert_allclose(got, want, atol=0.02, rtol=0, err_msg=method)


# ---------------------------------------------------------------------------
# 9: orange data


def _vendored(name):
    return resources.files("qbrci").joinpath(f"data/{name}").is_file()


@pytest.mark.criterion(9)
def test_c9_orange():
    if not _vendored("orange.csv"):
        pytest.skip("orange data not vendored; Student-t reproduction skipped")


# ---------------------------------------------------------------------------
# 10: coverage ordering by simulation

RS_REPS, RS_SEED = 10_000, 2024


@pytest.fixture(scope="module")
def rs_report():
    cfg = SimConfig("readingskills", methods=("ML", "QBR"), levels=(0.90, 0.95),
                    kinds=("two-sided",), replicates=RS_REPS, seed=RS_SEED)
    t0 = time.perf_counter()
    report = simulate(cfg)
    print(f"\nreading-skills simulation: {RS_REPS} replicates in {time.perf_counter() - t0:.0f} s",
          file=sys.stderr)
    return report


@pytest.mark.criterion(10)
def test_c10_gamma0_coverage_95(rs_report):
    ml = rs_report.get("gamma0", "ML", 0.95)
    qbr = rs_report.get("gamma0", "QBR", 0.95)
    assert ml.coverage < 0.90
    assert 0.94 <= qbr.coverage <= 0.99


@pytest.mark.criterion(10)
@pytest.mark.parametrize("name", list(T4))
def test_c10_discrepancy_ordering_90(rs_report, name):
    ml = rs_report.get(name, "ML", 0.90)
    qbr = rs_report.get(name, "QBR", 0.90)
    assert abs(qbr.discrepancy - 1) < abs(ml.discrepancy - 1), (ml.coverage, qbr.coverage)


@pytest.mark.criterion(10)
def test_c10_failures_reported(rs_report):
    assert all(0 <= r.failures <= RS_REPS for r in rs_report.rows)
    assert all(r.failures < 0.01 * RS_REPS for r in rs_report.rows)


# ---------------------------------------------------------------------------
# 11: skew-normal


@pytest.mark.criterion(11)
def test_c11_skew_normal_at_zero():
    a = skew_normal_moments(0.0).a
    assert abs(a[(2, 2)] - 2 / math.pi) <= 1e-8
    assert abs(a[(3, 3)]) <= 1e-8
    # independent check: E[(y zeta(0))^2] = (2/pi) E[y^2] with y standard normal
    direct = integrate.quad(lambda y: (y * math.sqrt(2 / math.pi)) ** 2 * stats.norm.pdf(y),
                            -np.inf, np.inf, epsabs=1e-13)[0]
    assert abs(direct - 2 / math.pi) <= 1e-8


@pytest.mark.criterion(11)
def test_c11_original_data_interval():
    if not _vendored("skew_normal.csv"):
        pytest.skip("20-observation skew-normal sample not vendored; interval check skipped")


# ---------------------------------------------------------------------------
# 12: determinism of the simulate command


@pytest.mark.criterion(12)
@pytest.mark.parametrize("scenario,reps", [("exp5", 300), ("gamma15", 12), ("betareg25", 8)])
def test_c12_simulate_byte_identical(tmp_path, scenario, reps):
    outs = []
    for i, workers in enumerate((1, 4, 1)):
        path = tmp_path / f"{scenario}_{i}.csv"
        argv = ["simulate", "--scenario", scenario, "--reps", str(reps), "--seed", "42",
                "--workers", str(workers), "--out", str(path)]
        assert main(argv) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1] == outs[2]


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-rs"]))
