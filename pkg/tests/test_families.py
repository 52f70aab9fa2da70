import math

import numpy as np
import pytest
from scipy import integrate, stats

from qbrci.errors import DomainError, IncompleteConstantsError
from qbrci.families import (DELTA_KEYS, BetaFamily, DeltaConstants, GammaFamily, SymmetricFamily,
                            beta_obs_cumulants, compute_deltas, dgf, gamma_obs_cumulants,
                            symmetric_obs_cumulants)

import oracles

BETA_POINTS = [(0.3, 5.0), (0.5, 2.0), (0.8, 10.0)]
SYM_POINTS = [(0.0, 1.0), (1.5, 0.7), (-2.0, 2.5)]
GAMMA_POINTS = [(10.0, 3.0), (1.0, 0.5), (2.5, 8.0)]


@pytest.mark.parametrize("mu,phi", BETA_POINTS)
def test_beta_against_quadrature(mu, phi):
    oracle, checks = oracles.beta_oracle(mu, phi)
    oracles.assert_bartlett(checks)
    oracles.assert_matches(beta_obs_cumulants(mu, phi), oracle)


@pytest.mark.parametrize("name,nu,oracle", [
    ("normal", None, oracles.normal_oracle),
    ("student_t", 3.0, lambda m, p: oracles.student_t_oracle(m, p, 3.0)),
    ("student_t", 5.0, lambda m, p: oracles.student_t_oracle(m, p, 5.0)),
    ("logistic_II", None, oracles.logistic_oracle),
])
@pytest.mark.parametrize("mu,phi", SYM_POINTS)
def test_symmetric_against_quadrature(name, nu, oracle, mu, phi):
    want, checks = oracle(mu, phi)
    oracles.assert_bartlett(checks)
    oracles.assert_matches(SymmetricFamily(dgf(name, nu)).obs_cumulants(mu, phi), want)


@pytest.mark.parametrize("mu,phi", GAMMA_POINTS)
def test_gamma_against_quadrature(mu, phi):
    want, checks = oracles.gamma_oracle(mu, phi)
    oracles.assert_bartlett(checks)
    oracles.assert_matches(gamma_obs_cumulants(mu, phi), want)


def test_beta_examples():
    c = beta_obs_cumulants(0.5, 2.0)
    assert c.mm[0] == pytest.approx(8 * math.pi**2 / 6, rel=1e-13)
    assert round(float(c.mm[0]), 4) == 13.1595
    for phi in (0.3, 2.0, 40.0):
        assert beta_obs_cumulants(0.5, phi).mp[0] == 0.0


def test_beta_zero_identities_exact():
    c = beta_obs_cumulants(np.array([0.1, 0.35, 0.9]), np.array([1.0, 7.0, 0.4]))
    for k in ("m_mm", "m_pp", "p_mm", "p_pp"):
        assert np.all(getattr(c, k) == 0.0)


def test_symmetric_zero_identities_exact():
    c = SymmetricFamily(dgf("student_t", 4.0)).obs_cumulants(np.array([0.0, 3.0]), np.array([1.0, 2.0]))
    for k in ("mp", "mmm", "mpp", "mppp", "m_mm", "m_pp", "p_mp"):
        assert np.all(getattr(c, k) == 0.0)


def test_normal_dgf_examples():
    d = compute_deltas("normal")
    assert d["20000"] == pytest.approx(1.0, rel=1e-10)
    assert d["40000"] == pytest.approx(3.0, rel=1e-10)
    assert d["11001"] == pytest.approx(1.0, rel=1e-10)
    c = symmetric_obs_cumulants(0.0, 2.0, d)
    assert c.mm[0] == pytest.approx(0.25, rel=1e-10)
    assert abs(c.mmmm[0]) <= 1e-10


def test_odd_deltas_exactly_zero():
    d = compute_deltas("student_t", nu=3.0)
    for k in DELTA_KEYS:
        a, _, c, _, e = (int(ch) for ch in k)
        if (a + c + e) % 2:
            assert d[k] == 0.0


def test_student_t_large_nu_is_nearly_normal():
    assert compute_deltas("student_t", nu=200.0)["20000"] == pytest.approx(1.0, abs=1e-2)


def test_power_exp_zero_is_normal():
    a, b = compute_deltas("power_exp", nu=0.0), compute_deltas("normal")
    for k in DELTA_KEYS:
        assert a[k] == pytest.approx(b[k], rel=1e-9, abs=1e-12)


def test_student_t_phi_variance_by_direct_quadrature():
    nu, phi = 3.0, 1.7
    d = compute_deltas("student_t", nu=nu)
    up = lambda e: -(1 - (nu + 1) * e * e / (nu + e * e)) / phi
    direct = integrate.quad(lambda e: up(e) ** 2 * stats.t.pdf(e, nu), -np.inf, np.inf, epsabs=1e-13)[0]
    assert (d["20002"] - 1) / phi**2 == pytest.approx(direct, abs=1e-6)


def test_deltas_match_dgf_density():
    # the dgf integrates to one and its s' is the score of the standardised law
    g = dgf("student_t", 5.0)
    e = np.linspace(-4, 4, 9)
    np.testing.assert_allclose(np.exp(g.s(e)), stats.t.pdf(e, 5.0), rtol=1e-12)
    np.testing.assert_allclose(g.deriv(1, e), -6 * e / (5 + e * e), rtol=1e-12, atol=1e-15)


def test_incomplete_deltas():
    d = DeltaConstants({"20000": 1.0})
    with pytest.raises(IncompleteConstantsError):
        symmetric_obs_cumulants(0.0, 1.0, d)


@pytest.mark.parametrize("name,nu", [("student_t", None), ("student_t", -1.0), ("power_exp", 1.5), ("cauchy", None)])
def test_dgf_domain(name, nu):
    with pytest.raises(DomainError):
        dgf(name, nu)


@pytest.mark.parametrize("mu,phi", [(0.0, 1.0), (1.0, 1.0), (0.5, 0.0), (1.2, 3.0)])
def test_beta_domain(mu, phi):
    with pytest.raises(DomainError):
        beta_obs_cumulants(mu, phi)


def test_tensors_symmetric_layout():
    c = beta_obs_cumulants(np.array([0.3, 0.6]), np.array([5.0, 2.0]))
    c2, c3, c4, c21 = c.tensors()
    assert c2.shape == (2, 2, 2) and c4.shape == (2, 2, 2, 2, 2)
    np.testing.assert_array_equal(c3[:, 0, 1, 0], c.mmp)
    np.testing.assert_array_equal(c4[:, 1, 0, 1, 0], c.mmpp)
    np.testing.assert_array_equal(c21[:, 1, 1, 0], c.p_mp)
    np.testing.assert_array_equal(c21[:, 0, 0, 1], c.m_mp)


@pytest.mark.parametrize("family,mu,phi", [(BetaFamily(), 0.4, 6.0), (GammaFamily(), 2.0, 3.0),
                                           (SymmetricFamily(dgf("normal")), 1.0, 2.0)])
def test_family_derivatives_against_finite_differences(family, mu, phi):
    rng = np.random.default_rng(0)
    y = family.sample(rng, np.full(5, mu), np.full(5, phi))
    u, c2, d2 = family.derivatives(y, np.full(5, mu), np.full(5, phi))
    h = 1e-6
    ll = lambda m, p: np.array([family.loglik(np.array([yi]), np.array([m]), np.array([p])) for yi in y])
    np.testing.assert_allclose(u[:, 0], (ll(mu + h, phi) - ll(mu - h, phi)) / (2 * h), rtol=1e-6, atol=1e-6)
    np.testing.assert_allclose(u[:, 1], (ll(mu, phi + h) - ll(mu, phi - h)) / (2 * h), rtol=1e-6, atol=1e-6)
    oc = family.obs_cumulants(mu, phi)
    np.testing.assert_allclose(c2[0], [[oc.mm[0], oc.mp[0]], [oc.mp[0], oc.pp[0]]], rtol=1e-12)
    np.testing.assert_allclose(d2, np.transpose(d2, (0, 2, 1)))
