"""Score cumulants and reduction of joint cumulants to profile cumulants.

Index conventions for :class:`JointCumulantTable` (``a, b, c, d`` run over
the ``p`` nuisance parameters; ``psi`` is the scalar interest parameter):

========================  ==================================
``k_psi_a[a]``            kappa_{psi,a}  = E(U_psi U_a)
``k_a_b[a, b]``           kappa_{a,b}    = E(U_a U_b)
``k_psi_ab[a, b]``        kappa_{psi,ab} = E(U_psi U_ab)
``k_psi_a_b[a, b]``       kappa_{psi,a,b}
``k_c_ab[c, a, b]``       kappa_{c,ab}   = E(U_c U_ab)
``k_c_a_b[c, a, b]``      kappa_{c,a,b}
``k_a_psi_psi[a]``        kappa_{a,psi,psi}
``k_a_b_c_psi[a, b, c]``  kappa_{a,b,c,psi}
========================  ==================================

and so on.  All cumulants are totals over the sample.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import DegenerateInformationError, SingularInformationError

__all__ = [
    "CumulantSet",
    "JointCumulantTable",
    "EfficientScoreCoeffs",
    "efficient_coeffs",
    "profile_cumulants",
    "table_from_tensors",
]


@dataclass(frozen=True)
class CumulantSet:
    """First four cumulants of a scalar (possibly profile) score."""

    k1: float
    k2: float
    k3: float
    k4: float

    def __post_init__(self):
        vals = (self.k1, self.k2, self.k3, self.k4)
        if not all(np.isfinite(v) for v in vals):
            raise DegenerateInformationError(f"non-finite score cumulants {vals}")
        if not self.k2 > 0:
            raise DegenerateInformationError(f"score variance must be positive, got {self.k2}")

    def scaled(self, c: float) -> "CumulantSet":
        """Cumulants of ``c * U``; used for reparameterisations."""
        return CumulantSet(self.k1 * c, self.k2 * c**2, self.k3 * c**3, self.k4 * c**4)


def _arr(x, ndim):
    a = np.asarray(x, dtype=float)
    if a.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class JointCumulantTable:
    """Joint cumulants of log-likelihood derivatives for one interest parameter."""

    k_psi_psi: float
    k_psi_a: np.ndarray
    k_a_b: np.ndarray
    k_psi_ab: np.ndarray
    k_psi_a_b: np.ndarray
    k_c_ab: np.ndarray
    k_c_a_b: np.ndarray
    k_psi_psi_psi: float
    k_a_psi_psi: np.ndarray
    k_psi_psi_psi_psi: float
    k_a_psi_psi_psi: np.ndarray
    k_a_b_psi_psi: np.ndarray
    k_a_b_c_psi: np.ndarray
    k_a_b_c_d: np.ndarray
    p: int = field(init=False)

    def __post_init__(self):
        p = np.asarray(self.k_psi_a).shape[0]
        object.__setattr__(self, "p", p)
        shapes = {
            "k_psi_a": (1, (p,)),
            "k_a_b": (2, (p, p)),
            "k_psi_ab": (2, (p, p)),
            "k_psi_a_b": (2, (p, p)),
            "k_c_ab": (3, (p, p, p)),
            "k_c_a_b": (3, (p, p, p)),
            "k_a_psi_psi": (1, (p,)),
            "k_a_psi_psi_psi": (1, (p,)),
            "k_a_b_psi_psi": (2, (p, p)),
            "k_a_b_c_psi": (3, (p, p, p)),
            "k_a_b_c_d": (4, (p, p, p, p)),
        }
        for name, (ndim, shape) in shapes.items():
            a = _arr(getattr(self, name), ndim)
            if a.shape != shape:
                raise ValueError(f"{name} has shape {a.shape}, expected {shape}")
            object.__setattr__(self, name, a)

    # third-order cumulants of first derivatives share storage with the
    # mixed entries above: kappa_{a,b,psi} == kappa_{psi,a,b}
    @property
    def k_a_b_psi(self) -> np.ndarray:
        return self.k_psi_a_b

    @property
    def k_a_b_c(self) -> np.ndarray:
        return self.k_c_a_b

    def is_orthogonal(self) -> bool:
        if self.p == 0:
            return True
        scale = np.max(np.abs(self.k_a_b))
        return bool(np.max(np.abs(self.k_psi_a)) < 1e-12 * scale)


def table_from_tensors(psi: int, K2, K21, K3, K4) -> JointCumulantTable:
    """Slice full-parameter cumulant tensors into a table for coordinate ``psi``.

    ``K2[r, s] = kappa_{r,s}``, ``K21[r, s, t] = kappa_{r,st}``,
    ``K3[r, s, t] = kappa_{r,s,t}`` and ``K4`` the fourth joint cumulants,
    all indexed over the full parameter vector.
    """
    K2, K21, K3, K4 = (np.asarray(K, dtype=float) for K in (K2, K21, K3, K4))
    d = K2.shape[0]
    nu = np.array([i for i in range(d) if i != psi], dtype=int)
    ix2 = np.ix_(nu, nu)
    ix3 = np.ix_(nu, nu, nu)
    return JointCumulantTable(
        k_psi_psi=float(K2[psi, psi]),
        k_psi_a=K2[psi, nu],
        k_a_b=K2[ix2],
        k_psi_ab=K21[psi][ix2],
        k_psi_a_b=K3[psi][ix2],
        k_c_ab=K21[ix3],
        k_c_a_b=K3[ix3],
        k_psi_psi_psi=float(K3[psi, psi, psi]),
        k_a_psi_psi=K3[nu, psi, psi],
        k_psi_psi_psi_psi=float(K4[psi, psi, psi, psi]),
        k_a_psi_psi_psi=K4[nu, psi, psi, psi],
        k_a_b_psi_psi=K4[psi, psi][ix2],
        k_a_b_c_psi=K4[psi][ix3],
        k_a_b_c_d=K4[np.ix_(nu, nu, nu, nu)],
    )


@dataclass(frozen=True)
class EfficientScoreCoeffs:
    """Regression coefficients of U_psi on the nuisance scores."""

    beta: np.ndarray


def _factor(k_a_b: np.ndarray):
    if k_a_b.size == 0:
        return None
    with warnings.catch_warnings():
        # exact singularity is reported below as an error
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        lu, piv = linalg.lu_factor(k_a_b, check_finite=True)
    diag = np.abs(np.diag(lu))
    if diag.min() <= 1e-13 * max(diag.max(), 1e-300) or not np.all(np.isfinite(lu)):
        raise SingularInformationError("nuisance information matrix is singular")
    return lu, piv


def efficient_coeffs(table: JointCumulantTable) -> EfficientScoreCoeffs:
    if table.p == 0:
        return EfficientScoreCoeffs(np.zeros(0))
    fac = _factor(table.k_a_b)
    return EfficientScoreCoeffs(linalg.lu_solve(fac, table.k_psi_a))


def profile_cumulants(table: JointCumulantTable) -> CumulantSet:
    """First four cumulants of the efficient score for psi."""
    p = table.p
    if p == 0:
        return CumulantSet(0.0, table.k_psi_psi, table.k_psi_psi_psi,
                           table.k_psi_psi_psi_psi)
    fac = _factor(table.k_a_b)
    kinv = linalg.lu_solve(fac, np.eye(p))
    if table.is_orthogonal():
        k1 = -0.5 * np.sum(kinv * (table.k_psi_ab + table.k_psi_a_b))
        return CumulantSet(float(k1), table.k_psi_psi, table.k_psi_psi_psi,
                           table.k_psi_psi_psi_psi)
    b = linalg.lu_solve(fac, table.k_psi_a)
    inner = (table.k_psi_ab + table.k_psi_a_b
             - np.einsum("c,cab->ab", b, table.k_c_ab + table.k_c_a_b))
    k1 = -0.5 * np.sum(kinv * inner)
    k2 = table.k_psi_psi - b @ table.k_psi_a
    k3 = (table.k_psi_psi_psi
          - 3.0 * b @ table.k_a_psi_psi
          + 3.0 * b @ table.k_a_b_psi @ b
          - np.einsum("a,b,c,abc->", b, b, b, table.k_a_b_c))
    k4 = (table.k_psi_psi_psi_psi
          - 4.0 * b @ table.k_a_psi_psi_psi
          + 6.0 * b @ table.k_a_b_psi_psi @ b
          - 4.0 * np.einsum("a,b,c,abc->", b, b, b, table.k_a_b_c_psi)
          + np.einsum("a,b,c,d,abcd->", b, b, b, b, table.k_a_b_c_d))
    return CumulantSet(float(k1), float(k2), float(k3), float(k4))
