"""Quantile modification of a (profile) score via its Cornish-Fisher expansion."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .cumulants import CumulantSet
from .errors import DegenerateInformationError, DomainError
from .specialfn import norm_quantile

__all__ = ["QuantileShift", "cornish_fisher_shift", "modified_score"]


@dataclass(frozen=True)
class QuantileShift:
    alpha: float
    u_alpha: float
    M: float


def cornish_fisher_shift(c: CumulantSet, alpha: float) -> QuantileShift:
    """Additive term M that turns a score into its alpha-quantile modified version.

    M is minus the Cornish-Fisher approximation to the alpha-quantile of the
    score, so ``U + M`` has (approximately) zero as its alpha-quantile.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    k1, k2, k3, k4 = c.k1, c.k2, c.k3, c.k4
    if not k2 > 0:
        raise DegenerateInformationError(f"score variance must be positive, got {k2}")
    u = 0.0 if alpha == 0.5 else norm_quantile(alpha)
    u2 = u * u
    s2 = math.sqrt(k2)
    M = (-k1
         - u * s2
         - k3 / (6.0 * k2) * (u2 - 1.0)
         - k4 / (24.0 * k2 * s2) * (u2 * u - 3.0 * u)
         + k3 * k3 / (36.0 * k2 * k2 * s2) * (2.0 * u2 * u - 5.0 * u))
    return QuantileShift(alpha, u, M)


def modified_score(U_value: float, c: CumulantSet, alpha: float) -> float:
    return U_value + cornish_fisher_shift(c, alpha).M
