"""Bundled example data."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .regression import RegressionModel, beta_regression

__all__ = ["ReadingSkills", "load_reading_skills", "reading_skills_model"]


@dataclass(frozen=True)
class ReadingSkills:
    """Reading accuracy of 44 children, 19 of them dyslexic.

    ``dyslexia`` is coded -1 for the control group and +1 for the
    dyslexic group; ``iq`` is a standardised nonverbal IQ score.
    """

    accuracy: np.ndarray
    dyslexia: np.ndarray
    iq: np.ndarray


def load_reading_skills() -> ReadingSkills:
    text = resources.files("qbrci").joinpath("data/reading_skills.csv").read_text()
    rows = list(csv.DictReader(text.splitlines()))
    acc = np.array([float(r["accuracy"]) for r in rows])
    dys = np.array([float(r["dyslexia"]) for r in rows])
    iq = np.array([float(r["iq"]) for r in rows])
    return ReadingSkills(acc, dys, iq)


def reading_skills_model(data: ReadingSkills | None = None) -> RegressionModel:
    """Beta regression: mean on dyslexia * iq (logit), precision on dyslexia + iq (log)."""
    d = data or load_reading_skills()
    one = np.ones_like(d.iq)
    X = np.column_stack([one, d.dyslexia, d.iq, d.dyslexia * d.iq])
    Z = np.column_stack([one, d.dyslexia, d.iq])
    names = ("beta0", "beta1", "beta2", "beta3", "gamma0", "gamma1", "gamma2")
    return beta_regression(d.accuracy, X, Z, "logit", "log", names)
