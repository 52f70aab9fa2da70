"""Command-line interface: ``qbrci ci``, ``qbrci table`` and ``qbrci simulate``."""

from __future__ import annotations

import argparse
import csv
import io
import math
import re
import sys
from dataclasses import dataclass

import numpy as np

from .errors import (ConfigError, ConvergenceError, DatasetError, DomainError, FormulaError,
                     NoRootError, QbrciError, SingularInformationError)
from .regression import GammaModel, beta_regression, symmetric_regression
from .simulate import SCENARIOS, SimConfig, simulate
from .solver import Inference, _tail_alphas
from .tables import TABLES, format_table, interval_table
from .univariate import exponential_model, normal_variance_model, skew_normal_model

__all__ = ["Dataset", "Formula", "parse_formula", "read_dataset", "write_dataset", "main"]

FAMILIES = ("exponential", "normal_variance", "skew_normal", "gamma", "beta", "student_t")
SOLVER_ERRORS = (ConvergenceError, NoRootError, SingularInformationError)

# ---------------------------------------------------------------------------
# data


@dataclass
class Dataset:
    columns: tuple[str, ...]
    data: dict[str, np.ndarray]

    @property
    def n(self) -> int:
        return len(next(iter(self.data.values()))) if self.data else 0

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[name]


def read_dataset(path) -> Dataset:
    """Strict CSV reader: header row, comma separator, numeric fields only."""
    try:
        with open(path, newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc.strerror}") from None
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise DatasetError(f"{path}: missing header row")
    header = [h.strip() for h in lines[0].split(",")]
    for h in header:
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_.]*", h):
            raise DatasetError(f"{path}: invalid column name {h!r}")
    if len(set(header)) != len(header):
        raise DatasetError(f"{path}: duplicate column names")
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != len(header):
            raise DatasetError(f"{path}, line {i}: expected {len(header)} fields, got {len(fields)}")
        vals = []
        for name, f in zip(header, fields):
            f = f.strip()
            if f == "":
                raise DatasetError(f"{path}, line {i}: missing value in column {name!r}")
            try:
                v = float(f)
            except ValueError:
                raise DatasetError(f"{path}, line {i}: non-numeric value {f!r} in column {name!r}") from None
            if not math.isfinite(v):
                raise DatasetError(f"{path}, line {i}: non-finite value in column {name!r}")
            vals.append(v)
        rows.append(vals)
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    arr = np.array(rows)
    return Dataset(tuple(header), {h: arr[:, j].copy() for j, h in enumerate(header)})


def write_dataset(ds: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(ds.columns) + "\n")
        for i in range(ds.n):
            fh.write(",".join(repr(float(ds[c][i])) for c in ds.columns) + "\n")


# ---------------------------------------------------------------------------
# formulas


@dataclass(frozen=True)
class Formula:
    response: str | None
    terms: tuple[str, ...]  # covariate columns; the intercept is implicit


_TOKEN = re.compile(r"\s*(?:(?P<name>[A-Za-z_][A-Za-z0-9_.]*)|(?P<one>1)(?![0-9.])|(?P<op>[~+]))")


def parse_formula(text: str, response: bool) -> Formula:
    """Parse ``response ~ term + ...`` (or ``~ term + ...`` when ``response``
    is false).  Terms are column names or ``1``."""
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            raise FormulaError(f"unexpected character {text[pos:].lstrip()[0]!r}",
                               len(text) - len(text[pos:].lstrip()))
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))

    i = 0
    resp = None
    if response:
        kind, val, at = tokens[i]
        if kind != "name":
            raise FormulaError("expected a response column name", at)
        resp = val
        i += 1
    kind, val, at = tokens[i]
    if (kind, val) != ("op", "~"):
        raise FormulaError("expected '~'", at)
    i += 1
    terms = []
    while True:
        kind, val, at = tokens[i]
        if kind == "name":
            if val in terms:
                raise FormulaError(f"duplicate term {val!r}", at)
            terms.append(val)
        elif kind != "one":
            raise FormulaError("expected a column name or 1", at)
        i += 1
        kind, val, at = tokens[i]
        if kind == "end":
            break
        if (kind, val) != ("op", "+"):
            raise FormulaError("expected '+' or end of formula", at)
        i += 1
    return Formula(resp, tuple(terms))


# ---------------------------------------------------------------------------
# ci


def _parse_list(text: str, flag: str, conv):
    try:
        return [conv(t.strip()) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"{flag}: cannot parse {text!r}") from None


def _column(ds: Dataset, name: str, flag: str) -> np.ndarray:
    if name not in ds.data:
        raise ConfigError(f"{flag}: unknown column {name!r}")
    return ds[name]


def _design(ds: Dataset, f: Formula, flag: str):
    cols = [np.ones(ds.n)] + [_column(ds, t, flag) for t in f.terms]
    names = ["(Intercept)"] + list(f.terms)
    return np.column_stack(cols), names


def _formula(text: str, response: bool, flag: str) -> Formula:
    try:
        return parse_formula(text, response)
    except FormulaError as exc:
        raise FormulaError(f"{flag}: {exc.args[0].rsplit(' at position', 1)[0]} in {text!r}",
                           exc.position) from None


def build_model(ds: Dataset, family: str, mean: str, disp: str | None, nu: float | None):
    fm = _formula(mean, True, "--mean")
    y = _column(ds, fm.response, "--mean")
    if family in ("exponential", "normal_variance", "skew_normal", "gamma"):
        if fm.terms:
            raise ConfigError(f"--mean: family {family} takes no covariates")
        if disp and _formula(disp, False, "--disp").terms:
            raise ConfigError(f"--disp: family {family} takes no covariates")
        if family == "exponential":
            return exponential_model(y)
        if family == "normal_variance":
            return normal_variance_model(y)
        if family == "skew_normal":
            return skew_normal_model(y)
        return GammaModel(y)
    fd = _formula(disp or "~ 1", False, "--disp")
    X, xn = _design(ds, fm, "--mean")
    Z, zn = _design(ds, fd, "--disp")
    if family == "beta":
        names = tuple(f"beta[{t}]" for t in xn) + tuple(f"gamma[{t}]" for t in zn)
        return beta_regression(y, X, Z, "logit", "log", names)
    if nu is None:
        raise ConfigError("--nu is required for the student_t family")
    if not nu > 0:
        raise ConfigError("--nu must be positive")
    names = tuple(f"beta[{t}]" for t in xn) + tuple(f"log_phi[{t}]" for t in zn)
    return symmetric_regression(y, X, Z, "student_t", nu, "identity", "log", names)


def _tail_labels(level: float, kind: str) -> tuple[str, str]:
    a_lo, a_hi = _tail_alphas(level, kind)
    lo = f"{100 * (1 - a_lo):g}%" if a_lo is not None else "-inf"
    hi = f"{100 * (1 - a_hi):g}%" if a_hi is not None else "+inf"
    return lo, hi


def run_ci(args) -> int:
    ds = read_dataset(args.data)
    levels = _parse_list(args.level, "--level", float)
    methods = [m.upper() for m in _parse_list(args.method, "--method", str)]
    for m in methods:
        if m not in ("ML", "MBR", "QBR"):
            raise ConfigError(f"--method: unknown method {m!r}")
    for lv in levels:
        if not 0 < lv < 1:
            raise ConfigError(f"--level: {lv} outside (0, 1)")
    model = build_model(ds, args.family, args.mean, args.disp, args.nu)
    inf = Inference(model)
    mbr = inf.mbr
    d = args.digits
    results = []
    for p, name in enumerate(model.names):
        for lv in levels:
            for m in methods:
                results.append((name, lv, m, inf.interval(p, lv, args.kind, m)))

    width = max(12, max(len(n) for n in model.names) + 2)
    col = max(8, d + 6)
    out = io.StringIO()
    for lv in levels:
        lo_lab, hi_lab = _tail_labels(lv, args.kind)
        out.write(f"{args.kind} {100 * lv:g}% limits\n")
        head = f"{'':<{width}}{'ML':>{col}}{'MBR':>{col}}  "
        head += "".join(f"{m:>{2 * col}}" for m in methods)
        out.write(head + "\n")
        sub = f"{'':<{width}}{'':>{col}}{'':>{col}}  " + "".join(
            f"{lo_lab:>{col}}{hi_lab:>{col}}" for _ in methods)
        out.write(sub + "\n")
        for p, name in enumerate(model.names):
            row = f"{name:<{width}}{inf.mle[p]:>{col}.{d}f}{mbr[p]:>{col}.{d}f}  "
            for nm, lv2, m, ci in results:
                if nm == name and lv2 == lv:
                    row += f"{ci.lo:>{col}.{d}f}{ci.hi:>{col}.{d}f}"
            out.write(row + "\n")
        out.write("\n")
    sys.stdout.write(out.getvalue())

    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["parameter", "level", "kind", "method", "ml", "mbr", "lower", "upper"])
            for name, lv, m, ci in results:
                p = model.names.index(name)
                w.writerow([name, repr(lv), args.kind, m, repr(float(inf.mle[p])),
                            repr(float(mbr[p])), repr(ci.lo), repr(ci.hi)])
    return 0


def run_table(args) -> int:
    ns = _parse_list(args.n, "--n", int) if args.n else None
    if ns is not None and any(n < 2 for n in ns):
        raise ConfigError("--n: sample sizes must be at least 2")
    sys.stdout.write(format_table(interval_table(args.which, ns), args.digits))
    return 0


def run_simulate(args) -> int:
    cfg = SimConfig(
        args.scenario,
        methods=tuple(m.upper() for m in _parse_list(args.methods, "--methods", str)) if args.methods else (),
        levels=tuple(_parse_list(args.levels, "--levels", float)) if args.levels else (),
        kinds=tuple(_parse_list(args.kinds, "--kinds", str)) if args.kinds else (),
        replicates=args.reps, seed=args.seed, workers=args.workers,
    )
    report = simulate(cfg)
    text = report.to_csv(args.out)
    if not args.out:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qbrci",
                                description="Quantile bias-reduced confidence intervals.")
    sub = p.add_subparsers(dest="command", required=True)

    ci = sub.add_parser("ci", help="point estimates and confidence limits for a dataset")
    ci.add_argument("--data", required=True, help="CSV file with a header row")
    ci.add_argument("--family", required=True, choices=FAMILIES)
    ci.add_argument("--mean", required=True, help='e.g. "y ~ x1 + x2" or "y ~ 1"')
    ci.add_argument("--disp", default=None, help='e.g. "~ z1" (intercept implicit)')
    ci.add_argument("--nu", type=float, default=None, help="degrees of freedom for student_t")
    ci.add_argument("--level", default="0.95", help="comma-separated confidence levels")
    ci.add_argument("--kind", default="two-sided", choices=("two-sided", "lower", "upper"))
    ci.add_argument("--method", default="ml,mbr,qbr", help="comma-separated subset of ml,mbr,qbr")
    ci.add_argument("--digits", type=int, default=2)
    ci.add_argument("--out", default=None, help="write full-precision CSV here")
    ci.set_defaults(run=run_ci)

    tb = sub.add_parser("table", help="interval grids for the exponential / normal variance")
    tb.add_argument("--which", required=True, choices=tuple(TABLES))
    tb.add_argument("--n", default=None, help="comma-separated sample sizes")
    tb.add_argument("--digits", type=int, default=2)
    tb.set_defaults(run=run_table)

    sm = sub.add_parser("simulate", help="Monte Carlo coverage experiment")
    sm.add_argument("--scenario", required=True, choices=tuple(SCENARIOS))
    sm.add_argument("--reps", type=int, default=10_000)
    sm.add_argument("--seed", type=int, default=0)
    sm.add_argument("--workers", type=int, default=1)
    sm.add_argument("--methods", default=None, help="comma-separated subset of ML,MBR,QBR,EXACT")
    sm.add_argument("--levels", default=None, help="comma-separated nominal levels")
    sm.add_argument("--kinds", default=None, help="comma-separated subset of lower,upper,two-sided")
    sm.add_argument("--out", default=None, help="CSV path (default: standard output)")
    sm.set_defaults(run=run_simulate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.run(args)
    except SOLVER_ERRORS as exc:
        print(f"qbrci: solver did not converge: {exc}", file=sys.stderr)
        trace = getattr(exc, "trace", None)
        if trace:
            print(f"  trace (iteration, max|score|): {trace[-5:]}", file=sys.stderr)
        return 3
    except (FormulaError, DatasetError, ConfigError, DomainError, ValueError) as exc:
        print(f"qbrci: {exc}", file=sys.stderr)
        return 2
    except QbrciError as exc:
        print(f"qbrci: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
