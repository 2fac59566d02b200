"""Experiment specs, sweeps over theorem checkpoints and CSV/JSON output."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import re
from dataclasses import dataclass, fields, replace
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

import mpmath
from mpmath import mpf

from . import asymptotics as asy
from .diophantine import (
    as_fraction,
    cf_expand,
    convergents,
    inhom_records_bruteforce,
    parse_scaling_param,
)
from .fitting import DegenerateFitError, FitReport, fit_line
from .numerics import PrecisionError
from .qseries import CBHParams, VanishingFactorError

__all__ = [
    "ExperimentSpec",
    "SweepResult",
    "FitReport",
    "fit_line",
    "run_sweep",
    "rows_to_csv",
    "rows_to_json",
    "read_csv",
    "read_json",
    "env_precision_floor",
]

PREC_ENV = "Q_ASYM_DEFAULT_PREC"
INPUT_PREC = 512
CSV_FIELDS = [
    "n",
    "m",
    "offset",
    "gamma",
    "residual_abs",
    "residual_rel",
    "bound",
    "ok",
    "precision_bits",
]
VERBOSE_FIELDS = ["bound_theorem", "bound_proof"]


class NoEligiblePoints(ValueError):
    pass


def env_precision_floor() -> int:
    raw = os.environ.get(PREC_ENV, "").strip()
    if not raw:
        return 0
    try:
        return int(raw)
    except ValueError as exc:
        raise ValueError(f"{PREC_ENV} must be an integer number of bits, got {raw!r}") from exc


def parse_number(text: str):
    """Decimal or complex literal ('0.3', '1+2j'), read at INPUT_PREC bits."""
    with mpmath.workprec(INPUT_PREC):
        try:
            return mpmath.mpmathify(text.strip().replace(" ", ""))
        except (ValueError, TypeError) as exc:
            raise ValueError(f"bad number {text!r}") from exc


def parse_real(text: str) -> mpf:
    x = parse_number(text)
    if isinstance(x, mpmath.mpc):
        if x.imag != 0:
            raise ValueError(f"expected a real number, got {text!r}")
        x = x.real
    return x


def _split_list(text: str) -> List[str]:
    return [s.strip() for s in text.split(",") if s.strip()]


def parse_n_source(text: str) -> Tuple[str, object]:
    """'20:120:4', '2,5,12', 'records(N)' or 'convergents(K)'."""
    s = text.strip().replace(" ", "")
    mt = re.fullmatch(r"records\((\d+)\)", s)
    if mt:
        return "records", int(mt[1])
    mt = re.fullmatch(r"convergents\((\d+)\)", s)
    if mt:
        return "convergents", int(mt[1])
    mt = re.fullmatch(r"(\d+):(\d+)(?::(\d+))?", s)
    if mt:
        lo, hi, step = int(mt[1]), int(mt[2]), int(mt[3] or 1)
        if step < 1:
            raise ValueError("range step must be positive")
        return "list", list(range(lo, hi + 1, step))
    if re.fullmatch(r"\d+(,\d+)*,?", s):
        return "list", [int(x) for x in _split_list(s)]
    if s == "":
        return "list", []
    raise ValueError(
        f"bad n source {text!r}: use 'lo:hi[:step]', 'n1,n2,...', 'records(N)' or 'convergents(K)'"
    )


@dataclass(frozen=True)
class ExperimentSpec:
    """A sweep definition; every field is kept as text so it round-trips."""

    family: str = "aq"
    q: str = "0.5"
    u: str = "1"
    t: str = "1/2"
    beta_or_lambda: str = ""
    n_source: str = ""
    a: str = ""
    b: str = ""
    l: str = "1"
    precision_override: str = ""
    output: str = "csv"

    _ALIASES = {"beta": "beta_or_lambda", "lambda": "beta_or_lambda", "offset": "beta_or_lambda",
                "n": "n_source", "prec": "precision_override"}

    def validate(self) -> "ExperimentSpec":
        if self.family not in ("aq", "cbh"):
            raise ValueError(f"family must be 'aq' or 'cbh', got {self.family!r}")
        if self.output not in ("csv", "json"):
            raise ValueError(f"output must be 'csv' or 'json', got {self.output!r}")
        parse_scaling_param(self.t)
        parse_n_source(self.n_source)
        q = parse_real(self.q)
        if not 0 < q < 1:
            raise ValueError("q must lie in (0, 1)")
        if parse_number(self.u) == 0:
            raise ValueError("u must be nonzero")
        if self.family == "cbh":
            self.cbh_params().check_theorem_window()
        if self.precision_override and int(self.precision_override) < 64:
            raise ValueError("precision override must be at least 64 bits")
        return self

    def to_config(self) -> str:
        return "".join(
            f"{f.name}={getattr(self, f.name)}\n" for f in fields(self) if not f.name.startswith("_")
        )

    @classmethod
    def field_name(cls, key: str) -> str:
        key = key.strip().replace("-", "_")
        key = cls._ALIASES.get(key, key)
        names = {f.name for f in fields(cls) if not f.name.startswith("_")}
        if key not in names:
            raise ValueError(f"unknown experiment key {key!r}")
        return key

    @classmethod
    def from_config(cls, text: str, **overrides) -> "ExperimentSpec":
        """Parse flat key=value lines; keyword overrides (flags) win."""
        values: Dict[str, str] = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
            k, v = line.split("=", 1)
            values[cls.field_name(k)] = v.strip()
        for k, v in overrides.items():
            if v is not None:
                values[cls.field_name(k)] = str(v)
        return cls(**values).validate()

    def scaling_param(self):
        return parse_scaling_param(self.t)

    def cbh_params(self) -> Optional[CBHParams]:
        if self.family != "cbh":
            return None
        return CBHParams(
            [parse_real(x) for x in _split_list(self.a)],
            [parse_real(x) for x in _split_list(self.b)],
            parse_real(self.l or "1"),
        )


@dataclass
class SweepResult:
    spec: ExperimentSpec
    rows: List[asy.VerifyRow]
    fit: Optional[FitReport]
    fit_note: str = ""

    @property
    def all_ok(self) -> bool:
        return all(r.ok for r in self.rows)


def _n_values(spec: ExperimentSpec, t) -> List[int]:
    kind, arg = parse_n_source(spec.n_source)
    if kind == "list":
        return sorted(set(arg))
    if kind == "convergents":
        return sorted({q for _, q in convergents(cf_expand(t, arg))})
    beta = as_fraction(spec.beta_or_lambda or "0")
    return [r.n for r in inhom_records_bruteforce(t, beta, arg)]


def build_points(spec: ExperimentSpec) -> List[asy.TheoremPoint]:
    """Theorem-eligible checkpoints in increasing n."""
    t = spec.scaling_param()
    q = parse_real(spec.q)
    u = parse_number(spec.u)
    params = spec.cbh_params()
    pts = []
    for n in _n_values(spec, t):
        if n < 1:
            continue
        if t.exact is not None:
            pt = asy.rational_point(t, n, u, q, spec.family, params)
            if spec.beta_or_lambda and pt.offset != as_fraction(spec.beta_or_lambda):
                continue
        elif t.is_irrational:
            beta = spec.beta_or_lambda or "0"
            pt = asy.irrational_point(t, n, beta, u, q, spec.family, params)
        else:
            raise ValueError(f"{t} is neither certified rational nor irrational")
        pts.append(pt)
    if not pts:
        raise NoEligiblePoints("no theorem-eligible points")
    return pts


def _row_error(pt: asy.TheoremPoint, exc: Exception, prec: int) -> asy.VerifyRow:
    return asy.VerifyRow(pt, None, None, None, None, None, prec, error=f"{type(exc).__name__}: {exc}")


def run_sweep(spec: ExperimentSpec) -> SweepResult:
    spec.validate()
    pts = build_points(spec)
    floor = env_precision_floor()
    rows = []
    for pt in pts:
        prec = int(spec.precision_override) if spec.precision_override else max(
            asy.point_precision(pt), floor
        )
        try:
            rows.append(asy.residual(pt, prec))
        except (PrecisionError, ArithmeticError, VanishingFactorError, RuntimeError) as exc:
            rows.append(_row_error(pt, exc, prec))
    rational = pts[0].rational
    data = []
    for r in rows:
        if r.error is None and r.residual_abs and r.residual_abs > 0:
            y = float(mpmath.log(r.residual_abs))
            x = r.point.n if rational else math.log(r.point.n)
            data.append((x, y))
    model = "log-vs-n" if rational else "log-vs-log-n"
    try:
        fit = fit_line(data, model)
        note = ""
    except DegenerateFitError as exc:
        fit, note = None, str(exc)
    return SweepResult(spec, rows, fit, note)


# serialization


def digits_for(prec: int) -> int:
    """Decimal digits that reproduce a prec-bit binary value exactly."""
    return math.ceil(prec * math.log10(2)) + 1


def fmt_num(x, prec: int) -> str:
    if x is None:
        return ""
    with mpmath.workprec(prec):
        if isinstance(x, Fraction):
            x = mpf(x.numerator) / x.denominator
        return mpmath.libmp.to_str(mpf(x)._mpf_, digits_for(prec))


def _ok_str(row: asy.VerifyRow) -> str:
    if row.error is not None:
        return "error"
    if row.bound_satisfied is None:
        return ""
    return "true" if row.bound_satisfied else "false"


def row_record(row: asy.VerifyRow, verbose: bool = False) -> Dict[str, str]:
    P = row.precision_bits
    pt = row.point
    rec = {
        "n": str(pt.n),
        "m": str(pt.m),
        "offset": fmt_num(pt.offset, P),
        "gamma": fmt_num(pt.gamma, P),
        "residual_abs": fmt_num(row.residual_abs, P),
        "residual_rel": fmt_num(row.residual_rel, P),
        "bound": fmt_num(row.error_bound, P),
        "ok": _ok_str(row),
        "precision_bits": str(P),
    }
    if verbose:
        rec["bound_theorem"] = fmt_num(row.bound_variants.get("theorem"), P)
        rec["bound_proof"] = fmt_num(row.bound_variants.get("proof"), P)
    return rec


def _fit_line_text(result: SweepResult) -> str:
    f = result.fit
    if f is None:
        return f"# fit unavailable: {result.fit_note}\n"
    return (
        f"# fit model={f.model} slope={f.slope!r} intercept={f.intercept!r} "
        f"r_squared={f.r_squared!r} points_used={f.points_used}\n"
    )


def rows_to_csv(result: SweepResult, verbose: bool = False) -> str:
    buf = io.StringIO()
    cols = CSV_FIELDS + (VERBOSE_FIELDS if verbose else [])
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for row in result.rows:
        w.writerow(row_record(row, verbose))
    buf.write(_fit_line_text(result))
    return buf.getvalue()


def rows_to_json(result: SweepResult, verbose: bool = False) -> str:
    out_rows = []
    for row in result.rows:
        rec = row_record(row, verbose)
        P = row.precision_bits
        if row.error is None:
            rec["residual_re"] = fmt_num(row.residual.real, P)
            rec["residual_im"] = fmt_num(row.residual.imag, P)
            rec["main_theta_re"] = fmt_num(row.main_theta.real, P)
            rec["main_theta_im"] = fmt_num(row.main_theta.imag, P)
        rec["error"] = row.error
        out_rows.append(rec)
    fit = None
    if result.fit is not None:
        fit = {k.name: getattr(result.fit, k.name) for k in fields(result.fit)}
    doc = {
        "spec": {f.name: getattr(result.spec, f.name) for f in fields(result.spec) if not f.name.startswith("_")},
        "rows": out_rows,
        "fit": fit,
        "fit_note": result.fit_note,
    }
    return json.dumps(doc, indent=2) + "\n"


def _parse_fields(rec: Dict[str, str]) -> Dict[str, object]:
    P = int(rec["precision_bits"])
    out: Dict[str, object] = {}
    with mpmath.workprec(P):
        for k, v in rec.items():
            if k in ("n", "m", "precision_bits"):
                out[k] = int(v)
            elif k in ("ok", "error"):
                out[k] = v
            elif v is None or v == "":
                out[k] = None
            else:
                out[k] = mpf(v)
    return out


def read_csv(text: str) -> List[Dict[str, object]]:
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    return [_parse_fields(rec) for rec in csv.DictReader(lines)]


def read_json(text: str) -> List[Dict[str, object]]:
    return [_parse_fields(rec) for rec in json.loads(text)["rows"]]


def with_overrides(spec: ExperimentSpec, **kw) -> ExperimentSpec:
    return replace(spec, **{ExperimentSpec.field_name(k): str(v) for k, v in kw.items() if v is not None})
