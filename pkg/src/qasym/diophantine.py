"""Exact scaling parameters, continued fractions and inhomogeneous
approximation records n t = m + beta + gamma.

Every scaling parameter exposes an enclosure oracle: ``interval(bits)``
returns rationals ``lo <= t <= hi`` with ``hi - lo <= 2**(1 - bits)``.
All integer decisions (floors, record comparisons, partial quotients) are
made on such enclosures and escalate precision until they are certified.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Tuple

import mpmath
from mpmath import mpf

from .fitting import DegenerateFitError, fit_line

MAX_BITS = 1 << 22


class PrecisionExhausted(ArithmeticError):
    """The parameter cannot be resolved to the requested precision."""


class UnresolvableBoundary(ArithmeticError):
    """n*t cannot be separated from an integer with the available precision."""


class ScalingParamParseError(ValueError):
    pass


def _ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def _to_mpf(x: Fraction, prec: int) -> mpf:
    with mpmath.workprec(prec):
        return mpf(x.numerator) / x.denominator


def as_fraction(x) -> Fraction:
    """Exact rational value of a number or decimal string."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, str)):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x)
    if isinstance(x, mpf):
        man, exp = x.man, x.exp
        return Fraction(int(man)) * Fraction(2) ** int(exp)
    raise TypeError(f"cannot convert {x!r} to an exact rational")


class ScalingParam:
    """A positive real t with a certified enclosure oracle."""

    def interval(self, bits: int) -> Tuple[Fraction, Fraction]:
        raise NotImplementedError

    @property
    def exact(self) -> Optional[Fraction]:
        """The exact value when t is known to be rational."""
        return None

    @property
    def is_rational(self) -> bool:
        return self.exact is not None

    @property
    def is_irrational(self) -> bool:
        return False

    def __float__(self) -> float:
        return float(approx(self, 64))


@dataclass(frozen=True)
class Rational(ScalingParam):
    p: int
    q: int = 1

    def __post_init__(self):
        if self.q == 0:
            raise ValueError("zero denominator")
        g = math.gcd(self.p, self.q) * (1 if self.q > 0 else -1)
        object.__setattr__(self, "p", self.p // g)
        object.__setattr__(self, "q", self.q // g)
        if self.p <= 0:
            raise ValueError("scaling parameter must be positive")

    @property
    def exact(self) -> Fraction:
        return Fraction(self.p, self.q)

    def interval(self, bits):
        v = self.exact
        return v, v

    def __str__(self):
        return f"{self.p}/{self.q}"


@dataclass(frozen=True)
class QuadraticSurd(ScalingParam):
    """(a + b*sqrt(c)) / d."""

    a: int
    b: int
    c: int
    d: int = 1

    def __post_init__(self):
        if self.c < 0 or self.d == 0:
            raise ValueError("need c >= 0 and d != 0")
        if not float(self) > 0:
            raise ValueError("scaling parameter must be positive")

    @property
    def _root_exact(self) -> bool:
        r = math.isqrt(self.c)
        return r * r == self.c or self.b == 0

    @property
    def exact(self):
        if self._root_exact:
            return Fraction(self.a + self.b * math.isqrt(self.c), self.d)
        return None

    @property
    def is_irrational(self):
        return not self._root_exact

    def interval(self, bits):
        if self.exact is not None:
            return self.exact, self.exact
        k = bits + 2 + abs(self.d).bit_length() + abs(self.a).bit_length()
        s = math.isqrt(self.b * self.b * self.c << (2 * k))
        # s <= |b| sqrt(c) 2^k < s + 1
        lo_x, hi_x = (s, s + 1) if self.b > 0 else (-s - 1, -s)
        num_lo = Fraction((self.a << k) + lo_x, self.d << k)
        num_hi = Fraction((self.a << k) + hi_x, self.d << k)
        return min(num_lo, num_hi), max(num_lo, num_hi)

    def __float__(self):
        return (self.a + self.b * math.sqrt(self.c)) / self.d

    def __str__(self):
        if self.a == 0 and self.d == 1 and self.b == 1:
            return f"sqrt({self.c})"
        sign = "+" if self.b >= 0 else "-"
        return f"({self.a}{sign}{abs(self.b)}*sqrt({self.c}))/{self.d}"


@dataclass(frozen=True)
class LiouvilleSeries(ScalingParam):
    """sum_{k>=1} base^(-k!)."""

    base: int

    def __post_init__(self):
        if self.base < 2:
            raise ValueError("Liouville base must be >= 2")

    @property
    def is_irrational(self):
        return True

    def partial_sum(self, terms: int) -> Fraction:
        return sum(
            (Fraction(1, self.base ** math.factorial(k)) for k in range(1, terms + 1)),
            Fraction(0),
        )

    def terms_for(self, bits: int) -> int:
        """Number of terms whose omitted tail is below 2^-(bits+1)."""
        k = 1
        # tail after k terms <= 2 * base^-((k+1)!)
        while math.factorial(k + 1) * math.log2(self.base) < bits + 2:
            k += 1
        return k

    def interval(self, bits):
        k = self.terms_for(bits)
        s = self.partial_sum(k)
        tail = Fraction(2, self.base ** math.factorial(k + 1))
        return s, s + tail

    def __float__(self):
        return float(self.partial_sum(4))

    def __str__(self):
        return f"liouville({self.base})"


@dataclass(frozen=True)
class DecimalLiteral(ScalingParam):
    """A measured value known only to within ``stated_error``."""

    digits: str
    stated_error: Fraction = field(default=Fraction(0))

    def __post_init__(self):
        object.__setattr__(self, "stated_error", as_fraction(self.stated_error))
        if self.value - self.stated_error <= 0:
            raise ValueError("scaling parameter must be positive")

    @property
    def value(self) -> Fraction:
        return Fraction(self.digits)

    @property
    def exact(self):
        return self.value if self.stated_error == 0 else None

    def interval(self, bits):
        if self.stated_error > Fraction(1, 1 << bits):
            raise PrecisionExhausted(
                f"{self} is only known to {float(self.stated_error):.3g}, "
                f"2^-{bits} requested"
            )
        return self.value - self.stated_error, self.value + self.stated_error

    def __float__(self):
        return float(self.value)

    def __str__(self):
        if self.stated_error == 0:
            return self.digits
        return f"{self.digits}~{float(self.stated_error):.6g}"


_GRAMMAR = [
    ("rational 'p/q' or integer", re.compile(r"^(\d+)(?:\s*/\s*(\d+))?$")),
    ("'sqrt(c)'", re.compile(r"^sqrt\(\s*(\d+)\s*\)$")),
    (
        "'(a+b*sqrt(c))/d'",
        re.compile(
            r"^\(\s*(-?\d+)\s*([+-])\s*(?:(\d+)\s*\*\s*)?sqrt\(\s*(\d+)\s*\)\s*\)\s*/\s*(\d+)$"
        ),
    ),
    ("'liouville(base)'", re.compile(r"^liouville\(\s*(\d+)\s*\)$")),
    (
        "decimal literal 'd.ddd' with optional '~err' suffix",
        re.compile(r"^(\d*\.\d+|\d+\.\d*)(?:\s*~\s*([0-9.eE+-]+))?$"),
    ),
]

GRAMMAR_HELP = """\
scaling parameter grammar:
  p/q | p                 exact rational, e.g. 1/2, 3
  sqrt(c)                 square root of a non-negative integer
  (a+b*sqrt(c))/d         quadratic surd; 'b*' optional, sign may be '-'
  liouville(base)         sum_{k>=1} base^(-k!)
  d.ddd[~err]             decimal literal, exact unless an error bound follows '~'"""


def parse_scaling_param(text: str) -> ScalingParam:
    s = text.strip().replace(" ", "")
    if not s:
        raise ScalingParamParseError("empty scaling parameter\n" + GRAMMAR_HELP)
    for rule, rx in _GRAMMAR:
        mt = rx.match(s)
        if not mt:
            continue
        try:
            if rule.startswith("rational"):
                return Rational(int(mt[1]), int(mt[2] or 1))
            if rule == "'sqrt(c)'":
                return QuadraticSurd(0, 1, int(mt[1]), 1)
            if rule.startswith("'(a+b"):
                b = int(mt[3] or 1) * (1 if mt[2] == "+" else -1)
                return QuadraticSurd(int(mt[1]), b, int(mt[4]), int(mt[5]))
            if rule.startswith("'liouville"):
                return LiouvilleSeries(int(mt[1]))
            err = Fraction(mt[2]) if mt[2] else Fraction(0)
            if err == 0:
                return Rational(Fraction(mt[1]).numerator, Fraction(mt[1]).denominator)
            return DecimalLiteral(mt[1], err)
        except ValueError as exc:
            raise ScalingParamParseError(f"{text!r} matches rule {rule} but {exc}") from exc
    guess = "no rule matched"
    if "sqrt" in s:
        guess = "looks like rule 'sqrt(c)' or '(a+b*sqrt(c))/d' but does not parse"
    elif "liouville" in s:
        guess = "looks like rule 'liouville(base)' but does not parse"
    elif "/" in s:
        guess = "looks like rule 'p/q' but does not parse"
    elif "~" in s:
        guess = "looks like a decimal literal with '~err' but does not parse"
    raise ScalingParamParseError(f"cannot parse {text!r}: {guess}\n{GRAMMAR_HELP}")


def liouville_param(base: int) -> LiouvilleSeries:
    return LiouvilleSeries(base)


def approx(t: ScalingParam, bits: int) -> mpf:
    """Value of t with absolute error <= 2^-bits."""
    lo, hi = t.interval(bits)
    mid = (lo + hi) / 2
    mag = max(0, abs(mid).numerator.bit_length() - abs(mid).denominator.bit_length() + 1)
    return _to_mpf(mid, bits + mag + 8)


def scaled(t: ScalingParam, n, prec: int) -> mpf:
    """n*t to relative precision ~2^-prec (exact when t is rational)."""
    n = as_fraction(n)
    if t.exact is not None:
        return _to_mpf(n * t.exact, prec + 8)
    extra = abs(n).numerator.bit_length() + 8
    return approx(t, prec + extra) * _to_mpf(n, prec + extra)


def _bracket_nt(t: ScalingParam, n: int, bits: int):
    lo, hi = t.interval(bits)
    return n * lo, n * hi


def frac_floor(t: ScalingParam, n: int, prec: int = 128):
    """(m, nt - m) with m = floor(n t), certified by interval separation."""
    if t.exact is not None:
        v = n * t.exact
        m = math.floor(v)
        return m, _to_mpf(v - m, prec)
    bits = prec + n.bit_length() + 16
    while bits <= MAX_BITS:
        try:
            lo, hi = _bracket_nt(t, n, bits)
        except PrecisionExhausted as exc:
            raise UnresolvableBoundary(f"cannot separate {n}*{t} from an integer") from exc
        if math.floor(lo) == math.floor(hi) and (hi - lo) < Fraction(1, 1 << prec):
            m = math.floor(lo)
            return m, _to_mpf((lo + hi) / 2 - m, prec)
        bits *= 2
    raise UnresolvableBoundary(f"cannot separate {n}*{t} from an integer")


def s_of_t(t: ScalingParam, N: int, prec: int = 128) -> List[mpf]:
    """Sorted distinct fractional parts {n t}, 1 <= n <= N."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if t.exact is not None:
        v = t.exact
        fracs = sorted({(n * v) % 1 for n in range(1, N + 1)})
        return [_to_mpf(x, prec) for x in fracs]
    vals = sorted(frac_floor(t, n, prec)[1] for n in range(1, N + 1))
    out = []
    for v in vals:
        if not out or v != out[-1]:
            out.append(v)
    return out


def chi(n: int) -> int:
    """Principal character modulo 2."""
    return n & 1


# continued fractions


@dataclass
class CFExpansion:
    partial_quotients: List[int]
    exact_termination: bool = False

    def __str__(self):
        a = self.partial_quotients
        if not a:
            return ""
        return f"{a[0]}; " + " ".join(str(x) for x in a[1:]) if len(a) > 1 else f"{a[0]}"


def _cf_of_fraction(x: Fraction, limit: int) -> List[int]:
    out = []
    p, q = x.numerator, x.denominator
    while q and len(out) < limit:
        a, r = divmod(p, q)
        out.append(a)
        p, q = q, r
    return out


def cf_expand(t: ScalingParam, K: int) -> CFExpansion:
    """First K partial quotients of t, each certified on an enclosure."""
    if K < 1:
        raise ValueError("K must be >= 1")
    if t.exact is not None:
        full = _cf_of_fraction(t.exact, K + 1)
        if len(full) <= K:
            return CFExpansion(full, True)
        return CFExpansion(full[:K], False)
    bits = 64
    while bits <= MAX_BITS:
        lo, hi = t.interval(bits)
        ca = _cf_of_fraction(lo, K + 1)
        cb = _cf_of_fraction(hi, K + 1)
        certified = []
        for i in range(min(len(ca), len(cb))):
            # the last quotient of a finite expansion has two spellings
            if ca[i] != cb[i] or i == len(ca) - 1 or i == len(cb) - 1:
                break
            certified.append(ca[i])
            if len(certified) == K:
                return CFExpansion(certified, False)
        bits *= 2
    raise PrecisionExhausted(f"could not certify {K} partial quotients of {t}")


def convergents(cf: CFExpansion) -> List[Tuple[int, int]]:
    out = []
    p0, q0, p1, q1 = 0, 1, 1, 0
    for a in cf.partial_quotients:
        p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
        out.append((p1, q1))
    return out


# approximation records


@dataclass(frozen=True)
class ApproxRecord:
    """n t = m + beta + gamma, with |gamma| <= gamma_bound."""

    n: int
    m: int
    gamma: mpf
    gamma_bound: mpf
    beta: Fraction
    eligible: bool

    @property
    def distance(self) -> mpf:
        return abs(self.gamma)


def _int_enclosure(t: ScalingParam, bits: int):
    """Integers (L, H, S) with L/S <= t <= H/S."""
    lo, hi = t.interval(bits)
    if lo == hi:
        return lo.numerator, lo.numerator, lo.denominator
    s = 1 << (bits + 2)
    return math.floor(lo * s), _ceil_div(hi.numerator * s, hi.denominator), s


def record_at(t: ScalingParam, n: int, beta, prec: int = 256) -> ApproxRecord:
    """The decomposition n t = m + beta + gamma with m nearest to n t - beta."""
    beta = as_fraction(beta)
    bits = prec + 2 * n.bit_length() + 16
    if t.exact is not None:
        x = n * t.exact - beta
        m = math.floor(x + Fraction(1, 2))
        g = x - m
        gamma = _to_mpf(g, prec)
        bound = _to_mpf(abs(g), prec)
        eligible = 0 <= beta + g < 1
        return ApproxRecord(n, m, gamma, bound, beta, eligible)
    while True:
        lo, hi = t.interval(bits)
        xlo, xhi = n * lo - beta, n * hi - beta
        m = math.floor((xlo + xhi) / 2 + Fraction(1, 2))
        if math.floor(xlo + Fraction(1, 2)) == math.floor(xhi + Fraction(1, 2)):
            break
        bits *= 2
        if bits > MAX_BITS:
            raise UnresolvableBoundary(f"nearest integer of {n}*t - beta is ambiguous")
    g = (xlo + xhi) / 2 - m
    with mpmath.workprec(prec):
        gamma = _to_mpf(g, prec)
        half_width = _to_mpf((xhi - xlo) / 2, prec)
        bound = abs(gamma) + half_width
        bound += abs(bound) * mpf(2) ** (1 - prec)
    eligible = bool(0 <= beta + g < 1)
    return ApproxRecord(n, m, gamma, bound, beta, eligible)


def _brute_scan(t, beta: Fraction, N: int, bits: int):
    L, H, S = _int_enclosure(t, bits)
    D = beta.denominator
    unit = S * D
    b = beta.numerator * S
    records = []
    best_lo = best_hi = None
    for n in range(1, N + 1):
        xlo = n * L * D - b
        xhi = n * H * D - b
        # nearest integer to x/unit, from both ends of the enclosure
        mlo = (2 * xlo + unit) // (2 * unit)
        mhi = (2 * xhi + unit) // (2 * unit)
        if mlo != mhi:
            # x sits near a half-integer; harmless once the record is well below 1/2
            if best_hi is not None and 2 * best_hi < unit - 2 * (xhi - xlo):
                continue
            return None
        dl = abs(xlo - mlo * unit)
        dh = abs(xhi - mlo * unit)
        dlo, dhi = min(dl, dh), max(dl, dh)
        if xlo <= mlo * unit <= xhi:
            dlo = 0
        if best_lo is None:
            # the first record must beat the largest possible distance 1/2
            if 2 * dhi < unit:
                records.append(n)
                best_lo, best_hi = dlo, dhi
            elif 2 * dlo < unit:
                return None
        elif dhi < best_lo:
            records.append(n)
            best_lo, best_hi = dlo, dhi
        elif dlo >= best_hi:
            continue
        elif L == H:
            continue  # exact tie: the earlier n keeps the record
        else:
            return None
    return records


def inhom_records_bruteforce(
    t: ScalingParam, beta, N: int, prec: int = 256, eligible_only: bool = False
) -> List[ApproxRecord]:
    """Record-setting n <= N for the circular distance ||n t - beta||.

    Each record strictly improves on every earlier n and on the trivial
    distance 1/2; ties keep the earlier n.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    beta = as_fraction(beta)
    if not 0 <= beta < 1:
        raise ValueError("beta must lie in [0, 1)")
    bits = 2 * N.bit_length() + 64
    while True:
        ns = _brute_scan(t, beta, N, bits)
        if ns is not None:
            break
        bits *= 2
        if bits > MAX_BITS:
            raise UnresolvableBoundary("record comparison could not be certified")
    recs = [record_at(t, n, beta, prec) for n in ns]
    if eligible_only:
        recs = [r for r in recs if r.eligible]
    return recs


class _SemiconvergentTable:
    """Convergent data (q_k, theta_k = q_k t - p_k) of t, grown on demand."""

    def __init__(self, t: ScalingParam):
        self.t = t
        self.K = 0
        self._grow(16)

    def _grow(self, K: int):
        cf = cf_expand(self.t, K)
        self.a = cf.partial_quotients
        self.pq = convergents(cf)
        qmax = self.pq[-1][1]
        self.prec = 4 * qmax.bit_length() + 128
        with mpmath.workprec(self.prec):
            tv = approx(self.t, self.prec)
            self.theta = [q * tv - p for p, q in self.pq]
        self.K = K

    def q(self, k):
        return 0 if k == -1 else self.pq[k][1]

    def th(self, k):
        return mpf(-1) if k == -1 else self.theta[k]

    def ensure(self, k):
        while k >= self.K:
            self._grow(2 * self.K)

    def smallest_step(self, positive: bool, eps) -> int:
        """Smallest j >= 1 with j t - p in (0, eps) (positive side) or in
        (-eps, 0) for some integer p; the answer is an intermediate
        denominator q_{k-1} + i q_k."""
        with mpmath.workprec(self.prec):
            if positive:
                if self.th(0) < eps:
                    return 1
                k = 1
            else:
                k = 0
            while True:
                self.ensure(k + 2)
                prev, cur = abs(self.th(k - 1)), abs(self.th(k))
                i = max(1, int(mpmath.floor((prev - eps) / cur)) + 1)
                if i <= self.a[k + 1]:
                    return self.q(k - 1) + i * self.q(k)
                k += 2


def inhom_ostrowski(
    t: ScalingParam,
    beta,
    count: Optional[int] = None,
    n_max: Optional[int] = None,
    prec: int = 256,
) -> List[ApproxRecord]:
    """Successive best approximations n t ~ m + beta for irrational t.

    Starting from n = 1, each next n adds the smallest intermediate
    continued-fraction denominator that moves n t - beta strictly closer to
    an integer, so n is built up digit by digit in the Ostrowski numeration
    of t. The trivial first record n = 1 is not reported, nor are solutions
    with |gamma| > 3/n. Stops after ``count`` records or past ``n_max``.
    """
    if not t.is_irrational:
        raise ValueError("inhom_ostrowski needs a certified irrational parameter")
    if count is None and n_max is None:
        raise ValueError("give count or n_max")
    beta = as_fraction(beta)
    if not 0 <= beta < 1:
        raise ValueError("beta must lie in [0, 1)")
    table = _SemiconvergentTable(t)
    rec = record_at(t, 1, beta, prec)
    out: List[ApproxRecord] = []
    while True:
        if rec.gamma == 0:
            break
        eps = 2 * abs(rec.gamma)
        j = table.smallest_step(positive=rec.gamma < 0, eps=eps)
        n = rec.n + j
        if n_max is not None and n > n_max:
            break
        nxt = record_at(t, n, beta, prec)
        if not nxt.distance < rec.distance:
            raise ArithmeticError(f"step to n={n} did not improve the approximation")
        rec = nxt
        if rec.distance * rec.n <= 3:
            out.append(rec)
            if count is not None and len(out) >= count:
                break
    return out


@dataclass(frozen=True)
class ChaoticEstimate:
    """Empirical decay exponent of record distances, d(n) ~ C n^(-r_hat)."""

    r_hat: float
    records_used: int
    intercept: Optional[float] = None
    floor: bool = False
    floor_distance: Optional[float] = None


def chaotic_exponent_estimate(t: ScalingParam, beta, N: int, min_n: int = 10) -> ChaoticEstimate:
    """Least-squares slope of log d(n) against log n over the records.

    For rational t the distances are bounded below by the distance from beta
    to the grid (1/q)Z; a positive floor yields r_hat = 0 with ``floor`` set.
    """
    if N < 100:
        raise ValueError("N must be >= 100")
    beta = as_fraction(beta)
    recs = inhom_records_bruteforce(t, beta, N)
    if t.exact is not None:
        den = t.exact.denominator
        x = (beta * den) % 1
        floor_dist = min(x, 1 - x) / den
        if floor_dist > 0:
            return ChaoticEstimate(0.0, len(recs), None, True, float(floor_dist))
        return ChaoticEstimate(math.inf, len(recs), None, False, 0.0)
    pts = [
        (math.log(r.n), float(mpmath.log(r.distance)))
        for r in recs
        if r.n >= min_n and r.distance > 0
    ]
    if len(pts) < 3:
        raise DegenerateFitError(f"only {len(pts)} records with n >= {min_n}")
    fit = fit_line(pts)
    return ChaoticEstimate(-fit.slope, len(pts), fit.intercept)
