"""Direct evaluation of q-Pochhammer symbols, A_q, theta and the confluent family.

Every infinite sum or product is truncated by an explicit tail bound at
the ambient mpmath precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Tuple

import mpmath
from mpmath import mpc, mpf

from .numerics import default_rel_eps, sum_terms, with_cancellation_retry


class VanishingFactorError(ZeroDivisionError):
    """A q-shifted factorial in a denominator has a zero factor."""


def _base(q) -> mpf:
    q = mpf(q)
    if not 0 < q < 1:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    return q


def _eps(rel_eps):
    return default_rel_eps() if rel_eps is None else mpf(rel_eps)


@dataclass(frozen=True)
class CBHParams:
    """Numerator parameters ``a``, denominator parameters ``b`` and the
    quadratic exponent ``l`` of sum_k (a;q)_k q^(l k^2) z^k / (b;q)_k."""

    a: Tuple = ()
    b: Tuple = ()
    l: mpf = field(default_factory=lambda: mpf(1))

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(self.a))
        object.__setattr__(self, "b", tuple(self.b))
        object.__setattr__(self, "l", mpf(self.l))
        if not self.l > 0:
            raise ValueError("l must be positive")

    @property
    def r(self) -> int:
        return len(self.a)

    @property
    def s(self) -> int:
        return len(self.b)

    def check_theorem_window(self) -> None:
        """Require every a_j and b_j to be real and in [0, 1)."""
        for name, values in (("a", self.a), ("b", self.b)):
            for v in values:
                if isinstance(v, mpc) and v.imag != 0 or isinstance(v, complex):
                    raise ValueError(f"{name}-parameter {v} must be real")
                if not 0 <= mpf(v) < 1:
                    raise ValueError(f"{name}-parameter {v} outside [0, 1)")


def qpoch_n(a, q, n: int):
    """(a;q)_n for any integer n; negative n uses (a;q)_inf/(aq^n;q)_inf."""
    q = _base(q)
    prod = mpf(1)
    if n >= 0:
        x = a
        for _ in range(n):
            prod *= 1 - x
            x *= q
        return prod
    x = a / q
    for _ in range(-n):
        f = 1 - x
        if f == 0:
            raise VanishingFactorError(f"(a;q)_{n} has a vanishing factor for a={a}")
        prod *= f
        x /= q
    return 1 / prod


def qpoch_inf(a, q, rel_eps=None):
    """(a;q)_inf to relative error rel_eps.

    After K factors the rest is (aq^K;q)_inf, whose distance from 1 is at most
    exp(x) - 1 <= 2x with x = |a| q^K / (1-q) <= 1; we stop once 2x <= rel_eps.
    """
    q = _base(q)
    eps = _eps(rel_eps)
    prod = mpf(1)
    x = a
    one_minus_q = 1 - q
    while True:
        if 2 * abs(x) <= eps * one_minus_q:
            return prod
        f = 1 - x
        if f == 0:
            return mpf(0)
        prod *= f
        x *= q


def qpoch_inf_multi(params: Sequence, q, rel_eps=None):
    """prod_j (a_j;q)_inf."""
    out = mpf(1)
    for a in params:
        out *= qpoch_inf(a, q, rel_eps)
    return out


def remainder_bounds(a, q, n: int):
    """Bounds (r1, r2) on |(aq^n;q)_inf - 1| and |1/(aq^n;q)_inf - 1|.

    r1 needs a > 0; r2 additionally 0 < aq < 1 and is ``None`` otherwise.
    """
    q = _base(q)
    a = mpf(a)
    if a <= 0:
        raise ValueError("remainder bounds need a > 0")
    aqn = a * q**n
    r1 = qpoch_inf(-a * q * q, q) * aqn / (1 - q)
    r2 = None
    if a * q < 1:
        r2 = aqn / ((1 - q) * qpoch_inf(a * q, q))
    return r1, r2


def _aq_tail(z, q, k0: int, first, eps):
    """Sum of the A_q terms from index k0 on, given the k0-th term."""
    absz = abs(z)
    qk = [q ** (k0 + 1)]  # q^(k+1)
    q2k1 = [q ** (2 * k0 + 1)]  # q^(2k+1)

    def step(k, term):
        nxt = term * (-z) * q2k1[0] / (1 - qk[0])
        q2k1[0] *= q * q
        qk[0] *= q
        return nxt

    def tail_ratio(k):
        # q^(2j+1)|z|/(1-q^(j+1)) is decreasing in j
        j = k0 + k
        return q ** (2 * j + 1) * absz / (1 - q ** (j + 1)) if absz else mpf(0)

    return sum_terms(first, step, tail_ratio, eps)[:2]


def aq_direct(z, q, rel_eps=None):
    """Ramanujan's entire function A_q(z) = sum_k q^(k^2) (-z)^k / (q;q)_k."""
    q = _base(q)
    eps = _eps(rel_eps)
    return with_cancellation_retry(lambda e: _aq_tail(z, q, 0, mpf(1), e), eps)


def aq_split(z, q, split: int, rel_eps=None):
    """A_q(z) cut into the sums over 0 <= k <= split and k > split."""
    q = _base(q)
    eps = _eps(rel_eps)
    head = term = mpf(1)
    qk = q
    for k in range(split):
        term = term * (-z) * q ** (2 * k + 1) / (1 - qk)
        qk *= q
        head += term
    k = split
    nxt = term * (-z) * q ** (2 * k + 1) / (1 - q ** (k + 1))
    tail, _ = _aq_tail(z, q, split + 1, nxt, eps)
    return head, tail


def theta(z, q, method: str = "series", rel_eps=None, relative: bool = True):
    """theta(z;q) = sum_{k in Z} q^(k^2/2) z^k.

    ``method="product"`` uses the triple product (q, -q^(1/2) z, -q^(1/2)/z; q)_inf.
    The series is retried at higher precision until it is good to ``rel_eps``
    relative to its value; ``relative=False`` skips that and gives accuracy
    relative to the largest term, which stays usable at the zeros.
    """
    if z == 0:
        raise ValueError("theta is undefined at z = 0")
    q = _base(q)
    eps = _eps(rel_eps)
    if method == "product":
        sq = mpmath.sqrt(q)
        return (
            qpoch_inf(q, q, eps)
            * qpoch_inf(-sq * z, q, eps)
            * qpoch_inf(-sq / z, q, eps)
        )
    if method != "series":
        raise ValueError(f"unknown theta method {method!r}")
    if not relative:
        return _theta_series(z, q, eps)[0]
    return with_cancellation_retry(lambda e: _theta_series(z, q, e), eps)


def _theta_series(z, q, eps):
    """(value, peak term magnitude) of the bilateral sum."""
    sq = mpmath.sqrt(q)
    absz = abs(z)
    zinv = 1 / z

    def side(w, absw):
        # terms k >= 1 of sum q^(k^2/2) w^k; ratio t_{k+1}/t_k = q^(k+1/2) w
        first = sq * w
        qpow = [sq * q]  # q^(k+1/2) for k = 1

        def step(k, term):
            nxt = term * w * qpow[0]
            qpow[0] *= q
            return nxt

        def tail_ratio(k):
            return sq * q ** (k + 1) * absw

        # scale the tolerance: the two halves share one budget
        return sum_terms(first, step, tail_ratio, eps / 4)

    pos, pos_peak, _ = side(z, absz)
    neg, neg_peak, _ = side(zinv, 1 / absz)
    return 1 + pos + neg, max(mpf(1), pos_peak, neg_peak)


def theta_both(z, q, rel_eps=None):
    """Series value, product value and their difference."""
    s = theta(z, q, "series", rel_eps)
    p = theta(z, q, "product", rel_eps)
    return s, p, s - p


def _cbh_sum(p: CBHParams, z, q, eps):
    q = _base(q)
    l = p.l
    ql = q**l
    absz = abs(z)
    a_cur = list(p.a)  # a_j q^k
    b_cur = list(p.b)
    ql2k1 = [ql]  # q^(l(2k+1))
    abs_a = [abs(a) for a in p.a]
    abs_b = [abs(b) for b in p.b]

    def step(k, term):
        num = term * z * ql2k1[0]
        for i, a in enumerate(a_cur):
            num *= 1 - a
            a_cur[i] = a * q
        for i, b in enumerate(b_cur):
            f = 1 - b
            if f == 0:
                raise VanishingFactorError(f"(b;q)_k vanishes for b={p.b[i]} at k={k}")
            num /= f
            b_cur[i] = b * q
        ql2k1[0] *= ql * ql
        return num

    def tail_ratio(k):
        qk = q**k
        bound = ql ** (2 * k + 1) * absz
        for a in abs_a:
            bound *= 1 + a * qk
        for b in abs_b:
            d = 1 - b * qk
            if d <= 0:
                return mpf("inf")
            bound /= d
        return bound

    return sum_terms(mpf(1), step, tail_ratio, eps)[:2]


def cbh_direct(p: CBHParams, z, q, rel_eps=None):
    """sum_k (a_1..a_r;q)_k q^(l k^2) z^k / (b_1..b_s;q)_k."""
    eps = _eps(rel_eps)
    return with_cancellation_retry(lambda e: _cbh_sum(p, z, q, e), eps)


def phi_to_f(r: int, s: int, z, q):
    """Exponent l and argument that turn r-phi-s at -z q^((s+1-r)/2) into
    the confluent form sum (a;q)_k q^(l k^2) z^k / (b;q)_k."""
    d = s + 1 - r
    if d <= 0:
        raise ValueError(f"s + 1 - r must be positive, got {d}")
    l = mpf(d) / 2
    return l, -z * _base(q) ** l


def c_factor(p: CBHParams, q, rel_eps=None):
    """(a_1..a_r;q)_inf / (b_1..b_s;q)_inf."""
    num = qpoch_inf_multi(p.a, q, rel_eps)
    den = qpoch_inf_multi(p.b, q, rel_eps)
    if den == 0:
        raise VanishingFactorError("denominator product (b;q)_inf vanishes")
    return num / den
