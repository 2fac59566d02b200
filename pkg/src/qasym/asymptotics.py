"""Theta main terms, explicit error bounds and measured residuals r(n).

Along n t = m + offset (+ gamma), with h = floor(m/2),

    A_q(q^(-nt) u) = (-u)^h {theta(-u^-1 q^(chi(m)+offset); q^2) + r(n)}
                     / ((q;q)_inf q^(h(nt-h)))

and for the confluent family f(z) = sum (a;q)_k q^(l k^2) z^k / (b;q)_k

    f(q^(-l nt) u) = c u^h {theta(u^-1 q^(l chi(m) + l offset); q^(2l)) + r(n)}
                     / q^(l h(nt-h)),     c = (a;q)_inf / (b;q)_inf.

A residual is the exact rearrangement (direct value) * normalizer - theta.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Optional, Tuple

import mpmath
from mpmath import mpc, mpf

from . import qseries
from .diophantine import ApproxRecord, ScalingParam, as_fraction, chi, record_at, scaled
from .numerics import LogScaled, required_precision, to_scaled
from .qseries import CBHParams

AQ = "aq"
CBH = "cbh"


@dataclass(frozen=True)
class TheoremPoint:
    """One (n, m, offset) checkpoint of the asymptotic theorems.

    ``offset`` is lambda = nt - m for rational t and beta for irrational t,
    where the point comes from an approximation record carrying ``gamma``.
    """

    n: int
    m: int
    offset: Fraction
    t: ScalingParam
    u: mpc
    q: mpf
    family: str = AQ
    params: Optional[CBHParams] = None
    gamma: Optional[mpf] = None
    gamma_bound: Optional[mpf] = None

    @property
    def h(self) -> int:
        return self.m // 2

    @property
    def rational(self) -> bool:
        return self.t.exact is not None

    @property
    def l(self) -> mpf:
        return self.params.l if self.family == CBH else mpf(1)

    def nt(self, prec: int):
        return scaled(self.t, self.n, prec)

    def q_exponent(self, prec: int):
        """h (nt - h), exact for rational t."""
        h = self.h
        if self.t.exact is not None:
            e = h * (self.n * self.t.exact - h)
            with mpmath.workprec(prec):
                return mpf(e.numerator) / e.denominator
        with mpmath.workprec(prec):
            return h * (self.nt(prec) - h)


def _family(family: str, params: Optional[CBHParams]):
    family = family.lower()
    if family not in (AQ, CBH):
        raise ValueError(f"unknown family {family!r}")
    if family == CBH and params is None:
        raise ValueError("the confluent family needs CBHParams")
    return family, params if family == CBH else None


def rational_point(
    t: ScalingParam, n: int, u, q, family: str = AQ, params: Optional[CBHParams] = None
) -> TheoremPoint:
    """The point with m = floor(nt), lambda = nt - m, for rational t."""
    if t.exact is None:
        raise ValueError("rational_point needs a rational scaling parameter")
    if n < 1:
        raise ValueError("n must be positive")
    family, params = _family(family, params)
    nt = n * t.exact
    m = nt.numerator // nt.denominator
    return TheoremPoint(n, m, nt - m, t, mpc(u), mpf(q), family, params)


def record_point(
    t: ScalingParam,
    rec: ApproxRecord,
    u,
    q,
    family: str = AQ,
    params: Optional[CBHParams] = None,
) -> TheoremPoint:
    """The point n t = m + beta + gamma taken from an approximation record."""
    if not t.is_irrational:
        raise ValueError("record points are for irrational scaling parameters")
    family, params = _family(family, params)
    return TheoremPoint(
        rec.n, rec.m, rec.beta, t, mpc(u), mpf(q), family, params, rec.gamma, rec.gamma_bound
    )


def irrational_point(
    t: ScalingParam, n: int, beta, u, q, family: str = AQ, params=None, prec: int = 256
) -> TheoremPoint:
    """Build the record decomposition for n and wrap it as a point."""
    return record_point(t, record_at(t, n, as_fraction(beta), prec), u, q, family, params)


def point_precision(pt: TheoremPoint) -> int:
    return required_precision(pt.n, float(pt.t), pt.q, pt.l)


def _parity_power(pt: TheoremPoint):
    """chi(m) + offset as a working-precision number."""
    off = pt.offset
    return chi(pt.m) + mpf(off.numerator) / off.denominator


def main_theta(pt: TheoremPoint, rel_eps=None):
    """The theta factor of the main term.

    Residuals compare absolute sizes, so the series is not pushed to relative
    accuracy; the main factor vanishes at some checkpoints.
    """
    q = pt.q
    e = _parity_power(pt)
    if pt.family == AQ:
        return qseries.theta(-q**e / pt.u, q * q, rel_eps=rel_eps, relative=False)
    l = pt.l
    return qseries.theta(q ** (l * e) / pt.u, q ** (2 * l), rel_eps=rel_eps, relative=False)


def residual_eps(prec: int) -> mpf:
    """Series tolerance for residuals: full precision less 16 bits."""
    return mpf(2) ** -(prec - 16)


def _q_power(pt: TheoremPoint, exponent_fn, prec: int):
    """q ** exponent_fn(bits) with guard bits for a large exponent."""
    mag = int(pt.l * pt.n * float(pt.t)) + 1
    guard = 32 + (mag * mag).bit_length()
    with mpmath.workprec(prec + guard):
        v = pt.q ** exponent_fn(prec + guard)
    return +v


def _normalizer(pt: TheoremPoint, prec: int, rel_eps=None):
    """Factor turning the direct value into {theta + r(n)}."""
    q, h = pt.q, pt.h
    qe = _q_power(pt, lambda b: pt.l * pt.q_exponent(b), prec)
    if pt.family == AQ:
        return qseries.qpoch_inf(q, q, rel_eps) * qe / (-pt.u) ** h
    return qe / (qseries.c_factor(pt.params, q, rel_eps) * pt.u**h)


def _direct(pt: TheoremPoint, prec: int, rel_eps=None):
    q = pt.q
    z = _q_power(pt, lambda b: -pt.l * pt.nt(b), prec) * pt.u
    if pt.family == AQ:
        return qseries.aq_direct(z, q, rel_eps)
    return qseries.cbh_direct(pt.params, z, q, rel_eps)


def aq_main_term(pt: TheoremPoint) -> LogScaled:
    """(-u)^h theta(-u^-1 q^(chi(m)+offset); q^2) / ((q;q)_inf q^(h(nt-h)))."""
    if pt.family != AQ:
        raise ValueError("aq_main_term needs an A_q point")
    prec = mpmath.mp.prec
    q = pt.q
    mant = (-pt.u) ** pt.h * main_theta(pt) / qseries.qpoch_inf(q, q)
    return to_scaled(mant, q, -pt.q_exponent(prec))


def cbh_main_term(pt: TheoremPoint) -> LogScaled:
    """c u^h theta(u^-1 q^(l chi(m) + l offset); q^(2l)) / q^(l h(nt-h))."""
    if pt.family != CBH:
        raise ValueError("cbh_main_term needs a confluent point")
    pt.params.check_theorem_window()
    prec = mpmath.mp.prec
    q = pt.q
    mant = qseries.c_factor(pt.params, q) * pt.u**pt.h * main_theta(pt)
    return to_scaled(mant, q, -pt.l * pt.q_exponent(prec))


def main_term(pt: TheoremPoint) -> LogScaled:
    return aq_main_term(pt) if pt.family == AQ else cbh_main_term(pt)


def _bound_brace(pt: TheoremPoint, first_coeff=1):
    q, m = pt.q, pt.m
    au = abs(pt.u)
    nt = pt.nt(mpmath.mp.prec)
    return first_coeff * q ** (nt / 4) + q ** (pt.l * m * m / 16) / au ** (m // 4 + 1)


def aq_error_bound_variants(pt: TheoremPoint) -> Dict[str, mpf]:
    """The bound on |r(n)| in the two printed forms and the conservative one.

    ``theorem`` divides by (q;q)_inf with theta base q^2; ``proof`` divides
    by 1-q with theta base q; ``conservative`` divides by
    min((q;q)_inf, 1-q) with base q^2.
    """
    q = pt.q
    x = q ** _parity_power(pt) / abs(pt.u)
    pref = 3 * qseries.qpoch_inf(-(q**3), q)
    brace = _bound_brace(pt)
    qq = qseries.qpoch_inf(q, q)
    th2 = qseries.theta(x, q * q).real
    th1 = qseries.theta(x, q).real
    return {
        "conservative": pref * th2 / min(qq, 1 - q) * brace,
        "theorem": pref * th2 / qq * brace,
        "proof": pref * th1 / (1 - q) * brace,
    }


def aq_error_bound(pt: TheoremPoint) -> mpf:
    if pt.family != AQ:
        raise ValueError("aq_error_bound needs an A_q point")
    if not pt.rational:
        raise ValueError("the explicit bound covers rational t only")
    return aq_error_bound_variants(pt)["conservative"]


def cbh_error_bound(pt: TheoremPoint) -> mpf:
    """2^(r+s+2) theta(|u|^-1 q^(l chi + l offset); q^(2l)) / (q;q)_inf^(r+s)
    * {prod(-b q^2;q)_inf / prod(a q;q)_inf q^(nt/4) + q^(l m^2/16) / |u|^(floor(m/4)+1)}."""
    if pt.family != CBH:
        raise ValueError("cbh_error_bound needs a confluent point")
    if not pt.rational:
        raise ValueError("the explicit bound covers rational t only")
    p = pt.params
    p.check_theorem_window()
    q, l = pt.q, pt.l
    x = q ** (l * _parity_power(pt)) / abs(pt.u)
    th = qseries.theta(x, q ** (2 * l)).real
    qq = qseries.qpoch_inf(q, q)
    num = qseries.qpoch_inf_multi([-b * q * q for b in p.b], q)
    den = qseries.qpoch_inf_multi([a * q for a in p.a], q)
    return 2 ** (p.r + p.s + 2) * th / qq ** (p.r + p.s) * _bound_brace(pt, num / den)


@dataclass
class VerifyRow:
    point: TheoremPoint
    lhs_scaled: Optional[LogScaled]
    main_theta: Optional[mpc]
    residual: Optional[mpc]
    error_bound: Optional[mpf]
    bound_satisfied: Optional[bool]
    precision_bits: int
    residual_rel: Optional[mpf] = None
    bound_variants: Dict[str, mpf] = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def residual_abs(self) -> Optional[mpf]:
        if self.residual is None:
            return None
        with mpmath.workprec(self.precision_bits):
            return abs(self.residual)

    @property
    def ok(self) -> bool:
        return self.error is None and self.bound_satisfied is not False


def residual(pt: TheoremPoint, prec: Optional[int] = None) -> VerifyRow:
    """Evaluate the direct side at the scaled argument and subtract the theta
    main factor after exact normalization."""
    if not pt.rational and pt.gamma is None:
        raise ValueError("irrational points must come from approximation records")
    if pt.family == CBH:
        pt.params.check_theorem_window()
    P = prec or point_precision(pt)
    with mpmath.workprec(P):
        eps = residual_eps(P)
        lhs = _direct(pt, P, eps)
        normalized = lhs * _normalizer(pt, P, eps)
        th = main_theta(pt, eps)
        res = normalized - th
        rel = abs(res) / abs(th) if abs(th) > mpf(2) ** (-(P // 4)) else None
        bound = ok = None
        variants = {}
        if pt.rational:
            if pt.family == AQ:
                variants = aq_error_bound_variants(pt)
                bound = variants["conservative"]
            else:
                bound = cbh_error_bound(pt)
            ok = bool(abs(res) <= bound)
        return VerifyRow(
            point=pt,
            lhs_scaled=to_scaled(lhs, pt.q),
            main_theta=mpc(th),
            residual=mpc(res),
            error_bound=bound,
            bound_satisfied=ok,
            precision_bits=P,
            residual_rel=rel,
            bound_variants=variants,
        )


def residual_decomposition(pt: TheoremPoint, prec: Optional[int] = None) -> Tuple[mpc, mpc]:
    """Normalized sums of the A_q series over k <= h and k > h, h = floor(m/2).

    The first tends to sum_{k>=0} q^(k^2) x^k and the second to
    sum_{k<=-1} q^(k^2) x^k, x = -u^-1 q^(chi(m)+lambda).
    """
    if pt.family != AQ or not pt.rational:
        raise ValueError("residual_decomposition covers A_q points with rational t")
    P = prec or point_precision(pt)
    with mpmath.workprec(P):
        eps = residual_eps(P)
        z = _q_power(pt, lambda b: -pt.nt(b), P) * pt.u
        head, tail = qseries.aq_split(z, pt.q, pt.h, eps)
        norm = _normalizer(pt, P, eps)
        return mpc(head * norm), mpc(tail * norm)


def theta_halves(x, q, rel_eps=None) -> Tuple[mpc, mpc]:
    """(sum_{k>=0} q^(k^2) x^k, sum_{k<=-1} q^(k^2) x^k)."""
    eps = qseries._eps(rel_eps)
    pos = mpf(0)
    k = 0
    while True:
        term = q ** (k * k) * x**k
        pos += term
        if abs(term) < eps * max(abs(pos), 1) and k * 2 * mpmath.log(q) + mpmath.log(abs(x)) < -1:
            break
        k += 1
    neg = mpf(0)
    k = 1
    while True:
        term = q ** (k * k) * x ** (-k)
        neg += term
        if abs(term) < eps * max(abs(neg), 1) and k * 2 * mpmath.log(q) - mpmath.log(abs(x)) < -1:
            break
        k += 1
    return mpc(pos), mpc(neg)


def aq_as_cbh(pt: TheoremPoint) -> TheoremPoint:
    """The same checkpoint seen through f(z) = sum q^(k^2) z^k / (q;q)_k,
    i.e. f(-z) = A_q(z): parameters b = (q,), l = 1 and u -> -u."""
    if pt.family != AQ:
        raise ValueError("expected an A_q point")
    params = CBHParams((), (pt.q,), 1)
    return TheoremPoint(
        pt.n, pt.m, pt.offset, pt.t, -pt.u, pt.q, CBH, params, pt.gamma, pt.gamma_bound
    )
