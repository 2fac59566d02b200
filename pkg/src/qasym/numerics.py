"""Precision policy, q-scaled values and tail bounds.

All analytic quantities are mpmath ``mpf``/``mpc`` values; the working
precision is whatever mpmath context is active when an operation runs.
Callers choose it per evaluation with :func:`required_precision` and
:func:`mpmath.workprec`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Tuple

import mpmath
from mpmath import mpc, mpf

MIN_PRECISION_BITS = 64
MIN_GUARD_BITS = 256
CANCELLATION_MARGIN_BITS = 16
MAX_RETRIES = 3


class PrecisionError(ArithmeticError):
    """Cancellation ate the accuracy budget even after the allowed retries."""

    def __init__(self, message: str, lost_bits: float):
        super().__init__(message)
        self.lost_bits = lost_bits


def _check_base(q) -> None:
    if not 0 < q < 1:
        raise ValueError(f"q must lie in (0, 1), got {q}")


def required_precision(n: int, t, q, l=1) -> int:
    """Working precision (bits) for evaluating at the scaled point q^(-l*n*t) u.

    The magnitude part ``l*(nt)^2/4 * log2(1/q)`` covers the peak series term
    q^(-h(nt-h)), h = floor(m/2); on top come ``max(256, nt)`` guard bits.
    """
    _check_base(q)
    if n < 1:
        raise ValueError("n must be a positive integer")
    if t <= 0:
        raise ValueError("t must be positive")
    nt = n * mpf(t)
    magnitude = mpf(l) * nt * nt / 4 * mpmath.log(1 / mpf(q), 2)
    guard = max(MIN_GUARD_BITS, int(mpmath.ceil(nt)))
    return int(mpmath.ceil(magnitude)) + guard


def geometric_tail_bound(first_term_mag, ratio):
    """Upper bound ``first/(1-ratio)`` for a tail whose term ratios stay <= ratio."""
    if ratio < 0 or ratio >= 1:
        raise ValueError(f"tail not geometrically summable with ratio {ratio}")
    if first_term_mag == 0:
        return mpf(0)
    return mpf(first_term_mag) / (1 - mpf(ratio))


@dataclass(frozen=True)
class LogScaled:
    """The number ``mantissa * base**exponent`` with a base in (0, 1)."""

    mantissa: mpc
    exponent: mpf
    base: mpf

    def normalize(self) -> "LogScaled":
        return normalize_scaled(self)

    def value(self):
        return from_scaled(self)

    def log_abs(self):
        """Natural log of the absolute value, without forming the value."""
        if self.mantissa == 0:
            return mpf("-inf")
        return mpmath.log(abs(self.mantissa)) + self.exponent * mpmath.log(self.base)

    def __mul__(self, other: "LogScaled") -> "LogScaled":
        if other.base != self.base:
            raise ValueError("cannot multiply LogScaled values with different bases")
        return LogScaled(
            self.mantissa * other.mantissa, self.exponent + other.exponent, self.base
        ).normalize()


def normalize_scaled(v: LogScaled) -> LogScaled:
    """Shift integer powers of the base so that 1 <= |mantissa| < 1/base."""
    base = mpf(v.base)
    _check_base(base)
    mant = v.mantissa
    if mant == 0:
        return LogScaled(mpc(0), mpf(0), base)
    # j = number of base-powers pulled out of the mantissa
    j = int(mpmath.floor(mpmath.log(abs(mant)) / mpmath.log(1 / base)))
    # mant * b^e = (mant * b^j) * b^(e - j)
    mant = mant * base**j
    exponent = mpf(v.exponent) - j
    # log() rounding can leave the mantissa one step outside the window
    while abs(mant) < 1:
        mant /= base
        exponent += 1
    while abs(mant) * base >= 1:
        mant *= base
        exponent -= 1
    return LogScaled(mpc(mant), exponent, base)


def to_scaled(x, base, exponent=0) -> LogScaled:
    """Wrap ``x * base**exponent`` and normalize."""
    return normalize_scaled(LogScaled(mpc(x), mpf(exponent), mpf(base)))


def from_scaled(v: LogScaled):
    return v.mantissa * v.base**v.exponent


def lost_bits(peak, total) -> float:
    """Bits cancelled when terms of size up to ``peak`` sum to ``total``."""
    if peak == 0:
        return 0.0
    if total == 0:
        return math.inf
    return max(0.0, float(mpmath.log(mpf(peak) / abs(total), 2)))


def default_rel_eps(prec: int | None = None) -> mpf:
    """Truncation tolerance 2^(-P/2) at working precision P."""
    if prec is None:
        prec = mpmath.mp.prec
    return mpf(2) ** (-(prec // 2))


def sum_terms(
    first,
    step: Callable[[int, object], object],
    tail_ratio: Callable[[int], object],
    rel_eps,
    max_terms: int = 10**7,
) -> Tuple[object, mpf, int]:
    """Sum ``t_0 + t_1 + ...`` with t_{k+1} = step(k, t_k).

    ``tail_ratio(k)`` must bound |t_{j+1}/t_j| for every j >= k. Summation
    stops once the geometric tail bound on the unsummed terms falls below
    ``rel_eps`` times the largest partial-sum magnitude seen so far.

    Returns ``(total, peak_term_magnitude, terms_used)``.
    """
    total = term = first
    peak = abs(first)
    largest = abs(first)
    k = 0
    while k < max_terms:
        nxt = step(k, term)
        rho = tail_ratio(k + 1)
        if rho < 1 and abs(nxt) <= rel_eps * largest * (1 - rho):
            return total, peak, k + 1
        total += nxt
        term = nxt
        k += 1
        mag = abs(term)
        if mag > peak:
            peak = mag
        partial = abs(total)
        if partial > largest:
            largest = partial
    raise RuntimeError(f"series did not reach its tail bound within {max_terms} terms")


def with_cancellation_retry(compute, rel_eps=None):
    """Run ``compute(trunc_eps)`` -> (value, peak) until cancellation is covered.

    A sum truncated at ``trunc_eps`` relative to its largest partial and
    evaluated at ``work`` bits is trusted to ``min(work, -log2 trunc_eps) - lost``
    bits, where ``lost`` compares the peak term with the result. Until that
    reaches ``-log2(rel_eps)`` the precision doubles (at most MAX_RETRIES
    times) and the truncation tolerance is tightened by the bits lost. The
    first attempt already keeps CANCELLATION_MARGIN_BITS in reserve.

    ``compute`` reads the ambient mpmath precision. The result is rounded
    back to the caller's precision.
    """
    prec = mpmath.mp.prec
    eps = default_rel_eps(prec) if rel_eps is None else mpf(rel_eps)
    demanded = max(0.0, -float(mpmath.log(eps, 2)))
    trunc = demanded + CANCELLATION_MARGIN_BITS
    work = prec
    worst = 0.0
    for _ in range(MAX_RETRIES + 1):
        with mpmath.workprec(work):
            value, peak = compute(mpf(2) ** -math.ceil(trunc))
        lost = lost_bits(peak, value)
        worst = max(worst, lost)
        if min(work, trunc) - lost >= demanded:
            return +value
        work *= 2
        # a sum that cancelled to zero gives no loss estimate; aim at the new precision
        trunc = demanded + min(lost, work) + CANCELLATION_MARGIN_BITS
    raise PrecisionError(
        f"cancellation of {worst:.1f} bits persists after {MAX_RETRIES} retries", worst
    )
