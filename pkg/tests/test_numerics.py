import math
import random

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mpc, mpf

from qasym.fitting import DegenerateFitError, fit_line
from qasym.numerics import (
    LogScaled,
    PrecisionError,
    default_rel_eps,
    from_scaled,
    geometric_tail_bound,
    lost_bits,
    normalize_scaled,
    required_precision,
    sum_terms,
    to_scaled,
    with_cancellation_retry,
)


@pytest.mark.parametrize(
    "n,t,q,bits",
    [(1, 1, 0.5, 257), (100, 0.5, 0.5, 881), (100, 0.5, 0.25, 1506)],
)
def test_required_precision_examples(n, t, q, bits):
    assert required_precision(n, t, q) == bits


def test_required_precision_monotone_and_guard():
    prev = 0
    for n in range(1, 300, 7):
        p = required_precision(n, math.sqrt(2), 0.5)
        assert p >= prev
        prev = p
    # guard grows with nt once nt > 256
    assert required_precision(1000, 1, 0.999) >= 1000


@pytest.mark.parametrize("q", [0, 1, -0.5, 1.5])
def test_required_precision_rejects_bad_q(q):
    with pytest.raises(ValueError):
        required_precision(10, 1, q)


def test_geometric_tail_bound_examples():
    assert geometric_tail_bound(0, 0.9) == 0
    assert geometric_tail_bound(1, 0.5) == 2
    with mpmath.workprec(128):
        assert abs(geometric_tail_bound(mpf("0.25"), mpf("0.25")) - mpf(1) / 3) < mpf(2) ** -120
    with pytest.raises(ValueError):
        geometric_tail_bound(1, 1)
    with pytest.raises(ValueError):
        geometric_tail_bound(1, -0.1)


def test_geometric_tail_bound_dominates_exact_sums():
    rng = random.Random(20261015)
    with mpmath.workprec(128):
        for _ in range(1000):
            first = mpf(rng.uniform(0, 10))
            ratio = mpf(rng.uniform(0, 0.999))
            # tail whose ratios decay below ratio: r_k = ratio * s^k
            s = mpf(rng.uniform(0.5, 1))
            total, term = mpf(0), first
            for k in range(200):
                total += term
                term *= ratio * s**k
            assert total <= geometric_tail_bound(first, ratio) * (1 + mpf(2) ** -100)


def test_normalize_examples():
    v = normalize_scaled(LogScaled(mpc(4), mpf(0), mpf("0.5")))
    assert v.mantissa == 1 and v.exponent == -2
    z = normalize_scaled(LogScaled(mpc(0), mpf(17), mpf("0.3")))
    assert z.mantissa == 0 and z.exponent == 0
    h = normalize_scaled(LogScaled(mpc("0.5"), mpf(3), mpf("0.5")))
    assert h.mantissa == 1 and h.exponent == 4


@settings(max_examples=200, deadline=None)
@given(
    re=st.floats(-1e30, 1e30, allow_nan=False),
    im=st.floats(-1e30, 1e30, allow_nan=False),
    e=st.integers(-10**6, 10**6),
    base=st.floats(0.01, 0.99),
)
def test_normalize_idempotent_and_value_preserving(re, im, e, base):
    P = 160
    with mpmath.workprec(P):
        v = LogScaled(mpc(re, im), mpf(e), mpf(base))
        n1 = normalize_scaled(v)
        n2 = normalize_scaled(n1)
        assert n2 == n1
        if v.mantissa == 0:
            assert n1.mantissa == 0
            return
        assert abs(n1.mantissa) >= 1 and abs(n1.mantissa) * n1.base < 1
        # compare in log space: values can be astronomically large
        d = mpmath.log(n1.mantissa / v.mantissa) + (n1.exponent - v.exponent) * mpmath.log(v.base)
        # log(base) is rounded, so the slack grows with the exponent shift
        assert abs(d) <= mpf(2) ** -(P - 8) * (1 + abs(n1.exponent - e))


@settings(max_examples=200, deadline=None)
@given(x=st.floats(1e-200, 1e200), base=st.floats(0.05, 0.95), e=st.integers(-50, 50))
def test_scaled_roundtrip(x, base, e):
    P = 200
    with mpmath.workprec(P):
        x = mpf(x)
        back = from_scaled(to_scaled(x, base))
        assert abs(back - x) <= abs(x) * mpf(2) ** -(P - 8)
        w = to_scaled(x, base, e)
        ref = x * mpf(base) ** e
        assert abs(from_scaled(w) - ref) <= abs(ref) * mpf(2) ** -(P - 8)


def test_logscaled_mul_and_log_abs():
    with mpmath.workprec(128):
        a = to_scaled(3, "0.5", 10)
        b = to_scaled(5, "0.5", -4)
        c = a * b
        assert abs(c.value() - 15 * mpf("0.5") ** 6) < mpf(2) ** -110
        assert abs(c.log_abs() - mpmath.log(15 * mpf("0.5") ** 6)) < mpf(2) ** -110
        with pytest.raises(ValueError):
            a * to_scaled(1, "0.25")


def test_lost_bits():
    assert lost_bits(0, 1) == 0
    assert lost_bits(1, 0) == math.inf
    assert lost_bits(1024, 1) == pytest.approx(10)
    assert lost_bits(1, 8) == 0


def test_default_rel_eps():
    assert default_rel_eps(256) == mpf(2) ** -128


def test_sum_terms_geometric():
    with mpmath.workprec(200):
        total, peak, used = sum_terms(mpf(1), lambda k, t: t / 3, lambda k: mpf(1) / 3, mpf(2) ** -150)
        assert abs(total - mpf(3) / 2) < mpf(2) ** -145
        assert peak == 1 and used > 90


def test_sum_terms_exp_series_crosses_peak():
    # e^40: terms grow until k ~ 40, the tail bound only applies afterwards
    with mpmath.workprec(256):
        x = mpf(40)
        total, peak, _ = sum_terms(
            mpf(1), lambda k, t: t * x / (k + 1), lambda k: x / (k + 1), mpf(2) ** -200
        )
        assert abs(total / mpmath.exp(x) - 1) < mpf(2) ** -190
        assert peak > mpmath.exp(x) / 20


def test_cancellation_retry_recovers_precision():
    # e^-40 by its alternating series: the peak term is ~2^54, the sum ~2^-58
    eps = mpf(2) ** -200
    precs = []

    def compute(trunc):
        precs.append(mpmath.mp.prec)
        x = mpf(-40)
        total, peak, _ = sum_terms(
            mpf(1), lambda k, t: t * x / (k + 1), lambda k: abs(x) / (k + 1), trunc
        )
        return total, peak

    with mpmath.workprec(128):
        v = with_cancellation_retry(compute, eps)
        assert mpmath.mp.prec == 128
    assert precs == [128, 256, 512]
    with mpmath.workprec(128):
        assert abs(v / mpmath.exp(-40) - 1) < mpf(2) ** -80


def test_cancellation_retry_gives_up():
    def compute(trunc):
        return mpf(0), mpf(1)  # total cancellation never recovers

    with mpmath.workprec(64):
        with pytest.raises(PrecisionError) as exc:
            with_cancellation_retry(compute, mpf(2) ** -32)
    assert exc.value.lost_bits == math.inf


def test_fit_line_examples():
    f = fit_line([(0, 0), (1, 1), (2, 2)])
    assert f.slope == pytest.approx(1) and f.intercept == pytest.approx(0, abs=1e-15)
    assert f.r_squared == pytest.approx(1) and f.points_used == 3
    assert fit_line([(0, 1), (1, 1), (2, 1)]).slope == pytest.approx(0)
    # closed form: slope = sum (x-xbar)(y-ybar) / sum (x-xbar)^2 = 4.3/2
    assert fit_line([(1, 2), (2, 4), (3, 6.3)]).slope == pytest.approx(2.15)


def test_fit_line_degenerate():
    with pytest.raises(DegenerateFitError):
        fit_line([(0, 0), (1, 1)])
    with pytest.raises(DegenerateFitError):
        fit_line([(1, 0), (1, 1), (1, 2)])
