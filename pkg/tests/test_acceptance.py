"""End-to-end acceptance checks, one test per criterion.

Each test states its tolerance and runtime budget inline; a summary line per
criterion is printed at the end of the pytest run.
"""

import math
import random
import time

import mpmath
import pytest
from mpmath import mpc, mpf

from qasym import asymptotics as asy
from qasym import harness
from qasym.diophantine import (
    Rational,
    chaotic_exponent_estimate,
    inhom_ostrowski,
    inhom_records_bruteforce,
    liouville_param,
    parse_scaling_param,
    record_at,
)
from qasym.fitting import fit_line
from qasym.qseries import aq_direct, qpoch_inf, remainder_bounds, theta

SQRT2 = parse_scaling_param("sqrt(2)")
GOLDEN = parse_scaling_param("(1+sqrt(5))/2")
HALF_SWEEP = harness.ExperimentSpec(family="aq", t="1/2", q="0.5", u="1", n_source="20:120:4")


def note(record_property, text):
    record_property("detail", text)
    print(text)


@pytest.mark.criterion(1, "theta series equals triple product to 2^-224 at 256 bits")
def test_triple_product(record_property):
    t0 = time.perf_counter()
    worst = mpf(0)
    with mpmath.workprec(256):
        eps = mpf(2) ** -250
        for q in ["0.1", "0.3", "0.5", "0.7", "0.9"]:
            q = mpf(q)
            for radius in (mpf("0.5"), mpf(2)):
                for k in range(12):
                    # angles offset by pi/12 keep clear of the negative real axis
                    z = radius * mpmath.expjpi(mpf(2 * k + 1) / 12)
                    s = theta(z, q, "series", eps)
                    p = theta(z, q, "product", eps)
                    worst = max(worst, abs(s - p) / abs(p))
    secs = time.perf_counter() - t0
    note(record_property, f"worst relative gap 2^{float(mpmath.log(worst, 2)):.1f} over 120 points")
    assert worst <= mpf(2) ** -224
    assert secs < 5


@pytest.mark.criterion(2, "A_q recurrence, growth bound and q -> 1 limit")
def test_aq_identities(record_property):
    t0 = time.perf_counter()
    P = 256
    worst = mpf(0)
    with mpmath.workprec(P):
        eps = mpf(2) ** -250
        for q in ["0.1", "0.3", "0.5", "0.7", "0.9"]:
            q = mpf(q)
            for z in [mpc("0.5"), mpc(-3, 1), mpc(10, -4), mpc(0, 25), mpc(-40)]:
                a0, a1, a2 = aq_direct(z, q, eps), aq_direct(q * z, q, eps), aq_direct(q * q * z, q, eps)
                scale = max(abs(a0), abs(a1), abs(q * z * a2))
                # A(z) - A(qz) = -qz A(q^2 z)
                worst = max(worst, abs(a0 - a1 + q * z * a2) / scale)
        growth_ok = True
        for q in ["0.1", "0.5", "0.9", "0.99"]:
            q = mpf(q)
            for r in [0, 1, 5, 12.5, 25, 50]:
                for k in range(16):
                    z = r * mpmath.expjpi(mpf(k) / 8)
                    growth_ok &= abs(aq_direct((1 - q) * z, q)) <= mpmath.exp(q * abs(z))
        diffs = [abs(aq_direct(mpf(10) ** -j, 1 - mpf(10) ** -j) - mpmath.exp(-1)) for j in range(1, 5)]
    secs = time.perf_counter() - t0
    note(
        record_property,
        f"recurrence worst 2^{float(mpmath.log(worst, 2)):.1f}; growth ok={growth_ok}; "
        f"limit gaps {', '.join(mpmath.nstr(d, 3) for d in diffs)}",
    )
    assert worst <= mpf(2) ** -(P - 32)
    assert growth_ok
    assert all(b < a for a, b in zip(diffs, diffs[1:]))
    assert secs < 10


@pytest.mark.criterion(3, "remainder bounds hold on 50 random (a, q, n)")
def test_remainder_bounds(record_property):
    t0 = time.perf_counter()
    rng = random.Random(2026)
    tightest = 0.0
    with mpmath.workprec(256):
        for _ in range(50):
            q = mpf(rng.uniform(0.05, 0.95))
            a = mpf(rng.uniform(0.01, 0.99)) / q  # a > 0 and 0 < aq < 1
            n = rng.randint(1, 40)
            r1, r2 = remainder_bounds(a, q, n)
            tail = qpoch_inf(a * q**n, q)
            R1, R2 = abs(tail - 1), abs(1 / tail - 1)
            assert R1 <= r1 and R2 <= r2
            tightest = max(tightest, float(R1 / r1), float(R2 / r2))
    note(record_property, f"largest measured/bound ratio {tightest:.3f}")
    assert time.perf_counter() - t0 < 5


@pytest.mark.criterion(4, "rational t = 1/2 sweep within bound, exponential decay")
def test_rational_sweep(record_property):
    t0 = time.perf_counter()
    res = harness.run_sweep(HALF_SWEEP)
    secs = time.perf_counter() - t0
    t, q = 0.5, 0.5
    formula = t / 4 * math.log(q) + 0.02
    printed = -0.1466 + 0.02
    failed = [r.point.n for r in res.rows if not r.bound_satisfied]
    note(
        record_property,
        f"{len(res.rows)} points, unsatisfied {failed}; slope {res.fit.slope:.4f} "
        f"vs {formula:.4f} (formula) and {printed:.4f} (stated); "
        f"{res.rows[-1].precision_bits} bits at n=120",
    )
    assert [r.point.n for r in res.rows] == list(range(20, 121, 4))
    assert not failed
    assert res.fit.slope <= min(formula, printed)
    assert secs < 120


@pytest.mark.criterion(5, "sqrt(2) convergent denominators give polynomial decay")
def test_irrational_sqrt2(record_property):
    t0 = time.perf_counter()
    spec = harness.ExperimentSpec(
        family="aq", t="sqrt(2)", q="0.5", u="1", beta_or_lambda="0", n_source="2,5,12,29,70,169,408"
    )
    res = harness.run_sweep(spec)
    secs = time.perf_counter() - t0
    note(
        record_property,
        f"log-log slope {res.fit.slope:.3f} (r^2 {res.fit.r_squared:.3f}); "
        f"{res.rows[-1].precision_bits} bits at n=408; {secs:.1f} s",
    )
    assert all(r.error is None for r in res.rows)
    assert res.fit.slope <= -0.8
    assert secs < 600


@pytest.mark.criterion(6, "Liouville parameter: tiny gamma_64, large exponent, shrinking residual")
def test_liouville(record_property):
    t0 = time.perf_counter()
    t = liouville_param(2)
    g64 = record_at(t, 64, 0)
    with mpmath.workprec(300):
        tail_gap = abs(g64.gamma - mpf(2) ** -18)
    assert abs(g64.gamma) <= mpf(64) ** mpf("-2.9")
    assert tail_gap < mpf(2) ** -100
    est = chaotic_exponent_estimate(t, 0, 100)
    listed = [(math.log(n), float(mpmath.log(record_at(t, n, 0).distance))) for n in (2, 4, 64)]
    r_listed = -fit_line(listed).slope
    r4 = asy.residual(asy.irrational_point(t, 4, 0, 1, mpf("0.5")))
    r64 = asy.residual(asy.irrational_point(t, 64, 0, 1, mpf("0.5")))
    secs = time.perf_counter() - t0
    note(
        record_property,
        f"r_hat {est.r_hat:.2f} over strict records n>=10, {r_listed:.2f} over n in {{2,4,64}}; "
        f"|r(4)| {mpmath.nstr(r4.residual_abs, 3)}, |r(64)| {mpmath.nstr(r64.residual_abs, 3)} "
        f"at {r64.precision_bits} bits",
    )
    assert est.r_hat >= 3 and r_listed >= 3
    assert r64.residual_abs <= r4.residual_abs
    assert secs < 60


@pytest.mark.criterion(7, "Ostrowski stepping reproduces brute-force records to 10^4")
def test_oracle_equivalence(record_property):
    t0 = time.perf_counter()
    N = 10**4
    counts = []
    for t in (SQRT2, GOLDEN):
        for beta in ("0", "0.3", "0.5"):
            ost = inhom_ostrowski(t, beta, n_max=N)
            brute = inhom_records_bruteforce(t, beta, N)
            # the trivial n = 1 record is not an Ostrowski step
            assert [r.n for r in ost] == [r.n for r in brute if r.n > 1]
            for o in ost:
                assert abs(o.gamma) <= mpf(3) / o.n
            counts.append(len(ost))
    secs = time.perf_counter() - t0
    note(record_property, f"record counts {counts}; {secs:.2f} s")
    assert secs < 30


@pytest.mark.criterion(8, "chaotic-index estimator: rational floor and sqrt(2) near 1")
def test_chaotic_estimator(record_property):
    t0 = time.perf_counter()
    rat = chaotic_exponent_estimate(Rational(1, 3), "0.1", 10**4)
    irr = chaotic_exponent_estimate(SQRT2, 0, 10**4)
    note(record_property, f"1/3: floor={rat.floor} at {rat.floor_distance}; sqrt(2): r_hat {irr.r_hat:.4f}")
    assert rat.floor and rat.r_hat == 0
    assert 0.9 <= irr.r_hat <= 1.1
    assert time.perf_counter() - t0 < 30


@pytest.mark.criterion(9, "confluent family: embedding and a fresh instance")
def test_confluent(record_property):
    t0 = time.perf_counter()
    q = mpf("0.5")
    worst = mpf(0)
    for n in (20, 36, 52):
        pt = asy.rational_point(Rational(1, 2), n, 1, q)
        a = asy.residual(pt)
        b = asy.residual(asy.aq_as_cbh(pt), a.precision_bits)
        with mpmath.workprec(a.precision_bits):
            gap = abs(a.residual - b.residual) * mpf(2) ** (a.precision_bits - 32)
        worst = max(worst, gap)
    spec = harness.ExperimentSpec(
        family="cbh", t="1/2", q="0.5", u="1", n_source="20:80:2", a="0.3", b="0.2,0.4", l="1"
    )
    res = harness.run_sweep(spec)
    secs = time.perf_counter() - t0
    note(
        record_property,
        f"embedding gap / 2^-(P-32) <= {mpmath.nstr(worst, 3)}; fresh instance "
        f"{sum(r.bound_satisfied for r in res.rows)}/{len(res.rows)} within bound, "
        f"slope {res.fit.slope:.4f} (r^2 {res.fit.r_squared:.4f})",
    )
    assert worst <= 1
    assert all(r.bound_satisfied for r in res.rows)
    assert res.fit.slope < 0 and res.fit.r_squared > 0.99
    assert secs < 120


@pytest.mark.criterion(10, "rational sweep output is byte-identical across runs")
def test_determinism(record_property):
    a = harness.rows_to_csv(harness.run_sweep(HALF_SWEEP))
    b = harness.rows_to_csv(harness.run_sweep(HALF_SWEEP))
    note(record_property, f"{len(a)} bytes, identical={a == b}")
    assert a == b
