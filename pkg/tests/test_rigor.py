"""Containment and monotonicity of the directed-rounding interval arithmetic."""

import math
from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest

from fibwild.rigor import (
    DivisorStraddlesZero,
    IInterval,
    NegativeBase,
    dn_add,
    dn_div,
    dn_mul,
    dn_sqrt,
    dn_sub,
    interval_from_hex,
    interval_to_hex,
    pow_real,
    root_real,
    up_add,
    up_div,
    up_mul,
    up_sqrt,
    up_sub,
)

CHECKS = 100_000


def random_doubles(rng, n, lo_exp=-30, hi_exp=30, positive=False):
    mant = rng.uniform(1.0, 2.0, n)
    exp = rng.integers(lo_exp, hi_exp, n)
    x = np.ldexp(mant, exp)
    if not positive:
        x *= rng.choice([-1.0, 1.0], n)
    return x


def random_intervals(rng, n, positive=False):
    a = random_doubles(rng, n, positive=positive)
    w = np.abs(a) * rng.choice([0.0, 1e-12, 1e-3, 0.5], n)
    return a, a + w


def exact_pairs(rng, n, positive=False):
    x = random_doubles(rng, n, positive=positive)
    y = random_doubles(rng, n, positive=positive)
    # mix in nearby operands where cancellation happens
    k = n // 4
    y[:k] = -x[:k] * (1 + rng.uniform(-1e-10, 1e-10, k))
    return x, y


OPS = {
    "add": (up_add, dn_add, lambda a, b: a + b),
    "sub": (up_sub, dn_sub, lambda a, b: a - b),
    "mul": (up_mul, dn_mul, lambda a, b: a * b),
    "div": (up_div, dn_div, lambda a, b: a / b),
}


@pytest.mark.parametrize("name", sorted(OPS))
def test_directed_scalar_ops_bracket_exact_result(name):
    up, dn, exact = OPS[name]
    rng = np.random.default_rng(1 + sorted(OPS).index(name))
    x, y = exact_pairs(rng, CHECKS)
    violations = 0
    for a, b in zip(x.tolist(), y.tolist()):
        e = exact(Fraction(a), Fraction(b))
        u, d = up(a, b), dn(a, b)
        if not (Fraction(d) <= e <= Fraction(u)):
            violations += 1
        elif u != d and not (math.nextafter(d, math.inf) >= u or Fraction(d) < e < Fraction(u)):
            violations += 1
    assert violations == 0


def test_directed_sqrt_brackets_exact_root():
    rng = np.random.default_rng(11)
    x = random_doubles(rng, CHECKS, positive=True)
    violations = 0
    for a in x.tolist():
        u, d = up_sqrt(a), dn_sqrt(a)
        fa = Fraction(a)
        if not (Fraction(d) ** 2 <= fa <= Fraction(u) ** 2) or u > math.nextafter(d, math.inf):
            violations += 1
    assert violations == 0


def test_directed_rounding_is_tight():
    """Up and down results are adjacent or equal: one rounding step, not a padded bound."""
    rng = np.random.default_rng(12)
    x, y = exact_pairs(rng, 10_000)
    for a, b in zip(x.tolist(), y.tolist()):
        for up, dn, _ in OPS.values():
            assert up(a, b) <= math.nextafter(dn(a, b), math.inf)


INTERVAL_OPS = {
    "add": lambda A, B: A + B,
    "sub": lambda A, B: A - B,
    "mul": lambda A, B: A * B,
    "div": lambda A, B: A / B,
}


@pytest.mark.parametrize("name", sorted(INTERVAL_OPS))
def test_interval_ops_contain_pointwise_results(name):
    op = INTERVAL_OPS[name]
    rng = np.random.default_rng(21 + sorted(INTERVAL_OPS).index(name))
    alo, ahi = random_intervals(rng, CHECKS)
    blo, bhi = random_intervals(rng, CHECKS, positive=(name == "div"))
    s = rng.uniform(0, 1, CHECKS)
    violations = 0
    for k in range(CHECKS):
        A, B = IInterval(alo[k], ahi[k]), IInterval(blo[k], bhi[k])
        R = op(A, B)
        # endpoints and one interior point of each operand
        xa = Fraction(alo[k]) + Fraction(s[k]) * (Fraction(ahi[k]) - Fraction(alo[k]))
        for a in (Fraction(alo[k]), Fraction(ahi[k]), xa):
            for b in (Fraction(blo[k]), Fraction(bhi[k])):
                e = op(a, b)
                if not (Fraction(R.lo) <= e <= Fraction(R.hi)):
                    violations += 1
    assert violations == 0


@pytest.mark.parametrize("name", sorted(INTERVAL_OPS))
def test_interval_ops_are_inclusion_monotone(name):
    op = INTERVAL_OPS[name]
    rng = np.random.default_rng(31 + sorted(INTERVAL_OPS).index(name))
    alo, ahi = random_intervals(rng, CHECKS)
    blo, bhi = random_intervals(rng, CHECKS, positive=(name == "div"))
    grow = rng.uniform(0, 0.1, CHECKS)
    violations = 0
    for k in range(CHECKS):
        A, B = IInterval(alo[k], ahi[k]), IInterval(blo[k], bhi[k])
        g = grow[k] * abs(blo[k])
        Bw = IInterval(blo[k] - g, bhi[k] + g) if name != "div" else IInterval(blo[k] - g * 0.5, bhi[k] + g)
        Aw = IInterval(alo[k] - grow[k] * abs(alo[k]), ahi[k] + grow[k] * abs(ahi[k]))
        R, Rw = op(A, B), op(Aw, Bw)
        if not (Rw.lo <= R.lo and R.hi <= Rw.hi):
            violations += 1
    assert violations == 0


def test_integer_power_and_sqrt_contain_results():
    rng = np.random.default_rng(41)
    lo, hi = random_intervals(rng, CHECKS // 5)
    violations = 0
    for a, b in zip(lo.tolist(), hi.tolist()):
        A = IInterval(a, b)
        for k in (2, 3, 5):
            P = A**k
            for x in (Fraction(a), Fraction(b)):
                if not Fraction(P.lo) <= x**k <= Fraction(P.hi):
                    violations += 1
        if a >= 0.0:
            S = A.sqrt()
            if not (Fraction(S.lo) ** 2 <= Fraction(a) and Fraction(b) <= Fraction(S.hi) ** 2):
                violations += 1
    assert violations == 0


def test_even_power_of_straddling_interval_starts_at_zero():
    assert (IInterval(-2.0, 1.0) ** 2).lo == 0.0
    assert (IInterval(-2.0, 1.0) ** 2).hi == 4.0


@pytest.mark.parametrize("d", [3.8, 5.1, 0.5])
def test_real_power_and_root_contain_high_precision_values(d):
    rng = np.random.default_rng(int(d * 10))
    x = random_doubles(rng, CHECKS // 2, -20, 5, positive=True)
    violations = 0
    with mp.workdps(60):
        for a in x.tolist():
            P = pow_real(IInterval(a, a), d)
            R = root_real(IInterval(a, a), d)
            p = mp.mpf(a) ** mp.mpf(d)
            r = mp.mpf(a) ** (1 / mp.mpf(d))
            if not (mp.mpf(P.lo) <= p <= mp.mpf(P.hi)) or not (mp.mpf(R.lo) <= r <= mp.mpf(R.hi)):
                violations += 1
    assert violations == 0


def test_errors():
    with pytest.raises(DivisorStraddlesZero):
        IInterval(1.0, 2.0) / IInterval(-1.0, 1.0)
    with pytest.raises(NegativeBase):
        pow_real(IInterval(-1.0, 1.0), 3.8)
    with pytest.raises(ValueError):
        IInterval(2.0, 1.0)


def test_hex_round_trip_is_bit_exact():
    rng = np.random.default_rng(51)
    lo, hi = random_intervals(rng, 2000)
    for a, b in zip(lo.tolist(), hi.tolist()):
        A = IInterval(a, b)
        B = interval_from_hex(interval_to_hex(A))
        assert (B.lo, B.hi) == (A.lo, A.hi)


def test_one_third_is_enclosed_tightly():
    third = IInterval.point(1.0) / IInterval.point(3.0)
    assert Fraction(third.lo) < Fraction(1, 3) < Fraction(third.hi)
    assert third.hi == math.nextafter(third.lo, math.inf)
