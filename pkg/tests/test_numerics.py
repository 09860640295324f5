import math
from fractions import Fraction

import mpmath as mp
import pytest
from hypothesis import given, settings, strategies as st

from opqlog.numerics import (BigComplex, BigReal, PrecisionConfig, correct_digits,
                             digits_for_recurrence, gmpy_context, gmpy_from_mpf, mpf_from_gmpy,
                             precision_stability, principal_sqrt, sqrt_z2m1)

import gmpy2


def test_digits_policy_examples():
    cfg = PrecisionConfig(40)
    assert digits_for_recurrence(0, "chebyshev", cfg) == 64 + 8
    assert digits_for_recurrence(10, "moment-float", cfg) == max(64, 9 + 40) + 8
    assert digits_for_recurrence(5000, "chebyshev", cfg) == max(64, 2 * 4 + 40) + 8
    with pytest.raises(ValueError):
        digits_for_recurrence(5, "stieltjes", cfg)


def test_precision_config_bounds(monkeypatch):
    with pytest.raises(ValueError):
        PrecisionConfig(31)
    with pytest.raises(ValueError):
        PrecisionConfig(40, 4)
    monkeypatch.setenv("OPQ_DIGITS", "50")
    assert PrecisionConfig().base_digits == 50
    assert PrecisionConfig().raised(20).effective_digits == 78


@pytest.mark.parametrize("z, expected", [
    (4, 2),
    (mp.mpc(-1, mp.mpf(10) ** -30), 1j),
    (2j, 1 + 1j),
])
def test_principal_sqrt_examples(z, expected):
    with mp.workdps(40):
        assert abs(principal_sqrt(z) - expected) < mp.mpf(10) ** -14


def test_sqrt_z2m1_cut_and_normalization():
    with mp.workdps(30):
        above = sqrt_z2m1(mp.mpc(0.3, 1e-20))
        below = sqrt_z2m1(mp.mpc(0.3, -1e-20))
        assert abs(above + below) < 1e-15 and above.imag > 0
        # no cut on (-inf, -1): continuous across the real axis there
        assert abs(sqrt_z2m1(mp.mpc(-3, 1e-20)) - sqrt_z2m1(mp.mpc(-3, -1e-20))) < 1e-15
        z = mp.mpc(1e6, 3)
        assert abs(sqrt_z2m1(z) / z - 1) < 1e-11


@settings(max_examples=60, deadline=None)
@given(st.fractions(max_denominator=10 ** 6), st.fractions(max_denominator=10 ** 6))
def test_rational_roundtrip(p, r):
    assert (p + r) - r == p


@settings(max_examples=40, deadline=None)
@given(st.floats(-50, 50), st.floats(0.001, 50), st.booleans())
def test_sqrt_squares_back(re, im, lower):
    digits = 40
    with mp.workdps(digits + 8):
        z = mp.mpc(re, -im if lower else im)
        assert correct_digits(principal_sqrt(z) ** 2, z) >= digits


def test_gmpy_conversions_are_exact():
    with mp.workdps(120):
        x = -mp.pi / 7
        with gmpy_context(130):
            back = mpf_from_gmpy(gmpy_from_mpf(x))
        assert back == x
    assert mpf_from_gmpy(gmpy2.mpfr(0)) == 0


def test_bigreal_mixed_precision_rounds_down():
    a = BigReal.of(Fraction(1, 3), 50)
    b = BigReal.of("2", 30)
    c = a + b
    assert c.digits == 30
    with mp.workdps(50):
        assert abs(c.value - mp.mpf(7) / 3) < mp.mpf(10) ** -28
    assert (a * 3).to_string(10) == "1.0"
    with pytest.raises(ValueError):
        BigReal.of(1, 0)


def test_bigcomplex_arithmetic():
    z = BigComplex.of(mp.mpc(3, 4), 40)
    assert abs(abs(z).value - 5) < mp.mpf(10) ** -38
    w = (z * z.conjugate())
    assert abs(w.value - 25) < mp.mpf(10) ** -38
    assert abs(BigComplex.of(2j, 40).sqrt().value - (1 + 1j)) < mp.mpf(10) ** -38


def test_precision_stability_harness():
    def fn(digits):
        with mp.workdps(digits):
            return mp.zeta(3)
    cfg = PrecisionConfig(40)
    assert precision_stability(fn, cfg) < mp.mpf(10) ** -(40 - 2)
    assert math.isinf(correct_digits(1, 1))
