from fractions import Fraction

import mpmath as mp
import pytest

from opqlog.numerics import InvariantError, PrecisionExhaustedError
from opqlog.recurrence import (Engine, RecurrenceTable, chebyshev_table, gauss_roundtrip,
                               gauss_rule, recurrence_chebyshev, recurrence_exact, table_from_csv,
                               table_to_csv, table_to_json)
from opqlog.weights import MomentKind, MomentVector, WeightSpec

LOG_A_EXACT = [Fraction(1, 2), Fraction(1, 14), Fraction(263, 9058), Fraction(1995511, 126347454),
            Fraction(436364251361, 43886567673522)]
LOG_B2_EXACT = [Fraction(7, 36), Fraction(2588, 11025), Fraction(71180289, 293026300),
             Fraction(1329399823424, 5405644687527),
             Fraction(39672481023099631594375, 160381475127054568640484)]


@pytest.mark.parametrize("engine", ["gram", "chebyshev"])
def test_log_exact_golden(engine):
    w = WeightSpec.log()
    table = recurrence_exact(w, 5) if engine == "gram" else chebyshev_table(w, 5, None)
    assert list(table.a[:5]) == LOG_A_EXACT
    assert list(table.b2[:5]) == LOG_B2_EXACT


def test_small_exact_examples():
    assert recurrence_exact(WeightSpec.log(), 0).a == (Fraction(1, 2),)
    t = recurrence_exact(WeightSpec.log(), 1)
    assert t.a[1] == Fraction(1, 14) and t.b2[0] == Fraction(7, 36)
    leg = recurrence_exact(WeightSpec.legendre(), 3)
    assert all(a == 0 for a in leg.a)
    assert list(leg.b2) == [Fraction(1, 3), Fraction(4, 15), Fraction(9, 35)]


def test_exact_engine_cap():
    with pytest.raises(ValueError):
        recurrence_exact(WeightSpec.log(), 65)


@pytest.mark.parametrize("w", [WeightSpec.log(), WeightSpec.legendre()], ids=["log", "legendre"])
@pytest.mark.parametrize("N", [1, 5, 12])
def test_chebyshev_equals_gram_schmidt(w, N):
    cheb = chebyshev_table(w, N, None)
    gram = recurrence_exact(w, N)
    assert cheb.a == gram.a and cheb.b2 == gram.b2


def test_chebyshev_float_matches_exact():
    t = chebyshev_table(WeightSpec.log(), 4, 64)
    with mp.workdps(64):
        assert abs(t.a[4] - mp.mpf(436364251361) / 43886567673522) < mp.mpf(10) ** -60
        assert abs(t.b2[3] - mp.mpf(1329399823424) / 5405644687527) < mp.mpf(10) ** -60
        assert mp.nstr(t.a[4], 8).startswith("0.0099430")


def test_chebyshev_legendre_reference_moments():
    mv = MomentVector((Fraction(2),) + (Fraction(0),) * 5, MomentKind.LEGENDRE_MODIFIED,
                      WeightSpec.legendre())
    t = recurrence_chebyshev(mv, 2, 64)
    assert all(a == 0 for a in t.a)
    with mp.workdps(64):
        assert abs(t.b2[0] - mp.mpf(1) / 3) < mp.mpf(10) ** -60
        assert abs(t.b2[1] - mp.mpf(4) / 15) < mp.mpf(10) ** -60


def test_chebyshev_needs_enough_moments():
    mv = MomentVector.legendre(WeightSpec.log(), 5)
    with pytest.raises(ValueError):
        recurrence_chebyshev(mv, 4, 40)


def test_model_table_invariants(d0):
    t = chebyshev_table(WeightSpec.model(d0), 10, 128)
    t.check_invariants()
    assert all(b2 > 0 for b2 in t.b2)


def test_precision_exhaustion_is_reported():
    # the power-moment route at low precision loses positivity quickly
    mv = MomentVector.legendre(WeightSpec.log(), 2 * 400 + 2)
    with pytest.raises(PrecisionExhaustedError):
        recurrence_chebyshev(mv, 400, 3)


def test_chebyshev_matches_exact_at_n64():
    w = WeightSpec.log()
    exact = chebyshev_table(w, 64, None)
    fl = chebyshev_table(w, 64, 128)
    with mp.workdps(140):
        err = max(abs(fl.a_mpf(n) - exact.a_mpf(n)) for n in range(65))
        err = max(err, max(abs(fl.b2_mpf(n) - exact.b2_mpf(n)) for n in range(64)))
    assert err < mp.mpf(10) ** -120


def test_log_trend():
    t = chebyshev_table(WeightSpec.log(), 51, None)
    a = t.a[1:51]
    assert all(x > 0 for x in a)
    assert all(x > y for x, y in zip(a, a[1:]))
    b2 = t.b2[:51]
    assert all(x < y for x, y in zip(b2, b2[1:]))
    assert all(x < Fraction(1, 4) for x in b2)


def test_stability_under_extra_digits():
    w = WeightSpec.log()
    lo = chebyshev_table(w, 300, 60)
    hi = chebyshev_table(w, 300, 80)
    with mp.workdps(90):
        err = max(abs(lo.a_mpf(n) - hi.a_mpf(n)) for n in range(301))
        err = max(err, max(abs(mp.sqrt(lo.b2_mpf(n)) - mp.sqrt(hi.b2_mpf(n))) for n in range(300)))
    # 60 working digits carry 52 reported digits after the guard
    assert err < mp.mpf(10) ** -(52 - 2)


def test_gauss_legendre_two_point():
    t = recurrence_exact(WeightSpec.legendre(), 2)
    rule = gauss_rule(t, 2, 50)
    with mp.workdps(50):
        assert abs(rule.nodes[0] + 1 / mp.sqrt(3)) < mp.mpf(10) ** -45
        assert abs(rule.nodes[1] - 1 / mp.sqrt(3)) < mp.mpf(10) ** -45
        assert all(abs(x - 1) < mp.mpf(10) ** -45 for x in rule.weights)


def test_gauss_roundtrip_log():
    t = chebyshev_table(WeightSpec.log(), 5, None)
    assert gauss_roundtrip(t, 5, 60) < mp.mpf(10) ** -(60 - 12)
    t40 = chebyshev_table(WeightSpec.log(), 40, None)
    rule = gauss_rule(t40, 40, 80)
    assert all(-1 < x < 1 for x in rule.nodes)
    assert all(x < y for x, y in zip(rule.nodes, rule.nodes[1:]))


def test_gauss_roundtrip_detects_bad_table():
    bad = RecurrenceTable([Fraction(3), Fraction(0)], [Fraction(1, 4)], WeightSpec.legendre(),
                          Engine.EXACT_GRAM, None)
    with pytest.raises(InvariantError):
        gauss_roundtrip(bad, 2, 40)
    with pytest.raises(InvariantError):
        bad.check_invariants()


def test_csv_roundtrip_exact():
    t = recurrence_exact(WeightSpec.log(), 8)
    back = table_from_csv(table_to_csv(t, {"command": "recur"}))
    assert back == t


def test_csv_float_and_json():
    t = chebyshev_table(WeightSpec.legendre(), 5, 48)
    text = table_to_csv(t)
    assert text.splitlines()[1] == "n,a_n,b_n,b_n^2"
    back = table_from_csv(text)
    with mp.workdps(48):
        assert all(abs(x - y) < mp.mpf(10) ** -38 for x, y in zip(back.b2, t.b2))
    assert '"engine": "modified-chebyshev"' in table_to_json(t)
