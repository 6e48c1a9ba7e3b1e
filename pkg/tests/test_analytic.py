from fractions import Fraction

import mpmath
import pytest

from twistval.analytic import (LSeriesContext, birch_manin_check, l_value_central,
                               recognize_rational)
from twistval.curve import FIXTURES, agm_periods


def test_coefficients_multiplicative():
    ctx = LSeriesContext.from_curve(FIXTURES["11a1"])
    a = ctx.coefficients(30)
    assert list(a[1:11]) == [1, -2, -1, 2, 1, 2, -2, 0, -2, -2]
    assert a[6] == a[2] * a[3]
    assert a[4] == a[2] ** 2 - 2


def test_l_value_11a():
    ctx = LSeriesContext.from_curve(FIXTURES["11a1"])
    lv = l_value_central(ctx)
    assert lv.root_number == 1 and not lv.indeterminate
    assert abs(lv.value - mpmath.mpf("0.2538418608559106843")) < 1e-15
    p = agm_periods(FIXTURES["11a1"])
    assert recognize_rational(lv.value / p.omega_plus) == Fraction(1, 5)


def test_rank_one_vanishing():
    ctx = LSeriesContext.from_curve(FIXTURES["37a1"])
    lv = l_value_central(ctx)
    assert lv.root_number == -1 and lv.is_zero()


def test_twist_root_number_prediction():
    ctx = LSeriesContext.from_curve(FIXTURES["37a1"])
    l_value_central(ctx)
    for M in (5, 12, 13):
        lv = l_value_central(ctx, M)
        assert lv.root_number == lv.predicted_root_number


def test_recognize_rational():
    assert recognize_rational(mpmath.mpf(1) / 3) == Fraction(1, 3)
    assert recognize_rational(mpmath.pi) is None


def test_level_coprimality():
    ctx = LSeriesContext.from_curve(FIXTURES["37a1"])
    with pytest.raises(ValueError):
        l_value_central(ctx, 37)


@pytest.mark.parametrize("M", [1, 3, 4, 5, 12, 13])
def test_birch_manin_11a(f11, M):
    r = birch_manin_check(f11, M, FIXTURES["11a1"])
    assert r.ok, r
