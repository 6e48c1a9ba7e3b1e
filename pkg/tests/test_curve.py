import mpmath
import pytest
from hypothesis import given, settings, strategies as st
from sympy import primerange

from twistval.arith import LatticeShape
from twistval.curve import (FIXTURES, CurveModel, SingularModelError, _count_naive, _count_table,
                            agm_periods, ap, ap_any, count_points, discriminant, lattice_shape,
                            lattice_shape_opposite_rule, load_fixtures, parse_fixture_line,
                            real_period_quadrature)


def test_discriminants():
    assert discriminant(FIXTURES["11a1"]) == -11**5
    assert discriminant(FIXTURES["37a1"]) == 37
    assert discriminant(FIXTURES["34a1"]) == 2**6 * 17
    with pytest.raises(SingularModelError):
        discriminant(CurveModel(0, 0, 0, 0, 0))


def test_lattice_shape_rules():
    assert lattice_shape(FIXTURES["34a1"]) is LatticeShape.RECTANGULAR
    assert lattice_shape(FIXTURES["11a1"]) is LatticeShape.NON_RECTANGULAR
    assert lattice_shape_opposite_rule(FIXTURES["34a1"]) is LatticeShape.NON_RECTANGULAR


@pytest.mark.parametrize("label", sorted(FIXTURES))
def test_counts_table_vs_naive(label):
    c = FIXTURES[label]
    for q in primerange(2, 60):
        assert count_points(c, q) == _count_naive(c, q)


@pytest.mark.parametrize("label", sorted(FIXTURES))
def test_hasse(label):
    c = FIXTURES[label]
    for q in primerange(3, 400):
        if discriminant(c) % q:
            a = ap(c, q)
            assert a * a <= 4 * q


def test_bad_reduction_traces():
    # split / non-split multiplicative: +-1
    assert ap_any(FIXTURES["11a1"], 11) == 1
    assert ap_any(FIXTURES["37a1"], 37) == -1
    assert ap_any(FIXTURES["34a1"], 2) in (1, -1)
    with pytest.raises(ValueError):
        ap(FIXTURES["37a1"], 37)


def test_bsgs_matches_table():
    c = FIXTURES["37a1"]
    for q in (65537, 70001):
        assert ap(c, q) == q + 1 - _count_table(c, q)


@pytest.mark.parametrize("label", sorted(FIXTURES))
def test_agm_vs_quadrature(label):
    c = FIXTURES[label]
    p = agm_periods(c)
    assert abs(p.omega_plus - real_period_quadrature(c, 96)) < 1e-10


def test_known_periods():
    assert abs(agm_periods(FIXTURES["11a1"]).omega_plus - mpmath.mpf("1.269209304279553")) < 1e-12
    assert abs(agm_periods(FIXTURES["37a1"]).real_period - mpmath.mpf("5.986917292463919")) < 1e-12
    p = agm_periods(CurveModel(0, 0, 0, -1, 0))
    assert abs(p.real_period - mpmath.mpf("5.244115108584239")) < 1e-12
    with pytest.raises(ValueError):
        agm_periods(FIXTURES["11a1"], prec=32)


@settings(max_examples=25, deadline=None)
@given(st.integers(-6, 6), st.integers(-6, 6), st.integers(0, 1), st.integers(0, 1))
def test_periods_random_curves(a4, a6, a1, a3):
    c = CurveModel(a1, 0, a3, a4, a6)
    try:
        disc = discriminant(c)
    except SingularModelError:
        return
    p = agm_periods(c, 96)
    assert p.shape is (LatticeShape.RECTANGULAR if disc > 0 else LatticeShape.NON_RECTANGULAR)
    assert abs(p.omega_plus - real_period_quadrature(c, 96)) < 1e-8 * p.omega_plus


def test_rescale_is_isomorphic():
    c = FIXTURES["37a1"]
    assert discriminant(c.rescale(2)) == 2**12 * discriminant(c)


def test_fixture_parsing(tmp_path):
    assert parse_fixture_line("# comment") is None
    c = parse_fixture_line("11a3 11 0 -1 1 0 0")
    assert c.N == 11 and c.ainvs == (0, -1, 1, 0, 0)
    f = tmp_path / "curves.txt"
    f.write_text("11a3 11 0 -1 1 0 0\n\n# x\n")
    assert list(load_fixtures(f)) == ["11a3"]
    with pytest.raises(ValueError):
        parse_fixture_line("bad line")
