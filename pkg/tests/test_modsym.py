from fractions import Fraction
from math import gcd

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twistval.modsym import (CuspPath, P1List, batch_symbols, build_space, cusps_equivalent,
                             eval_rational, eval_symbol, genus, hecke_eval_identity_check,
                             heilbronn_cremona, lift_to_sl2z, manin_path_decompose, merel, num_cusps,
                             rational_newforms, restrict, sturm_bound, twisted_sum)


@pytest.mark.parametrize("N,size", [(1, 1), (11, 12), (34, 54), (37, 38)])
def test_p1_size(N, size):
    p1 = P1List(N)
    assert len(p1) == size
    assert p1.index(0, 1) == 0
    # every (c:d) with gcd(c, d, N) = 1 has a representative
    for c in range(N):
        for d in range(N):
            if gcd(gcd(c, d), N) == 1:
                assert p1.normalize(*p1.normalize(c, d)) == p1.normalize(c, d)


@given(st.integers(0, 500), st.integers(0, 500), st.sampled_from([11, 34, 37, 100]))
def test_lift_to_sl2z(c, d, N):
    if gcd(gcd(c, d), N) != 1:
        return
    a, b, c2, d2 = lift_to_sl2z(c, d, N)
    assert a * d2 - b * c2 == 1
    assert (c2 - c) % N == 0 and (d2 - d) % N == 0


@pytest.mark.parametrize("N,g,cusps", [(11, 1, 2), (34, 3, 4), (37, 2, 2), (1, 0, 1), (30, 3, 8)])
def test_genus_and_cusps(N, g, cusps):
    assert genus(N) == g
    assert num_cusps(N) == cusps


def test_cusp_equivalence():
    assert cusps_equivalent((1, 2), (1, 4), 11)   # both equivalent to 0
    assert not cusps_equivalent((0, 1), (1, 0), 11)
    assert cusps_equivalent((1, 11), (1, 0), 11)


@pytest.mark.parametrize("N", [11, 34, 37])
def test_space_dimensions(N):
    sp = build_space(N)
    assert sp.cuspidal_plus.dim == genus(N)
    assert sp.cuspidal_minus.dim == genus(N)
    assert sp.cuspidal.dim == 2 * genus(N)
    assert sp.dim == 2 * genus(N) + num_cusps(N) - 1


@pytest.mark.parametrize("p", [2, 3, 5, 7, 11, 13])
def test_heilbronn_determinants(p):
    for m in heilbronn_cremona(p):
        a, b, c, d = (int(x) for x in np.ravel(m))
        assert a * d - b * c == p
    for m in merel(p):
        a, b, c, d = (int(x) for x in np.ravel(m))
        assert a * d - b * c == p


@pytest.mark.parametrize("N,p", [(11, 3), (11, 5), (11, 7), (37, 3), (34, 5)])
def test_heilbronn_equals_merel_on_cuspidal(N, p):
    sp = build_space(N)
    h = restrict(sp.hecke_full(p, "heilbronn"), sp.cuspidal)
    m = restrict(sp.hecke_full(p, "merel"), sp.cuspidal)
    assert h == m


def test_hecke_commutes():
    sp = build_space(37)
    t2, t3 = sp.hecke_full(2), sp.hecke_full(3)
    assert t2 @ t3 == t3 @ t2
    assert sp.star @ t2 == t2 @ sp.star


def test_newforms_11(f11):
    assert [f11.ap(p) for p in (2, 3, 5, 7, 13)] == [-2, -1, 1, -2, 4]
    assert f11.shape.nu == 2
    assert eval_symbol(f11, (0, 1), 1) == Fraction(1, 5)


def test_newforms_37():
    forms = rational_newforms(build_space(37))
    assert len(forms) == 2
    assert sorted(f.ap(2) for f in forms) == [-2, 0]


def test_level_without_newforms():
    assert rational_newforms(build_space(22)) == []   # only old forms from 11
    assert rational_newforms(build_space(13)) == []   # genus 0


def test_q_expansions(f34, f37):
    assert f34.q_expansion(9) == [1, 1, -2, 1, 0, -2, -4, 1, 1]
    assert f37.q_expansion(7) == [1, -2, -3, 2, -2, 6, -1]


def test_sturm_bound():
    assert sturm_bound(11) == 2
    assert sturm_bound(37) == 7


def test_path_decomposition_small():
    assert manin_path_decompose(1, 1, 11) == []
    assert manin_path_decompose(1, 4, 37) == [((4, 1), 1)]


def test_symbol_periodicity_and_antisymmetry(f37):
    for k, M in [(1, 4), (2, 7), (5, 13)]:
        assert eval_symbol(f37, (k, M), 1) == eval_symbol(f37, (k + M, M), 1)
        assert eval_symbol(f37, (-k, M), 1) == eval_symbol(f37, (k, M), 1)
        assert eval_symbol(f37, (-k, M), -1) == -eval_symbol(f37, (k, M), -1)
    assert eval_symbol(f37, CuspPath(1, 0), 1) == 0


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 200), st.integers(1, 200), st.sampled_from([3, 5, 7]))
def test_hecke_identity_on_symbols(k, M, p):
    from twistval.verifier import load_form
    f = load_form(37, "37a1")
    if gcd(k, M) != 1:
        return
    assert hecke_eval_identity_check(f, Fraction(k, M), p)


@pytest.mark.parametrize("M", [5, 12, 29, 97])
def test_batch_matches_scalar(f34, M):
    if gcd(M, 34) != 1:
        return
    for sign in (1, -1):
        k, vals, den = batch_symbols(f34, M, sign)
        for kk, v in zip(k[:20], vals[:20]):
            assert Fraction(int(v), den) == eval_symbol(f34, (int(kk), M), sign)


def test_twisted_sum_base_values(f34, f37):
    assert twisted_sum(f34, 1, 1) == Fraction(1, 3)
    assert twisted_sum(f37, 1, 1) == 0
    assert twisted_sum(f37, 4, 4) == 2


def test_lattice_shapes_intrinsic(f11, f34, f37):
    from twistval.arith import LatticeShape
    assert f11.shape is LatticeShape.NON_RECTANGULAR
    assert f34.shape is LatticeShape.RECTANGULAR
    assert f37.shape is LatticeShape.RECTANGULAR


def test_level_bound():
    with pytest.raises(MemoryError):
        build_space(10**6, max_level=10**4)


def test_disk_cache(tmp_path, monkeypatch):
    from twistval.modsym import cached_build_space
    monkeypatch.setenv("MODSYM_CACHE_DIR", str(tmp_path))
    a = cached_build_space(11)
    assert list(tmp_path.iterdir())
    b = cached_build_space(11)
    assert a.free == b.free and b.genus == 1
