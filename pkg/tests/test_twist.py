from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from twistval.arith import v2
from twistval.twist import (NOT_APPLICABLE, DivisorSpec, Method, T1, T4, char_sum_sigma,
                            char_sum_sigma_closed, check_before_twist, check_integrality,
                            check_lemma_recursion, check_sum_bound_general, check_sum_bound_plus,
                            divisors_ordered, t_dm_direct, t_dm_factored)


def test_divisor_spec():
    s = DivisorSpec.of(20)
    assert (s.n, s.d, s.M, s.primes, s.r) == (1, 5, 20, [5], 1)
    assert DivisorSpec(0, 1).divides(DivisorSpec(1, 15))
    assert not DivisorSpec(1, 3).divides(DivisorSpec(0, 15))
    with pytest.raises(ValueError):
        DivisorSpec(0, 9)
    with pytest.raises(ValueError):
        DivisorSpec(2, 3)


def test_divisors_ordered():
    assert divisors_ordered(1) == [1]
    assert divisors_ordered(105) == [1, 3, 5, 7, 15, 21, 35, 105]


def test_base_values(f34, f37):
    assert v2(T1(f34)) == 0
    assert T4(f37) == 2
    assert t_dm_direct(f37, 4, 4).value == T4(f37)
    assert t_dm_direct(f37, 20, 20).value == 0


def test_factored_examples(f34, f37):
    a = t_dm_factored(f34, 1, 5)
    assert a.method is Method.FACTORED
    assert a.value == T1(f34) * (f34.ap(5) - 2) and a.v2 == 1
    b = t_dm_factored(f37, 4, 12)
    assert b.value == T4(f37) * (-3 + 2) == t_dm_direct(f37, 4, 12).value
    with pytest.raises(ValueError):
        t_dm_factored(f37, 1, 12)
    with pytest.raises(ValueError):
        t_dm_direct(f37, 3, 5)


def test_recursion_examples(f34, f37):
    assert check_lemma_recursion(f34, 5, 1, 5)
    assert check_lemma_recursion(f37, 3, 4, 12)
    assert check_lemma_recursion(f34, 7, 5, 35)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([3, 5, 7, 11, 13, 15, 21, 33, 35, 39, 65, 105, 165, 195, 231]),
       st.integers(0, 1))
def test_factorization_property(m, n):
    from twistval.verifier import load_form
    f = load_form(37, "37a1")
    M = DivisorSpec(n, m)
    for d in divisors_ordered(m):
        D = DivisorSpec(n, d)
        assert t_dm_direct(f, D, M).value == t_dm_factored(f, D, M).value


def test_sigma_examples():
    assert char_sum_sigma(15, 1) == 4
    assert char_sum_sigma(15, 2) == 0
    assert char_sum_sigma(12, 5) == 0
    with pytest.raises(ValueError):
        char_sum_sigma(15, 3)


@given(st.sampled_from([3, 5, 15, 21, 105, 4 * 3, 4 * 5, 4 * 15, 4 * 21]), st.integers(1, 10**6))
def test_sigma_closed_form(M, k):
    from math import gcd
    if gcd(k, M) != 1:
        return
    s = char_sum_sigma(M, k)
    assert s == char_sum_sigma_closed(M, k)
    assert v2(s) >= DivisorSpec.of(M).r


def test_integrality_examples(f34, f37):
    assert check_integrality(f34, 2, 7)
    assert check_integrality(f37, 1, 4)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 10**4), st.integers(1, 10**4))
def test_integrality_property(M, k):
    from math import gcd
    from twistval.verifier import load_form
    f = load_form(34)
    if gcd(M, 34) != 1 or gcd(k, M) != 1:
        return
    assert check_integrality(f, k, M)


def test_sum_bounds(f34, f37):
    val, bound, ok = check_sum_bound_general(f34, 5)
    assert bound == 1 and ok
    val, bound, ok = check_sum_bound_general(f34, 145)
    assert bound == 2 and ok
    assert check_sum_bound_general(f37, 12)[2]
    assert check_sum_bound_plus(f34, 5)[1:] == (2, True)
    assert check_sum_bound_plus(f37, 20)[1:] == (2, True)
    assert check_sum_bound_plus(f34, 7) is NOT_APPLICABLE


def test_before_twist(f34, f37):
    r = check_before_twist(f34, 5)
    assert r.t1_membership and r.t4_membership is NOT_APPLICABLE
    assert r.hecke_bounds_without_w
    r = check_before_twist(f37, 3)
    assert r.t1_membership and r.t4_membership and r.even_strengthening is NOT_APPLICABLE
    r = check_before_twist(f37, 5)
    assert r.even_strengthening is True
    assert t_dm_direct(f37, 4, 20).value % 4 == 0
    with pytest.raises(ValueError):
        check_before_twist(f37, 37)


def test_not_applicable_pickles():
    import pickle
    assert pickle.loads(pickle.dumps(NOT_APPLICABLE)) is NOT_APPLICABLE
