from fractions import Fraction

import numpy as np
import sympy
from hypothesis import given, settings, strategies as st

from twistval.linalg import (SparseRationalMatrix, SubspaceBasis, hnf, integer_kernel, intersect,
                             kernel, rref, saturate, solve_in)

small = st.integers(-5, 5)


def matrices(max_r=6, max_c=6):
    return st.integers(1, max_r).flatmap(lambda r: st.integers(1, max_c).flatmap(
        lambda c: st.lists(st.lists(small, min_size=c, max_size=c), min_size=r, max_size=r)))


@settings(max_examples=60, deadline=None)
@given(matrices())
def test_rref_matches_sympy(data):
    m = SparseRationalMatrix.from_dense(data)
    r, piv = rref(m)
    R, P = sympy.Matrix(data).rref()
    assert list(piv) == list(P)
    assert [[Fraction(int(x.p), int(x.q)) for x in row] for row in R.tolist()[:len(piv)]] == r.to_dense()


@settings(max_examples=60, deadline=None)
@given(matrices())
def test_kernel_is_annihilated_and_full(data):
    m = SparseRationalMatrix.from_dense(data)
    k = kernel(m)
    assert k.dim == m.ncols - m.rank()
    for v in k.basis:
        assert not m.apply(v)


def test_matmul_transpose():
    a = SparseRationalMatrix.from_dense([[1, 2], [0, 1], [3, 0]])
    b = SparseRationalMatrix.from_dense([[1, 0, 2], [1, 1, 0]])
    assert (a @ b).to_dense() == (np.array([[1, 2], [0, 1], [3, 0]]) @ np.array([[1, 0, 2], [1, 1, 0]])).tolist()
    assert a.transpose().transpose() == a
    assert SparseRationalMatrix.identity(3).trace() == 3


def test_subspace_ops():
    a = SubspaceBasis(3, [{0: Fraction(1)}, {1: Fraction(1)}])
    b = SubspaceBasis(3, [{1: Fraction(1)}, {2: Fraction(1)}])
    i = intersect(a, b)
    assert i.dim == 1 and i.contains({1: Fraction(5)})
    assert (a + b).dim == 3
    assert solve_in(a, {0: Fraction(2), 1: Fraction(3)}) == [2, 3]
    assert a.coordinates({2: Fraction(1)}) is None


def test_hnf_and_saturate():
    assert hnf([[2, 4], [6, 8]]) == [[2, 0], [0, 4]]
    assert saturate([[2, 0], [0, 2]]) == [[1, 0], [0, 1]]
    assert saturate([[2, 4], [6, 8]]) == [[1, 0], [0, 1]]


@settings(max_examples=40, deadline=None)
@given(matrices(4, 6))
def test_integer_kernel(data):
    ncols = len(data[0])
    ker = integer_kernel(data, ncols)
    M = sympy.Matrix(data)
    assert len(ker) == ncols - M.rank()
    for v in ker:
        assert all(isinstance(x, int) for x in v)
        assert M * sympy.Matrix(v) == sympy.zeros(len(data), 1)
    if ker:
        # saturated: the lattice has unit elementary divisors
        from sympy.matrices.normalforms import smith_normal_form
        snf = smith_normal_form(sympy.Matrix(ker), domain=sympy.ZZ)
        assert all(abs(snf[i, i]) == 1 for i in range(len(ker)))
