"""Numerical central L-values of a newform and its quadratic twists.

Used only to cross-check exact modular-symbol values and to fix signs; every
valuation reported elsewhere comes from exact arithmetic.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np
from sympy import primerange

from .arith import QuadChar, char_table

log = logging.getLogger(__name__)

DEFAULT_PREC = 128
DEFAULT_DENOMINATOR_BOUND = 512
# second splitting point, as a multiple of the symmetric one
SPLIT_RATIO = 1.2


@dataclass
class LSeriesContext:
    """Coefficient supplier for L(f, s): prime traces extended multiplicatively."""

    N: int
    ap: callable
    prec: int = DEFAULT_PREC
    root_number: int | None = None
    _an: np.ndarray = field(default=None, repr=False)
    _ap: dict = field(default_factory=dict, repr=False)

    def trace(self, p: int) -> int:
        if p not in self._ap:
            self._ap[p] = int(self.ap(p))
        return self._ap[p]

    @classmethod
    def from_curve(cls, curve, prec: int = DEFAULT_PREC) -> "LSeriesContext":
        from .curve import ap_any
        return cls(curve.N, lambda p: ap_any(curve, p), prec)

    @classmethod
    def from_form(cls, form, prec: int = DEFAULT_PREC) -> "LSeriesContext":
        return cls(form.N, lambda p: form.ap(p) if form.N % p else form.bad_ap(p), prec)

    def coefficients(self, n: int) -> np.ndarray:
        """``a_0 .. a_n`` (``a_0 = 0``) as int64."""
        if self._an is not None and len(self._an) > n:
            return self._an[: n + 1]
        size = max(n + 1, 2 * (len(self._an) if self._an is not None else 0))
        a = np.zeros(size, dtype=np.int64)
        a[1] = 1
        spf = np.zeros(size, dtype=np.int64)
        for p in primerange(2, size):
            if spf[p] == 0:
                spf[p::p][spf[p::p] == 0] = p
        for p in primerange(2, size):
            ap = self.trace(p)
            prev, cur, pk = 1, ap, p
            while pk < size:
                a[pk] = cur
                if self.N % p:
                    prev, cur = cur, ap * cur - p * prev
                else:
                    prev, cur = cur, ap * cur
                pk *= p
        for m in range(2, size):
            p = spf[m]
            pk = p
            while m % (pk * p) == 0:
                pk *= p
            if pk != m:
                a[m] = a[pk] * a[m // pk]
        self._an = a
        return a[: n + 1]


@dataclass(frozen=True)
class NumericLValue:
    value: mpmath.mpf
    error_bound: mpmath.mpf
    root_number: int
    indeterminate: bool = False
    predicted_root_number: int | None = None

    def is_zero(self) -> bool:
        return abs(self.value) <= self.error_bound


def _tail(y, X):
    # sum_{n > X} 2 e^{-2 pi n y}, using |a_n / n| <= 2
    r = mpmath.exp(-2 * mpmath.pi * y)
    return 2 * r ** (X + 1) / (1 - r)


def _cutoff(y_min, prec: int) -> int:
    target = mpmath.mpf(2) ** (-(prec // 2 + 6))
    X = int(math.ceil(float((prec // 2 + 10) * mpmath.log(2) / (2 * mpmath.pi * y_min))))
    while _tail(y_min, X) > target:
        X = int(X * 1.2) + 1
    return X


def _partial(b: np.ndarray, y, X: int):
    r = mpmath.exp(-2 * mpmath.pi * y)
    s = mpmath.mpf(0)
    absum = mpmath.mpf(0)
    w = mpmath.mpf(1)
    for n in range(1, X + 1):
        w *= r
        bn = int(b[n])
        if bn:
            t = bn * w / n
            s += t
            absum += abs(t)
    return s, absum


def l_value_central(ctx: LSeriesContext, twist=None) -> NumericLValue:
    """``L(f x chi_M, 1)`` with the root number fixed by two splitting points."""
    M = 1 if twist is None else (twist.M if isinstance(twist, QuadChar) else int(twist))
    if math.gcd(M, ctx.N) != 1:
        raise ValueError(f"conductor {M} is not coprime to the level {ctx.N}")
    Nt = ctx.N * M * M
    with mpmath.workprec(ctx.prec):
        y0 = 1 / mpmath.sqrt(Nt)
        ys = (y0, y0 * SPLIT_RATIO)
        y_min = min(min(y, 1 / (Nt * y)) for y in ys)
        X = _cutoff(y_min, ctx.prec)
        a = ctx.coefficients(X)
        chi = char_table(M)
        b = a * chi[np.arange(X + 1) % M].astype(np.int64)
        parts = []
        err = mpmath.mpf(0)
        for y in ys:
            s1, ab1 = _partial(b, y, X)
            s2, ab2 = _partial(b, 1 / (Nt * y), X)
            parts.append((s1, s2))
            err = max(err, _tail(y, X) + _tail(1 / (Nt * y), X)
                      + (ab1 + ab2) * X * mpmath.mpf(2) ** (-ctx.prec + 4))
        cands = {}
        for eps in (1, -1):
            v = [s1 + eps * s2 for s1, s2 in parts]
            cands[eps] = (v[0], abs(v[0] - v[1]))
        tol = 4 * err + mpmath.mpf(2) ** (-ctx.prec // 2)
        agree = [eps for eps in (1, -1) if cands[eps][1] <= tol]
        predicted = None
        if M > 1 and ctx.root_number is not None:
            predicted = ctx.root_number * QuadChar(M)(-ctx.N)
        if len(agree) == 1:
            eps = agree[0]
            out = NumericLValue(cands[eps][0], err, eps, False, predicted)
        else:
            eps = 1 if cands[1][1] <= cands[-1][1] else -1
            out = NumericLValue(cands[eps][0], err, eps, True, predicted)
        if M == 1 and not out.indeterminate:
            ctx.root_number = eps
        if predicted is not None and predicted != out.root_number and not out.indeterminate:
            log.warning("root number %d at M = %d differs from the product formula %d",
                        out.root_number, M, predicted)
        log.debug("L(f x chi_%d, 1) = %s (eps %d, err %s)", M, mpmath.nstr(out.value, 15),
                  out.root_number, mpmath.nstr(err, 3))
        return out


def recognize_rational(x, bound: int = DEFAULT_DENOMINATOR_BOUND, error=None) -> Fraction | None:
    """Best rational with denominator at most ``bound`` if it lies within ``error`` of ``x``."""
    xf = mpmath.mpf(x)
    if error is None:
        error = mpmath.mpf(10) ** -9 * max(1, abs(xf))
    c = Fraction(mpmath.nstr(xf, 40, min_fixed=-mpmath.inf, max_fixed=mpmath.inf)).limit_denominator(bound)
    if abs(mpmath.mpf(c.numerator) / c.denominator - xf) <= error:
        return c
    return None


@dataclass(frozen=True)
class BirchManinResult:
    ok: bool
    residual: float
    exact: Fraction
    numeric: mpmath.mpf
    lvalue: NumericLValue


def birch_manin_check(form, M: int, curve=None, ctx: LSeriesContext | None = None,
                      periods=None, prec: int = DEFAULT_PREC, tolerance: float = 1e-6) -> BirchManinResult:
    """Compare ``sum chi_M(k)[k/M]`` with ``sqrt(M) L(f, chi_M, 1) / Omega`` for the sign of ``chi_M``."""
    from .curve import agm_periods
    from .modsym import twisted_sum

    chi = QuadChar(M)
    if math.gcd(M, form.N) != 1:
        raise ValueError(f"conductor {M} is not coprime to the level {form.N}")
    if periods is None:
        if curve is None:
            raise ValueError("need a curve or precomputed periods")
        periods = agm_periods(curve, prec)
    if ctx is None:
        ctx = LSeriesContext.from_curve(curve, prec) if curve is not None else LSeriesContext.from_form(form, prec)
    exact = twisted_sum(form, M, M)
    lv = l_value_central(ctx, M)
    if lv.indeterminate:
        return BirchManinResult(False, math.inf, exact, mpmath.mpf("nan"), lv)
    omega = periods.omega_plus if chi.sign > 0 else periods.omega_minus
    with mpmath.workprec(prec):
        numeric = mpmath.sqrt(M) * lv.value / omega
        if exact == 0:
            ok = lv.is_zero()
            residual = float(abs(numeric))
        else:
            residual = float(abs(numeric - mpmath.mpf(exact.numerator) / exact.denominator)
                             / max(1, abs(float(exact))))
            ok = residual < tolerance
    return BirchManinResult(ok, residual, exact, numeric, lv)
