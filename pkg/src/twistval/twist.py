"""Character-weighted symbol sums T_{D,M} and the identities they satisfy."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import gcd, prod

from .arith import INF, LatticeShape, QuadChar, Valuation, char_table, is_squarefree, odd_prime_factors, units, v2
from .modsym import NewformData, eval_symbol, twisted_sum


class Method(enum.Enum):
    DIRECT_SUM = "direct"
    FACTORED = "factored"


class _NotApplicable:
    def __repr__(self):
        return "NOT_APPLICABLE"

    def __reduce__(self):
        return "NOT_APPLICABLE"

    def __bool__(self):
        return False


NOT_APPLICABLE = _NotApplicable()


@dataclass(frozen=True, order=True)
class DivisorSpec:
    """``4^n * d`` with ``d`` odd and square-free."""

    n: int
    d: int

    def __post_init__(self):
        if self.n not in (0, 1):
            raise ValueError("n must be 0 or 1")
        if self.d < 1 or self.d % 2 == 0 or not is_squarefree(self.d):
            raise ValueError(f"{self.d} is not an odd square-free positive integer")

    @classmethod
    def of(cls, M: "int | DivisorSpec") -> "DivisorSpec":
        if isinstance(M, DivisorSpec):
            return M
        if M % 4 == 0:
            return cls(1, M // 4)
        return cls(0, M)

    @property
    def M(self) -> int:
        return 4**self.n * self.d

    @property
    def primes(self) -> list[int]:
        return odd_prime_factors(self.d)

    @property
    def r(self) -> int:
        return len(self.primes)

    @property
    def char(self) -> QuadChar:
        return QuadChar(self.M)

    def divides(self, other: "DivisorSpec") -> bool:
        return other.d % self.d == 0 and self.n <= other.n

    def __str__(self):
        return str(self.M)


def divisors_ordered(m: int) -> list[int]:
    """Divisors of square-free ``m`` by number of prime factors, then lexicographically."""
    ps = odd_prime_factors(m) if m > 1 else []
    out = []
    for k in range(len(ps) + 1):
        for combo in combinations(ps, k):
            out.append(prod(combo))
    return out


@dataclass(frozen=True)
class TwistValue:
    form: str
    D: DivisorSpec
    M: DivisorSpec
    value: Fraction
    method: Method

    @property
    def v2(self) -> Valuation:
        return v2(self.value)


def _label(form: NewformData) -> str:
    return form.label or f"N={form.N}"


def _check_divides(D: DivisorSpec, M: DivisorSpec):
    if not D.divides(M):
        raise ValueError(f"{D.M} does not divide {M.M} componentwise")


def t_dm_direct(form: NewformData, D, M) -> TwistValue:
    D, M = DivisorSpec.of(D), DivisorSpec.of(M)
    _check_divides(D, M)
    return TwistValue(_label(form), D, M, twisted_sum(form, D.M, M.M), Method.DIRECT_SUM)


def t_dm_factored(form: NewformData, D, M) -> TwistValue:
    """``T_D * prod_{q | M/D} (a_q - 2 chi_D(q))``; requires the same power of 4 in D and M."""
    D, M = DivisorSpec.of(D), DivisorSpec.of(M)
    _check_divides(D, M)
    if D.n != M.n:
        raise ValueError("the product formula needs D and M to share the factor 4^n")
    chi = D.char
    val = twisted_sum(form, D.M, D.M)
    for q in odd_prime_factors(M.d // D.d):
        val *= form.ap(q) - 2 * chi(q)
    return TwistValue(_label(form), D, M, val, Method.FACTORED)


def T1(form: NewformData) -> Fraction:
    return eval_symbol(form, (0, 1), 1)


def T4(form: NewformData) -> Fraction:
    return 2 * eval_symbol(form, (1, 4), -1)


def check_lemma_recursion(form: NewformData, q: int, D, M) -> bool:
    """``T_{D,M} = (a_q - 2 chi_D(q)) T_{D,M/q}`` for an odd prime ``q | M``, ``q`` not dividing D."""
    D, M = DivisorSpec.of(D), DivisorSpec.of(M)
    if M.d % q or D.d % q == 0:
        raise ValueError("need q | M and q not dividing D")
    lhs = twisted_sum(form, D.M, M.M)
    rhs = (form.ap(q) - 2 * D.char(q)) * twisted_sum(form, D.M, M.M // q)
    return lhs == rhs


def char_sum_sigma(M, k: int) -> int:
    """``sum'_D chi_D(k)`` over ``D = 4^n d`` with ``d | m``, by direct summation."""
    M = DivisorSpec.of(M)
    if gcd(k, M.M) != 1:
        raise ValueError("k must be a unit mod M")
    return sum(int(char_table(4**M.n * d)[k % (4**M.n * d)]) for d in divisors_ordered(M.d))


def char_sum_sigma_closed(M, k: int) -> int:
    M = DivisorSpec.of(M)
    out = QuadChar(4)(k) if M.n else 1
    for q in M.primes:
        out *= 1 + QuadChar(q)(k)
    return out


def check_integrality(form: NewformData, k: int, M: int) -> bool:
    if gcd(k, M) != 1 or gcd(M, form.N) != 1:
        raise ValueError("need gcd(k, M) = gcd(M, N) = 1")
    nu = form.shape.nu
    a = nu * (eval_symbol(form, (k, M), 1) - T1(form))
    b = nu * eval_symbol(form, (k, M), -1)
    return a.denominator == 1 and b.denominator == 1


def sum_over_divisors(form: NewformData, M) -> Fraction:
    M = DivisorSpec.of(M)
    return sum((twisted_sum(form, 4**M.n * d, M.M) for d in divisors_ordered(M.d)), Fraction(0))


def check_sum_bound_general(form: NewformData, M):
    M = DivisorSpec.of(M)
    if gcd(M.M, form.N) != 1:
        raise ValueError("M must be coprime to the level")
    val = v2(sum_over_divisors(form, M))
    bound = M.r + min(0, v2(T1(form)))
    return val, bound, val >= bound


def check_sum_bound_plus(form: NewformData, M):
    M = DivisorSpec.of(M)
    if gcd(M.M, form.N) != 1:
        raise ValueError("M must be coprime to the level")
    if not M.primes or any(q % 4 != 1 for q in M.primes):
        return NOT_APPLICABLE
    val = v2(sum_over_divisors(form, M))
    rect = form.shape is LatticeShape.RECTANGULAR
    t1 = v2(T1(form))
    if M.n == 0:
        bound = M.r + 1 + (min(0, t1) if rect else min(-1, t1))
    else:
        bound = M.r + 1 if rect else M.r
    return val, bound, val >= bound


@dataclass
class BeforeTwistRecord:
    m: int
    t1_membership: bool
    t4_membership: object          # bool or NOT_APPLICABLE
    even_strengthening: object     # bool or NOT_APPLICABLE
    hecke_bounds: bool
    hecke_bounds_without_w: bool
    failures: list

    @property
    def ok(self) -> bool:
        return all(x is not False for x in (self.t1_membership, self.t4_membership,
                                            self.even_strengthening, self.hecke_bounds))


def _in_lattice(x: Fraction, step: int) -> bool:
    return x.denominator == 1 and x.numerator % step == 0


def check_before_twist(form: NewformData, m: int) -> BeforeTwistRecord:
    """Parity of ``T_{1,m} - phi(m) T_1`` and ``T_{4,4m}`` and the derived bounds on ``a_q``."""
    if gcd(m, 2 * form.N) != 1 or not is_squarefree(m):
        raise ValueError("m must be square-free and coprime to 2N")
    rect = form.shape is LatticeShape.RECTANGULAR
    step = 2 if rect else 1
    fails = []
    t1 = T1(form)
    phi = len(units(m))
    a = twisted_sum(form, 1, m) - phi * t1
    t1_ok = _in_lattice(a, step)
    if not t1_ok:
        fails.append(f"T_(1,{m}) - {phi} T_1 = {a}")
    odd_level = form.N % 2 == 1
    t4_ok = even_ok = NOT_APPLICABLE
    t44m = None
    if odd_level:
        t44m = twisted_sum(form, 4, 4 * m)
        t4_ok = _in_lattice(t44m, step)
        if not t4_ok:
            fails.append(f"T_(4,{4 * m}) = {t44m}")
        if any(form.ap(q) % 2 == 0 for q in odd_prime_factors(m)):
            even_ok = _in_lattice(t44m, 2 * step)
            if not even_ok:
                fails.append(f"T_(4,{4 * m}) = {t44m} with an even a_q")
    primes = odd_prime_factors(m)
    vm = min(v2(form.ap(q) - 2) for q in primes) if primes else INF
    wm = 0 if vm == 0 else 1
    extra = 1 if rect else 0
    t1v = v2(t1)
    t4v = v2(T4(form)) if odd_level else None
    hb = hb0 = True
    for q in primes:
        aq = form.ap(q)
        lhs1 = v2(aq - (q + 1))
        if not lhs1 >= wm + extra - t1v:
            hb = False
            fails.append(f"v2(a_{q} - {q + 1}) = {lhs1} < {wm} + {extra} - {t1v}")
        hb0 &= lhs1 >= extra - t1v
        if odd_level:
            lhs4 = v2(aq - 2 * QuadChar(4)(q))
            if not lhs4 >= wm + extra - t4v:
                hb = False
                fails.append(f"v2(a_{q} - 2 chi_4({q})) = {lhs4} < {wm} + {extra} - {t4v}")
            hb0 &= lhs4 >= extra - t4v
    return BeforeTwistRecord(m, t1_ok, t4_ok, even_ok, hb, hb0, fails)


def squarefree_odd(limit: int, coprime_to: int = 1, start: int = 1):
    for m in range(start, limit + 1, 2 if start % 2 else 1):
        if m % 2 and gcd(m, coprime_to) == 1 and is_squarefree(m):
            yield m
