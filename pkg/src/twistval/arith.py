"""Exact scalars, 2-adic valuations and quadratic characters.

Rationals are plain :class:`fractions.Fraction` values (always reduced, with a
positive denominator, and ``0`` stored as ``0/1``).  Valuations live in
``int | float`` where the only float ever produced is :data:`INF`, so ``min``,
``+`` and comparisons behave like the extended integers.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Union

import numpy as np
from sympy import factorint

ExactRational = Fraction
PLUS_INFINITY = math.inf
INF = PLUS_INFINITY

Valuation = Union[int, float]

# per-prime Legendre tables are cached for primes up to this bound
LEGENDRE_CACHE_BOUND = 10**6


class LatticeShape(enum.Enum):
    RECTANGULAR = "rectangular"
    NON_RECTANGULAR = "non-rectangular"

    @property
    def nu(self) -> int:
        """Denominator bound for symbol differences: 1 or 2."""
        return 1 if self is LatticeShape.RECTANGULAR else 2


def v2_int(n: int) -> Valuation:
    if n == 0:
        return INF
    n = abs(n)
    return (n & -n).bit_length() - 1


def v2(x) -> Valuation:
    """2-adic valuation of an integer or rational, ``INF`` at zero."""
    x = Fraction(x)
    if x == 0:
        return INF
    return v2_int(x.numerator) - v2_int(x.denominator)


def fmt_val(v: Valuation) -> str:
    return "inf" if v == INF else str(int(v))


def parse_val(s: str) -> Valuation:
    return INF if s.strip() in ("inf", "+inf", "+∞") else int(s)


def fmt_rational(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def parse_rational(s: str) -> Fraction:
    return Fraction(s)


@lru_cache(maxsize=1 << 16)
def _factor(n: int) -> tuple:
    return tuple(sorted(factorint(n).items()))


def is_squarefree(n: int) -> bool:
    if n == 0:
        return False
    return all(e == 1 for _, e in _factor(abs(n)))


def odd_prime_factors(n: int) -> list[int]:
    return [p for p, _ in _factor(abs(n)) if p != 2]


def kronecker(a: int, n: int) -> int:
    """Kronecker symbol ``(a|n)``.

    Conventions: ``(a|0) = 1`` iff ``a = ±1``; ``(a|-1) = sign(a)`` (``+1`` at
    ``a = 0``); ``(a|2) = 0`` for even ``a`` and ``±1`` by ``a mod 8`` otherwise.
    """
    if a == 0 and n == 0:
        raise ValueError("kronecker(0, 0) is undefined")
    if n == 0:
        return 1 if abs(a) == 1 else 0
    result = 1
    if n < 0:
        n = -n
        if a < 0:
            result = -result
    v = 0
    while n % 2 == 0:
        n //= 2
        v += 1
    if v:
        if a % 2 == 0:
            return 0
        if v % 2 == 1 and a % 8 in (3, 5):
            result = -result
    # Jacobi symbol (a|n) for odd positive n
    a %= n
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


@lru_cache(maxsize=4096)
def _legendre_table(p: int) -> np.ndarray:
    t = np.full(p, -1, dtype=np.int8)
    t[0] = 0
    sq = (np.arange(1, p, dtype=np.int64) ** 2) % p
    t[sq] = 1
    return t


def _legendre_table_uncached(p: int) -> np.ndarray:
    return _legendre_table.__wrapped__(p)


@dataclass(frozen=True)
class QuadChar:
    """Primitive quadratic Dirichlet character of conductor ``M``.

    ``M`` is 1, an odd square-free integer, or 4 times one; the character is
    ``k -> kronecker(disc, k)`` for the fundamental discriminant ``disc`` of
    absolute value ``M``.
    """

    M: int

    def __post_init__(self):
        M = self.M
        if M < 1:
            raise ValueError(f"conductor must be positive, got {M}")
        odd = M // 4 if M % 4 == 0 else M
        if odd % 2 == 0 or (M % 4 != 0 and M % 2 == 0) or not is_squarefree(odd):
            raise ValueError(f"{M} is not 1, an odd square-free integer, or 4 times one")

    @classmethod
    def from_parts(cls, n: int, d: int) -> "QuadChar":
        return cls(4**n * d)

    @property
    def n(self) -> int:
        return 1 if self.M % 4 == 0 else 0

    @property
    def odd_part(self) -> int:
        return self.M // 4 if self.n else self.M

    @property
    def disc(self) -> int:
        d = self.odd_part
        dstar = d if d % 4 == 1 else -d
        return -4 * dstar if self.n else dstar

    @property
    def sign(self) -> int:
        """chi(-1)."""
        return 1 if self.disc > 0 else -1

    @property
    def primes(self) -> list[int]:
        return odd_prime_factors(self.odd_part)

    def __call__(self, k: int) -> int:
        return kronecker(self.disc, k)

    def table(self) -> np.ndarray:
        return char_table(self.M)


def quad_char_value(spec: QuadChar, k: int) -> int:
    return spec(k)


@lru_cache(maxsize=256)
def char_table(M: int) -> np.ndarray:
    """Values ``chi_M(k)`` for ``k = 0 .. M-1`` as an ``int8`` array."""
    chi = QuadChar(M)
    k = np.arange(M, dtype=np.int64)
    out = np.ones(M, dtype=np.int8)
    for p in chi.primes:
        tab = _legendre_table(p) if p <= LEGENDRE_CACHE_BOUND else _legendre_table_uncached(p)
        out *= tab[k % p]
    if chi.n:
        chi4 = np.array([0, 1, 0, -1], dtype=np.int8)
        out *= chi4[k % 4]
    # product of Legendre symbols is the Jacobi symbol (k|d) = kronecker(d*, k)
    out.setflags(write=False)
    return out


def gauss_sum_squared(spec: QuadChar) -> Fraction:
    """``tau(chi_M)^2 = chi_M(-1) * M``."""
    if spec.M == 1:
        raise ValueError("Gauss sum of the trivial character is degenerate")
    return Fraction(spec.sign * spec.M)


def gauss_sum_v2(spec: QuadChar) -> int:
    """``v2(tau(chi_M))``: ``|tau| = sqrt(M)``, so 0 for odd ``M`` and 1 for ``4m``."""
    return spec.n


def gauss_sum_numeric(M: int) -> complex:
    chi = QuadChar(M)
    return sum(chi(a) * complex(math.cos(2 * math.pi * a / M), math.sin(2 * math.pi * a / M))
               for a in range(M))


def units(M: int) -> np.ndarray:
    k = np.arange(M, dtype=np.int64)
    return k[np.gcd(k, M) == 1]
