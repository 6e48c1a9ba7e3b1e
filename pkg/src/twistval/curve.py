"""Weierstrass models: discriminant, lattice shape, Frobenius traces and periods."""
from __future__ import annotations

import random
from dataclasses import dataclass
from math import isqrt
from pathlib import Path
from typing import Iterable

import mpmath
import numpy as np
from sympy import isprime, primerange

from .arith import LatticeShape, _legendre_table

BSGS_THRESHOLD = 2**16


class SingularModelError(ValueError):
    pass


@dataclass(frozen=True)
class CurveModel:
    a1: int
    a2: int
    a3: int
    a4: int
    a6: int
    label: str = ""
    N: int = 0

    @property
    def ainvs(self) -> tuple[int, int, int, int, int]:
        return (self.a1, self.a2, self.a3, self.a4, self.a6)

    @property
    def b_invariants(self) -> tuple[int, int, int, int]:
        a1, a2, a3, a4, a6 = self.ainvs
        b2 = a1 * a1 + 4 * a2
        b4 = 2 * a4 + a1 * a3
        b6 = a3 * a3 + 4 * a6
        b8 = a1 * a1 * a6 + 4 * a2 * a6 - a1 * a3 * a4 + a2 * a3 * a3 - a4 * a4
        return b2, b4, b6, b8

    @property
    def c_invariants(self) -> tuple[int, int]:
        b2, b4, b6, _ = self.b_invariants
        return b2 * b2 - 24 * b4, -b2**3 + 36 * b2 * b4 - 216 * b6

    def rescale(self, u: int) -> "CurveModel":
        """Model with ``a_i -> u^i a_i`` (an isomorphic curve over Q)."""
        return CurveModel(u * self.a1, u**2 * self.a2, u**3 * self.a3, u**4 * self.a4,
                          u**6 * self.a6, f"{self.label}*{u}", self.N)


FIXTURES = {
    "11a1": CurveModel(0, -1, 1, -10, -20, "11a1", 11),
    "34a1": CurveModel(1, 0, 0, -3, 1, "34a1", 34),
    "37a1": CurveModel(0, 0, 1, -1, 0, "37a1", 37),
    "37b1": CurveModel(0, 1, 1, -23, -50, "37b1", 37),
}


def parse_fixture_line(line: str) -> CurveModel | None:
    line = line.split("#", 1)[0].strip()
    if not line:
        return None
    parts = line.split()
    if len(parts) != 7:
        raise ValueError(f"expected 'label N a1 a2 a3 a4 a6', got {line!r}")
    label, N, *a = parts
    return CurveModel(*map(int, a), label=label, N=int(N))


def load_fixtures(path: str | Path) -> dict[str, CurveModel]:
    out = {}
    for line in Path(path).read_text().splitlines():
        c = parse_fixture_line(line)
        if c is not None:
            out[c.label] = c
    return out


def fixtures_for_level(N: int, extra: dict | None = None) -> list[CurveModel]:
    pool = dict(FIXTURES)
    pool.update(extra or {})
    return [c for c in pool.values() if c.N == N]


def discriminant(model: CurveModel) -> int:
    b2, b4, b6, b8 = model.b_invariants
    d = -b2 * b2 * b8 - 8 * b4**3 - 27 * b6 * b6 + 9 * b2 * b4 * b6
    if d == 0:
        raise SingularModelError(f"model {model.ainvs} is singular")
    return d


def lattice_shape(model: CurveModel) -> LatticeShape:
    """Positive discriminant means two real components, hence a rectangular lattice."""
    return LatticeShape.RECTANGULAR if discriminant(model) > 0 else LatticeShape.NON_RECTANGULAR


def lattice_shape_opposite_rule(model: CurveModel) -> LatticeShape:
    """The reverse sign convention (rectangular iff Delta < 0), kept for audit output."""
    return LatticeShape.RECTANGULAR if discriminant(model) < 0 else LatticeShape.NON_RECTANGULAR


# ---------------------------------------------------------------- point counts

def count_points(model: CurveModel, q: int) -> int:
    """Projective points on the reduction mod ``q``, singular points included."""
    if q == 2:
        return _count_naive(model, q)
    if q >= BSGS_THRESHOLD and discriminant(model) % q:
        return q + 1 - _ap_bsgs(model, q)
    return _count_table(model, q)


def _count_naive(model: CurveModel, q: int) -> int:
    a1, a2, a3, a4, a6 = model.ainvs
    n = 1
    for x in range(q):
        for y in range(q):
            if (y * y + a1 * x * y + a3 * y - x**3 - a2 * x * x - a4 * x - a6) % q == 0:
                n += 1
    return n


def _count_table(model: CurveModel, q: int) -> int:
    b2, b4, b6, _ = model.b_invariants
    x = np.arange(q, dtype=np.int64)
    f = (((4 * x + b2 % q) % q * x + (2 * b4) % q) % q * x + b6 % q) % q
    return q + 1 + int(_legendre_table(q)[f].astype(np.int64).sum())


def ap(model: CurveModel, q: int) -> int:
    """Trace of Frobenius ``q + 1 - #E(F_q)`` at a prime of good reduction."""
    if not isprime(q):
        raise ValueError(f"{q} is not prime")
    if discriminant(model) % q == 0:
        raise ValueError(f"{model.label or model.ainvs} has bad reduction at {q}")
    a = q + 1 - count_points(model, q)
    if a * a > 4 * q:
        raise ArithmeticError(f"Hasse bound violated: a_{q} = {a}")
    return a


def ap_any(model: CurveModel, q: int) -> int:
    """``q + 1 - #points`` at any prime; for a minimal model this is the L-series coefficient."""
    return q + 1 - count_points(model, q)


def ap_list(model: CurveModel, primes: Iterable[int]) -> dict[int, int]:
    return {q: ap_any(model, q) for q in primes}


def matches_form(model: CurveModel, form, nprimes: int = 20) -> bool:
    if model.N and model.N != form.N:
        return False
    count = 0
    for q in primerange(3, 10**6):
        if form.N % q == 0:
            continue
        if ap(model, q) != form.ap(q):
            return False
        count += 1
        if count >= nprimes:
            return True
    return True


# ---------------------------------------------------------------- BSGS

def _short_model(model: CurveModel, q: int) -> tuple[int, int]:
    c4, c6 = model.c_invariants
    return (-27 * c4) % q, (-54 * c6) % q


def _add(P, Q, A, q):
    if P is None:
        return Q
    if Q is None:
        return P
    x1, y1 = P
    x2, y2 = Q
    if x1 == x2:
        if (y1 + y2) % q == 0:
            return None
        lam = (3 * x1 * x1 + A) * pow(2 * y1, -1, q) % q
    else:
        lam = (y2 - y1) * pow(x2 - x1, -1, q) % q
    x3 = (lam * lam - x1 - x2) % q
    return x3, (lam * (x1 - x3) - y1) % q


def _mul(k: int, P, A, q):
    R = None
    if k < 0:
        k, P = -k, (P[0], (-P[1]) % q)
    while k:
        if k & 1:
            R = _add(R, P, A, q)
        P = _add(P, P, A, q)
        k >>= 1
    return R


def _random_point(A, B, q, rng):
    while True:
        x = rng.randrange(q)
        rhs = (x * x * x + A * x + B) % q
        if rhs == 0:
            return x, 0
        if pow(rhs, (q - 1) // 2, q) == 1:
            return x, _sqrt_mod(rhs, q)


def _sqrt_mod(a: int, p: int) -> int:
    from sympy.ntheory import sqrt_mod
    return int(sqrt_mod(a, p))


def _ap_bsgs(model: CurveModel, q: int, tries: int = 20) -> int:
    A, B = _short_model(model, q)
    lo = q + 1 - 2 * isqrt(q) - 2
    width = 4 * isqrt(q) + 4
    s = isqrt(width) + 1
    rng = random.Random(q)
    cands = None
    for _ in range(tries):
        P = _random_point(A, B, q, rng)
        baby = {}
        R = None
        for j in range(s):
            baby.setdefault(R, []).append(j)
            R = _add(R, P, A, q)
        step = _mul(-s, P, A, q)
        G = _mul(-lo, P, A, q)
        found = set()
        for i in range(s + 1):
            for j in baby.get(G, ()):
                k = i * s + j
                if k <= width:
                    found.add(lo + k)
            G = _add(G, step, A, q)
        cands = found if cands is None else cands & found
        if len(cands) == 1:
            return q + 1 - cands.pop()
    return q + 1 - _count_table(model, q)


# ---------------------------------------------------------------- periods

@dataclass(frozen=True)
class PeriodPair:
    omega_plus: mpmath.mpf
    omega_minus: mpmath.mpf
    shape: LatticeShape
    real_components: int

    @property
    def real_period(self):
        """Integral of the real locus: ``omega_plus`` times the number of components."""
        return self.omega_plus * self.real_components

    @property
    def covolume(self):
        area = self.omega_plus * self.omega_minus
        return area if self.shape is LatticeShape.RECTANGULAR else area / 2


def agm_periods(model: CurveModel, prec: int = 128) -> PeriodPair:
    """``Omega^+`` (least positive real period) and ``Omega^-`` by the AGM.

    The lattice is ``Omega^+ Z + i Omega^- Z`` for positive discriminant and
    ``Omega^+ Z + (Omega^+ + i Omega^-)/2 Z`` otherwise.
    """
    if prec < 64:
        raise ValueError("precision below 64 bits is not supported")
    disc = discriminant(model)
    b2, b4, b6, _ = model.b_invariants
    with mpmath.workprec(prec + 16):
        roots = mpmath.polyroots([4, b2, 2 * b4, b6], maxsteps=200, extraprec=prec)
        if disc > 0:
            e1, e2, e3 = sorted((mpmath.re(r) for r in roots), reverse=True)
            wp = mpmath.pi / mpmath.agm(mpmath.sqrt(e1 - e3), mpmath.sqrt(e1 - e2))
            wm = mpmath.pi / mpmath.agm(mpmath.sqrt(e1 - e3), mpmath.sqrt(e2 - e3))
            out = PeriodPair(+wp, +wm, LatticeShape.RECTANGULAR, 2)
        else:
            e1 = max((r for r in roots), key=lambda r: -abs(mpmath.im(r)))
            e1 = mpmath.re(e1)
            a = 3 * e1 + mpmath.mpf(b2) / 4
            b = mpmath.sqrt(3 * e1 * e1 + b2 * e1 / 2 + mpmath.mpf(b4) / 2)
            wp = 2 * mpmath.pi / mpmath.agm(2 * mpmath.sqrt(b), mpmath.sqrt(2 * b + a))
            wm = 2 * mpmath.pi / mpmath.agm(2 * mpmath.sqrt(b), mpmath.sqrt(2 * b - a))
            out = PeriodPair(+wp, +wm, LatticeShape.NON_RECTANGULAR, 1)
    return out


def real_period_quadrature(model: CurveModel, prec: int = 64):
    """Independent check: ``2 * int_{e1}^{oo} dx / sqrt(f(x))`` with ``e1`` the largest real root."""
    b2, b4, b6, _ = model.b_invariants
    with mpmath.workprec(prec):
        roots = mpmath.polyroots([4, b2, 2 * b4, b6], maxsteps=200, extraprec=prec)
        e1 = max(mpmath.re(r) for r in roots if abs(mpmath.im(r)) < mpmath.mpf(10) ** (-10))
        f = lambda x: 4 * x**3 + b2 * x**2 + 2 * b4 * x + b6
        return mpmath.re(2 * mpmath.quad(lambda x: 1 / mpmath.sqrt(f(x)), [e1, e1 + 1, mpmath.inf]))
