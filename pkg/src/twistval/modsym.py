"""Weight-2 modular symbols for Gamma_0(N) via Manin symbols.

A Manin symbol ``(c:d)`` stands for ``g{0, oo}`` where ``g`` is any matrix in
SL2(Z) with bottom row ``(c, d)``.  The space of symbols is the quotient of
``Q^{P1(Z/NZ)}`` by the two- and three-term relations; functionals on it are
stored as arrays over the P1 index set so that path evaluation is a lookup.
"""
from __future__ import annotations

import logging
import math
import os
import pickle
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import gcd, isqrt
from pathlib import Path
from typing import Sequence

import numpy as np
from sympy import divisors, factorint, primerange

from .arith import LatticeShape, char_table, units
from .linalg import (SparseRationalMatrix, SubspaceBasis, hnf, integer_kernel,
                     intersect, kernel, rref)

log = logging.getLogger(__name__)

MAX_LEVEL = 10_000
DEFAULT_EIGENVALUE_BOUND = 1000
CACHE_VERSION = 3


class CalibrationError(RuntimeError):
    pass


# ---------------------------------------------------------------- P1(Z/NZ)

class P1List:
    """Canonical representatives of P1(Z/NZ) with an ``N x N`` index table."""

    def __init__(self, N: int):
        if N < 1:
            raise ValueError("level must be positive")
        self.N = N
        table = np.full((N, N), -1, dtype=np.int32)
        ar = np.arange(N, dtype=np.int64)
        g = np.gcd(np.gcd(ar[:, None], ar[None, :]), N)
        valid = g == 1
        us = units(N) if N > 1 else np.array([0], dtype=np.int64)
        reps = []
        for c in range(N):
            row_ok = valid[c]
            while True:
                free = np.nonzero(row_ok & (table[c] < 0))[0]
                if free.size == 0:
                    break
                d = int(free[0])
                idx = len(reps)
                reps.append((c, d))
                table[(us * c) % N, (us * d) % N] = idx
        self.table = table
        self.reps = reps
        table.setflags(write=False)

    def __len__(self):
        return len(self.reps)

    def __getitem__(self, i: int) -> tuple[int, int]:
        return self.reps[i]

    def index(self, c: int, d: int) -> int:
        i = int(self.table[c % self.N, d % self.N])
        if i < 0:
            raise ValueError(f"({c}:{d}) is not in P1(Z/{self.N}Z)")
        return i

    def index_array(self, c: np.ndarray, d: np.ndarray) -> np.ndarray:
        return self.table[np.mod(c, self.N), np.mod(d, self.N)]

    def normalize(self, c: int, d: int) -> tuple[int, int]:
        return self.reps[self.index(c, d)]


# ---------------------------------------------------------------- cusps

def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        return -x0, -y0, -a
    return x0, y0, a


def lift_to_sl2z(c: int, d: int, N: int) -> tuple[int, int, int, int]:
    """Integers ``(a, b, c', d')`` with ``ad' - bc' = 1`` and ``(c', d') = (c, d) mod N``."""
    c %= N
    d %= N
    if N == 1:
        return 1, 0, 0, 1
    if c == 0:
        c = N
    t = d
    while gcd(c, t) != 1:
        t += N
    x, y, _ = _xgcd(t, c)
    # x*t + y*c = 1, so a = x, b = -y
    return x, -y, c, t


def _cusp(num: int, den: int) -> tuple[int, int]:
    g = gcd(num, den)
    num, den = num // g, den // g
    if den < 0 or (den == 0 and num < 0):
        num, den = -num, -den
    return num, den


def cusps_equivalent(a: tuple[int, int], b: tuple[int, int], N: int) -> bool:
    """Gamma_0(N)-equivalence of cusps given as reduced ``(num, den)``."""
    u1, v1 = a
    u2, v2 = b
    s1 = _xgcd(u1, v1)[0]
    s2 = _xgcd(u2, v2)[0]
    return (s1 * v2 - s2 * v1) % gcd(N, v1 * v2) == 0


class CuspClasses:
    def __init__(self, N: int):
        self.N = N
        self.reps: list[tuple[int, int]] = []
        self._memo: dict = {}

    def index(self, cusp: tuple[int, int]) -> int:
        cusp = _cusp(*cusp)
        if cusp in self._memo:
            return self._memo[cusp]
        for i, r in enumerate(self.reps):
            if cusps_equivalent(cusp, r, self.N):
                self._memo[cusp] = i
                return i
        self.reps.append(cusp)
        self._memo[cusp] = len(self.reps) - 1
        return len(self.reps) - 1

    def __len__(self):
        return len(self.reps)


def num_cusps(N: int) -> int:
    return sum(_phi(gcd(d, N // d)) for d in divisors(N))


def _phi(n: int) -> int:
    out = n
    for p in factorint(n):
        out = out // p * (p - 1)
    return out


def genus(N: int) -> int:
    """Genus of X_0(N) from the index, elliptic points and cusps."""
    fac = factorint(N)
    mu = Fraction(N)
    for p in fac:
        mu *= Fraction(p + 1, p)
    if N % 4 == 0:
        nu2 = 0
    else:
        nu2 = 1
        for p in fac:
            nu2 *= 1 + (0 if p == 2 else (1 if p % 4 == 1 else -1))
    if N % 9 == 0:
        nu3 = 0
    else:
        nu3 = 1
        for p in fac:
            nu3 *= 1 + (0 if p == 3 else (1 if p % 3 == 1 else -1))
    g = 1 + mu / 12 - Fraction(nu2, 4) - Fraction(nu3, 3) - Fraction(num_cusps(N), 2)
    assert g.denominator == 1
    return int(g)


# ---------------------------------------------------------------- Hecke sets

def _round_half_away(a: int, b: int) -> int:
    if b < 0:
        a, b = -a, -b
    if a >= 0:
        return (2 * a + b) // (2 * b)
    return -((-2 * a + b) // (2 * b))


@lru_cache(maxsize=64)
def heilbronn_cremona(p: int) -> np.ndarray:
    """Heilbronn matrices ``[a, b, c, d]`` of determinant ``p`` realising T_p."""
    if p == 2:
        return np.array([[1, 0, 0, 2], [2, 0, 0, 1], [2, 1, 0, 1], [1, 0, 1, 2]], dtype=np.int64)
    ans = [[1, 0, 0, p]]
    for r in range(-(p // 2), p // 2 + 1):
        x1, x2, y1, y2, a, b = p, -r, 0, 1, -p, r
        ans.append([x1, x2, y1, y2])
        while b != 0:
            q = _round_half_away(a, b)
            a, b = -b, a - b * q
            x1, x2 = x2, q * x2 - x1
            y1, y2 = y2, q * y2 - y1
            ans.append([x1, x2, y1, y2])
    out = np.array(ans, dtype=np.int64)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=64)
def merel(n: int) -> np.ndarray:
    """Merel's set: ``ad - bc = n`` with ``a > b >= 0`` and ``d > c >= 0``."""
    out = []
    for a in range(1, n + 1):
        for d in range(-(-n // a), n + 2 - a):
            bc = a * d - n
            for b in range(0, a):
                if bc == 0:
                    if b == 0:
                        out.extend([a, 0, c, d] for c in range(d))
                    else:
                        out.append([a, b, 0, d])
                elif b and bc % b == 0 and bc // b < d:
                    out.append([a, b, bc // b, d])
    arr = np.array(out, dtype=np.int64)
    arr.setflags(write=False)
    return arr


def _act(p1: P1List, c: int, d: int, mats: np.ndarray) -> np.ndarray:
    """P1 indices of ``(c:d) * h`` for each ``h``; entries off P1 give -1."""
    cc = c * mats[:, 0] + d * mats[:, 2]
    dd = c * mats[:, 1] + d * mats[:, 3]
    return p1.index_array(cc, dd)


# ---------------------------------------------------------------- the space

@dataclass
class ModSymSpace:
    N: int
    p1: P1List
    relation_matrix: SparseRationalMatrix
    free: list[int]
    coords: list[dict]            # P1 index -> quotient coordinates
    cusps: CuspClasses
    boundary: SparseRationalMatrix  # cusps x dim
    star: SparseRationalMatrix      # dim x dim, acting on columns
    cuspidal: SubspaceBasis
    cuspidal_plus: SubspaceBasis
    cuspidal_minus: SubspaceBasis
    _hecke: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return len(self.free)

    @property
    def genus(self) -> int:
        return self.cuspidal_plus.dim

    def coordinate_matrix(self) -> list[dict]:
        return self.coords

    def hecke_full(self, p: int, method: str = "heilbronn") -> SparseRationalMatrix:
        """T_p on the whole symbol space (columns are images of basis symbols)."""
        key = (p, method)
        if key in self._hecke:
            return self._hecke[key]
        mats = heilbronn_cremona(p) if method == "heilbronn" else merel(p)
        images = []
        for f in self.free:
            c, d = self.p1[f]
            idx = _act(self.p1, c, d, mats)
            idx = idx[idx >= 0]
            counts = np.bincount(idx, minlength=len(self.p1))
            img: dict = {}
            for i in np.nonzero(counts)[0]:
                for j, v in self.coords[int(i)].items():
                    img[j] = img.get(j, 0) + int(counts[i]) * v
            images.append(img)
        m = _from_columns(images, self.dim)
        self._hecke[key] = m
        return m


def _from_columns(cols: Sequence[dict], nrows: int) -> SparseRationalMatrix:
    rows = [{} for _ in range(nrows)]
    for j, col in enumerate(cols):
        for i, v in col.items():
            if v:
                rows[i][j] = v
    return SparseRationalMatrix(nrows, len(cols), rows)


def restrict(op: SparseRationalMatrix, sub: SubspaceBasis) -> SparseRationalMatrix:
    """Matrix of ``op`` on an invariant subspace, in its echelon basis."""
    cols = []
    for w in sub.basis:
        coords = sub.coordinates(op.apply(w))
        if coords is None:
            raise ValueError("subspace is not invariant")
        cols.append({i: c for i, c in enumerate(coords) if c})
    return _from_columns(cols, sub.dim)


def _relations(p1: P1List) -> list[dict]:
    N = p1.N
    rows = []
    seen = set()
    for i, (c, d) in enumerate(p1.reps):
        for members in ((i, p1.index(d, -c)),
                        (i, p1.index(d, -c - d), p1.index(-c - d, c))):
            row: dict = {}
            for j in members:
                row[j] = row.get(j, 0) + 1
            key = tuple(sorted(row.items()))
            if key not in seen:
                seen.add(key)
                rows.append(row)
    return rows


def boundary_cusps(p1: P1List, i: int) -> tuple[tuple[int, int], tuple[int, int]]:
    """``(g oo, g 0)`` for the Manin symbol with index ``i``."""
    c, d = p1[i]
    a, b, c1, d1 = lift_to_sl2z(c, d, p1.N)
    return _cusp(a, c1), _cusp(b, d1)


def build_space(N: int, max_level: int = MAX_LEVEL) -> ModSymSpace:
    if N < 1:
        raise ValueError("level must be positive")
    if N > max_level:
        raise MemoryError(f"level {N} exceeds the configured bound {max_level}")
    p1 = P1List(N)
    n = len(p1)
    rel = SparseRationalMatrix(0, n, [])
    rows = _relations(p1)
    rel = SparseRationalMatrix(len(rows), n, rows)
    red, piv = rref(rel)
    pivset = set(piv)
    free = [j for j in range(n) if j not in pivset]
    pos = {f: k for k, f in enumerate(free)}
    coords: list[dict] = [{} for _ in range(n)]
    for f in free:
        coords[f] = {pos[f]: Fraction(1)}
    for r, p in zip(red.rows, piv):
        coords[p] = {pos[j]: -v for j, v in r.items() if j != p}
    dim = len(free)

    cusps = CuspClasses(N)
    bcols = []
    for f in free:
        hi, lo = boundary_cusps(p1, f)
        col: dict = {}
        for cusp, s in ((hi, 1), (lo, -1)):
            k = cusps.index(cusp)
            col[k] = col.get(k, 0) + s
        bcols.append({k: v for k, v in col.items() if v})
    boundary = _from_columns(bcols, max(len(cusps), 1))

    star_cols = []
    for f in free:
        c, d = p1[f]
        star_cols.append(dict(coords[p1.index(-c, d)]))
    star = _from_columns(star_cols, dim)

    cusp_sub = kernel(boundary)
    ident = SparseRationalMatrix.identity(dim)
    plus = intersect(cusp_sub, kernel(star - ident))
    minus = intersect(cusp_sub, kernel(star + ident))
    return ModSymSpace(N, p1, rel, free, coords, cusps, boundary, star, cusp_sub, plus, minus)


def cached_build_space(N: int, cache_dir: str | os.PathLike | None = None) -> ModSymSpace:
    """``build_space`` memoised on disk under ``cache_dir`` or ``$MODSYM_CACHE_DIR``."""
    cache_dir = cache_dir or os.environ.get("MODSYM_CACHE_DIR")
    if not cache_dir:
        return build_space(N)
    path = Path(cache_dir) / f"modsym-v{CACHE_VERSION}-{N}.pickle"
    if path.exists():
        try:
            with path.open("rb") as fh:
                version, space = pickle.load(fh)
            if version == CACHE_VERSION:
                return space
        except Exception:  # stale or corrupt cache entries are rebuilt
            log.warning("ignoring unreadable cache file %s", path)
    space = build_space(N)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    with tmp.open("wb") as fh:
        pickle.dump((CACHE_VERSION, space), fh)
    tmp.replace(path)
    return space


def heilbronn_hecke(space: ModSymSpace, p: int, full: bool = False) -> SparseRationalMatrix:
    """Matrix of T_p on the cuspidal subspace (or the full space)."""
    if space.N % p == 0:
        raise ValueError(f"p = {p} divides the level {space.N}")
    if not _is_prime(p):
        raise ValueError(f"{p} is not prime")
    t = space.hecke_full(p)
    return t if full else restrict(t, space.cuspidal)


def star_on_cuspidal(space: ModSymSpace) -> SparseRationalMatrix:
    return restrict(space.star, space.cuspidal)


def _is_prime(p: int) -> bool:
    return p >= 2 and all(p % q for q in range(2, isqrt(p) + 1))


# ---------------------------------------------------------------- newforms

@dataclass
class Functional:
    """A linear functional on symbols, stored as integers over P1 plus a denominator."""

    num: np.ndarray
    den: int

    @classmethod
    def from_quotient(cls, space: ModSymSpace, lam: dict) -> "Functional":
        vals = []
        for c in space.coords:
            vals.append(sum((v * lam.get(j, 0) for j, v in c.items()), Fraction(0)))
        den = math.lcm(*(v.denominator for v in vals)) if vals else 1
        num = np.array([int(v * den) for v in vals], dtype=np.int64)
        g = math.gcd(den, *map(int, num)) if len(num) else den
        num //= g
        num.setflags(write=False)
        return cls(num, den // g)

    def scaled(self, x: Fraction) -> "Functional":
        x = Fraction(x)
        num = [int(v) * x.numerator for v in self.num]
        den = self.den * x.denominator
        g = math.gcd(den, *num)
        arr = np.array([v // g for v in num], dtype=np.int64)
        arr.setflags(write=False)
        return Functional(arr, den // g)

    def value(self, i: int) -> Fraction:
        return Fraction(int(self.num[i]), self.den)

    def on_vector(self, vec: dict) -> Fraction:
        return sum((Fraction(int(self.num[i])) * c for i, c in vec.items()), Fraction(0)) / self.den


@dataclass
class NewformData:
    N: int
    aq: dict
    plus: Functional
    minus: Functional
    shape: LatticeShape
    scale: tuple            # (c+, c-): positive rationals applied to the raw functionals
    space: ModSymSpace = field(repr=False)
    raw_plus: dict = field(repr=False, default_factory=dict)
    raw_minus: dict = field(repr=False, default_factory=dict)
    normalized: bool = True
    calibrated: bool = False
    label: str = ""
    notes: list = field(default_factory=list)
    # optional picklable callable p -> a_p from a matched curve; used beyond the computed range
    trace_source: object = field(default=None, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    def ap(self, p: int) -> int:
        if p not in self.aq:
            hecke_max = self._cache.setdefault("hecke_max", max(self.aq, default=0))
            if self.trace_source is not None and self.N % p and p > hecke_max:
                self.aq[p] = int(self.trace_source(p))
            else:
                self.extend_eigenvalues(p)
        return self.aq[p]

    def functional(self, sign: int) -> Functional:
        return self.plus if sign > 0 else self.minus

    def extend_eigenvalues(self, bound: int):
        for p in primerange(2, bound + 1):
            if p not in self.aq and self.N % p:
                self.aq[p] = _ap_from_functional(self.space, self.plus, p)

    def q_expansion(self, n: int) -> list[int]:
        """Coefficients a_1 .. a_n, using U_p eigenvalues at bad primes."""
        a = [0] * (n + 1)
        a[1] = 1 if n >= 1 else 0
        for p in primerange(2, n + 1):
            ap = self.ap(p) if self.N % p else self.bad_ap(p)
            pk, prev, cur = p, 1, ap
            while pk <= n:
                a[pk] = cur
                if self.N % p:
                    prev, cur = cur, ap * cur - p * prev
                else:
                    prev, cur = cur, ap * cur
                pk *= p
        for m in range(2, n + 1):
            if a[m] or _is_prime_power(m):
                continue
            p = min(factorint(m))
            pk = p
            while m % (pk * p) == 0:
                pk *= p
            a[m] = a[pk] * a[m // pk]
        return a[1:]

    def bad_ap(self, p: int) -> int:
        """Eigenvalue of U_p for p dividing the level."""
        key = ("bad", p)
        if key not in self._cache:
            self._cache[key] = _ap_from_functional(self.space, self.plus, p, method="merel")
        return self._cache[key]


def _is_prime_power(m: int) -> bool:
    return len(factorint(m)) == 1


def _ap_from_functional(space: ModSymSpace, lam: Functional, p: int, method: str = "heilbronn") -> int:
    nz = np.nonzero(lam.num)[0]
    if nz.size == 0:
        raise ValueError("zero functional")
    mats = heilbronn_cremona(p) if method == "heilbronn" and space.N % p else merel(p)
    # try a few symbols in case of an accidental pairing with a boundary term
    for i0 in nz[:4]:
        c, d = space.p1[int(i0)]
        idx = _act(space.p1, c, d, mats)
        idx = idx[idx >= 0]
        total = Fraction(int(lam.num[idx].sum()), int(lam.num[i0]))
        if total.denominator != 1:
            raise ArithmeticError(f"non-integral eigenvalue {total} at p = {p}")
        return int(total)
    raise AssertionError("unreachable")


def sturm_bound(N: int) -> int:
    mu = N
    for p in factorint(N):
        mu = mu // p * (p + 1)
    return -(-mu // 6)


def _split_rational(space: ModSymSpace, primes: Sequence[int]):
    """Split the cuspidal plus space by integer Hecke eigenvalues.

    Returns ``(lines, old)`` where ``lines`` are one-dimensional eigenspaces with
    their eigenvalue systems and ``old`` are higher-dimensional survivors.
    """
    sub = space.cuspidal_plus
    g = sub.dim
    if g == 0:
        return [], []
    pieces = [(SubspaceBasis(g, [{i: Fraction(1)} for i in range(g)]), {})]
    done = []
    for p in primes:
        A = restrict(space.hecke_full(p), sub)
        hasse = isqrt(4 * p)
        nxt = []
        for W, sys_ in pieces:
            if W.dim == 1:
                v = W.basis[0]
                img = A.apply(v)
                j = next(iter(v))
                a = img.get(j, Fraction(0)) / v[j]
                nxt.append((W, {**sys_, p: a}))
                continue
            for a in range(-hasse, hasse + 1):
                K = intersect(W, kernel(A - SparseRationalMatrix.identity(g).scale(a)))
                if K.dim:
                    nxt.append((K, {**sys_, p: Fraction(a)}))
        pieces = nxt
        if not pieces:
            break
    for W, sys_ in pieces:
        done.append((W, {p: int(a) for p, a in sys_.items() if a.denominator == 1},
                     all(a.denominator == 1 for a in sys_.values())))
    lines = [(W, s) for W, s, ok in done if ok and W.dim == 1]
    old = [(W, s) for W, s, ok in done if ok and W.dim > 1]
    return lines, old


@lru_cache(maxsize=128)
def _systems_at_level(M: int, primes: tuple) -> tuple:
    if genus(M) == 0:
        return ()
    space = build_space(M)
    lines, old = _split_rational(space, primes)
    return tuple(tuple(sorted(s.items())) for _, s in lines + old)


def _split_primes(N: int) -> list[int]:
    bound = max(100, sturm_bound(N))
    return [p for p in primerange(2, bound + 1) if N % p]


def rational_newforms(space: ModSymSpace, B: int = DEFAULT_EIGENVALUE_BOUND) -> list[NewformData]:
    if B < 2:
        raise ValueError("eigenvalue bound must be at least 2")
    N = space.N
    primes = _split_primes(N)
    lines, old = _split_rational(space, primes)
    out = []
    for _, system in lines:
        if _occurs_below(N, system):
            log.info("level %d: eigenline %s occurs at a lower level", N, system)
            continue
        out.append(_make_newform(space, system, B))
    out.sort(key=lambda f: [f.aq[p] for p in sorted(f.aq)])
    return out


def _occurs_below(N: int, system: dict) -> bool:
    for M in divisors(N)[:-1]:
        if genus(M) == 0:
            continue
        primes = tuple(p for p in _split_primes(M) if N % p)
        target = tuple((p, system[p]) for p in primes if p in system)
        for s in _systems_at_level(M, primes):
            sd = dict(s)
            if all(sd.get(p) == a for p, a in target):
                return True
    return False


def eigen_functional(space: ModSymSpace, system: dict, sign: int) -> dict:
    """The functional on symbols with ``lam T_p = a_p lam`` and ``lam * star = sign * lam``."""
    dim = space.dim
    ident = SparseRationalMatrix.identity(dim)
    rows = list((space.star - ident.scale(sign)).transpose().rows)
    for p, a in sorted(system.items()):
        rows += (space.hecke_full(p) - ident.scale(a)).transpose().rows
        k = kernel(SparseRationalMatrix(len(rows), dim, rows))
        if k.dim == 1:
            return k.basis[0]
    raise ArithmeticError(f"eigen-functional of sign {sign} not isolated (dim {k.dim})")


def integral_homology(space: ModSymSpace) -> list[list[int]]:
    """Z-basis of boundary-free integer combinations of Manin symbols."""
    p1 = space.p1
    cusp_rows: dict = {}
    for i in range(len(p1)):
        hi, lo = boundary_cusps(p1, i)
        for cusp, s in ((hi, 1), (lo, -1)):
            k = space.cusps.index(cusp)
            cusp_rows.setdefault(k, {})
            cusp_rows[k][i] = cusp_rows[k].get(i, 0) + s
    n = len(p1)
    rows = [[r.get(i, 0) for i in range(n)] for r in cusp_rows.values()]
    return integer_kernel(rows, n)


def period_lattice(space: ModSymSpace, plus: Functional, minus: Functional):
    """HNF basis ``[[a, b], [0, c]]`` and denominator D of the image of H_1."""
    H = integral_homology(space)
    pts = []
    for h in H:
        x = sum(int(plus.num[i]) * v for i, v in enumerate(h) if v)
        y = sum(int(minus.num[i]) * v for i, v in enumerate(h) if v)
        pts.append((Fraction(x, plus.den), Fraction(y, minus.den)))
    D = math.lcm(*(v.denominator for pt in pts for v in pt))
    basis = hnf([[int(x * D), int(y * D)] for x, y in pts])
    if len(basis) != 2:
        raise ArithmeticError("period lattice has rank < 2")
    return basis, D


def lattice_normalization(basis, D) -> tuple[Fraction, Fraction, LatticeShape]:
    (a, b), (_, c) = basis
    g = gcd(b, c)
    index = c // g
    if index == 1:
        shape = LatticeShape.RECTANGULAR
    elif index == 2:
        shape = LatticeShape.NON_RECTANGULAR
    else:
        raise ArithmeticError(f"unexpected period lattice shape (index {index})")
    alpha = Fraction(a * index, D)
    beta = Fraction(c, D)
    return alpha, beta, shape


def _make_newform(space: ModSymSpace, system: dict, B: int) -> NewformData:
    raw_p = eigen_functional(space, system, 1)
    raw_m = eigen_functional(space, system, -1)
    fp = Functional.from_quotient(space, raw_p)
    fm = Functional.from_quotient(space, raw_m)
    basis, D = period_lattice(space, fp, fm)
    alpha, beta, shape = lattice_normalization(basis, D)
    plus, minus = fp.scaled(1 / alpha), fm.scaled(1 / beta)
    form = NewformData(space.N, {}, plus, minus, shape,
                       (Fraction(1) / alpha, Fraction(1) / beta), space, raw_p, raw_m)
    for p in primerange(2, B + 1):
        if space.N % p:
            form.aq[p] = system[p] if p in system else _ap_from_functional(space, plus, p)
    for p, a in system.items():
        if form.aq[p] != a:
            raise ArithmeticError(f"eigenvalue mismatch at p = {p}")
    return form


# ---------------------------------------------------------------- evaluation

@dataclass(frozen=True)
class CuspPath:
    """Target ``k/M`` of a path from 0; ``M = 0`` encodes the cusp at infinity."""

    k: int
    M: int

    def __post_init__(self):
        if self.M < 0:
            raise ValueError("denominator must be non-negative")
        if gcd(self.k, self.M) != 1:
            raise ValueError(f"{self.k}/{self.M} is not reduced")


def manin_path_decompose(k: int, M: int, N: int) -> list[tuple[tuple[int, int], int]]:
    """Manin symbols (with coefficient +1) summing to the path ``{0, k/M}``.

    ``k/M`` is first reduced mod 1, which does not change the symbol value.
    """
    if M <= 0 or gcd(k, M) != 1:
        raise ValueError("need a reduced fraction with positive denominator")
    num, den = k % M, M
    out = []
    qp, qc, sgn = 0, 1, 1
    while num:
        a = den // num
        num, den = den - a * num, num
        qn = a * qc + qp
        out.append((((sgn * qn) % N, qc % N), 1))
        qp, qc, sgn = qc, qn, -sgn
    return out


def _require_normalized(form: NewformData):
    if not form.normalized:
        raise CalibrationError("form is not normalized")


def eval_symbol(form: NewformData, path: CuspPath | tuple, sign: int) -> Fraction:
    """``[k/M]^sign`` exactly."""
    _require_normalized(form)
    if not isinstance(path, CuspPath):
        path = CuspPath(*path)
    if path.M == 0:
        return Fraction(0)
    lam = form.functional(sign)
    p1 = form.space.p1
    total = -int(lam.num[p1.index(0, 1)])
    for (c, d), e in manin_path_decompose(path.k, path.M, form.N):
        total += e * int(lam.num[p1.index(c, d)])
    return Fraction(total, lam.den)


def eval_rational(form: NewformData, r: Fraction, sign: int) -> Fraction:
    r = Fraction(r)
    return eval_symbol(form, CuspPath(r.numerator, r.denominator), sign)


def batch_symbols(form: NewformData, M: int, sign: int, ks: np.ndarray | None = None):
    """``([k/M]^sign * den for k in ks, den)`` with ``ks`` defaulting to the units mod M."""
    _require_normalized(form)
    key = ("batch", M, sign)
    if ks is None and key in form._cache:
        return form._cache[key]
    k = units(M) if ks is None else np.asarray(ks, dtype=np.int64) % M
    lam = form.functional(sign)
    table = form.space.p1.table
    N = form.N
    vals = _batch_path_sums(lam.num, table, N, k, M) - int(lam.num[form.space.p1.index(0, 1)])
    out = (k, vals, lam.den)
    if ks is None:
        if len(form._cache) > 256:
            form._cache.clear()
        form._cache[key] = out
    return out


def _batch_path_sums(lam: np.ndarray, table: np.ndarray, N: int, k: np.ndarray, M: int) -> np.ndarray:
    num = k.astype(np.int64).copy()
    den = np.full_like(num, M)
    qp = np.zeros_like(num)
    qc = np.ones_like(num) % N
    acc = np.zeros_like(num)
    sgn = 1
    active = np.nonzero(num > 0)[0]
    while active.size:
        a = den[active] // num[active]
        nn = den[active] - a * num[active]
        den[active] = num[active]
        num[active] = nn
        qn = ((a % N) * qc[active] + qp[active]) % N
        acc[active] += lam[table[(sgn * qn) % N, qc[active]]]
        qp[active] = qc[active]
        qc[active] = qn
        sgn = -sgn
        active = active[num[active] > 0]
    return acc


def twisted_sum(form: NewformData, D: int, M: int) -> Fraction:
    """``sum_{k in (Z/M)^x} chi_D(k) [k/M]^{sgn chi_D}`` with ``D | M``."""
    if M % D:
        raise ValueError(f"{D} does not divide {M}")
    chiD = char_table(D)
    sign = 1 if D == 1 or chiD[D - 1] == 1 else -1
    k, vals, den = batch_symbols(form, M, sign)
    w = chiD[k % D].astype(np.int64)
    return Fraction(int(np.dot(w, vals)), den)


def hecke_eval_identity_check(form: NewformData, r: Fraction, p: int) -> bool:
    """``a_p [r] = [p r] + sum_{k mod p} [(k + r)/p]`` for both signs."""
    if form.N % p == 0:
        raise ValueError("p divides the level")
    r = Fraction(r)
    ap = form.ap(p)
    for sign in (1, -1):
        lhs = ap * eval_rational(form, r, sign)
        rhs = eval_rational(form, p * r, sign)
        rhs += sum((eval_rational(form, (k + r) / p, sign) for k in range(p)), Fraction(0))
        if lhs != rhs:
            return False
    return True


# ---------------------------------------------------------------- calibration

def _first_nonzero_twist(form: NewformData, sign: int, limit: int = 400):
    from .arith import QuadChar
    for M in range(1, limit):
        if gcd(M, form.N) != 1:
            continue
        try:
            chi = QuadChar(M)
        except ValueError:
            continue
        if chi.sign != sign:
            continue
        s = twisted_sum(form, M, M)
        if s:
            return M, s
    return None


def calibrate_normalization(form: NewformData, curve=None, oracle=None,
                            tolerance: float = 1e-6, prec: int = 128) -> NewformData:
    """Fix the signs of the functionals and cross-check them analytically.

    The lattice normalization from the integral homology is exact; here each
    functional is compared with ``sqrt(M) L(f, chi_M, 1)/Omega`` for a twist
    with nonzero value.  A ratio of -1 flips the sign, a ratio of 2 or 1/2 is
    applied and recorded, anything else raises :class:`CalibrationError`.
    """
    from .analytic import LSeriesContext, l_value_central
    from .curve import agm_periods, matches_form

    if curve is None:
        raise CalibrationError("a curve model is required for analytic calibration")
    if not matches_form(curve, form):
        raise CalibrationError(f"curve {curve.label} does not match the form at level {form.N}")
    periods = agm_periods(curve, prec)
    ctx = oracle or LSeriesContext.from_curve(curve, prec=prec)
    for sign in (1, -1):
        omega = periods.omega_plus if sign > 0 else periods.omega_minus
        hit = _first_nonzero_twist(form, sign)
        if hit is None:
            raise CalibrationError(f"no nonzero twist found for sign {sign}")
        M, exact = hit
        lv = l_value_central(ctx, M)
        numeric = lv.value * (M ** 0.5 if M > 1 else 1) / omega
        ratio = float(numeric) / float(exact)
        fix = None
        for cand in (1, -1, 2, -2, 0.5, -0.5):
            if abs(ratio - cand) < tolerance * abs(cand):
                fix = Fraction(cand)
                break
        if fix is None:
            raise CalibrationError(
                f"sign {sign}: analytic/exact ratio {ratio:.9g} at M = {M} is not a unit or 2^(+-1)")
        if fix not in (1, -1):
            form.notes.append(f"analytic rescale {fix} applied to sign {sign}")
        if fix != 1:
            if sign > 0:
                form.plus = form.plus.scaled(fix)
                form.scale = (form.scale[0] * abs(fix), form.scale[1])
            else:
                form.minus = form.minus.scaled(fix)
                form.scale = (form.scale[0], form.scale[1] * abs(fix))
        form.notes.append(f"sign {sign}: checked against M = {M}, ratio {ratio:.12f}")
    form._cache.clear()
    form.calibrated = True
    form.label = curve.label
    return form
