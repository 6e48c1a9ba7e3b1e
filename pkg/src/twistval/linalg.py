"""Exact sparse linear algebra over Q, plus a little integer lattice work.

Rows are stored as ``{col: Fraction}`` dicts with no zero entries.  Everything
is exact; there are no modular or multi-prime shortcuts.
"""
from __future__ import annotations

from fractions import Fraction
from math import gcd, lcm
from typing import Iterable, Sequence

Row = dict

# elimination switches to dense rows past this fill ratio
DENSE_FILL_THRESHOLD = 0.30


def _clean(row: dict) -> dict:
    return {j: Fraction(v) for j, v in row.items() if v != 0}


def _size(x: Fraction) -> int:
    return (x.numerator * x.denominator).bit_length()


class SparseRationalMatrix:
    """Immutable-by-convention ``nrows x ncols`` matrix over Q."""

    __slots__ = ("nrows", "ncols", "rows")

    def __init__(self, nrows: int, ncols: int, rows: Sequence[dict] | None = None):
        self.nrows = nrows
        self.ncols = ncols
        if rows is None:
            rows = [{} for _ in range(nrows)]
        if len(rows) != nrows:
            raise ValueError("row count mismatch")
        self.rows = [_clean(r) for r in rows]
        for r in self.rows:
            for j in r:
                if not 0 <= j < ncols:
                    raise IndexError(f"column {j} out of range for {ncols} columns")

    @classmethod
    def from_dense(cls, data: Sequence[Sequence], ncols: int | None = None) -> "SparseRationalMatrix":
        data = [list(r) for r in data]
        if ncols is None:
            ncols = len(data[0]) if data else 0
        return cls(len(data), ncols, [{j: v for j, v in enumerate(r) if v} for r in data])

    @classmethod
    def identity(cls, n: int) -> "SparseRationalMatrix":
        return cls(n, n, [{i: Fraction(1)} for i in range(n)])

    @property
    def entries(self) -> dict:
        return {(i, j): v for i, r in enumerate(self.rows) for j, v in r.items()}

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i].get(j, Fraction(0))

    def __eq__(self, other):
        if not isinstance(other, SparseRationalMatrix):
            return NotImplemented
        return (self.nrows, self.ncols, self.rows) == (other.nrows, other.ncols, other.rows)

    def __repr__(self):
        return f"SparseRationalMatrix({self.nrows}x{self.ncols}, nnz={self.nnz})"

    @property
    def nnz(self) -> int:
        return sum(len(r) for r in self.rows)

    def to_dense(self) -> list[list[Fraction]]:
        return [[r.get(j, Fraction(0)) for j in range(self.ncols)] for r in self.rows]

    def transpose(self) -> "SparseRationalMatrix":
        cols = [{} for _ in range(self.ncols)]
        for i, r in enumerate(self.rows):
            for j, v in r.items():
                cols[j][i] = v
        return SparseRationalMatrix(self.ncols, self.nrows, cols)

    T = property(transpose)

    def __matmul__(self, other: "SparseRationalMatrix") -> "SparseRationalMatrix":
        if self.ncols != other.nrows:
            raise ValueError("dimension mismatch")
        out = []
        for r in self.rows:
            acc: dict = {}
            for k, a in r.items():
                for j, b in other.rows[k].items():
                    acc[j] = acc.get(j, 0) + a * b
            out.append(acc)
        return SparseRationalMatrix(self.nrows, other.ncols, out)

    def __add__(self, other):
        if (self.nrows, self.ncols) != (other.nrows, other.ncols):
            raise ValueError("dimension mismatch")
        return SparseRationalMatrix(self.nrows, self.ncols,
                                    [add_rows(a, b) for a, b in zip(self.rows, other.rows)])

    def __sub__(self, other):
        return self + other.scale(-1)

    def scale(self, c) -> "SparseRationalMatrix":
        c = Fraction(c)
        return SparseRationalMatrix(self.nrows, self.ncols,
                                    [{j: c * v for j, v in r.items()} for r in self.rows])

    def apply(self, vec: dict) -> dict:
        """Matrix times column vector (sparse dict)."""
        out = {}
        for i, r in enumerate(self.rows):
            s = sum((v * vec[j] for j, v in r.items() if j in vec), Fraction(0))
            if s:
                out[i] = s
        return out

    def row_apply(self, vec: dict) -> dict:
        """Row vector times matrix."""
        out: dict = {}
        for i, c in vec.items():
            for j, v in self.rows[i].items():
                out[j] = out.get(j, 0) + c * v
        return _clean(out)

    def trace(self) -> Fraction:
        return sum((self.rows[i].get(i, Fraction(0)) for i in range(min(self.nrows, self.ncols))),
                   Fraction(0))

    def rank(self) -> int:
        return len(rref(self)[1])


def add_rows(a: dict, b: dict, c=1) -> dict:
    out = dict(a)
    for j, v in b.items():
        w = out.get(j, 0) + c * v
        if w:
            out[j] = w
        else:
            out.pop(j, None)
    return out


def _rref_rows(rows: list[dict], ncols: int) -> tuple[list[dict], list[int]]:
    rows = [dict(r) for r in rows if r]
    pivots: list[int] = []
    done: list[dict] = []
    for col in range(ncols):
        cand = [i for i, r in enumerate(rows) if col in r]
        if not cand:
            continue
        best = min(cand, key=lambda i: (_size(rows[i][col]), len(rows[i])))
        prow = rows.pop(best)
        inv = 1 / prow[col]
        prow = {j: v * inv for j, v in prow.items()}
        for i in range(len(rows)):
            c = rows[i].get(col)
            if c is not None:
                rows[i] = add_rows(rows[i], prow, -c)
        for i in range(len(done)):
            c = done[i].get(col)
            if c is not None:
                done[i] = add_rows(done[i], prow, -c)
        done.append(prow)
        pivots.append(col)
        rows = [r for r in rows if r]
        if not rows:
            break
    return done, pivots


def _rref_dense(rows: list[dict], ncols: int) -> tuple[list[dict], list[int]]:
    mat = [[r.get(j, Fraction(0)) for j in range(ncols)] for r in rows if r]
    pivots: list[int] = []
    rank = 0
    for col in range(ncols):
        cand = [i for i in range(rank, len(mat)) if mat[i][col] != 0]
        if not cand:
            continue
        best = min(cand, key=lambda i: _size(mat[i][col]))
        mat[rank], mat[best] = mat[best], mat[rank]
        inv = 1 / mat[rank][col]
        prow = [v * inv for v in mat[rank]]
        mat[rank] = prow
        for i in range(len(mat)):
            if i != rank and mat[i][col] != 0:
                c = mat[i][col]
                mat[i] = [a - c * b for a, b in zip(mat[i], prow)]
        pivots.append(col)
        rank += 1
        if rank == len(mat):
            break
    return [{j: v for j, v in enumerate(r) if v} for r in mat[:rank]], pivots


def rref(m: SparseRationalMatrix) -> tuple[SparseRationalMatrix, list[int]]:
    """Reduced row echelon form (zero rows dropped) and the pivot columns."""
    total = m.nrows * m.ncols
    if total and m.nnz > DENSE_FILL_THRESHOLD * total:
        rows, piv = _rref_dense(m.rows, m.ncols)
    else:
        rows, piv = _rref_rows(m.rows, m.ncols)
    order = sorted(range(len(piv)), key=piv.__getitem__)
    rows = [rows[i] for i in order]
    piv = [piv[i] for i in order]
    return SparseRationalMatrix(len(rows), m.ncols, rows), piv


class SubspaceBasis:
    """Subspace of Q^n given by an echelon basis (rows)."""

    __slots__ = ("ambient", "matrix", "pivots")

    def __init__(self, ambient: int, rows: Iterable[dict] = ()):
        m = SparseRationalMatrix(0, ambient, [])
        rows = list(rows)
        if rows:
            m = SparseRationalMatrix(len(rows), ambient, rows)
        self.matrix, self.pivots = rref(m) if rows else (m, [])
        self.ambient = ambient

    @property
    def dim(self) -> int:
        return self.matrix.nrows

    @property
    def basis(self) -> list[dict]:
        return self.matrix.rows

    def __repr__(self):
        return f"SubspaceBasis(dim={self.dim}, ambient={self.ambient})"

    def __eq__(self, other):
        return (isinstance(other, SubspaceBasis) and self.ambient == other.ambient
                and self.matrix == other.matrix)

    def coordinates(self, vec: dict) -> list[Fraction] | None:
        """Coordinates of ``vec`` in the echelon basis, or None if outside."""
        coords = [Fraction(vec.get(p, 0)) for p in self.pivots]
        rebuilt: dict = {}
        for c, r in zip(coords, self.basis):
            if c:
                rebuilt = add_rows(rebuilt, r, c)
        return coords if rebuilt == _clean(vec) else None

    def contains(self, vec: dict) -> bool:
        return self.coordinates(vec) is not None

    def combine(self, coords: Sequence) -> dict:
        out: dict = {}
        for c, r in zip(coords, self.basis):
            if c:
                out = add_rows(out, r, Fraction(c))
        return out

    def __add__(self, other: "SubspaceBasis") -> "SubspaceBasis":
        _check_ambient(self, other)
        return SubspaceBasis(self.ambient, self.basis + other.basis)

    def complement_equations(self) -> SparseRationalMatrix:
        """Rows spanning the annihilator of this subspace."""
        k = kernel(self.matrix)
        return k.matrix


def _check_ambient(a: SubspaceBasis, b: SubspaceBasis):
    if a.ambient != b.ambient:
        raise ValueError(f"ambient dimension mismatch: {a.ambient} vs {b.ambient}")


def kernel(m: SparseRationalMatrix) -> SubspaceBasis:
    """Right null space ``{v : m v = 0}``."""
    red, piv = rref(m)
    pivset = set(piv)
    free = [j for j in range(m.ncols) if j not in pivset]
    vecs = []
    for f in free:
        v = {f: Fraction(1)}
        for r, p in zip(red.rows, piv):
            c = r.get(f)
            if c:
                v[p] = -c
        vecs.append(v)
    return SubspaceBasis(m.ncols, vecs)


def intersect(a: SubspaceBasis, b: SubspaceBasis) -> SubspaceBasis:
    _check_ambient(a, b)
    if a.dim == 0 or b.dim == 0:
        return SubspaceBasis(a.ambient)
    eqs = a.complement_equations().rows + b.complement_equations().rows
    if not eqs:
        return SubspaceBasis(a.ambient, a.basis)
    return kernel(SparseRationalMatrix(len(eqs), a.ambient, eqs))


def solve_in(sub: SubspaceBasis, vec: dict) -> list[Fraction]:
    coords = sub.coordinates(vec)
    if coords is None:
        raise ValueError("vector not in subspace")
    return coords


# ---------------------------------------------------------------- integers

def integer_row(row: dict) -> dict:
    """Scale a rational row to a primitive integer row."""
    if not row:
        return {}
    den = lcm(*(Fraction(v).denominator for v in row.values()))
    ints = {j: int(v * den) for j, v in row.items()}
    g = 0
    for v in ints.values():
        g = gcd(g, v)
    return {j: v // g for j, v in ints.items()}


def hnf(rows: Sequence[Sequence[int]]) -> list[list[int]]:
    """Row Hermite normal form basis of the Z-span of integer ``rows``."""
    mat = [list(map(int, r)) for r in rows if any(r)]
    if not mat:
        return []
    ncols = len(mat[0])
    out: list[list[int]] = []
    for col in range(ncols):
        live = [r for r in mat if r[col] != 0]
        rest = [r for r in mat if r[col] == 0]
        while len(live) > 1:
            live.sort(key=lambda r: abs(r[col]))
            piv = live[0]
            nxt = [piv]
            for r in live[1:]:
                q = r[col] // piv[col]
                r = [a - q * b for a, b in zip(r, piv)]
                (nxt if r[col] else rest).append(r)
            live = nxt
        if live:
            piv = live[0]
            if piv[col] < 0:
                piv = [-a for a in piv]
            out.append(piv)
        mat = [r for r in rest if any(r)]
    for i, r in enumerate(out):
        col = next(j for j, v in enumerate(r) if v)
        for k in range(i):
            q = out[k][col] // r[col]
            if q:
                out[k] = [a - q * b for a, b in zip(out[k], r)]
    return out


def saturate(lattice_vectors: Sequence[Sequence[int]]) -> list[list[int]]:
    """Z-basis of ``span_Q(rows) ∩ Z^n``."""
    rows = [list(map(int, r)) for r in lattice_vectors]
    if not rows or not any(any(r) for r in rows):
        return []
    n = len(rows[0])
    red, _ = rref(SparseRationalMatrix.from_dense(rows, n))
    K = [[integer_row(r).get(j, 0) for j in range(n)] for r in red.rows]
    r = len(K)
    # columns of K generate a full-rank lattice in Z^r with basis matrix H;
    # the saturation is H^{-1} K
    Hrows = hnf([[K[i][j] for i in range(r)] for j in range(n)])
    H = [[Fraction(Hrows[j][i]) for j in range(r)] for i in range(r)]
    Kq = [[Fraction(v) for v in row] for row in K]
    sat = _solve_square(H, Kq)
    out = []
    for row in sat:
        if any(v.denominator != 1 for v in row):
            raise ArithmeticError("saturation produced a non-integral vector")
        out.append([int(v) for v in row])
    return hnf(out)


def _solve_square(A: list[list[Fraction]], B: list[list[Fraction]]) -> list[list[Fraction]]:
    """Solve ``A X = B`` for square invertible ``A``."""
    n = len(A)
    aug = [list(A[i]) + list(B[i]) for i in range(n)]
    for col in range(n):
        p = next(i for i in range(col, n) if aug[i][col] != 0)
        aug[col], aug[p] = aug[p], aug[col]
        inv = 1 / aug[col][col]
        aug[col] = [v * inv for v in aug[col]]
        for i in range(n):
            if i != col and aug[i][col] != 0:
                c = aug[i][col]
                aug[i] = [a - c * b for a, b in zip(aug[i], aug[col])]
    return [row[n:] for row in aug]


def integer_kernel(rows: Sequence[Sequence[int]], ncols: int) -> list[list[int]]:
    """Z-basis of ``{v in Z^ncols : A v = 0}``."""
    m = SparseRationalMatrix.from_dense(rows, ncols) if rows else SparseRationalMatrix(0, ncols)
    k = kernel(m)
    if k.dim == 0:
        return []
    ints = [[integer_row(r).get(j, 0) for j in range(ncols)] for r in k.basis]
    return saturate(ints)
