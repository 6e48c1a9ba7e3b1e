"""Prime classes, the four main bounds with equality conditions, and table generation."""
from __future__ import annotations

import functools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from math import gcd, prod

from sympy import isprime, primerange

from .arith import INF, LatticeShape, QuadChar, Valuation, gauss_sum_v2, odd_prime_factors, v2
from .modsym import NewformData, twisted_sum
from .twist import NOT_APPLICABLE, DivisorSpec, T1, T4


class _HypothesisNotMet:
    def __repr__(self):
        return "HYPOTHESIS_NOT_MET"

    def __reduce__(self):
        return "HYPOTHESIS_NOT_MET"

    def __bool__(self):
        return False


HYPOTHESIS_NOT_MET = _HypothesisNotMet()


@dataclass(frozen=True)
class PrimeClass:
    q: int
    sign: int
    i: Valuation

    def in_class(self, i: int, sign: int | None = None) -> bool:
        return self.i == i and (sign is None or self.sign == sign)

    @property
    def label(self) -> str:
        return f"S{self.i if self.i != INF else 'inf'}{'+' if self.sign > 0 else '-'}"


def classify_prime(form: NewformData, q: int) -> PrimeClass:
    if q % 2 == 0 or not isprime(q):
        raise ValueError(f"{q} is not an odd prime")
    if form.N % q == 0:
        raise ValueError(f"{q} divides the level {form.N}")
    return PrimeClass(q, 1 if q % 4 == 1 else -1, v2(form.ap(q) - 2))


def parse_class(s: str) -> tuple[int, int | None]:
    """``'S0+'`` -> (0, 1); ``'S1'`` -> (1, None)."""
    s = s.strip()
    if not s.startswith("S"):
        raise ValueError(f"bad class {s!r}")
    sign = None
    if s.endswith("+"):
        sign, s = 1, s[:-1]
    elif s.endswith("-"):
        sign, s = -1, s[:-1]
    return int(s[1:]), sign


def frak_vw(form: NewformData, m: int) -> tuple[Valuation, int, int]:
    """(v_m, w_m, r(m)) for odd square-free ``m`` prime to the level."""
    spec = DivisorSpec(0, m)
    if gcd(m, form.N) != 1:
        raise ValueError(f"gcd({m}, {form.N}) != 1")
    ps = spec.primes
    vm = min((classify_prime(form, q).i for q in ps), default=INF)
    return vm, 0 if vm == 0 else 1, len(ps)


@dataclass(frozen=True)
class BoundEvaluation:
    bound_general: Valuation
    bound_plus: object                 # Valuation or NOT_APPLICABLE
    condition_general: bool
    condition_plus: bool
    bound_uniform: Valuation           # part (ii) formula regardless of signs

    @property
    def applicable(self) -> Valuation:
        return self.bound_general if self.bound_plus is NOT_APPLICABLE else self.bound_plus

    @property
    def equality_condition_met(self) -> bool:
        return self.condition_general or self.condition_plus


def _base_invariants(form: NewformData) -> tuple[Valuation, Valuation | None]:
    t1 = v2(T1(form))
    t4 = v2(T4(form)) if form.N % 2 else None
    return t1, t4


def _check_M(form: NewformData, M: DivisorSpec):
    if gcd(M.d, 2 * form.N) != 1:
        raise ValueError(f"gcd({M.d}, 2N) != 1 for N = {form.N}")
    if M.n == 1 and form.N % 2 == 0:
        raise ValueError("the factor 4 needs an odd level")


def theorem_bound(form: NewformData, M) -> BoundEvaluation | _HypothesisNotMet:
    """Part (i) and (ii) bounds for ``L(f, chi_M, 1)/Omega`` and the equality conditions."""
    M = DivisorSpec.of(M)
    _check_M(form, M)
    classes = [classify_prime(form, q) for q in M.primes]
    if any(c.i > 2 for c in classes):
        return HYPOTHESIS_NOT_MET
    vm, wm, r = frak_vw(form, M.d)
    t1, t4 = _base_invariants(form)
    d0, d2 = int(vm == 0), int(vm == 2)
    rect = form.shape is LatticeShape.RECTANGULAR
    wr = wm * r

    def all_in(i, sign=None):
        return bool(classes) and all(c.in_class(i, sign) for c in classes)

    if M.n == 0:
        L1 = t1
        gen = wr + min(d0, L1)
        plus = wr + (min(1 + d0, L1 + d2) if rect else min(d0, L1 + d2))
        cond_gen = t1 < 1 and all_in(0)
        if rect:
            cond_plus = (t1 < 2 and all_in(0, 1)) or (t1 < 1 and all_in(1, 1))
        else:
            cond_plus = (t1 < 1 and all_in(0, 1)) or (t1 < 0 and all_in(1, 1))
    else:
        L1, L4 = t1, t4 - 1
        gen = wr + min(-1 + d0, -1 + d0 + L1, L4 + d2)
        plus = wr + (min(d0, L4 + d2) if rect else min(-1 + d0, L4 + d2))
        cond_gen = ((t4 < min(1, 1 + t1) and all_in(0)) or (t4 < min(0, t1) and all_in(1)))
        if rect:
            cond_plus = (t4 < 2 and all_in(0, 1)) or (t4 < 1 and all_in(1, 1))
        else:
            cond_plus = (t4 < 1 and all_in(0, 1)) or (t4 < 0 and all_in(1, 1))
    plus_ok = all(c.sign == 1 for c in classes)
    return BoundEvaluation(gen, plus if plus_ok else NOT_APPLICABLE, cond_gen,
                           cond_plus and plus_ok, plus)


@dataclass
class TwistReport:
    label: str
    N: int
    n: int
    m: int
    primes: list[int]
    classes: list[PrimeClass]
    r: int
    v_m: Valuation
    w_m: int
    T_M: object                        # Fraction
    actual: Valuation
    tau_shift: int
    bound_general: Valuation
    bound_plus: object
    bound_uniform: Valuation
    inequality_holds: bool
    equality_condition_met: bool
    equality_attained: bool
    equality_consistent: bool
    t1: Valuation = INF
    t4: Valuation | None = None
    printed: dict | None = field(default=None)

    @property
    def bound_alternate(self) -> Valuation:
        """``w r + min{1 + delta_(v,0), L + delta_(v,2)}`` with L the base L-value valuation."""
        base = self.t1 if self.n == 0 else self.t4 - 1
        return self.w_m * self.r + min(1 + int(self.v_m == 0), base + int(self.v_m == 2))

    @property
    def M(self) -> int:
        return 4**self.n * self.m

    @property
    def applicable_bound(self) -> Valuation:
        return self.bound_general if self.bound_plus is NOT_APPLICABLE else self.bound_plus

    @property
    def ok(self) -> bool:
        return self.inequality_holds and self.equality_consistent

    @property
    def sign(self) -> int:
        return QuadChar(self.M).sign


def verify_twist(form: NewformData, M) -> TwistReport | _HypothesisNotMet:
    M = DivisorSpec.of(M)
    ev = theorem_bound(form, M)
    if ev is HYPOTHESIS_NOT_MET:
        return ev
    vm, wm, r = frak_vw(form, M.d)
    t1, t4 = _base_invariants(form)
    T = twisted_sum(form, M.M, M.M)
    shift = gauss_sum_v2(QuadChar(M.M))
    actual = v2(T) - shift
    holds = actual >= ev.bound_general
    consistent = True
    if ev.bound_plus is not NOT_APPLICABLE:
        holds = holds and actual >= ev.bound_plus
        if ev.condition_plus:
            consistent = actual == ev.bound_plus
    if ev.condition_general:
        consistent = consistent and actual == ev.bound_general
    return TwistReport(
        label=form.label or f"N={form.N}", N=form.N, n=M.n, m=M.d, primes=M.primes,
        classes=[classify_prime(form, q) for q in M.primes], r=r, v_m=vm, w_m=wm, T_M=T,
        actual=actual, tau_shift=shift, bound_general=ev.bound_general, bound_plus=ev.bound_plus,
        bound_uniform=ev.bound_uniform, inequality_holds=holds,
        equality_condition_met=ev.equality_condition_met,
        equality_attained=actual == ev.applicable, equality_consistent=consistent, t1=t1, t4=t4)


# ---------------------------------------------------------------- printed tables
# q: (sign, v2(a_q - 2), value, bound, red)

PRINTED_TABLES = {
    (34, 0): {
        5: (1, 1, 1, 1, True), 7: (-1, 1, 1, 1, False), 11: (-1, 2, INF, 2, False),
        19: (-1, 1, 2, 1, False), 23: (-1, 1, 1, 1, False), 29: (1, 1, 1, 1, True),
        31: (-1, 1, 1, 1, False), 37: (1, 1, 1, 1, True), 41: (1, 2, INF, 2, False),
        43: (-1, 1, 4, 1, False), 47: (-1, 1, INF, 1, False), 59: (-1, 1, INF, 1, False),
        61: (1, 1, 1, 1, True), 67: (-1, 1, 2, 1, False), 71: (-1, 1, 1, 1, False),
        79: (-1, 1, 1, 1, False), 83: (-1, 1, INF, 1, False), 97: (1, 2, INF, 2, False),
        103: (-1, 1, INF, 1, False), 109: (1, 1, 1, 1, True), 127: (-1, 1, INF, 1, False),
        137: (1, 2, 2, 2, False), 149: (1, 2, INF, 2, False), 151: (-1, 1, INF, 1, False),
        157: (1, 2, INF, 2, False), 167: (-1, 1, 1, 1, False), 173: (1, 1, 1, 1, True),
        179: (-1, 1, 2, 1, False), 181: (1, 1, 1, 1, True), 191: (-1, 1, INF, 1, False),
    },
    (37, 1): {
        3: (-1, 0, INF, 0, False), 5: (1, 2, INF, 2, False), 7: (-1, 0, INF, 0, False),
        11: (-1, 0, INF, 0, False), 13: (1, 2, INF, 2, False), 17: (1, 1, INF, 1, False),
        19: (-1, 1, 1, 1, False), 29: (1, 2, INF, 2, False), 31: (-1, 1, INF, 1, False),
        41: (1, 0, 0, 0, True), 47: (-1, 0, INF, 0, False), 53: (1, 0, 0, 0, True),
        59: (-1, 1, 3, 1, False), 61: (1, 1, INF, 1, False), 67: (-1, 1, INF, 1, False),
        71: (-1, 0, INF, 0, False), 73: (1, 0, 0, 0, True), 79: (-1, 1, 1, 1, False),
        83: (-1, 0, INF, 0, False), 89: (1, 1, INF, 1, False), 97: (1, 1, INF, 1, False),
        101: (1, 0, 0, 0, True), 107: (-1, 1, INF, 1, False), 109: (1, 1, INF, 1, False),
        113: (1, 2, INF, 2, False), 127: (-1, 0, INF, 0, False), 131: (-1, 1, 1, 1, False),
        139: (-1, 1, INF, 1, False), 149: (1, 0, 0, 0, True), 151: (-1, 1, INF, 1, False),
    },
}


def printed_row(N: int, n: int, q: int) -> dict | None:
    row = PRINTED_TABLES.get((N, n), {}).get(q)
    if row is None:
        return None
    sign, i, value, bound, red = row
    return {"sign": sign, "i": i, "value": value, "bound": bound, "red": red}


def _row(args) -> TwistReport | None:
    form, n, q = args
    if form.N % q == 0:
        return None
    rep = verify_twist(form, DivisorSpec(n, q))
    if rep is HYPOTHESIS_NOT_MET:
        return None
    rep.printed = printed_row(form.N, n, q)
    return rep


def _pmap(fn, items, jobs: int):
    if jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def generate_table(form: NewformData, n: int, max_q: int, min_q: int = 3,
                   jobs: int = 1) -> list[TwistReport]:
    """One row per odd prime ``min_q <= q <= max_q`` prime to N inside the hypothesis classes."""
    if n == 1 and form.N % 2 == 0:
        raise ValueError("the factor 4 needs an odd level")
    qs = [q for q in primerange(max(3, min_q), max_q + 1) if form.N % q]
    rows = _pmap(_row, [(form, n, q) for q in qs], jobs)
    return [r for r in rows if r is not None]


def row_matches_printed(rep: TwistReport) -> dict | None:
    """Per-column comparison against the printed row, when one exists."""
    p = rep.printed
    if p is None:
        return None
    c = rep.classes[0]
    return {
        "sign": c.sign == p["sign"],
        "i": c.i == p["i"],
        "value": rep.actual == p["value"],
        "bound_uniform": rep.bound_uniform == p["bound"],
        "bound_applicable": rep.applicable_bound == p["bound"],
        "red": rep.equality_condition_met == p["red"],
    }


def discrepancy_audit(rows: list[TwistReport]) -> dict:
    """Counts of printed-bound agreement under both readings, plus rows where they differ."""
    listed = [r for r in rows if r.printed is not None]
    uniform = [r.primes[0] for r in listed if r.bound_uniform == r.printed["bound"]]
    applicable = [r.primes[0] for r in listed if r.applicable_bound == r.printed["bound"]]
    differ = [r.primes[0] for r in rows if r.bound_uniform != r.applicable_bound]
    alternate = [r.primes[0] for r in listed if r.bound_alternate == r.printed["bound"]]
    return {"listed": len(listed), "uniform_match": uniform, "applicable_match": applicable,
            "alternate_match": alternate,
            "applicable_differs": differ,
            "uniform_mismatch": [r.primes[0] for r in listed if r.primes[0] not in uniform]}


def intro_prime_scan(form: NewformData, count: int, i: int = 0, sign: int | None = 1,
                     limit: int = 20000) -> list[int]:
    """First ``count`` primes q < limit prime to N with the given sign of chi_q and v2(a_q - 2).

    Returns fewer than ``count`` primes when the class is sparse or empty below ``limit``
    (a rational 2-torsion point makes every a_q even, so S0 is empty).
    """
    out = []
    if count <= 0:
        return out
    for q in primerange(3, limit):
        if form.N % q == 0:
            continue
        if classify_prime(form, q).in_class(i, sign):
            out.append(q)
            if len(out) >= count:
                break
    return out


def squarefree_moduli(form: NewformData, limit: int, min_primes: int = 1):
    """Odd square-free m <= limit prime to N with every prime factor in S0, S1 or S2."""
    for m in range(3, limit + 1, 2):
        if gcd(m, form.N) != 1:
            continue
        ps = odd_prime_factors(m)
        if len(ps) < min_primes or len(set(ps)) != len(ps):
            continue
        if prod(ps) != m:
            continue
        if all(classify_prime(form, q).i <= 2 for q in ps):
            yield m


def theorem_sweep(form: NewformData, limit: int, ns=(0, 1), jobs: int = 1) -> list[TwistReport]:
    items = []
    for n in ns:
        if n == 1 and form.N % 2 == 0:
            continue
        items += [(form, n, m) for m in squarefree_moduli(form, limit)]
    return _pmap(_sweep_item, items, jobs)


def _sweep_item(args) -> TwistReport:
    form, n, m = args
    return verify_twist(form, DivisorSpec(n, m))


# ---------------------------------------------------------------- form loading

_FORMS: dict = {}


def load_form(N: int, label: str | None = None, fixtures: dict | None = None,
              calibrate: bool = True) -> NewformData:
    """Rational newform at level N matched to a fixture curve and analytically calibrated.

    With no matching fixture the form keeps its exact lattice normalization only.
    """
    from .curve import ap as curve_ap, fixtures_for_level, matches_form
    from .modsym import calibrate_normalization, cached_build_space, rational_newforms

    key = (N, label, tuple(sorted(fixtures or {})), calibrate)
    if key in _FORMS:
        return _FORMS[key]
    forms = rational_newforms(cached_build_space(N))
    if not forms:
        raise LookupError(f"no rational newform at level {N}")
    curves = fixtures_for_level(N, fixtures)
    if label is not None:
        curves = [c for c in curves if c.label == label or c.label.rstrip("0123456789") == label]
    chosen = None
    for c in curves:
        for f in forms:
            if matches_form(c, f):
                chosen = (f, c)
                break
        if chosen:
            break
    if chosen is None:
        if label is not None:
            raise LookupError(f"no newform at level {N} matches {label}")
        form = forms[0]
        form.notes.append("no fixture curve matched; lattice normalization only")
    else:
        form, curve = chosen
        form.trace_source = functools.partial(curve_ap, curve)
        if calibrate:
            calibrate_normalization(form, curve)
        else:
            form.label = curve.label
    _FORMS[key] = form
    return form
