"""Resonant mode sets on the square lattice.

A set Lambda is a union of N "nuclear families" (n1, n2, n3, n4) satisfying
n1 - n2 + n3 - n4 = 0 and |n1|^k - |n2|^k + |n3|^k - |n4|^k = 0, where
k = 1 for the Wave equation and k = 2 for Beam and Hartree.  Everything in
this module is exact: coordinates are Python integers, rationals are
``fractions.Fraction`` and sums of square roots are decided by an exact
algebraic test.
"""

from __future__ import annotations

import itertools
import json
import math
import random
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import GiveUp


class Kind(str, Enum):
    WAVE = "wave"
    BEAM = "beam"
    HARTREE = "hartree"

    @property
    def kappa(self) -> int:
        return 1 if self is Kind.WAVE else 2


class Mode(NamedTuple):
    j1: int
    j2: int

    @property
    def norm2(self) -> int:
        return self.j1 * self.j1 + self.j2 * self.j2

    def __add__(self, other):  # type: ignore[override]
        return Mode(self.j1 + other[0], self.j2 + other[1])

    def __sub__(self, other):
        return Mode(self.j1 - other[0], self.j2 - other[1])

    def __neg__(self):
        return Mode(-self.j1, -self.j2)


def as_mode(m: Sequence[int]) -> Mode:
    return Mode(int(m[0]), int(m[1]))


@dataclass(frozen=True)
class ResonantTuple:
    n1: Mode
    n2: Mode
    n3: Mode
    n4: Mode
    kind: Kind

    def __post_init__(self):
        for name in ("n1", "n2", "n3", "n4"):
            object.__setattr__(self, name, as_mode(getattr(self, name)))
        object.__setattr__(self, "kind", Kind(self.kind))

    @property
    def modes(self) -> tuple[Mode, Mode, Mode, Mode]:
        return (self.n1, self.n2, self.n3, self.n4)


# ---------------------------------------------------------------------------
# exact arithmetic on sums of square roots


def sqrt_sum_is_zero(signs: Sequence[int], squares: Sequence[int]) -> bool:
    """Decide exactly whether sum_i signs[i] * sqrt(squares[i]) == 0.

    Square roots of integers whose products are perfect squares are rational
    multiples of each other; classes with different squarefree part are
    linearly independent over Q.  So the sum vanishes iff it vanishes inside
    every class, and inside a class everything is an integer after
    multiplying by sqrt of a representative.
    """
    classes: list[list[tuple[int, int]]] = []
    for s, q in zip(signs, squares):
        q = int(q)
        if q < 0:
            raise ValueError("negative radicand")
        if q == 0 or s == 0:
            continue
        for cls in classes:
            rep = cls[0][1]
            r = math.isqrt(rep * q)
            if r * r == rep * q:
                cls.append((s, q))
                break
        else:
            classes.append([(s, q)])
    for cls in classes:
        rep = cls[0][1]
        if sum(s * math.isqrt(rep * q) for s, q in cls) != 0:
            return False
    return True


def frequency_sum_is_zero(signs: Sequence[int], modes: Sequence[Mode], kappa: int) -> bool:
    if kappa == 2:
        return sum(s * m.norm2 for s, m in zip(signs, modes)) == 0
    return sqrt_sum_is_zero(signs, [m.norm2 for m in modes])


def momentum_is_zero(signs: Sequence[int], modes: Sequence[Mode]) -> bool:
    return (sum(s * m[0] for s, m in zip(signs, modes)) == 0
            and sum(s * m[1] for s, m in zip(signs, modes)) == 0)


ALTERNATING = (1, -1, 1, -1)


def is_resonant(t: ResonantTuple) -> bool:
    """Alternating-sign resonance with four pairwise distinct modes."""
    ms = t.modes
    if len(set(ms)) != 4:
        return False
    return momentum_is_zero(ALTERNATING, ms) and frequency_sum_is_zero(ALTERNATING, ms, t.kind.kappa)


# ---------------------------------------------------------------------------
# the set itself


@dataclass(frozen=True)
class LambdaSet:
    tuples: tuple[ResonantTuple, ...]
    kind: Kind
    epsilon_target: float | None = None
    radius: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "tuples", tuple(self.tuples))

    @property
    def N(self) -> int:
        return len(self.tuples)

    @property
    def modes(self) -> list[Mode]:
        """All 4N modes; mode 4(i-1)+n (1-based) is n_n of tuple i."""
        return [m for t in self.tuples for m in t.modes]

    @property
    def generation1(self) -> list[Mode]:
        return [m for t in self.tuples for m in (t.n1, t.n3)]

    @property
    def generation2(self) -> list[Mode]:
        return [m for t in self.tuples for m in (t.n2, t.n4)]

    def to_json(self) -> str:
        data = {
            "kind": self.kind.value,
            "tuples": [[[m.j1, m.j2] for m in t.modes] for t in self.tuples],
            "epsilon_target": self.epsilon_target,
            "radius": self.radius,
        }
        return json.dumps(data, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "LambdaSet":
        data = json.loads(text)
        kind = Kind(data["kind"])
        tuples = []
        for quad in data["tuples"]:
            ms = [as_mode(m) for m in quad]
            if any(not isinstance(v, int) for m in quad for v in m):
                raise ValueError("mode coordinates must be integers")
            tuples.append(ResonantTuple(*ms, kind=kind))
        return cls(tuple(tuples), kind, data.get("epsilon_target"), data.get("radius"))


def make_lambda(quads: Iterable[Sequence[Sequence[int]]], kind: Kind | str,
                epsilon_target: float | None = None, radius: int | None = None) -> LambdaSet:
    kind = Kind(kind)
    tuples = tuple(ResonantTuple(*[as_mode(m) for m in q], kind=kind) for q in quads)
    return LambdaSet(tuples, kind, epsilon_target, radius)


# ---------------------------------------------------------------------------
# validation


@dataclass
class CheckResult:
    ok: bool
    witness: object = None

    def to_dict(self) -> dict:
        w = self.witness
        return {"ok": self.ok, "witness": _jsonable(w)}


def _jsonable(w):
    if isinstance(w, (list, tuple)):
        return [_jsonable(x) for x in w]
    if isinstance(w, dict):
        return {str(k): _jsonable(v) for k, v in w.items()}
    if isinstance(w, (np.integer,)):
        return int(w)
    return w


@dataclass
class ValidationReport:
    checks: dict[str, CheckResult] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks.values())

    def failed(self) -> list[str]:
        return [k for k, c in self.checks.items() if not c.ok]

    def to_dict(self) -> dict:
        return {"ok": self.ok, "checks": {k: c.to_dict() for k, c in self.checks.items()}}


def _check_modes_distinct(L: LambdaSet) -> CheckResult:
    seen = set()
    for m in L.modes:
        if m in seen:
            return CheckResult(False, list(m))
        seen.add(m)
    return CheckResult(True)


def _check_tuples_resonant(L: LambdaSet) -> CheckResult:
    for i, t in enumerate(L.tuples):
        if not is_resonant(t):
            return CheckResult(False, {"tuple": i, "modes": [list(m) for m in t.modes]})
    return CheckResult(True)


def _check_closure(L: LambdaSet) -> CheckResult:
    """If three members of an alternating resonance lie in Lambda, so does the fourth."""
    uniq = sorted(set(L.modes))
    members = set(uniq)
    k = L.kind.kappa
    for x, y, z in itertools.permutations(uniq, 3):
        n = x - y + z
        if n in members:
            continue
        if frequency_sum_is_zero(ALTERNATING, (x, y, z, n), k):
            return CheckResult(False, [list(x), list(y), list(z), list(n)])
    return CheckResult(True)


def _families_by_member(L: LambdaSet):
    """All alternating resonances (a,b,c,d) with a,c parents and b,d children, up to trivial permutations."""
    g1 = sorted(set(L.generation1))
    g2 = sorted(set(L.generation2))
    k = L.kind.kappa
    fams = set()
    for a, c in itertools.combinations(g1, 2):
        for b, d in itertools.combinations(g2, 2):
            if a - b + c - d != (0, 0):
                continue
            if frequency_sum_is_zero(ALTERNATING, (a, b, c, d), k):
                fams.add((frozenset((a, c)), frozenset((b, d))))
    return fams, g1, g2


def _check_uniqueness(L: LambdaSet) -> tuple[CheckResult, CheckResult]:
    fams, g1, g2 = _families_by_member(L)
    out = []
    for gen, slot in ((g1, 0), (g2, 1)):
        res = CheckResult(True)
        for m in gen:
            cnt = [f for f in fams if m in f[slot]]
            if len(cnt) != 1:
                res = CheckResult(False, {"mode": list(m), "families": len(cnt)})
                break
        out.append(res)
    # a mode listed twice in a generation (or in both) breaks uniqueness too
    c1 = defaultdict(int)
    for m in L.generation1 + L.generation2:
        c1[m] += 1
    dup = [m for m, c in c1.items() if c > 1]
    for m in dup:
        if m in L.generation1 and out[0].ok:
            out[0] = CheckResult(False, {"mode": list(m), "duplicated": True})
        if m in L.generation2 and out[1].ok:
            out[1] = CheckResult(False, {"mode": list(m), "duplicated": True})
    return out[0], out[1]


SIGN_PATTERNS = [(1,) + s for s in itertools.product((1, -1), repeat=3)]


def _signed_key(signs, modes):
    cnt = defaultdict(int)
    for s, m in zip(signs, modes):
        cnt[m] += s
    return frozenset((m, c) for m, c in cnt.items() if c != 0)


def _check_faithful(L: LambdaSet) -> CheckResult:
    """No resonance of any sign pattern inside Lambda besides the listed families.

    Candidates are found with a float pre-filter and confirmed exactly.
    Tuples whose signed modes cancel pairwise are trivial and skipped.
    """
    uniq = sorted(set(L.modes))
    M = len(uniq)
    if M == 0:
        return CheckResult(True)
    k = L.kind.kappa
    X = np.array([m.j1 for m in uniq], dtype=float)
    Y = np.array([m.j2 for m in uniq], dtype=float)
    n2 = np.array([float(m.norm2) for m in uniq])
    F = n2 if k == 2 else np.sqrt(n2)
    scale = float(np.max(np.abs(F))) or 1.0
    cscale = float(max(np.max(np.abs(X)), np.max(np.abs(Y)), 1.0))
    idx = np.indices((M, M, M, M)).reshape(4, -1)
    allowed = set()
    for t in L.tuples:
        key = _signed_key(ALTERNATING, t.modes)
        allowed.add(key)
        allowed.add(frozenset((m, -c) for m, c in key))
    for sg in SIGN_PATTERNS:
        s = np.array(sg, dtype=float)[:, None]
        mx = (s * X[idx]).sum(axis=0)
        my = (s * Y[idx]).sum(axis=0)
        fr = (s * F[idx]).sum(axis=0)
        cand = np.nonzero((np.abs(mx) <= 1e-9 * cscale) & (np.abs(my) <= 1e-9 * cscale)
                          & (np.abs(fr) <= 1e-9 * scale))[0]
        for c in cand:
            modes = [uniq[i] for i in idx[:, c]]
            key = _signed_key(sg, modes)
            if not key:
                continue  # trivial: pairwise cancellation
            if not momentum_is_zero(sg, modes) or not frequency_sum_is_zero(sg, modes, k):
                continue
            if key in allowed:
                continue
            return CheckResult(False, {"modes": [list(m) for m in modes], "signs": list(sg)})
    return CheckResult(True)


def _check_parity(L: LambdaSet) -> CheckResult:
    for m in L.modes:
        if m.j1 % 2 != 1 or m.j2 % 2 != 0:
            return CheckResult(False, list(m))
    return CheckResult(True)


def _check_distinct_norms(L: LambdaSet) -> CheckResult:
    seen = {}
    for m in L.modes:
        if m.norm2 in seen and seen[m.norm2] != m:
            return CheckResult(False, [list(seen[m.norm2]), list(m)])
        seen[m.norm2] = m
    return CheckResult(True)


def _check_annulus(L: LambdaSet) -> CheckResult:
    if L.radius is None or L.epsilon_target is None:
        return CheckResult(False, "radius or epsilon_target missing")
    R = Fraction(L.radius)
    eps = Fraction(L.epsilon_target)
    lo, hi = R * (1 - eps), R * (1 + eps)
    for m in L.modes:
        n2 = m.norm2
        if not (lo < 0 or lo * lo < n2) or not n2 < hi * hi:
            return CheckResult(False, {"mode": list(m), "norm": math.sqrt(n2), "radius": L.radius})
    return CheckResult(True)


def _check_distinct_differences(L: LambdaSet) -> CheckResult:
    """Differences of ordered pairs coincide only when a family forces it."""
    uniq = sorted(set(L.modes))
    allowed = set()
    for t in L.tuples:
        a, b, c, d = t.modes
        for p, q in (((a, b), (d, c)), ((a, d), (b, c)), ((b, a), (c, d)), ((d, a), (c, b))):
            allowed.add(frozenset((p, q)))
    groups = defaultdict(list)
    for p, q in itertools.permutations(uniq, 2):
        groups[p - q].append((p, q))
    for diff, pairs in groups.items():
        for u, v in itertools.combinations(pairs, 2):
            if frozenset((u, v)) not in allowed:
                return CheckResult(False, {"difference": list(diff),
                                           "pairs": [[list(u[0]), list(u[1])], [list(v[0]), list(v[1])]]})
    return CheckResult(True)


def _quick_ok(L: LambdaSet) -> bool:
    """Cheap-first, short-circuiting version of the validator for builders."""
    checks = [_check_modes_distinct, _check_tuples_resonant]
    if L.kind is Kind.HARTREE:
        checks.append(_check_distinct_differences)
    else:
        checks += [_check_parity, _check_distinct_norms, _check_annulus]
    checks += [_check_closure, lambda x: CheckResult(all(c.ok for c in _check_uniqueness(x))), _check_faithful]
    return all(chk(L).ok for chk in checks)


def validate_lambda(L: LambdaSet) -> ValidationReport:
    rep = ValidationReport()
    rep.checks["modes_distinct"] = _check_modes_distinct(L)
    rep.checks["tuples_resonant"] = _check_tuples_resonant(L)
    rep.checks["closure"] = _check_closure(L)
    p, c = _check_uniqueness(L)
    rep.checks["parents_unique"] = p
    rep.checks["children_unique"] = c
    rep.checks["faithful"] = _check_faithful(L)
    if L.kind is Kind.HARTREE:
        rep.checks["distinct_differences"] = _check_distinct_differences(L)
    else:
        rep.checks["parity"] = _check_parity(L)
        rep.checks["distinct_norms"] = _check_distinct_norms(L)
        rep.checks["annulus"] = _check_annulus(L)
    return rep


# ---------------------------------------------------------------------------
# builders

DEFAULT_BUDGET = 10_000


def _square_from_parents(p1, p3):
    """Children completing the square whose diagonal is p1 p3."""
    cx, cy = (p1[0] + p3[0]) / 2, (p1[1] + p3[1]) / 2
    vx, vy = (p1[0] - p3[0]) / 2, (p1[1] - p3[1]) / 2
    return (cx - vy, cy + vx), (cx + vy, cy - vx)


def _lcm(values: Iterable[int]) -> int:
    out = 1
    for v in values:
        out = out * v // math.gcd(out, v)
    return out


def build_beam_lambda(N: int, eps: float, seed: int, budget: int = DEFAULT_BUDGET) -> LambdaSet:
    """Beam set in Z^2_odd near N copies of the unit square prototype.

    Parents are dyadic rationals within eps/4 of (1, 0) and (-1, 0); the
    children complete a square on the same diameter, so every coordinate has a
    power-of-two denominator.  The set is then scaled by 2R and shifted by
    (1, 0).
    """
    if N < 2 or not 0 < eps < 1:
        raise ValueError("need N >= 2 and eps in (0, 1)")
    rng = random.Random(seed)
    D = 1 << max(6, math.ceil(math.log2(128.0 / eps)))
    spread = max(1, int(D * eps / 8))
    e = Fraction(eps)
    proto = [(1, 0), (0, 1), (-1, 0), (0, -1)]
    for _ in range(budget):
        quads = []
        for _i in range(N):
            r = [Fraction(rng.randint(-spread, spread), D) for _ in range(4)]
            p1 = (1 + r[0], r[1])
            p3 = (-1 + r[2], r[3])
            c2, c4 = _square_from_parents(p1, p3)
            quad = [p1, c2, p3, c4]
            if any((q[0] - pr[0]) ** 2 + (q[1] - pr[1]) ** 2 >= (e / 4) ** 2 for q, pr in zip(quad, proto)):
                continue
            quads.append(quad)
        if len(quads) < N:
            continue
        den = _lcm(Fraction(v).denominator for q in quads for pt in q for v in pt)
        R = den
        while R * eps <= 10:
            R *= 2
        ints = [[(int(2 * R * x) + 1, int(2 * R * y)) for x, y in q] for q in quads]
        L = make_lambda(ints, Kind.BEAM, float(eps), 2 * R)
        if _quick_ok(L):
            return L
    raise GiveUp(f"beam builder: no valid set after {budget} placements")


def build_hartree_lambda(N: int, seed: int, budget: int = DEFAULT_BUDGET) -> LambdaSet:
    """Hartree set: N lattice squares with small coordinates and generic differences."""
    if N < 2:
        raise ValueError("need N >= 2")
    rng = random.Random(seed)
    box = 4 * N
    vmax = 4 * N
    for _ in range(budget):
        quads = []
        for _i in range(N):
            c = (rng.randint(-box, box), rng.randint(-box, box))
            v = (rng.randint(-vmax, vmax), rng.randint(-vmax, vmax))
            if v[0] * v[0] + v[1] * v[1] < 2:
                continue
            p1 = (c[0] + v[0], c[1] + v[1])
            p3 = (c[0] - v[0], c[1] - v[1])
            c2 = (c[0] - v[1], c[1] + v[0])
            c4 = (c[0] + v[1], c[1] - v[0])
            if (0, 0) in (p1, p3, c2, c4):
                continue
            quads.append([p1, c2, p3, c4])
        if len(quads) < N:
            continue
        L = make_lambda(quads, Kind.HARTREE)
        if _quick_ok(L):
            return L
    raise GiveUp(f"hartree builder: no valid set after {budget} placements")


def _odd_over_odd(x: Fraction) -> bool:
    return x.numerator % 2 == 1 and x.denominator % 2 == 1


def _even_over_odd(x: Fraction) -> bool:
    return x.numerator % 2 == 0 and x.denominator % 2 == 1


def _circle_point(m: int, n: int) -> tuple[Fraction, Fraction]:
    q = m * m + n * n
    return Fraction(m * m - n * n, q), Fraction(2 * m * n, q)


def build_wave_lambda(N: int, eps: float, seed: int, budget: int = DEFAULT_BUDGET) -> LambdaSet:
    """Wave set: parallelograms inscribed in ellipses with one focus at 0.

    Ellipse j has semi-axes (a_j, b_j) and focal half-distance c_j from a
    rational Pythagorean triple with a_j, b_j odd/odd and c_j even/odd.  Its
    rational points (c_j + a_j cos, b_j sin), with cos/sin from (m odd, n
    even), are of the form (odd/odd, even/odd); clearing the odd common
    denominator lands in Z^2_odd.
    """
    if N < 2 or not 0 < eps < 1:
        raise ValueError("need N >= 2 and eps in (0, 1)")
    rng = random.Random(seed)
    Mlo = int(16 / eps) | 1
    for _ in range(budget):
        quads = []
        axes = []
        for _i in range(N):
            M = rng.randrange(Mlo, 2 * Mlo, 2)
            n_e = rng.choice((2, 4))
            cb, sc = _circle_point(M, n_e)
            a = Fraction(1)
            b, c = a * cb, a * sc
            if not (_odd_over_odd(a) and _odd_over_odd(b) and _even_over_odd(c)):
                continue
            if c >= Fraction(eps) / 4:
                continue
            F = (2 * c, Fraction(0))
            pts = []
            for _k in range(2):
                m = rng.randrange(1, 12, 2)
                n = rng.randrange(0, 12, 2)
                co, si = _circle_point(m, n)
                pts.append((c + a * co, b * si))
            p1, c2 = pts
            p3 = (F[0] - p1[0], F[1] - p1[1])
            c4 = (F[0] - c2[0], F[1] - c2[1])
            quads.append([p1, c2, p3, c4])
            axes.append((a, b, c))
        if len(quads) < N:
            continue
        if not all(_odd_over_odd(x) and _even_over_odd(y) for q in quads for x, y in q):
            continue
        R = _lcm(Fraction(v).denominator for q in quads for pt in q for v in pt)
        while R * eps <= 10:
            R *= 3
        ints = [[(int(R * x), int(R * y)) for x, y in q] for q in quads]
        L = make_lambda(ints, Kind.WAVE, float(eps), R)
        if _quick_ok(L):
            return L
    raise GiveUp(f"wave builder: no valid set after {budget} placements")


def build_lambda(kind: Kind | str, N: int, eps: float, seed: int, budget: int = DEFAULT_BUDGET) -> LambdaSet:
    kind = Kind(kind)
    if kind is Kind.BEAM:
        return build_beam_lambda(N, eps, seed, budget)
    if kind is Kind.WAVE:
        return build_wave_lambda(N, eps, seed, budget)
    return build_hartree_lambda(N, seed, budget)
