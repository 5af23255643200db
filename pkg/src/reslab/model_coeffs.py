"""Hamiltonian coefficients of the resonant model and of the reduced toy model.

Conventions used throughout the package:

* On V_Lambda the resonant Hamiltonian is ``lam * sum C'_{j1 j2 j3 j4} a_j1 conj(a_j2) a_j3 conj(a_j4)``
  over ordered resonant quadruples, with ``lam = 3/8`` and
  ``C' = 1/prod|j|^(kappa/2)`` for Wave/Beam, ``lam = 2`` and ``C' = V_{j1-j2}``
  for Hartree.
* The gauge-normalized model is ``Ht = 2 M^2 - H_Res/(lam g)`` in the time
  ``tau = -lam g t``.  In it the matrix entries are
  ``eps A_jj = 1/2 - C'_jjjj/(2g)`` and ``eps A_ij = 1 - Chat_ij/g`` with
  ``Chat_ij = (C'_iijj + C'_ijji)/2``.
* The reduced Hamiltonian is ``-Ht/4`` up to a constant, in the time ``s = 4 tau``.

For Wave/Beam the reduced coefficients are stored with ``epsilon = 32/3``,
which makes ``d_ij = 3 P_i P_j/(32 g)`` hold exactly while all products
``epsilon * x`` keep their physical values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from typing import Callable, Mapping

import numpy as np

from .errors import DegenerateScaling, KindMismatch
from .resonant_set import Kind, LambdaSet, Mode, as_mode

WB_EPSILON = 32.0 / 3.0
_PREC = 50


@dataclass(frozen=True)
class EquationKind:
    """Equation variant plus the Hartree potential V_j = 1 + eps*gamma_j."""

    kind: Kind
    eps: float | None = None
    gamma: Mapping[Mode, float] | None = None
    gamma_fn: Callable[[Mode], float] | None = None
    nonlinearity_sign: int = 1

    @classmethod
    def wave(cls, sign: int = 1) -> "EquationKind":
        return cls(Kind.WAVE, nonlinearity_sign=sign)

    @classmethod
    def beam(cls, sign: int = 1) -> "EquationKind":
        return cls(Kind.BEAM, nonlinearity_sign=sign)

    @classmethod
    def hartree(cls, eps: float, gamma: Mapping | None = None, seed: int | None = 0,
                sign: int = 1) -> "EquationKind":
        if not 0 < eps < 1:
            raise ValueError("Hartree eps must lie in (0, 1)")
        g = None if gamma is None else {as_mode(k): float(v) for k, v in gamma.items()}
        fn = None if seed is None else smooth_gamma(seed)
        return cls(Kind.HARTREE, eps, g, fn, sign)

    @property
    def kappa(self) -> int:
        return self.kind.kappa

    def gamma_of(self, j) -> float:
        j = as_mode(j)
        if self.gamma is not None:
            if j in self.gamma:
                return self.gamma[j]
            if -j in self.gamma:
                return self.gamma[-j]
        if self.gamma_fn is not None:
            return self.gamma_fn(j)
        return 0.0

    def V(self, j) -> float:
        return 1.0 + self.eps * self.gamma_of(j)


def smooth_gamma(seed: int) -> Callable[[Mode], float]:
    """Deterministic even profile with values in [-1, 1]."""
    w = np.random.default_rng(seed).uniform(0.3, 1.7, size=(2, 2))

    def fn(j: Mode) -> float:
        x, y = j
        return float(math.cos(w[0, 0] * x + w[0, 1] * y) * math.cos(w[1, 0] * x + w[1, 1] * y))

    return fn


def hartree_zero(eps: float = 0.1) -> EquationKind:
    """Hartree with gamma identically zero (the integrable limit)."""
    return EquationKind(Kind.HARTREE, eps, {}, None)


def default_equation(kind: Kind | str, eps: float = 0.1, seed: int = 0) -> EquationKind:
    kind = Kind(kind)
    if kind is Kind.WAVE:
        return EquationKind.wave()
    if kind is Kind.BEAM:
        return EquationKind.beam()
    return EquationKind.hartree(eps, seed=seed)


# ---------------------------------------------------------------------------
# quartic coefficients


def _momentum(js, sig) -> bool:
    return sum(s * j[0] for s, j in zip(sig, js)) == 0 and sum(s * j[1] for s, j in zip(sig, js)) == 0


def quartic_coefficient(j1, j2, j3, j4, sigma, eq: EquationKind) -> float:
    """Coefficient of a^{s1}_{j1} a^{s2}_{j2} a^{s3}_{j3} a^{s4}_{j4} in the quartic Hamiltonian."""
    js = [as_mode(j) for j in (j1, j2, j3, j4)]
    sig = tuple(int(s) for s in sigma)
    if not _momentum(js, sig):
        return 0.0
    if eq.kind is Kind.HARTREE:
        if sig in ((1, -1, 1, -1), (-1, 1, -1, 1)):
            return eq.V(js[0] - js[1])
        return 0.0
    k = eq.kappa
    prod = 1.0
    for j in js:
        n2 = j.norm2
        if n2 == 0:
            return 0.0
        prod *= n2 ** (k / 4.0)
    return 1.0 / (16.0 * prod)


def resonant_scale(kind: Kind) -> float:
    """The prefactor lam of the restricted resonant Hamiltonian."""
    return 2.0 if Kind(kind) is Kind.HARTREE else 3.0 / 8.0


def restricted_coefficient(js, eq: EquationKind) -> float:
    """C' of an ordered (+-+-) quadruple in the restricted Hamiltonian."""
    if eq.kind is Kind.HARTREE:
        return eq.V(as_mode(js[0]) - as_mode(js[1]))
    return 16.0 * quartic_coefficient(*js, (1, -1, 1, -1), eq)


# ---------------------------------------------------------------------------
# gauge and matrix A


def _dec_norm_pow(m: Mode, kappa: int) -> Decimal:
    n2 = Decimal(m.norm2)
    return n2 if kappa == 2 else n2.sqrt()


def _gauge_decimal(L: LambdaSet) -> Decimal:
    if L.kind is Kind.HARTREE:
        return Decimal(1)
    if L.radius is None:
        raise DegenerateScaling("Wave/Beam set needs its radius for the gauge constant")
    R = Decimal(L.radius)
    return 1 / (R * R) if L.kind is Kind.WAVE else 1 / (R ** 4)


def _epsA_decimal(L: LambdaSet, eq: EquationKind):
    """eps*A as a nested list of Decimals, plus the tuple couplings C_h."""
    modes = L.modes
    n = len(modes)
    g = _gauge_decimal(L)
    one, half = Decimal(1), Decimal("0.5")
    epsA = [[Decimal(0)] * n for _ in range(n)]
    Ch = []
    if eq.kind is Kind.HARTREE:
        V = lambda j: one + Decimal(eq.eps) * Decimal(eq.gamma_of(j))
        for p in range(n):
            for q in range(n):
                if p == q:
                    epsA[p][q] = half - V(Mode(0, 0)) / 2
                else:
                    epsA[p][q] = one - (V(Mode(0, 0)) + V(modes[p] - modes[q])) / 2
        for t in L.tuples:
            a, b, c, d = t.modes
            Ch.append((V(a - b) + V(a - d) + V(c - b) + V(c - d)) / 4)
    else:
        x = [_dec_norm_pow(m, L.kind.kappa) for m in modes]
        for p in range(n):
            for q in range(n):
                if p == q:
                    epsA[p][q] = half - 1 / (2 * g * x[p] * x[p])
                else:
                    epsA[p][q] = one - 1 / (g * x[p] * x[q])
        for i in range(L.N):
            xs = x[4 * i:4 * i + 4]
            Ch.append(1 / (g * (xs[0] * xs[1] * xs[2] * xs[3]).sqrt()))
    return epsA, Ch, g


def gauge_params(L: LambdaSet, eq: EquationKind | None = None) -> tuple[float, float]:
    """Return (g, eps_effective)."""
    eq = eq or default_equation(L.kind)
    _check_kind(L, eq)
    with localcontext() as ctx:
        ctx.prec = _PREC
        if L.kind is Kind.HARTREE:
            return 1.0, float(eq.eps)
        epsA, _, g = _epsA_decimal(L, eq)
        eff = max(abs(v) for row in epsA for v in row)
        return float(g), float(eff)


def _check_kind(L: LambdaSet, eq: EquationKind) -> None:
    if L.kind is not eq.kind:
        raise KindMismatch(f"set is {L.kind.value}, equation is {eq.kind.value}")


# ---------------------------------------------------------------------------
# reduced coefficients


@dataclass
class ReducedCoeffs:
    """Coefficients of the reduced toy model

    H = sum_j [K_j(1-K_j)(1+2cos psi_j) + eps(a_j K_j + b_j K_j^2 + c_j K_j(1-K_j)cos psi_j)]
        + eps sum_{i<j} d_ij K_i K_j
    """

    epsilon: float
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    A: np.ndarray | None = None
    C_h: np.ndarray | None = None
    g: float = 1.0
    kappa: int = 2
    kind: str = "synthetic"
    lam: float = 1.0
    P: np.ndarray | None = None
    eps_effective: float | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        self.d = np.asarray(self.d, dtype=float)
        if self.d.shape != (self.N, self.N):
            raise ValueError("d must be an N x N matrix")
        if not np.array_equal(self.d, self.d.T):
            raise ValueError("d must be symmetric")

    @property
    def N(self) -> int:
        return len(self.a)

    @property
    def time_scale(self) -> float:
        """Signed factor converting reduced time s into original PDE time."""
        return -1.0 / (4.0 * self.lam * self.g)

    @classmethod
    def synthetic(cls, epsilon: float, a, b, c, d) -> "ReducedCoeffs":
        """Toy-model coefficients given directly (d as N x N or as the scalar d12 for N = 2)."""
        a = np.asarray(a, dtype=float)
        N = len(a)
        d = np.asarray(d, dtype=float)
        if d.ndim == 0:
            d = np.array([[0.0, float(d)], [float(d), 0.0]])
        d = d.copy()
        np.fill_diagonal(d, 0.0)
        return cls(epsilon, a, b, c, d)

    def with_epsilon(self, epsilon: float) -> "ReducedCoeffs":
        out = ReducedCoeffs.synthetic(epsilon, self.a, self.b, self.c, self.d)
        return out

    def to_dict(self) -> dict:
        def arr(x):
            return None if x is None else np.asarray(x).tolist()

        return {
            "epsilon": self.epsilon, "a": arr(self.a), "b": arr(self.b), "c": arr(self.c),
            "d": arr(self.d), "A": arr(self.A), "C_h": arr(self.C_h), "g": self.g,
            "kappa": self.kappa, "kind": self.kind, "lam": self.lam, "P": arr(self.P),
            "eps_effective": self.eps_effective,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "ReducedCoeffs":
        opt = lambda k: None if data.get(k) is None else np.asarray(data[k], dtype=float)
        return cls(data["epsilon"], data["a"], data["b"], data["c"], data["d"], opt("A"), opt("C_h"),
                   data.get("g", 1.0), data.get("kappa", 2), data.get("kind", "synthetic"),
                   data.get("lam", 1.0), opt("P"), data.get("eps_effective"))


def _reduced_from_epsA(epsA, N):
    """a, b, d in units of eps from the (already eps-scaled) matrix."""
    s = [1, -1, 1, -1]

    def blk(i, j, n, m):
        return epsA[4 * i + n][4 * j + m]

    a, b = [], []
    d = [[Decimal(0)] * N for _ in range(N)]
    for i in range(N):
        tot = Decimal(0)
        for j in range(N):
            for n in range(4):
                for m in (1, 3):
                    tot += s[n] * blk(i, j, n, m)
        a.append(-tot)
        q = sum(s[n] * s[m] * blk(i, i, n, m) for n in range(4) for m in range(4))
        b.append(-q / 2)
    for i in range(N):
        for j in range(i + 1, N):
            q = sum(s[n] * s[m] * blk(i, j, n, m) for n in range(4) for m in range(4))
            d[i][j] = d[j][i] = -q
    return a, b, d


def reduced_coeffs(L: LambdaSet, eq: EquationKind | None = None) -> ReducedCoeffs:
    eq = eq or default_equation(L.kind)
    _check_kind(L, eq)
    N = L.N
    with localcontext() as ctx:
        ctx.prec = _PREC
        epsA, Ch, g = _epsA_decimal(L, eq)
        if eq.kind is Kind.HARTREE:
            eps = Decimal(eq.eps)
            eff = float(eq.eps)
        else:
            eff = float(max(abs(v) for row in epsA for v in row))
            if eff == 0.0:
                raise DegenerateScaling("all matrix entries vanish: no perturbation parameter")
            eps = Decimal(32) / Decimal(3)
        a, b, d = _reduced_from_epsA(epsA, N)
        A = np.array([[float(v / eps) for v in row] for row in epsA])
        A = (A + A.T) / 2
        out = ReducedCoeffs(
            epsilon=float(eps),
            a=[float(v / eps) for v in a],
            b=[float(v / eps) for v in b],
            c=[float(2 * (C - 1) / eps) for C in Ch],
            d=np.array([[float(v / eps) for v in row] for row in d]),
            A=A,
            C_h=np.array([float(C) for C in Ch]),
            g=float(g),
            kappa=eq.kappa,
            kind=eq.kind.value,
            lam=resonant_scale(eq.kind),
            eps_effective=eff,
        )
        if eq.kind is not Kind.HARTREE:
            out.P = np.array(p_factors(L))
        return out


def p_factors(L: LambdaSet, normalized: bool = False) -> list[float]:
    """Per-tuple factors P_r = D12 (x1 x2 - x3 x4)/(x1 x2 x3 x4), x = |n|^kappa.

    With ``normalized=True`` the factors are divided by sqrt(g), so that
    d_ij = 3 Phat_i Phat_j / 32.
    """
    if L.kind is Kind.HARTREE:
        raise KindMismatch("the product formula exists only for Wave/Beam")
    with localcontext() as ctx:
        ctx.prec = _PREC
        return [float(p) for p in _p_decimal(L, normalized)]


def _p_decimal(L: LambdaSet, normalized: bool):
    g = _gauge_decimal(L)
    out = []
    for t in L.tuples:
        x1, x2, x3, x4 = (_dec_norm_pow(m, L.kind.kappa) for m in t.modes)
        p = (x1 - x2) * (x1 * x2 - x3 * x4) / (x1 * x2 * x3 * x4)
        out.append(p / g.sqrt() if normalized else p)
    return out


def d12_closed_form(L: LambdaSet, i: int = 0, j: int = 1) -> tuple[float, list[float]]:
    """d_ij from the product formula, and the raw factors P_r."""
    if L.kind is Kind.HARTREE:
        raise KindMismatch("no closed form for Hartree; use reduced_coeffs")
    with localcontext() as ctx:
        ctx.prec = _PREC
        Ph = _p_decimal(L, True)
        d = Decimal(3) / Decimal(32) * Ph[i] * Ph[j]
        return float(d), [float(p) for p in _p_decimal(L, False)]


# ---------------------------------------------------------------------------
# matrix D and nondegeneracy


def D_matrix(coeffs: ReducedCoeffs) -> np.ndarray:
    """(N-1)x(N-1) matrix: diagonal d_iN + sum_{j != i, j < N} d_ij, off-diagonal -d_ij."""
    N = coeffs.N
    d = coeffs.d
    D = np.zeros((N - 1, N - 1))
    for i in range(N - 1):
        D[i, i] = d[i, N - 1] + sum(d[i, j] for j in range(N - 1) if j != i)
        for j in range(N - 1):
            if j != i:
                D[i, j] = -d[i, j]
    return D


def factored_det(P_hat) -> float:
    """(3/32)^(N-1) prod P (sum P)^(N-2) for normalized factors."""
    P_hat = np.asarray(P_hat, dtype=float)
    N = len(P_hat)
    return (3.0 / 32.0) ** (N - 1) * float(np.prod(P_hat)) * float(np.sum(P_hat)) ** (N - 2)


def det_D(coeffs: ReducedCoeffs, L: LambdaSet | None = None) -> tuple[float, float | None]:
    """Determinant of D directly and, for Wave/Beam, from the product formula."""
    direct = float(np.linalg.det(D_matrix(coeffs))) if coeffs.N > 1 else 0.0
    factored = None
    if L is not None and L.kind is not Kind.HARTREE:
        factored = factored_det(p_factors(L, normalized=True))
    elif coeffs.P is not None and coeffs.kind in ("wave", "beam"):
        factored = factored_det(np.asarray(coeffs.P) / math.sqrt(coeffs.g))
    return direct, factored


# Coefficients are evaluated with 50 significant digits, so rounding noise sits
# near 1e-45 while genuine Wave/Beam couplings can be as small as 1e-15.
NONZERO_TOL = 1e-24


def nondegeneracy_report(coeffs: ReducedCoeffs, L: LambdaSet | None = None) -> dict:
    a, b, d = coeffs.a, coeffs.b, coeffs.d
    d12 = float(d[0, 1])
    direct, factored = det_D(coeffs, L)
    s1, s2 = float(a[0] + b[0]), float(a[1] + b[1])
    resid = s1 + s2 + d12
    return {
        "d12": d12,
        "d12_nonzero": abs(d12) > NONZERO_TOL,
        "energy_matching_residual": resid,
        "energy_matching": abs(resid) < 1e-9,
        "same_sign_product": s1 * s2,
        "same_sign": s1 * s2 > 0,
        "det_D": direct,
        "det_D_factored": factored,
        "det_D_nonzero": abs(direct) > NONZERO_TOL ** (coeffs.N - 1),
    }


def solve_gamma_energy_matching(L: LambdaSet, eq: EquationKind, free: Mode) -> EquationKind:
    """Adjust one gamma value (at difference ``free``) so that a1+b1+a2+b2+d12 = 0.

    The residual is affine in each gamma, so two evaluations determine it.
    Differences inside one tuple cancel out of a_i + b_i; pick a difference
    between modes of different tuples.
    """
    free = as_mode(free)

    def resid(val: float) -> float:
        g = dict(eq.gamma or {})
        for j in _all_differences(L):
            g.setdefault(j, eq.gamma_of(j))
        g[free] = val
        g[-free] = val
        c = reduced_coeffs(L, EquationKind(Kind.HARTREE, eq.eps, g, None))
        return float(c.a[0] + c.b[0] + c.a[1] + c.b[1] + c.d[0, 1])

    r0, r1 = resid(0.0), resid(1.0)
    if r1 == r0:
        raise DegenerateScaling("energy matching does not depend on the chosen gamma")
    val = -r0 / (r1 - r0)
    g = dict(eq.gamma or {})
    for j in _all_differences(L):
        g.setdefault(j, eq.gamma_of(j))
    g[free] = val
    g[-free] = val
    return EquationKind(Kind.HARTREE, eq.eps, g, None)


def _all_differences(L: LambdaSet) -> set[Mode]:
    ms = L.modes
    return {p - q for p in ms for q in ms}
