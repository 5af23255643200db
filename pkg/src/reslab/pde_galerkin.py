"""Finite-mode Hamiltonians: the quartic PDE Hamiltonian on a Galerkin set, the
gauge-normalized resonant model on V_Lambda, the weak Birkhoff generator and
the scaling experiment.

Monomials are written a^{s1}_{j1} a^{s2}_{j2} a^{s3}_{j3} a^{s4}_{j4} with
a^+_j = a_j, a^-_j = conj(a_j) and momentum sum s_i j_i = 0.  The flow is
da_j/dt = -i dH/d conj(a_j).
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp

from .errors import KindMismatch, StepFailure
from .model_coeffs import EquationKind, ReducedCoeffs, default_equation
from .resonant_set import Kind, LambdaSet, Mode, as_mode, frequency_sum_is_zero

BNF_NORM_WARN = 0.3


@dataclass
class FourierState:
    amplitudes: dict
    rho: float = 0.0

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")
        self.amplitudes = {as_mode(k): complex(v) for k, v in self.amplitudes.items()}

    def vector(self, modes: Sequence[Mode]) -> np.ndarray:
        return np.array([self.amplitudes.get(m, 0j) for m in modes], dtype=complex)

    @classmethod
    def from_vector(cls, modes: Sequence[Mode], v, rho: float = 0.0) -> "FourierState":
        return cls({m: complex(x) for m, x in zip(modes, v)}, rho)

    def __sub__(self, other: "FourierState") -> "FourierState":
        keys = set(self.amplitudes) | set(other.amplitudes)
        return FourierState({k: self.amplitudes.get(k, 0j) - other.amplitudes.get(k, 0j) for k in keys},
                            self.rho)

    def scaled(self, c: complex) -> "FourierState":
        return FourierState({k: c * v for k, v in self.amplitudes.items()}, self.rho)


def w_rho_norm(state: FourierState, rho: float | None = None) -> float:
    r = state.rho if rho is None else rho
    return float(sum(abs(v) * math.exp(r * math.hypot(*k)) for k, v in state.amplitudes.items()))


def _weights(modes: Sequence[Mode], rho: float) -> np.ndarray:
    return np.array([math.exp(rho * math.hypot(*m)) for m in modes])


def omega(j: Mode, kind: Kind) -> float:
    n2 = j[0] * j[0] + j[1] * j[1]
    return float(n2) if Kind(kind).kappa == 2 else math.sqrt(n2)


# ---------------------------------------------------------------------------
# Galerkin sets


@dataclass
class GalerkinSet:
    modes: list
    kind: Kind
    lam: LambdaSet | None = None
    closure_level: int = 1

    def __post_init__(self):
        self.kind = Kind(self.kind)
        self.modes = [as_mode(m) for m in self.modes]
        if len(set(self.modes)) != len(self.modes):
            raise ValueError("duplicate modes in Galerkin set")
        if self.kind is not Kind.HARTREE:
            bad = [m for m in self.modes if m[0] % 2 == 0 or m[1] % 2 == 0]
            if bad:
                raise ValueError(f"Wave/Beam modes must lie in Z^2_odd, got {bad[:3]}")
        self.index = {m: i for i, m in enumerate(self.modes)}

    @property
    def n(self) -> int:
        return len(self.modes)

    def inside(self) -> np.ndarray:
        if self.lam is None:
            return np.ones(self.n, dtype=bool)
        L = set(self.lam.modes)
        return np.array([m in L for m in self.modes])


def _patterns(kind: Kind):
    if kind is Kind.HARTREE:
        return [(1, -1, 1, -1), (-1, 1, -1, 1)]
    return list(itertools.product((1, -1), repeat=4))


def galerkin_set(L: LambdaSet, closure_level: int = 1, symmetric: bool = True) -> GalerkinSet:
    """Lambda plus (level 1) the fourth modes of momentum-preserving quadruples with three modes in Lambda."""
    modes = list(L.modes)
    seen = set(modes)
    if closure_level >= 1:
        for sig in _patterns(L.kind):
            for j1, j2, j3 in itertools.product(L.modes, repeat=3):
                s = sig[0] * np.array(j1) + sig[1] * np.array(j2) + sig[2] * np.array(j3)
                j4 = Mode(int(-sig[3] * s[0]), int(-sig[3] * s[1]))
                if j4 == (0, 0) and L.kind is not Kind.HARTREE:
                    continue
                if j4 not in seen:
                    seen.add(j4)
                    modes.append(j4)
    if symmetric:
        for m in list(modes):
            if -m not in seen:
                seen.add(-m)
                modes.append(-m)
    return GalerkinSet(modes, L.kind, L, closure_level)


# ---------------------------------------------------------------------------
# monomial tables


@dataclass
class MonomialTable:
    """Quartic polynomial sum coef * prod z[idx] with z = (a, conj a)."""

    n: int
    idx: np.ndarray
    coef: np.ndarray
    signs: np.ndarray

    def __len__(self) -> int:
        return len(self.coef)

    def _compiled(self):
        """Rows merged by index multiset plus sparse scatter maps; tables are treated as immutable."""
        c = self.__dict__.get("_cache")
        if c is None:
            rows = np.sort(self.idx, axis=1)
            u, inv = np.unique(rows, axis=0, return_inverse=True)
            coef = np.zeros(len(u), dtype=complex)
            np.add.at(coef, inv.ravel(), self.coef)
            keep = coef != 0
            u, coef = u[keep], coef[keep]
            mats = []
            for p in range(4):
                cj = np.nonzero(u[:, p] >= self.n)[0]
                mats.append(sparse.csr_matrix((np.ones(len(cj)), (u[cj, p] - self.n, cj)), shape=(self.n, len(u))))
            c = self.__dict__["_cache"] = (u, coef, mats)
        return c

    def value(self, a: np.ndarray) -> complex:
        if len(self.coef) == 0:
            return 0j
        u, coef, _ = self._compiled()
        z = np.concatenate([a, a.conj()])
        return complex(np.sum(coef * np.prod(z[u], axis=1)))

    def dbar(self, a: np.ndarray) -> np.ndarray:
        """d/d conj(a) of the polynomial, treating a and conj(a) as independent."""
        if len(self.coef) == 0:
            return np.zeros(self.n, dtype=complex)
        u, coef, mats = self._compiled()
        z = np.concatenate([a, a.conj()])
        f = z[u]
        f01, f23 = f[:, 0] * f[:, 1], f[:, 2] * f[:, 3]
        others = (f[:, 1] * f23, f[:, 0] * f23, f01 * f[:, 3], f01 * f[:, 2])
        out = np.zeros(self.n, dtype=complex)
        for p in range(4):
            out += mats[p] @ (coef * others[p])
        return out


def _coef_array(eq: EquationKind, J: np.ndarray, sig) -> np.ndarray:
    """Coefficient for each row of J (M x 4 x 2 integer modes) with pattern sig."""
    if eq.kind is Kind.HARTREE:
        d = J[:, 0, :] - J[:, 1, :]
        return np.array([eq.V(Mode(int(x), int(y))) for x, y in d])
    k = eq.kappa
    n2 = (J.astype(float) ** 2).sum(axis=2)
    return 1.0 / (16.0 * np.prod(n2 ** (k / 4.0), axis=1))


def monomial_table(gset: GalerkinSet, eq: EquationKind, max_outside: int | None = None,
                   resonant_only: bool = False, coef_fn: Callable | None = None) -> MonomialTable:
    """Enumerate momentum-preserving quartic monomials with all modes in gset.

    max_outside limits the number of indices outside Lambda; resonant_only keeps
    exact 4-resonances.  coef_fn(J, sig, C) may replace the coefficients.
    """
    if gset.kind is not eq.kind:
        raise KindMismatch(f"Galerkin set is {gset.kind.value}, equation is {eq.kind.value}")
    G = np.array(gset.modes, dtype=np.int64)
    n = len(G)
    inside = gset.inside()
    keys = {m: i for i, m in enumerate(gset.modes)}
    idx_all, coef_all, sig_all = [], [], []
    I = np.indices((n, n, n)).reshape(3, -1).T
    for sig in _patterns(gset.kind):
        s = np.array(sig)
        tot = s[0] * G[I[:, 0]] + s[1] * G[I[:, 1]] + s[2] * G[I[:, 2]]
        j4 = -s[3] * tot
        i4 = np.array([keys.get((int(x), int(y)), -1) for x, y in j4])
        ok = i4 >= 0
        rows = np.column_stack([I[ok], i4[ok]])
        if max_outside is not None:
            out_cnt = (~inside[rows]).sum(axis=1)
            rows = rows[out_cnt <= max_outside]
        if len(rows) == 0:
            continue
        if resonant_only:
            w = np.array([omega(m, gset.kind) for m in gset.modes])
            fs = (s[None, :] * w[rows]).sum(axis=1)
            cand = np.abs(fs) <= 1e-9 * max(1.0, float(np.max(w)))
            keep = np.zeros(len(rows), dtype=bool)
            for r in np.nonzero(cand)[0]:
                ms = [gset.modes[q] for q in rows[r]]
                keep[r] = frequency_sum_is_zero(sig, ms, gset.kind.kappa)
            rows = rows[keep]
            if len(rows) == 0:
                continue
        J = G[rows]
        C = _coef_array(eq, J, sig)
        if coef_fn is not None:
            C = coef_fn(J, sig, C)
        zidx = rows + np.where(s < 0, n, 0)[None, :]
        idx_all.append(zidx)
        coef_all.append(np.asarray(C, dtype=complex))
        sig_all.append(np.tile(s, (len(rows), 1)))
    if not idx_all:
        return MonomialTable(n, np.zeros((0, 4), dtype=int), np.zeros(0, dtype=complex), np.zeros((0, 4), dtype=int))
    return MonomialTable(n, np.vstack(idx_all), np.concatenate(coef_all), np.vstack(sig_all))


# ---------------------------------------------------------------------------
# quartic Hamiltonian systems


class GalerkinSystem:
    """H = sum omega |a|^2 + quartic part on a Galerkin set."""

    def __init__(self, gset: GalerkinSet, eq: EquationKind | None = None, max_outside: int | None = None,
                 resonant_only: bool = False, quadratic: bool = True, quartic: bool = True):
        self.gset = gset
        self.eq = eq or default_equation(gset.kind)
        self.modes = gset.modes
        self.omega = np.array([omega(m, gset.kind) for m in self.modes]) if quadratic else np.zeros(gset.n)
        self.table = (monomial_table(gset, self.eq, max_outside, resonant_only) if quartic
                      else MonomialTable(gset.n, np.zeros((0, 4), dtype=int), np.zeros(0, dtype=complex),
                                         np.zeros((0, 4), dtype=int)))
        self.J = np.array(self.modes, dtype=float)

    def field(self, a: np.ndarray) -> np.ndarray:
        return -1j * (self.omega * a + self.table.dbar(a))

    def rotating_field(self, t: float, b: np.ndarray) -> np.ndarray:
        """Field of the interaction-picture variables b = exp(i omega t) a."""
        ph = np.exp(1j * self.omega * t)
        a = b / ph
        return -1j * ph * self.table.dbar(a)

    def energy(self, a: np.ndarray) -> float:
        return float(np.sum(self.omega * np.abs(a) ** 2) + self.table.value(a).real)

    def mass(self, a: np.ndarray) -> float:
        return float(np.sum(np.abs(a) ** 2))

    def momentum(self, a: np.ndarray) -> np.ndarray:
        return (np.abs(a) ** 2) @ self.J

    def integrate(self, a0, t_span, t_eval=None, rotating: bool = False, rtol: float = 1e-11,
                  atol: float = 1e-13, method: str = "DOP853"):
        a0 = a0.vector(self.modes) if isinstance(a0, FourierState) else np.asarray(a0, dtype=complex)
        n = len(a0)

        if rotating:
            rhs = lambda t, y: _pack(self.rotating_field(t, y[:n] + 1j * y[n:]))
        else:
            rhs = lambda t, y: _pack(self.field(y[:n] + 1j * y[n:]))
        sol = solve_ivp(rhs, t_span, _pack(a0), method=method, rtol=rtol, atol=atol,
                        t_eval=t_eval, dense_output=True)
        if sol.status < 0:
            raise StepFailure(sol.message, t=float(sol.t[-1]), state=sol.y[:, -1])
        return GalerkinTrajectory(self.modes, sol, n)


def _pack(v: np.ndarray) -> np.ndarray:
    return np.concatenate([v.real, v.imag])


@dataclass
class GalerkinTrajectory:
    modes: list
    sol: object
    n: int

    @property
    def t(self) -> np.ndarray:
        return self.sol.t

    def __call__(self, t) -> np.ndarray:
        y = self.sol.sol(t)
        return y[:self.n] + 1j * y[self.n:]

    def values(self) -> np.ndarray:
        return (self.sol.y[:self.n] + 1j * self.sol.y[self.n:]).T

    def to_csv(self, path, energy: Callable | None = None) -> None:
        vals = self.values()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"abs2_{m[0]}_{m[1]}" for m in self.modes] + ["H", "M"])
            for t, a in zip(self.t, vals):
                H = energy(a) if energy else float("nan")
                w.writerow([repr(float(t))] + [repr(float(abs(x) ** 2)) for x in a]
                           + [repr(H), repr(float(np.sum(np.abs(a) ** 2)))])


def full_field(state: FourierState, eq: EquationKind, gset: GalerkinSet,
               max_outside: int | None = None) -> FourierState:
    """Hamiltonian vector field of H2 + H4 truncated to monomials with all modes in gset."""
    extra = set(state.amplitudes) - set(gset.modes)
    if extra:
        raise ValueError(f"state support not contained in the Galerkin set: {sorted(extra)[:3]}")
    sysm = GalerkinSystem(gset, eq, max_outside)
    return FourierState.from_vector(gset.modes, sysm.field(state.vector(gset.modes)), state.rho)


# ---------------------------------------------------------------------------
# gauge-normalized resonant model on V_Lambda


class ResonantModel:
    """Ht = sum|alpha|^4 + 2 sum eps A_ij |alpha_i|^2 |alpha_j|^2 - 8 sum C_h Re(alpha1 conj alpha2 alpha3 conj alpha4)."""

    def __init__(self, L: LambdaSet, coeffs: ReducedCoeffs):
        if coeffs.A is None or coeffs.C_h is None:
            raise ValueError("coefficients lack the matrix A / couplings C_h (use reduced_coeffs)")
        self.L = L
        self.modes = L.modes
        self.epsA = coeffs.epsilon * np.asarray(coeffs.A)
        self.C = np.asarray(coeffs.C_h)
        self.N = L.N

    def field(self, al: np.ndarray) -> np.ndarray:
        I = np.abs(al) ** 2
        out = (2 * I + 4 * self.epsA @ I) * al
        q = al.reshape(self.N, 4)
        cub = np.empty_like(q)
        # partner term d/d conj(alpha_k) of -4 C (P + conj P)
        cub[:, 0] = q[:, 1] * q[:, 2].conj() * q[:, 3]
        cub[:, 2] = q[:, 1] * q[:, 0].conj() * q[:, 3]
        cub[:, 1] = q[:, 0] * q[:, 3].conj() * q[:, 2]
        cub[:, 3] = q[:, 0] * q[:, 1].conj() * q[:, 2]
        out = out - 4 * (self.C[:, None] * cub).reshape(-1)
        return -1j * out

    def energy(self, al: np.ndarray) -> float:
        I = np.abs(al) ** 2
        q = al.reshape(self.N, 4)
        P = q[:, 0] * q[:, 1].conj() * q[:, 2] * q[:, 3].conj()
        return float(np.sum(I * I) + 2 * I @ self.epsA @ I - 8 * np.sum(self.C * P.real))

    def mass(self, al: np.ndarray) -> float:
        return float(np.sum(np.abs(al) ** 2))

    def integrals(self, al: np.ndarray) -> np.ndarray:
        """S13-, S24-, S34+ per tuple."""
        I = (np.abs(al) ** 2).reshape(self.N, 4)
        return np.column_stack([I[:, 0] - I[:, 2], I[:, 1] - I[:, 3], I[:, 2] + I[:, 3]]).reshape(-1)

    def all_integrals(self, al: np.ndarray) -> np.ndarray:
        """Every S^(k,+-)_{ij} of the family (pairs of opposite parity sum, equal parity difference)."""
        I = (np.abs(al) ** 2).reshape(self.N, 4)
        out = []
        for i, j in itertools.combinations(range(4), 2):
            out.append(I[:, i] + I[:, j] if (i + j) % 2 == 1 else I[:, i] - I[:, j])
        return np.concatenate(out)

    def integrate(self, alpha0, t_span, t_eval=None, rtol: float = 1e-12, atol: float = 1e-14,
                  method: str = "DOP853") -> GalerkinTrajectory:
        a0 = alpha0.vector(self.modes) if isinstance(alpha0, FourierState) else np.asarray(alpha0, dtype=complex)
        n = len(a0)
        rhs = lambda t, y: _pack(self.field(y[:n] + 1j * y[n:]))
        sol = solve_ivp(rhs, t_span, _pack(a0), method=method, rtol=rtol, atol=atol, t_eval=t_eval,
                        dense_output=True)
        if sol.status < 0:
            raise StepFailure(sol.message, t=float(sol.t[-1]), state=sol.y[:, -1])
        return GalerkinTrajectory(self.modes, sol, n)


def resonant_field(alpha: FourierState | Mapping, L: LambdaSet, coeffs: ReducedCoeffs) -> FourierState:
    amps = alpha.amplitudes if isinstance(alpha, FourierState) else {as_mode(k): v for k, v in alpha.items()}
    extra = set(amps) - set(L.modes)
    if extra:
        raise ValueError("resonant field is defined on V_Lambda only")
    m = ResonantModel(L, coeffs)
    v = np.array([amps.get(k, 0j) for k in L.modes], dtype=complex)
    return FourierState.from_vector(L.modes, m.field(v))


# ---------------------------------------------------------------------------
# weak Birkhoff normal form


@dataclass
class BNFGenerator:
    gset: GalerkinSet
    table: MonomialTable
    divisors: np.ndarray

    @property
    def monomials(self) -> list:
        out = []
        for row, s, c in zip(self.table.idx, self.table.signs, self.table.coef):
            ms = [self.gset.modes[r % self.gset.n] for r in row]
            out.append((tuple(ms), tuple(int(x) for x in s), complex(c)))
        return out

    def min_divisor(self) -> float:
        nz = np.abs(self.divisors[self.divisors != 0])
        return float(nz.min()) if len(nz) else float("inf")


def bnf_generator(L: LambdaSet, eq: EquationKind | None = None, gset: GalerkinSet | None = None) -> BNFGenerator:
    """F = sum -i C / (sum s omega) over monomials with at most one index outside Lambda; 0 on resonances."""
    eq = eq or default_equation(L.kind)
    gset = gset or galerkin_set(L, 1)
    w = np.array([omega(m, gset.kind) for m in gset.modes])
    divs = []

    def fcoef(J, sig, C):
        s = np.array(sig)
        rows = [[gset.index[(int(x), int(y))] for x, y in J[r]] for r in range(len(J))]
        dv = (s[None, :] * w[np.array(rows)]).sum(axis=1)
        for r in range(len(J)):
            ms = [gset.modes[q] for q in rows[r]]
            if abs(dv[r]) <= 1e-9 * max(1.0, float(w.max())) and frequency_sum_is_zero(sig, ms, gset.kind.kappa):
                dv[r] = 0.0
        divs.append(dv)
        F = np.zeros(len(J), dtype=complex)
        nz = dv != 0
        F[nz] = -1j * C[nz] / dv[nz]
        return F

    table = monomial_table(gset, eq, max_outside=1, coef_fn=fcoef)
    return BNFGenerator(gset, table, np.concatenate(divs) if divs else np.zeros(0))


def bnf_transform(state: FourierState, gen: BNFGenerator, direction: int = 1,
                  rtol: float = 1e-12, atol: float = 1e-15) -> FourierState:
    """Time-(+-1) flow of the generator field."""
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    if w_rho_norm(state) > BNF_NORM_WARN:
        warnings.warn("state norm exceeds the near-identity regime of the normal form", stacklevel=2)
    modes = gen.gset.modes
    a0 = state.vector(modes)
    n = len(a0)
    rhs = lambda t, y: _pack(-1j * gen.table.dbar(y[:n] + 1j * y[n:]))
    sol = solve_ivp(rhs, (0.0, float(direction)), _pack(a0), method="DOP853", rtol=rtol, atol=atol)
    if sol.status < 0:
        raise StepFailure(sol.message, t=float(sol.t[-1]), state=sol.y[:, -1])
    y = sol.y[:, -1]
    return FourierState.from_vector(modes, y[:n] + 1j * y[n:], state.rho)


# ---------------------------------------------------------------------------
# scaling and the approximation experiment


@dataclass
class ScaledTrajectory:
    """t -> scale * base(time_factor * t)."""

    base: Callable
    t_span: tuple
    scale: float = 1.0
    time_factor: float = 1.0

    def __call__(self, t):
        return self.scale * self.base(self.time_factor * np.asarray(t, dtype=float))


def rescale(traj, delta: float) -> ScaledTrajectory:
    """r^delta(t) = delta r(delta^2 t)."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    if isinstance(traj, ScaledTrajectory):
        base, sc, tf, span = traj.base, traj.scale, traj.time_factor, traj.t_span
    else:
        base, sc, tf = traj, 1.0, 1.0
        span = (float(traj.t[0]), float(traj.t[-1]))
    d2 = delta * delta
    return ScaledTrajectory(base, (span[0] / d2, span[1] / d2), sc * delta, tf * d2)


@dataclass
class ApproximationReport:
    deltas: list
    sup_errors: list
    fitted_exponent: float
    T0: float
    rho: float
    kind: str
    n_modes: int
    zero_perturbation: bool = False
    initial_errors: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def fit_exponent(deltas, errors) -> float:
    x = np.log(np.asarray(deltas, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def approximation_experiment(r0: FourierState | Mapping, deltas: Sequence[float], T0: float,
                             L: LambdaSet, eq: EquationKind | None = None, gset: GalerkinSet | None = None,
                             rho: float = 0.1, n_samples: int = 2001, zero_perturbation: bool = False,
                             rtol: float = 1e-11, normalize: bool = True) -> ApproximationReport:
    """Compare the rescaled resonant trajectory with the truncated full system over [0, T0/delta^2].

    The full side is H2 + H4 restricted to monomials with at most one index outside
    Lambda, integrated in the interaction picture so both sides use the same variables.
    With normalize, r0 is scaled to unit rho-norm so that u(0) lies on the sphere of radius delta.
    """
    if not 0 < T0 <= 20:
        raise ValueError("T0 must lie in (0, 20]")
    eq = eq or default_equation(L.kind)
    gset = gset or galerkin_set(L, 1)
    amps = r0.amplitudes if isinstance(r0, FourierState) else {as_mode(k): complex(v) for k, v in r0.items()}
    if set(amps) - set(L.modes):
        raise ValueError("r0 must be supported on Lambda")
    if normalize:
        nrm = w_rho_norm(FourierState(amps), rho)
        amps = {k: v / nrm for k, v in amps.items()}
    lam_set = GalerkinSet(L.modes, L.kind, L, 0)
    res = GalerkinSystem(lam_set, eq, resonant_only=True, quadratic=False)
    r = res.integrate(np.array([amps.get(m, 0j) for m in L.modes]), (0.0, T0), rtol=1e-13, atol=1e-15)
    if zero_perturbation:
        full = GalerkinSystem(gset, eq, resonant_only=True)
    else:
        full = GalerkinSystem(gset, eq, max_outside=1)
    pos = [gset.index[m] for m in L.modes]
    wts = _weights(gset.modes, rho)
    errs, init = [], []
    for d in deltas:
        rd = rescale(r, d)
        T = T0 / d ** 2
        u0 = np.zeros(gset.n, dtype=complex)
        u0[pos] = d * r(0.0)
        ts = np.linspace(0.0, T, n_samples)
        u = full.integrate(u0, (0.0, T), rotating=True, rtol=rtol, atol=1e-3 * rtol * d)
        U = u(ts)
        R = np.zeros_like(U)
        R[pos] = rd(ts)
        e = (np.abs(U - R) * wts[:, None]).sum(axis=0)
        errs.append(float(e.max()))
        init.append(float(e[0]))
    p = fit_exponent(deltas, errs) if not zero_perturbation and min(errs) > 0 else float("nan")
    return ApproximationReport(list(map(float, deltas)), errs, p, float(T0), float(rho), L.kind.value,
                               gset.n, zero_perturbation, init)


# ---------------------------------------------------------------------------
# first-order solution synthesis


@dataclass
class SynthesisResult:
    times: np.ndarray
    modes: list
    amplitudes: np.ndarray
    actions: np.ndarray
    field_coefficients: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"abs2_{m[0]}_{m[1]}" for m in self.modes])
            for t, row in zip(self.times, self.actions):
                w.writerow([repr(float(t))] + [repr(float(x)) for x in row])


def synthesize_solution(times, values, L: LambdaSet, delta: float, kind: Kind | str | None = None,
                        rotate: bool = True, gauge_G: float = 0.0) -> SynthesisResult:
    """First-order field amplitudes from resonant-model values on Lambda.

    values: array (len(times), 4N) of amplitudes.  With rotate, applies the phase
    rotation exp(-i omega t) and the gauge exp(-i G t); moduli are unchanged.
    Field coefficient of exp(i n.x): delta |n|^(-kappa/2) a_n / sqrt2 (Wave/Beam)
    or delta a_n (Hartree).
    """
    kind = Kind(kind) if kind is not None else L.kind
    if kind is not L.kind:
        raise KindMismatch(f"set is {L.kind.value}, requested {kind.value}")
    t = np.asarray(times, dtype=float)
    A = np.asarray(values, dtype=complex).reshape(len(t), -1)
    if A.shape[1] != 4 * L.N:
        raise ValueError("values must have one column per mode of Lambda")
    if rotate:
        w = np.array([omega(m, kind) for m in L.modes])
        A = A * np.exp(-1j * (np.outer(t, w) + gauge_G * t[:, None]))
    A = delta * A
    if kind is Kind.HARTREE:
        coef = A.copy()
    else:
        wts = np.array([math.hypot(*m) ** (-kind.kappa / 2.0) for m in L.modes])
        coef = A * wts[None, :] / math.sqrt(2.0)
    return SynthesisResult(t, list(L.modes), A, np.abs(A) ** 2, coef)
