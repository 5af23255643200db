"""The reduced N degree of freedom Hamiltonian and its invariant objects.

    H = sum_j [K_j(1-K_j)(1+2cos psi_j) + eps(a_j K_j + b_j K_j^2 + c_j K_j(1-K_j) cos psi_j)]
        + eps sum_{i<j} d_ij K_i K_j,

with psi' = dH/dK and K' = -dH/dpsi.  Each plane j lives in one of three charts:

* ``A``: angular (psi, K), regular for K in (0, 1);
* ``L``: lower Cartesian x = sqrt(2K) cos(psi/2), y = sqrt(2K) sin(psi/2), with
  x' = -H_y/2, y' = H_x/2, regular at K = 0;
* ``U``: upper Cartesian built from 1 - K, with the opposite orientation.

In a Cartesian chart H is written through K and q = K(1-K)cos psi, both
polynomial in (x, y).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import EnergyOutOfRange, OffManifold, StepFailure, ZeroMode
from .model_coeffs import ReducedCoeffs

PSI_STAR = 2.0 * math.pi / 3.0
SQRT3 = math.sqrt(3.0)
MARGIN = 0.05
HYSTERESIS = 0.01
DEFAULT_TOL = 1e-10


# ---------------------------------------------------------------------------
# states and charts


@dataclass
class ReducedState:
    """Point of the reduced phase space; ``z`` holds (u_j, v_j) per plane in its chart."""

    z: np.ndarray
    chart: tuple[str, ...]

    @classmethod
    def angular(cls, psi, K) -> "ReducedState":
        psi = np.atleast_1d(np.asarray(psi, dtype=float))
        K = np.atleast_1d(np.asarray(K, dtype=float))
        z = np.empty(2 * len(K))
        z[0::2], z[1::2] = psi, K
        return cls(z, ("A",) * len(K))

    @property
    def N(self) -> int:
        return len(self.chart)

    @property
    def psi(self) -> np.ndarray:
        return np.array([_plane_psi(c, self.z[2 * j], self.z[2 * j + 1]) for j, c in enumerate(self.chart)])

    @property
    def K(self) -> np.ndarray:
        return _K_all(self.z, self.chart)

    def cartesian(self, j: int, upper: bool = False) -> tuple[float, float]:
        """Blow-down coordinates of plane j."""
        return _to_chart(self.chart[j], "U" if upper else "L", self.z[2 * j], self.z[2 * j + 1])

    def to_chart(self, chart: Sequence[str]) -> "ReducedState":
        z = self.z.copy()
        for j, (old, new) in enumerate(zip(self.chart, chart)):
            z[2 * j], z[2 * j + 1] = _to_chart(old, new, z[2 * j], z[2 * j + 1])
        return ReducedState(z, tuple(chart))

    def to_angular(self) -> "ReducedState":
        return self.to_chart(("A",) * self.N)

    def auto_chart(self, margin: float = MARGIN) -> "ReducedState":
        K = self.K
        ch = tuple("L" if k < margin else ("U" if k > 1 - margin else "A") for k in K)
        return self.to_chart(ch)

    def copy(self) -> "ReducedState":
        return ReducedState(self.z.copy(), self.chart)


def _plane_psi(c: str, u: float, v: float) -> float:
    if c == "A":
        return u
    return 2.0 * math.atan2(v, u)


def _plane_K(c: str, u: float, v: float) -> float:
    if c == "A":
        return v
    r2 = 0.5 * (u * u + v * v)
    return r2 if c == "L" else 1.0 - r2


def _K_all(z, chart) -> np.ndarray:
    return np.array([_plane_K(c, z[2 * j], z[2 * j + 1]) for j, c in enumerate(chart)])


def _to_chart(old: str, new: str, u: float, v: float) -> tuple[float, float]:
    if old == new:
        return u, v
    psi, K = _plane_psi(old, u, v), _plane_K(old, u, v)
    if new == "A":
        return psi, K
    rho = 2.0 * (K if new == "L" else 1.0 - K)
    r = math.sqrt(max(rho, 0.0))
    return r * math.cos(psi / 2), r * math.sin(psi / 2)


# ---------------------------------------------------------------------------
# energy and vector field


def _plane_Kq(c: str, u: float, v: float) -> tuple[float, float]:
    """(K, q) with q = K(1-K)cos psi, polynomial in Cartesian charts."""
    if c == "A":
        return v, v * (1.0 - v) * math.cos(u)
    K = 0.5 * (u * u + v * v)
    w = 0.5 * (u * u - v * v)
    if c == "L":
        return K, (1.0 - K) * w
    return 1.0 - K, (1.0 - K) * w


def H_value(state: ReducedState, coeffs: ReducedCoeffs) -> float:
    return _H(state.z, state.chart, coeffs)


def _H(z, chart, co: ReducedCoeffs) -> float:
    eps = co.epsilon
    Ks = np.empty(len(chart))
    tot = 0.0
    for j, c in enumerate(chart):
        K, q = _plane_Kq(c, z[2 * j], z[2 * j + 1])
        Ks[j] = K
        tot += K * (1.0 - K) + (2.0 + eps * co.c[j]) * q + eps * (co.a[j] * K + co.b[j] * K * K)
    tot += 0.5 * eps * float(Ks @ co.d @ Ks)
    return tot


def plane_energy(state: ReducedState, j: int, coeffs: ReducedCoeffs | None = None) -> float:
    """Own energy of plane j: the single-plane part of H without couplings."""
    K, q = _plane_Kq(state.chart[j], state.z[2 * j], state.z[2 * j + 1])
    if coeffs is None:
        return K * (1 - K) + 2 * q
    e = coeffs.epsilon
    return K * (1 - K) + (2 + e * coeffs.c[j]) * q + e * (coeffs.a[j] * K + coeffs.b[j] * K * K)


def _field(z, chart, co: ReducedCoeffs, out=None) -> np.ndarray:
    eps = co.epsilon
    n = len(chart)
    Ks = _K_all(z, chart)
    coup = eps * (co.d @ Ks)
    dz = np.empty_like(z) if out is None else out
    for j, c in enumerate(chart):
        u, v = z[2 * j], z[2 * j + 1]
        a, b, cc = co.a[j], co.b[j], co.c[j]
        if c == "A":
            psi, K = u, v
            cs, sn = math.cos(psi), math.sin(psi)
            dz[2 * j] = (1 - 2 * K) * (1 + 2 * cs) + eps * (a + 2 * b * K + cc * (1 - 2 * K) * cs) + coup[j]
            dz[2 * j + 1] = K * (1 - K) * sn * (2 + eps * cc)
            continue
        r2 = 0.5 * (u * u + v * v)
        w = 0.5 * (u * u - v * v)
        Hw = (1 - r2) * (2 + eps * cc)
        if c == "L":
            K = r2
            HK = 1 - 2 * K - 2 * w + eps * (a + 2 * b * K - cc * w) + coup[j]
            Hx, Hy = u * (HK + Hw), v * (HK - Hw)
            dz[2 * j], dz[2 * j + 1] = -0.5 * Hy, 0.5 * Hx
        else:
            Kp = r2
            HK = 1 - 2 * Kp - 2 * w + eps * (-a - 2 * b * (1 - Kp) - cc * w) - coup[j]
            Hx, Hy = u * (HK + Hw), v * (HK - Hw)
            dz[2 * j], dz[2 * j + 1] = 0.5 * Hy, -0.5 * Hx
    return dz


def vector_field(state: ReducedState, coeffs: ReducedCoeffs, margin: float = MARGIN) -> ReducedState:
    """Tangent vector, returned in the (possibly re-charted) coordinates of the state."""
    st = state
    K = state.K
    if any(c == "A" and (k < margin or k > 1 - margin) for c, k in zip(state.chart, K)):
        st = state.auto_chart(margin)
    return ReducedState(_field(st.z, st.chart, coeffs), st.chart)


def angular_field(psi, K, coeffs: ReducedCoeffs) -> tuple[np.ndarray, np.ndarray]:
    st = ReducedState.angular(psi, K)
    dz = _field(st.z, st.chart, coeffs)
    return dz[0::2], dz[1::2]


# ---------------------------------------------------------------------------
# integration


@dataclass
class Segment:
    t0: float
    t1: float
    chart: tuple[str, ...]
    sol: object  # OdeSolution
    t: np.ndarray
    z: np.ndarray


@dataclass
class Trajectory:
    segments: list[Segment]
    coeffs: ReducedCoeffs
    events: list[tuple[int, float, ReducedState]] = field(default_factory=list)
    time_scale: float = 1.0

    @property
    def t0(self) -> float:
        return self.segments[0].t0

    @property
    def t_end(self) -> float:
        return self.segments[-1].t1

    @property
    def final(self) -> ReducedState:
        s = self.segments[-1]
        return ReducedState(s.z[:, -1].copy(), s.chart)

    def state(self, t: float) -> ReducedState:
        lo, hi = min(self.t0, self.t_end), max(self.t0, self.t_end)
        if not lo - 1e-12 <= t <= hi + 1e-12:
            raise ValueError("time outside the trajectory")
        for s in self.segments:
            if min(s.t0, s.t1) - 1e-12 <= t <= max(s.t0, s.t1) + 1e-12:
                return ReducedState(np.asarray(s.sol(t), dtype=float), s.chart)
        s = self.segments[-1]
        return ReducedState(np.asarray(s.sol(t), dtype=float), s.chart)

    def sample(self, ts) -> tuple[np.ndarray, np.ndarray]:
        """(psi, K) arrays of shape (len(ts), N) at the requested times."""
        ts = np.asarray(ts, dtype=float)
        P = np.empty((len(ts), self.coeffs.N))
        K = np.empty_like(P)
        for i, t in enumerate(ts):
            st = self.state(float(t))
            P[i], K[i] = st.psi, st.K
        return P, K

    def grid(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Solver nodes: t, psi, K (psi unwrapped per plane)."""
        ts, Ps, Ks = [], [], []
        for s in self.segments:
            for k in range(len(s.t)):
                st = ReducedState(s.z[:, k], s.chart)
                ts.append(s.t[k])
                Ps.append(st.psi)
                Ks.append(st.K)
        P = np.unwrap(np.array(Ps), axis=0)
        return np.array(ts), P, np.array(Ks)

    def energies(self) -> np.ndarray:
        out = []
        for s in self.segments:
            out.extend(_H(s.z[:, k], s.chart, self.coeffs) for k in range(len(s.t)))
        return np.array(out)

    def pde_time(self, t):
        return np.asarray(t) * self.time_scale

    def to_csv(self, path, s_residuals: np.ndarray | None = None) -> None:
        t, P, K = self.grid()
        H = self.energies()
        N = self.coeffs.N
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            head = ["t"] + [f"psi_{j + 1}" for j in range(N)] + [f"K_{j + 1}" for j in range(N)] + ["H"]
            if s_residuals is not None:
                head += [f"S_res_{k}" for k in range(s_residuals.shape[1])]
            wr.writerow(head)
            for i in range(len(t)):
                row = [repr(float(t[i]))] + [repr(float(x)) for x in P[i]] + [repr(float(x)) for x in K[i]]
                row.append(repr(float(H[i])))
                if s_residuals is not None:
                    row += [repr(float(x)) for x in s_residuals[i]]
                wr.writerow(row)


def _switch_events(chart, margin, hyst):
    evs, info = [], []
    for j, c in enumerate(chart):
        if c == "A":
            f1 = lambda t, z, j=j: z[2 * j + 1] - margin
            f1.terminal, f1.direction = True, -1
            f2 = lambda t, z, j=j: z[2 * j + 1] - (1 - margin)
            f2.terminal, f2.direction = True, 1
            evs += [f1, f2]
            info += [(j, "L"), (j, "U")]
        else:
            f = lambda t, z, j=j: 0.5 * (z[2 * j] ** 2 + z[2 * j + 1] ** 2) - (margin + hyst)
            f.terminal, f.direction = True, 1
            evs.append(f)
            info.append((j, "A"))
    return evs, info


UserEvent = Callable[[float, ReducedState], float]


def integrate(state: ReducedState, coeffs: ReducedCoeffs, t_span, tol: float = DEFAULT_TOL,
              events: Sequence[UserEvent] = (), event_direction: Sequence[int] | None = None,
              terminal: Sequence[bool] | None = None, method: str = "DOP853",
              margin: float = MARGIN, hysteresis: float = HYSTERESIS,
              max_step: float = np.inf) -> Trajectory:
    """Adaptive integration with chart switching and user events g(t, state) = 0.

    Terminal user events stop the integration at the event.
    """
    if not 1e-13 <= tol <= 1e-6:
        raise ValueError("tol must lie in [1e-13, 1e-6]")
    t0, t1 = map(float, t_span)
    sign = 1.0 if t1 >= t0 else -1.0
    st = state.auto_chart(margin) if state.chart == ("A",) * state.N else state
    st = _fix_charts(st, margin)
    segs: list[Segment] = []
    hits: list[tuple[int, float, ReducedState]] = []
    dirs = list(event_direction) if event_direction is not None else [0] * len(events)
    terms = list(terminal) if terminal is not None else [False] * len(events)
    t = t0
    n_switch = 0
    while sign * (t1 - t) > 0:
        chart = st.chart
        sw, info = _switch_events(chart, margin, hysteresis)
        ue = []
        for k, g in enumerate(events):
            f = lambda tt, z, g=g, chart=chart: g(tt, ReducedState(z, chart))
            f.terminal, f.direction = terms[k], dirs[k]
            ue.append(f)
        fun = lambda tt, z, chart=chart: _field(z, chart, coeffs)
        sol = solve_ivp(fun, (t, t1), st.z, method=method, rtol=tol, atol=tol, dense_output=True,
                        events=sw + ue, max_step=max_step)
        if sol.status == -1:
            raise StepFailure(f"integration failed: {sol.message}", t=float(sol.t[-1]), state=sol.y[:, -1])
        segs.append(Segment(t, float(sol.t[-1]), chart, sol.sol, sol.t, sol.y))
        t = float(sol.t[-1])
        stop = False
        for k in range(len(ue)):
            for te, ze in zip(sol.t_events[len(sw) + k], sol.y_events[len(sw) + k]):
                hits.append((k, float(te), ReducedState(np.array(ze), chart)))
                if terms[k]:
                    stop = True
        if stop or sol.status == 0:
            break
        new = list(chart)
        for k, (j, target) in enumerate(info):
            if len(sol.t_events[k]):
                new[j] = target
        st = ReducedState(sol.y[:, -1].copy(), chart).to_chart(new)
        n_switch += 1
        if n_switch > 100000:
            raise StepFailure("chart switching does not terminate", t=t, state=st.z)
    hits.sort(key=lambda h: sign * h[1])
    return Trajectory(segs, coeffs, hits, coeffs.time_scale if coeffs.kind != "synthetic" else 1.0)


def _fix_charts(st: ReducedState, margin: float) -> ReducedState:
    K = st.K
    new = []
    for c, k in zip(st.chart, K):
        if c == "A" and (k < margin or k > 1 - margin):
            new.append("L" if k < 0.5 else "U")
        else:
            new.append(c)
    return st.to_chart(new)


def flow(state: ReducedState, coeffs: ReducedCoeffs, t: float, tol: float = DEFAULT_TOL) -> ReducedState:
    if t == 0:
        return state.copy()
    return integrate(state, coeffs, (0.0, t), tol).final


def reverse(state: ReducedState) -> ReducedState:
    """The reversor (psi, K) -> (-psi, K); in Cartesian charts (x, y) -> (x, -y)."""
    z = state.z.copy()
    for j, c in enumerate(state.chart):
        if c == "A":
            z[2 * j] = -z[2 * j]
        else:
            z[2 * j + 1] = -z[2 * j + 1]
    return ReducedState(z, state.chart)


# ---------------------------------------------------------------------------
# saddles


@dataclass
class SaddlePoint:
    sign: int
    level: tuple[int, ...]
    location: ReducedState
    eigenvalues: list[float]


def _plane_saddle_psi(sign: int, level: int, j: int, coeffs: ReducedCoeffs, Ks) -> float:
    """Zero of psi' on K_j = level with the other planes at levels Ks."""
    e = coeffs.epsilon
    a, b, c = coeffs.a[j], coeffs.b[j], coeffs.c[j]
    coup = e * sum(coeffs.d[j, i] * Ks[i] for i in range(coeffs.N) if i != j)
    if level == 0:
        # 1 + 2cos + e(a + c cos) + coup = 0
        cs = -(1 + e * a + coup) / (2 + e * c)
    else:
        # -(1 + 2cos) + e(a + 2b - c cos) + coup = 0
        cs = (-1 + e * (a + 2 * b) + coup) / (2 + e * c)
    if abs(cs) > 1:
        raise EnergyOutOfRange("no saddle: perturbation too large")
    return sign * math.acos(cs)


def saddle_point(sign: int, levels: Sequence[int], coeffs: ReducedCoeffs) -> SaddlePoint:
    """Hyperbolic fixed point with K_j = levels[j] and psi_j = sign * Psi* (perturbed)."""
    Ks = [float(l) for l in levels]
    psi = [_plane_saddle_psi(sign, l, j, coeffs, Ks) for j, l in enumerate(levels)]
    eig = []
    for j, l in enumerate(levels):
        lam = abs(math.sin(psi[j]) * (2 + coeffs.epsilon * coeffs.c[j]))
        eig += [lam, -lam]
    return SaddlePoint(sign, tuple(levels), ReducedState.angular(psi, Ks), eig)


def field_jacobian(z, chart, coeffs: ReducedCoeffs, h: float = 1e-4) -> np.ndarray:
    """Jacobian of the chart field by Richardson-extrapolated central differences."""
    z = np.asarray(z, dtype=float)
    n = len(z)
    J = np.empty((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0

        def d(s):
            return (_field(z + s * e, chart, coeffs) - _field(z - s * e, chart, coeffs)) / (2 * s)

        J[:, k] = (4 * d(h / 2) - d(h)) / 3
    return J


def saddle_jacobian_eigs(sp: SaddlePoint, coeffs: ReducedCoeffs, h: float = 1e-4) -> np.ndarray:
    """Eigenvalues of the chart Jacobian at the saddle."""
    return np.linalg.eigvals(field_jacobian(sp.location.z, sp.location.chart, coeffs, h))


# ---------------------------------------------------------------------------
# closed-form unperturbed orbits


def heteroclinic(sign: int, tau) -> ReducedState:
    """gamma_sign(tau): psi_j = sign*Psi*, K_j = 1/(1 + exp(-sign*sqrt3*tau_j))."""
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    K = 1.0 / (1.0 + np.exp(-sign * SQRT3 * tau))
    return ReducedState.angular(np.full(len(tau), sign * PSI_STAR), K)


def delta_model(N: int, delta: float) -> ReducedCoeffs:
    """Coefficients whose planes carry the modified Hamiltonian K(1-K)(1+2cos psi) - delta K^2."""
    return ReducedCoeffs.synthetic(delta, np.zeros(N), -np.ones(N), np.zeros(N), np.zeros((N, N)))


def modified_homoclinic_components(t, delta: float) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(t, dtype=float)
    psi = 2.0 * np.arctan(-SQRT3 * np.tanh(0.5 * SQRT3 * t))
    K = 1.0 / (1.0 + (delta / 3.0) * (2.0 * np.cosh(SQRT3 * np.clip(t, -350, 350)) - 1.0))
    return psi, K


def modified_homoclinic(tau, delta: float) -> ReducedState:
    """Homoclinic loop of K(1-K)(1+2cos psi) - delta K^2 through the level-0 saddle."""
    if not 0 < delta <= 0.2:
        raise ValueError("delta must lie in (0, 0.2]")
    psi, K = modified_homoclinic_components(np.atleast_1d(tau), delta)
    return ReducedState.angular(psi, K)


def homoclinic_shift(delta: float) -> float:
    """Time shift after which the loop follows the heteroclinic gamma_-."""
    return math.log(3.0 / delta) / SQRT3


# ---------------------------------------------------------------------------
# periodic orbits in an invariant plane


@dataclass
class PeriodicOrbit:
    h: float
    k: int
    t: np.ndarray
    psi: np.ndarray
    K: np.ndarray
    T_h: float
    epsilon: float
    sol: object = None

    def at(self, s) -> tuple[np.ndarray, np.ndarray]:
        """(psi, K) at phase time s (mod T_h)."""
        s = np.mod(np.asarray(s, dtype=float), self.T_h)
        y = np.atleast_2d(self.sol(s).T) if np.ndim(s) else self.sol(float(s))
        if np.ndim(s):
            return y[:, 0], y[:, 1]
        return y[0], y[1]

    def cartesian(self, n: int | None = None) -> np.ndarray:
        r = np.sqrt(2 * self.K)
        return np.column_stack([r * np.cos(self.psi / 2), r * np.sin(self.psi / 2)])


def _plane_coeffs(coeffs: ReducedCoeffs, k: int) -> ReducedCoeffs:
    return ReducedCoeffs.synthetic(coeffs.epsilon, [coeffs.a[k]], [coeffs.b[k]], [coeffs.c[k]], np.zeros((1, 1)))


def plane_energy_max(coeffs: ReducedCoeffs, k: int) -> tuple[float, float]:
    """(K, H) at the elliptic point psi = 0 of plane k."""
    pc = _plane_coeffs(coeffs, k)
    f = lambda K: _field(np.array([0.0, K]), ("A",), pc)[0]
    Ke = brentq(f, 0.05, 0.95, xtol=1e-15)
    return Ke, _H(np.array([0.0, Ke]), ("A",), pc)


def periodic_orbit(h: float, k: int, coeffs: ReducedCoeffs, n_samples: int = 1024,
                   tol: float = 1e-12) -> PeriodicOrbit:
    """Level set {H_k = h} of plane k around the elliptic point, other planes at K = 0."""
    Ke, Hmax = plane_energy_max(coeffs, k)
    if not 0 < h < Hmax:
        raise EnergyOutOfRange(f"h must lie in (0, {Hmax})")
    pc = _plane_coeffs(coeffs, k)
    g = lambda K: _H(np.array([0.0, K]), ("A",), pc) - h
    K0 = brentq(g, 0.0, Ke, xtol=1e-17, rtol=1e-15)
    z0 = np.array([0.0, K0])
    # first return to psi = 0 on the branch below the elliptic point
    ev = lambda t, z: z[0]
    ev.direction = 1
    ev.terminal = False
    fun = lambda t, z: _field(z, ("A",), pc)
    guess = _period_guess(h)
    sol = None
    T = None
    while T is None:
        sol = solve_ivp(fun, (0, guess), z0, method="DOP853", rtol=tol, atol=tol, events=ev,
                        dense_output=True)
        for te, ze in zip(sol.t_events[0], sol.y_events[0]):
            if te > 1e-6 and ze[1] < Ke:
                T = float(te)
                break
        guess *= 2
    sol = solve_ivp(fun, (0, T), z0, method="DOP853", rtol=tol, atol=tol, dense_output=True)
    ts = np.linspace(0, T, n_samples, endpoint=False)
    y = sol.sol(ts)
    return PeriodicOrbit(h, k, ts, y[0], y[1], T, coeffs.epsilon, sol.sol)


def _period_guess(h: float) -> float:
    return 4.0 * (1.0 + abs(math.log(max(h, 1e-300)))) + 10.0


# ---------------------------------------------------------------------------
# reduction from the resonant model


@dataclass
class ReductionInfo:
    S_residuals: np.ndarray
    S_values: dict
    time_scale: float


def _tuple_amplitudes(alpha, L):
    out = []
    for t in L.tuples:
        out.append([complex(alpha[m]) for m in t.modes])
    return out


def reduce_state(alpha, L, coeffs: ReducedCoeffs | None = None, tol: float = 1e-8):
    """(psi, K) of an amplitude vector on the reduced manifold and the conserved S-values.

    ``alpha`` maps modes to complex amplitudes (a FourierState or dict).
    """
    amps = alpha.amplitudes if hasattr(alpha, "amplitudes") else alpha
    psi, K, res = [], [], []
    vals = {}
    for k, (a1, a2, a3, a4) in enumerate(_tuple_amplitudes(amps, L), start=1):
        I = [abs(a) ** 2 for a in (a1, a2, a3, a4)]
        if min(I) == 0.0:
            raise ZeroMode(f"tuple {k} has a vanishing amplitude")
        s13, s24, s34 = I[0] - I[2], I[1] - I[3], I[2] + I[3]
        vals[(k, "S13-")], vals[(k, "S24-")], vals[(k, "S34+")] = s13, s24, s34
        res += [s13, s24, s34 - 1.0]
        K.append(I[0])
        psi.append(float(np.angle(a1 * a2.conjugate() * a3 * a4.conjugate())))
    res = np.array(res)
    if np.max(np.abs(res)) > tol:
        raise OffManifold("amplitudes are off the reduced manifold", residuals=res)
    scale = coeffs.time_scale if coeffs is not None else float("nan")
    return ReducedState.angular(psi, K), ReductionInfo(res, vals, scale)


def s_residuals(alpha, L) -> np.ndarray:
    amps = alpha.amplitudes if hasattr(alpha, "amplitudes") else alpha
    out = []
    for a1, a2, a3, a4 in _tuple_amplitudes(amps, L):
        I = [abs(a) ** 2 for a in (a1, a2, a3, a4)]
        out += [I[0] - I[2], I[1] - I[3], I[2] + I[3] - 1.0]
    return np.array(out)


def lift_state(state: ReducedState, L, phases) -> dict:
    """Amplitudes sqrt(K), sqrt(1-K), sqrt(K), sqrt(1-K) with the given mode phases.

    The phase of the fourth mode of each tuple is overwritten so that the
    tuple angle equals psi.
    """
    st = state.to_angular()
    phases = np.asarray(phases, dtype=float).copy()
    out = {}
    for i, t in enumerate(L.tuples):
        K, psi = st.K[i], st.psi[i]
        th = phases[4 * i:4 * i + 4]
        th[3] = th[0] - th[1] + th[2] - psi
        mods = [math.sqrt(K), math.sqrt(1 - K), math.sqrt(K), math.sqrt(1 - K)]
        for m, r, p in zip(t.modes, mods, th):
            out[m] = r * complex(math.cos(p), math.sin(p))
    return out
