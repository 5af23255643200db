"""Poincare sections, hitting-time symbols, invariant-manifold shooting,
splitting measurements, transition-chain shadowing and regime segmentation.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import EnergyOutOfRange, NoCrossing, ShadowingLost, StepFailure
from .model_coeffs import ReducedCoeffs
from .toy_dynamics import (PSI_STAR, SQRT3, PeriodicOrbit, ReducedState, SaddlePoint, Segment, Trajectory,
                           _field, _H, H_value, field_jacobian, integrate, modified_homoclinic_components,
                           periodic_orbit, plane_energy)

SEED_K = 1e-12


def wrap(x):
    return (np.asarray(x) + np.pi) % (2 * np.pi) - np.pi


def plane_energies(state: ReducedState, coeffs: ReducedCoeffs) -> np.ndarray:
    return np.array([plane_energy(state, j, coeffs) for j in range(state.N)])


def _concat(trajs: Sequence[Trajectory]) -> Trajectory:
    segs, evs = [], []
    for tr in trajs:
        segs += tr.segments
        evs += tr.events
    return Trajectory(segs, trajs[0].coeffs, evs, trajs[0].time_scale)


# ---------------------------------------------------------------------------
# sections and symbols


@dataclass(frozen=True)
class SectionSpec:
    k2_value: float = 0.5
    psi_window_center: float = -2 * math.pi / 3
    psi_window_halfwidth: float = 0.1
    energy: float | None = None
    crossing_direction: int = -1
    plane: int = 1

    def __post_init__(self):
        if not 0 < self.psi_window_halfwidth < math.pi / 3:
            raise ValueError("window halfwidth must lie in (0, pi/3)")
        if self.crossing_direction not in (-1, 1):
            raise ValueError("crossing direction must be +1 or -1")

    def event(self) -> Callable:
        p, v = self.plane, self.k2_value
        return lambda t, st: _K_one(st, p) - v

    def accepts(self, st: ReducedState) -> bool:
        return abs(float(wrap(st.psi[self.plane] - self.psi_window_center))) < self.psi_window_halfwidth


def _K_one(st: ReducedState, j: int) -> float:
    c = st.chart[j]
    u, v = st.z[2 * j], st.z[2 * j + 1]
    if c == "A":
        return v
    r2 = 0.5 * (u * u + v * v)
    return r2 if c == "L" else 1.0 - r2


@dataclass
class SectionCrossing:
    t: float
    state: ReducedState


def section_returns(z0: ReducedState, coeffs: ReducedCoeffs, section: SectionSpec, t_max: float = 1e4,
                    tol: float = 1e-11, max_returns: int | None = None, chunk: float = 50.0,
                    stop: Callable | None = None) -> tuple[list[SectionCrossing], Trajectory]:
    """Window-filtered crossings of K_plane = k2_value in the given direction.

    stop(crossings, t) may end the run early (returns True).  An empty or short
    list means no (further) return within the horizon.
    """
    ev = section.event()
    out: list[SectionCrossing] = []
    trajs = []
    st, t = z0, 0.0
    while t < t_max:
        t1 = min(t + chunk, t_max)
        tr = integrate(st, coeffs, (t, t1), tol, events=[ev], event_direction=[section.crossing_direction])
        trajs.append(tr)
        for _, te, se in tr.events:
            if section.accepts(se):
                out.append(SectionCrossing(te, se))
                if max_returns is not None and len(out) >= max_returns:
                    return out, _concat(trajs)
        st, t = tr.final, tr.t_end
        if stop is not None and stop(out, t):
            break
    return out, _concat(trajs)


@dataclass
class SymbolSequence:
    symbols: list
    T_h: float
    C_star: int
    times: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def hitting_symbols(returns, T_h: float, C_star: int | None = None) -> SymbolSequence:
    """floor((t_k - t_{k-1})/T_h) - C*; C* defaults to (min floor) - 1 so the smallest symbol is 1."""
    ts = [r.t if isinstance(r, SectionCrossing) else float(r) for r in returns]
    if len(ts) < 2:
        raise ValueError("need at least two returns")
    fl = [int(math.floor((b - a) / T_h)) for a, b in zip(ts[:-1], ts[1:])]
    if C_star is None:
        C_star = min(fl) - 1
    return SymbolSequence([f - C_star for f in fl], T_h, int(C_star), ts)


# ---------------------------------------------------------------------------
# manifolds


def _jacobian(z, chart, coeffs, h=1e-4):
    return field_jacobian(z, chart, coeffs, h)


@dataclass
class ManifoldCurves:
    direction: str
    eigenvalue: float
    eigenvector: np.ndarray
    seed_distance: float
    orbits: list
    seed_shift: float

    def sample(self, n: int = 200):
        out = []
        for tr in self.orbits:
            ts = np.linspace(tr.t0, tr.t_end, n)
            out.append(tr.sample(ts))
        return out


def manifold_shoot(obj: SaddlePoint | PeriodicOrbit, coeffs: ReducedCoeffs, direction: str = "u",
                   n_arc: int = 8, seed_distance: float = 1e-7, t_max: float = 10.0, tol: float = 1e-12,
                   shift_tol: float = 1e-8, max_halvings: int = 6) -> ManifoldCurves:
    """Fundamental-domain sampling of W^u (forward) or W^s (backward) of a saddle or periodic orbit.

    For a periodic orbit of one plane (others at K = 0) the unstable fibre is the
    leading eigenvector of the monodromy matrix.
    """
    if direction not in ("u", "s"):
        raise ValueError("direction must be 'u' or 's'")
    sgn = 1.0 if direction == "u" else -1.0
    if isinstance(obj, SaddlePoint):
        base = obj.location
        z0, chart = base.z.copy(), base.chart
        J = _jacobian(z0, chart, coeffs)
        w, V = np.linalg.eig(J)
        w = w.real
        k = int(np.argmax(sgn * w))
        lam = float(w[k])
        if sgn * lam <= 0:
            raise EnergyOutOfRange("fixed point is not hyperbolic")
        vec = np.real(V[:, k])
        vec /= np.linalg.norm(vec)
        # orient towards increasing K in the first expanding plane
        jplane = int(np.argmax(np.abs(vec).reshape(-1, 2).sum(axis=1)))
        if vec[2 * jplane + 1] < 0:
            vec = -vec
        # seed d/2 reaches the seed-d orbit ln2/lam later
        back_ratio, back_dt = 2.0, math.log(2.0) / abs(lam)
    else:
        po = obj
        N = coeffs.N
        z0 = np.zeros(2 * N)
        r = math.sqrt(2 * float(po.K[0]))
        z0[2 * po.k], z0[2 * po.k + 1] = r * math.cos(po.psi[0] / 2), r * math.sin(po.psi[0] / 2)
        chart = ("L",) * N
        M = _monodromy(z0, chart, coeffs, po.T_h, tol)
        w, V = np.linalg.eig(M)
        mods = np.abs(w)
        k = int(np.argmax(mods if sgn > 0 else -mods))
        mu = float(abs(w[k]))
        if (sgn > 0 and mu <= 1) or (sgn < 0 and mu >= 1):
            raise EnergyOutOfRange("periodic orbit is not hyperbolic")
        lam = math.log(mu) / po.T_h
        vec = np.real(V[:, k])
        vec /= np.linalg.norm(vec)
        jplane = int(np.argmax(np.abs(vec).reshape(-1, 2).sum(axis=1)))
        if vec[2 * jplane] < 0:
            vec = -vec
        # seed d/mu (or d*mu) reaches the seed-d orbit one period later
        back_ratio, back_dt = (mu if sgn > 0 else 1 / mu), po.T_h
    ratio = math.exp(abs(lam) * 1.0)

    def shoot(d):
        orbs = []
        for i in range(n_arc):
            s = d * ratio ** (i / n_arc)
            st = ReducedState(z0 + s * vec, chart)
            orbs.append(integrate(st, coeffs, (0.0, sgn * (t_max + back_dt)), tol))
        return orbs

    d = seed_distance
    orbs = shoot(d)
    shift = float("inf")
    for _ in range(max_halvings):
        small = shoot(d / back_ratio)
        shift = 0.0
        for a, b in zip(orbs, small):
            T = 0.5 * t_max
            pa = a.state(sgn * T).to_angular()
            pb = b.state(sgn * (T + back_dt)).to_angular()
            shift = max(shift, float(np.max(np.abs(pa.K - pb.K))),
                        float(np.max(np.abs(wrap(pa.psi - pb.psi)))))
        if shift < shift_tol:
            break
        d, orbs = d / 2, shoot(d / 2)
    return ManifoldCurves(direction, lam, vec, d, orbs, shift)


def _monodromy(z0, chart, coeffs, T, tol, h=1e-7):
    n = len(z0)
    M = np.empty((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        zp = integrate(ReducedState(z0 + e, chart), coeffs, (0.0, T), tol).final.to_chart(chart).z
        zm = integrate(ReducedState(z0 - e, chart), coeffs, (0.0, T), tol).final.to_chart(chart).z
        M[:, k] = (zp - zm) / (2 * h)
    return M


# ---------------------------------------------------------------------------
# homoclinic splitting (N = 2, level-0 saddle)


def _loop_seed(t: float, delta: float, kmin: float = 0.0) -> tuple[float, float]:
    """Point of the modified loop at time t as lower-chart Cartesian coordinates."""
    psi, K = modified_homoclinic_components(np.array([t]), delta)
    r = math.sqrt(2 * float(K[0]))
    return r * math.cos(psi[0] / 2), r * math.sin(psi[0] / 2)


def _psi_zero_event(j: int):
    def g(t, st):
        c = st.chart[j]
        u, v = st.z[2 * j], st.z[2 * j + 1]
        if c == "A":
            return math.sin(u / 2)
        return v / math.hypot(u, v)
    return g


@dataclass
class SplittingSample:
    tau0: float
    E_unstable: float
    E_stable: float
    psi2_unstable: float
    psi2_stable: float

    @property
    def distance(self) -> float:
        return self.E_unstable - self.E_stable


def homoclinic_splitting(tau0: float, coeffs: ReducedCoeffs, delta: float, T: float = 12.0,
                         tol: float = 1e-12) -> SplittingSample:
    """Plane-1 energy difference between W^u and W^s of the level-0 saddle at the section psi_1 = 0.

    Both manifolds are seeded on the unperturbed loops with phases (0, -tau0) at
    the section, at distance T before (resp. after) it.
    """
    if coeffs.N != 2:
        raise ValueError("homoclinic splitting is defined for N = 2")
    ev = _psi_zero_event(0)
    res = []
    for sgn in (1.0, -1.0):
        t_seed = -sgn * T
        x1, y1 = _loop_seed(t_seed, delta)
        x2, y2 = _loop_seed(t_seed - tau0, delta)
        st = ReducedState(np.array([x1, y1, x2, y2]), ("L", "L"))
        tr = integrate(st, coeffs, (t_seed, t_seed + sgn * 3 * T), tol, events=[ev],
                       event_direction=[-1 if sgn > 0 else 1], terminal=[True])
        if not tr.events:
            raise NoCrossing(f"manifold does not reach the section (tau0 = {tau0})")
        se = tr.events[0][2]
        res.append((plane_energy(se, 0, coeffs), float(se.psi[1])))
    return SplittingSample(tau0, res[0][0], res[1][0], res[0][1], res[1][1])


def find_homoclinic(coeffs: ReducedCoeffs, delta: float, bracket=(-1.0, 1.0), tol: float = 1e-12,
                    xtol: float = 1e-8) -> dict:
    """Zero of the measured splitting in tau0 (the transverse homoclinic) and its slope."""
    f = lambda x: homoclinic_splitting(x, coeffs, delta, tol=tol).distance
    fa, fb = f(bracket[0]), f(bracket[1])
    if fa * fb > 0:
        raise NoCrossing("splitting has no sign change in the bracket")
    x = brentq(f, bracket[0], bracket[1], xtol=xtol)
    h = 1e-3
    slope = (f(x + h) - f(x - h)) / (2 * h)
    return {"tau0": x, "slope": slope, "f_lo": fa, "f_hi": fb}


# ---------------------------------------------------------------------------
# excursions near periodic orbits: shared runner


def seed_state(N: int, active: int, po: PeriodicOrbit, theta: float, seeds: dict) -> ReducedState:
    """Plane `active` on the periodic orbit at phase theta, planes in `seeds` at K on their unstable direction."""
    z = np.zeros(2 * N)
    chart = ["L"] * N
    psi, K = po.at(theta)
    r = math.sqrt(2 * float(K))
    z[2 * active], z[2 * active + 1] = r * math.cos(psi / 2), r * math.sin(psi / 2)
    for j, k in seeds.items():
        r = math.sqrt(2 * k)
        z[2 * j], z[2 * j + 1] = 0.5 * r, 0.5 * SQRT3 * r
    return ReducedState(z, tuple(chart))


@dataclass
class HorseshoeResult:
    requested: list
    achieved: list
    theta: float
    C_star: int
    T_h: float
    crossing_times: list
    trajectory: object = None
    k1_sup_dev: float = float("nan")
    k2_sup: list = field(default_factory=list)
    k2_inf: list = field(default_factory=list)
    h: float = 0.0
    epsilon: float = 0.0

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "trajectory"}
        return d


class HorseshoeShooter:
    """Plane 0 on the level-h periodic orbit, plane 1 making homoclinic excursions.

    Returns are crossings of K_1 = 1/2 (descending, psi_1 near -2pi/3).  The
    shooting parameter is the phase theta of plane 0 at the start.
    """

    def __init__(self, coeffs: ReducedCoeffs, h: float, section: SectionSpec | None = None,
                 seed_k: float = 1e-10, tol: float = 1e-11):
        if coeffs.N != 2:
            raise ValueError("horseshoe shooting uses N = 2")
        self.coeffs = coeffs
        self.h = h
        self.po = periodic_orbit(h, 0, coeffs)
        self.T_h = self.po.T_h
        self.section = section or SectionSpec(plane=1)
        self.seed_k = seed_k
        self.tol = tol
        self.C_star: int | None = None
        self.calls = 0

    def returns(self, theta: float, n: int, t_max: float) -> list[float]:
        self.calls += 1
        st = seed_state(2, 0, self.po, theta, {1: self.seed_k})
        cr, _ = section_returns(st, self.coeffs, self.section, t_max=t_max, tol=self.tol,
                                max_returns=n, chunk=t_max)
        return [c.t for c in cr]

    def calibrate(self, n_probe: int = 48, workers: int = 1) -> int:
        """C* such that symbol 1 is the first spacing window lying wholly above the probe minimum.

        Windows partly below the smallest observed spacing cannot be swept by a
        branch, which the nested search needs, so C* = ceil(min spacing / T_h) - 1.
        Probes are independent; with workers > 1 they run in a process pool and
        are merged by probe index.
        """
        thetas = list(np.linspace(0, self.T_h, n_probe, endpoint=False))
        if workers > 1:
            from concurrent.futures import ProcessPoolExecutor
            with ProcessPoolExecutor(max_workers=workers) as ex:
                runs = list(ex.map(_probe_returns, [self] * n_probe, thetas))
        else:
            runs = [_probe_returns(self, th) for th in thetas]
        sp = [ts[1] - ts[0] for ts in runs if len(ts) == 2]
        if not sp:
            raise NoCrossing("no returns in the probe ensemble")
        self.C_star = int(math.ceil(min(sp) / self.T_h)) - 1
        return self.C_star

    def _spacing(self, theta: float, k: int, cap: float) -> float:
        """(t_k - t_{k-1}) or +inf when the k-th return is beyond the cap."""
        ts = self.returns(theta, k + 1, cap)
        if len(ts) < k + 1:
            return float("inf")
        return ts[k] - ts[k - 1]

    def shoot(self, symbols: Sequence[int], n_scan: int = 40, max_iter: int = 60) -> HorseshoeResult:
        if self.C_star is None:
            self.calibrate()
        C, T = self.C_star, self.T_h
        lo, hi = 0.0, T
        theta = None
        prev_total = 0.0
        for k, m in enumerate(symbols, start=1):
            if m < 1:
                raise ValueError("symbols must be >= 1")
            a_thr, b_thr = (C + m) * T, (C + m + 1) * T
            mid = 0.5 * (a_thr + b_thr)
            cap = prev_total + 4 * T + b_thr + 20.0
            sp = lambda th: self._spacing(th, k, cap)
            found = self._branch(sp, lo, hi, a_thr, b_thr, n_scan, max_iter)
            if found is None:
                raise NoCrossing(f"symbol {m} at position {k} not found in the scan")
            theta, (lo, hi) = found
            ts = self.returns(theta, k + 1, cap)
            prev_total = ts[-1] - ts[0]
        ts = self.returns(theta, len(symbols) + 1, prev_total + 4 * T + 40)
        seq = hitting_symbols(ts, T, C)
        return HorseshoeResult(list(symbols), seq.symbols, float(theta), C, T, ts, h=self.h,
                               epsilon=self.coeffs.epsilon)

    def _branch(self, sp, lo, hi, a_thr, b_thr, n_scan, max_iter, n_peaks=4):
        """Point and theta-interval of a monotone branch where the spacing sweeps the window.

        The spacing diverges where the orbit lands on the stable manifold of the
        periodic orbit.  From such a peak the branch descends through [a_thr, b_thr);
        on it the phase at the next excursion sweeps a full period, which makes the
        nested search complete.  Returns (theta, (lo, hi)) or None.
        """
        xs = np.linspace(lo, hi, n_scan)
        vs = np.array([sp(x) for x in xs])
        n = len(xs)
        peaks = [i for i in range(n) if (i == 0 or vs[i] >= vs[i - 1]) and (i == n - 1 or vs[i] >= vs[i + 1])]
        peaks.sort(key=lambda i: -vs[i])
        for i in peaks[:n_peaks]:
            L, R = xs[max(i - 1, 0)], xs[min(i + 1, n - 1)]
            xp, vp = xs[i], vs[i]
            for _ in range(max_iter):
                if vp >= b_thr or R - L < 1e-15 * max(1.0, abs(xp)):
                    break
                m1, m2 = L + (R - L) / 3, R - (R - L) / 3
                v1, v2 = sp(m1), sp(m2)
                if v1 < v2:
                    L = m1
                    if v2 > vp:
                        xp, vp = m2, v2
                else:
                    R = m2
                    if v1 > vp:
                        xp, vp = m1, v1
            if vp < b_thr:
                continue
            for side in (-1, 1):
                idx = [q for q in range(n) if side * (xs[q] - xp) > 0]
                idx.sort(key=lambda q: abs(xs[q] - xp))
                prev_x, prev_v = xp, vp
                end = None
                for q in idx:
                    if vs[q] > prev_v:
                        break
                    prev_x, prev_v = xs[q], vs[q]
                    if vs[q] < a_thr:
                        break
                end = (prev_x, prev_v)
                if end[1] >= b_thr:
                    continue
                xe, ve = end
                x_b = self._bisect(lambda t: sp(t) - b_thr, xp, xe, vp - b_thr, max_iter)
                x_a = self._bisect(lambda t: sp(t) - a_thr, x_b, xe, 1.0, max_iter) if ve < a_thr else xe
                target = 0.5 * (b_thr + max(a_thr, ve))
                root = self._bisect(lambda t: sp(t) - target, x_b, x_a, b_thr - target, max_iter)
                return root, (min(x_b, x_a), max(x_b, x_a))
        return None

    @staticmethod
    def _bisect(f, a, b, fa, max_iter):
        for _ in range(max_iter):
            c = 0.5 * (a + b)
            fc = f(c)
            if fc == 0 or abs(b - a) < 1e-15 * max(1.0, abs(a)):
                return c
            if (fc < 0) == (fa < 0):
                a, fa = c, fc
            else:
                b = c
        return 0.5 * (a + b)

    def certify(self, res: HorseshoeResult, n_per_unit: int = 20) -> HorseshoeResult:
        """Attach the trajectory, the K_0 tracking deviation and per-excursion K_1 extremes."""
        st = seed_state(2, 0, self.po, res.theta, {1: self.seed_k})
        t_end = res.crossing_times[-1]
        tr = integrate(st, self.coeffs, (0.0, t_end), self.tol)
        ts = np.linspace(0.0, t_end, int(n_per_unit * t_end) + 2)
        _, K = tr.sample(ts)
        res.trajectory = tr
        res.k1_sup_dev = profile_deviation(ts, K[:, 0], self.po)[0]
        res.k2_sup, res.k2_inf = [], []
        ct = res.crossing_times
        for a, b in zip(ct[:-1], ct[1:]):
            m = (ts >= a) & (ts <= b)
            res.k2_sup.append(float(K[m, 1].max()))
            res.k2_inf.append(float(K[m, 1].min()))
        return res


def _probe_returns(shooter: HorseshoeShooter, theta: float) -> list[float]:
    return shooter.returns(theta, 2, 60 * shooter.T_h)


def profile_deviation(ts, K, po: PeriodicOrbit, n_grid: int = 64) -> tuple[float, float]:
    """min over t_p of sup |K(t) - Q(t - t_p)| with Q the periodic K-profile; returns (dev, t_p)."""
    ts = np.asarray(ts)
    K = np.asarray(K)

    def dev(tp):
        return float(np.max(np.abs(K - po.at(ts - tp)[1])))

    grid = np.linspace(0, po.T_h, n_grid, endpoint=False)
    vals = [dev(g) for g in grid]
    i = int(np.argmin(vals))
    w = po.T_h / n_grid
    r = minimize_scalar(dev, bounds=(grid[i] - w, grid[i] + w), method="bounded", options={"xatol": 1e-8})
    return float(min(r.fun, vals[i])), float(r.x)


# ---------------------------------------------------------------------------
# heteroclinic connections and transition chains


@dataclass
class ChainSpec:
    sequence: list
    radii: list
    h: float
    epsilon: float

    def __post_init__(self):
        if len(self.sequence) < 1:
            raise ValueError("empty chain")
        if len(self.radii) == 1 and len(self.sequence) > 1:
            self.radii = list(self.radii) * len(self.sequence)
        if len(self.radii) != len(self.sequence) or min(self.radii) <= 0:
            raise ValueError("one positive radius per visit required")
        if any(a == b for a, b in zip(self.sequence[:-1], self.sequence[1:])):
            raise ValueError("consecutive visits must change the active plane")


@dataclass
class Visit:
    plane: int
    t: float
    distance: float
    K_active: float
    E_active: float
    E_others_max: float

    def ok(self, radius: float, h: float) -> bool:
        return (self.distance < radius and self.K_active >= 0.5 and abs(self.E_active - h) <= h
                and self.E_others_max <= h)


@dataclass
class ChainResult:
    spec: ChainSpec
    theta: float
    visits: list
    energy_drift: float
    success: bool
    trajectory: object = None
    failing_leg: int | None = None
    k_ranges: list = field(default_factory=list)
    amplitudes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "sequence": self.spec.sequence, "radii": self.spec.radii, "h": self.spec.h,
            "epsilon": self.spec.epsilon, "theta": self.theta,
            "visits": [asdict(v) for v in self.visits], "energy_drift": self.energy_drift,
            "success": self.success, "failing_leg": self.failing_leg, "k_ranges": self.k_ranges,
            "amplitudes": self.amplitudes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


E_UNSTABLE = np.array([0.5, 0.5 * SQRT3])
E_STABLE = np.array([0.5, -0.5 * SQRT3])


class ChainShooter:
    """Shadowing of P_{i_0} -> P_{i_1} -> ... shot from the middle visit.

    Planes are 0-based.  At time 0 the middle plane sits at the top of its
    level-h periodic orbit; every other plane of the chain carries a small
    lower-chart seed u e_u + s e_s.  Forward legs are tuned by the unstable
    amplitudes u, backward legs by the stable amplitudes s, one per leg, so no
    nesting is needed as long as no plane repeats on the same side of the middle.
    Tiny Cartesian seeds keep full relative precision, unlike phase shifts.
    """

    def __init__(self, spec: ChainSpec, coeffs: ReducedCoeffs, tol: float = 1e-11, amp_max: float = 1e-3,
                 n_scan: int = 24):
        self.spec = spec
        self.coeffs = coeffs
        self.h = spec.h
        seq = list(spec.sequence)
        if max(seq) >= coeffs.N or min(seq) < 0:
            raise ValueError("sequence entries must be plane indices 0..N-1")
        self.m = (len(seq) - 1) // 2
        self.fwd = seq[self.m + 1:]
        self.bwd = seq[:self.m][::-1]
        for side in (self.fwd, self.bwd):
            if len(set(side)) != len(side) or seq[self.m] in side:
                raise ShadowingLost("a plane repeats on one side of the middle visit; unsupported", leg=0)
        self.pos = {j: periodic_orbit(self.h, 0, _single(coeffs, j)) for j in set(seq)}
        po = self.pos[seq[self.m]]
        i = int(np.argmax(po.K))
        self.top_phase = float(po.t[i])
        self.u: dict[int, float] = {}
        self.s: dict[int, float] = {}
        self.tol = tol
        self.amp_max = amp_max
        self.n_scan = n_scan
        self.T = max(p.T_h for p in self.pos.values())
        self.calls = 0

    def middle(self) -> ReducedState:
        seq = self.spec.sequence
        act = seq[self.m]
        z = np.zeros(2 * self.coeffs.N)
        psi, K = self.pos[act].at(self.top_phase)
        r = math.sqrt(2 * float(K))
        z[2 * act], z[2 * act + 1] = r * math.cos(psi / 2), r * math.sin(psi / 2)
        for j in range(self.coeffs.N):
            if j != act:
                z[2 * j:2 * j + 2] = self.u.get(j, 0.0) * E_UNSTABLE + self.s.get(j, 0.0) * E_STABLE
        return ReducedState(z, ("L",) * self.coeffs.N)

    def _legs(self, sgn: int, n: int):
        """Integrate through n legs on one side; list of (t, state, E_giving) (None if a leg is missing)."""
        self.calls += 1
        seq = self.spec.sequence
        planes = self.fwd if sgn > 0 else self.bwd
        st, t = self.middle(), 0.0
        out, trajs = [], []
        give = seq[self.m]
        for k in range(n):
            recv = planes[k]
            ev = lambda tt, s, r=recv: _K_one(s, r) - 0.5
            top = _psi_zero_event(recv)
            horizon = t + sgn * (3.5 * self.T + 40.0)
            tr = integrate(st, self.coeffs, (t, horizon), self.tol, events=[ev, top])
            # handover pass (rise then fall, mirrored backwards), then the top of the next pass
            stage, hit = 0, None
            for k_ev, te, se in tr.events:
                if k_ev == 1:
                    if stage == 3 and _K_one(se, recv) > 0.5:
                        hit = (te, se)
                        break
                    continue
                rising = (wrap(se.psi[recv]) > 0) == (sgn > 0)
                if stage in (0, 2) and rising:
                    stage += 1
                elif stage == 1 and not rising:
                    stage = 2
            if hit is None:
                trajs.append(tr)
                out.append(None)
                break
            tr = integrate(st, self.coeffs, (t, hit[0]), self.tol)
            trajs.append(tr)
            st, t = tr.final, tr.t_end
            out.append((t, st, plane_energy(st, give, self.coeffs)))
            give = recv
        return out, trajs

    def _tune(self, sgn: int, k: int, t_prev: float):
        """Amplitude for leg k on one side: the energy of the handing plane changes sign across it."""
        planes = self.fwd if sgn > 0 else self.bwd
        store = self.u if sgn > 0 else self.s
        recv = planes[k]
        leg_visit = self.m + sgn * (k + 1)
        a_min = -math.log(self.amp_max)
        a_lo = max(a_min, 0.5 * SQRT3 * (abs(t_prev) + 1.0))
        a_hi = a_lo + 0.5 * SQRT3 * (1.5 * self.T + 8.0)

        def g(a):
            store[recv] = math.exp(-a)
            legs, _ = self._legs(sgn, k + 1)
            if len(legs) < k + 1 or legs[k] is None:
                return float("nan")
            return legs[k][2]

        grid = np.linspace(a_lo, a_hi, self.n_scan)
        vals = np.array([g(a) for a in grid])
        for i in range(len(grid) - 1):
            if not (np.isfinite(vals[i]) and np.isfinite(vals[i + 1]) and vals[i] * vals[i + 1] < 0):
                continue
            a, b, fa = grid[i], grid[i + 1], vals[i]
            ok = True
            for _ in range(100):
                c = 0.5 * (a + b)
                fc = g(c)
                if not np.isfinite(fc):
                    ok = False
                    break
                if abs(fc) <= 1e-3 * self.h or abs(b - a) < 1e-15 * c:
                    a = b = c
                    break
                if (fc < 0) == (fa < 0):
                    a, fa = c, fc
                else:
                    b = c
            if not ok:
                continue
            g(0.5 * (a + b))
            legs, _ = self._legs(sgn, k + 1)
            v = self._visit(legs[k][0], legs[k][1], recv)
            if v.ok(self.spec.radii[leg_visit], self.h):
                return legs[k][0]
        store.pop(recv, None)
        raise ShadowingLost(f"no admissible handover on leg {leg_visit}", leg=leg_visit)

    def shoot(self):
        """Tune all amplitudes; returns (visits, trajectory) over the whole chain."""
        t = 0.0
        for k in range(len(self.fwd)):
            t = self._tune(+1, k, t)
        t = 0.0
        for k in range(len(self.bwd)):
            t = self._tune(-1, k, t)
        if self.bwd and self.fwd:
            # backward seeds shift the forward legs slightly: tune them once more
            t = 0.0
            for k in range(len(self.fwd)):
                t = self._tune(+1, k, t)
        return self.visits()

    def visits(self):
        seq = self.spec.sequence
        fl, ft = self._legs(+1, len(self.fwd))
        bl, bt = self._legs(-1, len(self.bwd))
        mid = self._visit(0.0, self.middle(), seq[self.m])
        vis = [self._visit(l[0], l[1], seq[self.m - k - 1]) for k, l in enumerate(bl) if l is not None][::-1]
        vis.append(mid)
        vis += [self._visit(l[0], l[1], seq[self.m + k + 1]) for k, l in enumerate(fl) if l is not None]
        segs = []
        for tr in bt[::-1]:
            for s in tr.segments[::-1]:
                segs.append(Segment(s.t1, s.t0, s.chart, s.sol, s.t[::-1].copy(), s.z[:, ::-1].copy()))
        for tr in ft:
            segs += tr.segments
        return vis, Trajectory(segs, self.coeffs)

    def _visit(self, t: float, st: ReducedState, plane: int) -> Visit:
        E = plane_energies(st, self.coeffs)
        po = self.pos[plane]
        cart = np.array([st.cartesian(j) for j in range(st.N)])
        pts = po.cartesian()
        x, y = cart[plane]
        # the orbit curve and its mirror image (x, y) -> (-x, -y) describe the same (psi, K) set
        d_act = float(min(np.min(np.hypot(pts[:, 0] - x, pts[:, 1] - y)),
                          np.min(np.hypot(pts[:, 0] + x, pts[:, 1] + y))))
        others = [j for j in range(st.N) if j != plane]
        dist = math.sqrt(d_act ** 2 + sum(float(cart[j] @ cart[j]) for j in others))
        return Visit(plane, float(t), dist, float(st.K[plane]) + 1e-12, float(E[plane]),
                     float(max(abs(E[j]) for j in others)) if others else 0.0)


def _single(coeffs: ReducedCoeffs, j: int) -> ReducedCoeffs:
    """One-plane coefficients of plane j (periodic_orbit works on plane 0 of its input)."""
    return ReducedCoeffs.synthetic(coeffs.epsilon, [coeffs.a[j]], [coeffs.b[j]], [coeffs.c[j]], np.zeros((1, 1)))


def chain_model(L, epsilon: float = 0.01, delta: float | None = None) -> ReducedCoeffs:
    """delta-model planes with the couplings of a resonant set, scaled to max |d_ij| = 1."""
    from .model_coeffs import reduced_coeffs
    d = np.array(reduced_coeffs(L).d, dtype=float)
    m = float(np.max(np.abs(d)))
    if m == 0:
        raise NoCrossing("all couplings vanish")
    N = L.N
    dm = delta if delta is not None else epsilon
    co = ReducedCoeffs.synthetic(dm, np.zeros(N), -np.ones(N), np.zeros(N), d / m)
    return co.with_epsilon(epsilon) if dm != epsilon else co


def chain_shadow(spec: ChainSpec, coeffs: ReducedCoeffs, tol: float = 1e-11) -> ChainResult:
    """Shadowing orbit visiting the neighbourhoods in order.

    Raises ShadowingLost (with the failing visit index) when a leg cannot be
    connected or a visit misses its neighbourhood.
    """
    sh = ChainShooter(spec, coeffs, tol)
    vis, tr = sh.shoot()
    E0 = H_value(sh.middle(), coeffs)
    E = tr.energies() if tr.segments else np.array([E0])
    drift = float(np.max(np.abs(E - E0)))
    res = ChainResult(spec, 0.0, vis, drift, False, tr)
    res.amplitudes = {"unstable": dict(sh.u), "stable": dict(sh.s)}
    res.k_ranges = _k_ranges(tr, [v.t for v in vis])
    if len(vis) != len(spec.sequence):
        raise ShadowingLost("chain ended early", leg=len(vis))
    for l, (v, r) in enumerate(zip(vis, spec.radii)):
        if not v.ok(r, spec.h):
            raise ShadowingLost(f"visit {l} misses its neighbourhood ({v})", leg=l)
    res.success = True
    return res


def _k_ranges(tr: Trajectory, times) -> list:
    out = []
    for a, b in zip(times[:-1], times[1:]):
        ts = np.linspace(a, b, 400)
        _, K = tr.sample(ts)
        out.append([float(x) for x in (K.max(axis=0) - K.min(axis=0))])
    return out


def find_heteroclinic(i: int, j: int, coeffs: ReducedCoeffs, h: float, epsilon: float | None = None,
                      delta: float | None = None) -> dict:
    """Connection P_i -> P_j at energy h (i != j), or the homoclinic of the level-0 saddle (i == j, N = 2).

    For i != j the connection is shot backwards from P_j; returns the stable
    amplitude of plane i and the visits.
    """
    co = coeffs if epsilon is None else coeffs.with_epsilon(epsilon)
    if i == j:
        return find_homoclinic(co, delta if delta is not None else co.epsilon)
    if co.epsilon == 0:
        raise NoCrossing("epsilon = 0: the distance equals the h-offset and never vanishes")
    spec = ChainSpec([i, j], [1.0], h, co.epsilon)
    sh = ChainShooter(spec, co)
    vis, tr = sh.shoot()
    return {"amplitude": sh.s.get(i), "visits": [asdict(v) for v in vis], "trajectory": tr}


# ---------------------------------------------------------------------------
# regime segmentation


@dataclass
class Regime:
    kind: str  # "beating" or "transition"
    t0: float
    t1: float
    active: int | None
    deviation: float | None = None


def regime_segmentation(ts, K, eps_threshold: float, profiles: dict | None = None,
                        crossing_plane: int | None = None) -> dict:
    """Split a sampled trajectory into beating intervals I_p and transition intervals J.

    K has shape (len(ts), N).  A beating interval is a maximal run where exactly one
    plane is above eps_threshold and (when a profile is given) tracks it within
    eps_threshold.  With crossing_plane, also reports crossings of K = 1/2 of that
    plane and the sup/inf certificates between them.
    """
    ts = np.asarray(ts, dtype=float)
    K = np.asarray(K, dtype=float)
    N = K.shape[1]
    above = K > eps_threshold
    lab = np.where(above.sum(axis=1) == 1, np.argmax(above, axis=1), -1)
    regimes = []
    i = 0
    while i < len(ts):
        j = i
        while j + 1 < len(ts) and lab[j + 1] == lab[i]:
            j += 1
        act = int(lab[i])
        kind = "beating" if act >= 0 else "transition"
        dev = None
        if act >= 0 and profiles and act in profiles and j > i:
            dev = profile_deviation(ts[i:j + 1], K[i:j + 1, act], profiles[act])[0]
            if dev > eps_threshold:
                kind = "transition"
        regimes.append(Regime(kind, float(ts[i]), float(ts[j]), act if act >= 0 else None, dev))
        i = j + 1
    # merge adjacent transitions
    merged = []
    for r in regimes:
        if merged and r.kind == "transition" and merged[-1].kind == "transition":
            merged[-1].t1 = r.t1
        else:
            merged.append(r)
    out = {"intervals": [asdict(r) for r in merged]}
    if crossing_plane is not None:
        k = K[:, crossing_plane] - 0.5
        idx = np.nonzero(np.sign(k[:-1]) != np.sign(k[1:]))[0]
        cross = [float(ts[q] - k[q] * (ts[q + 1] - ts[q]) / (k[q + 1] - k[q])) for q in idx]
        up = [c for c, q in zip(cross, idx) if k[q] < 0]
        down = [c for c, q in zip(cross, idx) if k[q] > 0]
        cert = []
        for a in up:
            nxt = [d for d in down if d > a]
            if not nxt:
                continue
            b = nxt[0]
            nxt_up = [u for u in up if u > b]
            m_hi = (ts >= a) & (ts <= b)
            entry = {"t_up": a, "t_down": b, "sup": float(K[m_hi, crossing_plane].max())}
            if nxt_up:
                m_lo = (ts >= b) & (ts <= nxt_up[0])
                entry["inf"] = float(K[m_lo, crossing_plane].min())
            cert.append(entry)
        out["crossings"] = cross
        out["certificates"] = cert
    return out
