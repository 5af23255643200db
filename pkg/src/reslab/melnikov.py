"""Melnikov potentials and functions of the reduced model, in closed form and by quadrature.

Poisson bracket convention: {f, g} = f_psi g_K - f_K g_psi, so that df/dt = {f, H}.

Notation: k(tau) = tau/(1 - exp(-sqrt3 tau)) is the overlap kernel of two
heteroclinic profiles and f(tau) = tau coth(sqrt3 tau/2) = k(tau) + k(-tau).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import expit

from .errors import DegenerateHessian, NoConvergence, NonDecaying, QuadratureFail
from .model_coeffs import D_matrix, ReducedCoeffs
from .toy_dynamics import (PSI_STAR, SQRT3, PeriodicOrbit, delta_model, homoclinic_shift,
                           modified_homoclinic_components, periodic_orbit)

C_HALF = SQRT3 / 2.0


@dataclass(frozen=True)
class QuadratureSettings:
    abs_tol: float = 1e-11
    t_cut: float = 18.0
    limit: int = 400

    def __post_init__(self):
        if self.t_cut < 10:
            raise ValueError("t_cut must be at least 10")


DEFAULT_Q = QuadratureSettings()


def _quad(fun: Callable[[float], float], a: float, b: float, s: QuadratureSettings,
          points: Sequence[float] = ()) -> float:
    pts = sorted(p for p in points if a < p < b)
    edges = [a] + pts + [b]
    tot, err = 0.0, 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, e = quad(fun, lo, hi, epsabs=s.abs_tol / len(edges), epsrel=0.0, limit=s.limit)
        tot += v
        err += e
    if err > 10 * s.abs_tol:
        raise QuadratureFail(f"quadrature error estimate {err:.2e} exceeds tolerance")
    return tot


# ---------------------------------------------------------------------------
# kernel and the even profile f


def kernel_integral(tau: float) -> float:
    """tau/(1 - exp(-sqrt3 tau)), equal to 1/sqrt3 at tau = 0."""
    tau = float(tau)
    if abs(tau) < 1e-6:
        return 1.0 / SQRT3 + tau / 2.0 + SQRT3 * tau * tau / 12.0
    return tau / -math.expm1(-SQRT3 * tau)


def logistic(t):
    """Heteroclinic profile K+(t) = 1/(1 + exp(-sqrt3 t))."""
    return expit(SQRT3 * np.asarray(t, dtype=float))


def kernel_quadrature(tau: float, settings: QuadratureSettings = DEFAULT_Q) -> float:
    """Quadrature of int K+(t + tau)(1 - K+(t)) dt."""
    w = settings.t_cut + abs(tau)
    g = lambda t: float(expit(SQRT3 * (t + tau)) * expit(-SQRT3 * t))
    return _quad(g, -w, w, settings, points=(-tau, 0.0))


def coth_profile(tau: float) -> tuple[float, float, float]:
    """f(tau) = tau coth(sqrt3 tau/2) and its first two derivatives."""
    x = C_HALF * tau
    if abs(x) < 1e-3:
        x2 = x * x
        g = 1 + x2 / 3 - x2 * x2 / 45 + 2 * x2 ** 3 / 945
        g1 = 2 * x / 3 - 4 * x * x2 / 45 + 12 * x * x2 * x2 / 945
        g2 = 2.0 / 3 - 12 * x2 / 45 + 60 * x2 * x2 / 945
        return g / C_HALF, g1, C_HALF * g2
    cth = 1.0 / math.tanh(x)
    csch2 = cth * cth - 1.0
    f = tau * cth
    f1 = cth - x * csch2
    f2 = 2 * C_HALF * csch2 * (x * cth - 1.0)
    return f, f1, f2


def second_derivative_bracket(tau: float) -> float:
    """(2 - sqrt3 tau coth(sqrt3 tau/2)) csch^2(sqrt3 tau/2); the limit at 0 is -2/3."""
    x = C_HALF * tau
    if abs(x) < 1e-3:
        return -2.0 / 3.0 + 4.0 * x * x / 15.0
    cth = 1.0 / math.tanh(x)
    return (2.0 - 2.0 * x * cth) * (cth * cth - 1.0)


# ---------------------------------------------------------------------------
# heteroclinic potential


def het_reduced_potential(tau0: float, coeffs: ReducedCoeffs) -> tuple[float, float, float]:
    """Reduced potential along gamma_+ without its additive constant, with derivatives.

    L(tau0) = (a1+b1) k(tau0) + (a2+b2) k(-tau0), tau0 = tau1 - tau2.
    """
    A = float(coeffs.a[0] + coeffs.b[0])
    B = float(coeffs.a[1] + coeffs.b[1])
    f, f1, _ = coth_profile(tau0)
    L = 0.5 * (A + B) * f + 0.5 * (A - B) * tau0
    dL = 0.5 * (A + B) * f1 + 0.5 * (A - B)
    d2L = -(A + B) * (SQRT3 / 4.0) * second_derivative_bracket(tau0)
    return L, dL, d2L


def het_eta_closed(coeffs: ReducedCoeffs) -> float:
    """Additive constant of the heteroclinic potential."""
    b, c = coeffs.b, coeffs.c
    return -(b[0] + b[1] + 0.5 * (c[0] + c[1])) / SQRT3


def _H1_full(psi, K, co: ReducedCoeffs) -> float:
    """eps-part of the reduced Hamiltonian divided by eps."""
    K = np.asarray(K)
    tot = float(np.sum(co.a * K + co.b * K * K + co.c * K * (1 - K) * np.cos(psi)))
    return tot + 0.5 * float(K @ co.d @ K)


def _H1_delta(psi, K, co: ReducedCoeffs) -> float:
    """Perturbation of the modified splitting: b -> b + 1."""
    K = np.asarray(K)
    tot = float(np.sum(co.a * K + (co.b + 1) * K * K + co.c * K * (1 - K) * np.cos(psi)))
    return tot + 0.5 * float(K @ co.d @ K)


def energy_matching_residual(coeffs: ReducedCoeffs) -> float:
    return float(coeffs.a[0] + coeffs.b[0] + coeffs.a[1] + coeffs.b[1] + coeffs.d[0, 1])


def potential_quadrature(family: str, tau_vec, coeffs: ReducedCoeffs, delta: float | None = None,
                         h: float | None = None, settings: QuadratureSettings = DEFAULT_Q) -> float:
    """int H1 along the unperturbed orbit with phases tau_vec.

    family: "heteroclinic" (along gamma_+, needs energy matching) or
    "delta_homoclinic" (along the modified loops with parameter delta).
    """
    tau = np.asarray(tau_vec, dtype=float)
    span = float(np.max(np.abs(tau))) if len(tau) else 0.0
    if family == "heteroclinic":
        r = energy_matching_residual(coeffs) if coeffs.N == 2 else 0.0
        if abs(r) > 1e-6:
            raise NonDecaying(f"energy matching violated (residual {r:.3e})")
        psi = np.full(len(tau), PSI_STAR)
        g = lambda t: _H1_full(psi, logistic(tau + t), coeffs)
        w = settings.t_cut + span
        return _quad(g, -w - span, w + span, settings, points=tuple(-tau))
    if family == "delta_homoclinic":
        if delta is None or not 0 < delta <= 0.2:
            raise ValueError("delta must lie in (0, 0.2]")
        p = homoclinic_shift(delta)

        def g(t):
            psi, K = modified_homoclinic_components(tau + t, delta)
            return _H1_delta(psi, K, coeffs)

        w = settings.t_cut + p + span
        pts = tuple(-tau - p) + tuple(-tau + p)
        return _quad(g, -w - span, w + span, settings, points=pts)
    raise ValueError(f"unknown family {family!r}")


def delta_overlap(tau0: float, delta: float, settings: QuadratureSettings = DEFAULT_Q,
                  derivative: bool = False) -> float:
    """int K0(s + tau0) K0(s) ds along the modified loop (or its tau0-derivative)."""
    p = homoclinic_shift(delta)
    w = settings.t_cut + p + abs(tau0)

    def g(s):
        _, K1 = modified_homoclinic_components(s + tau0, delta)
        _, K2 = modified_homoclinic_components(s, delta)
        if derivative:
            K1 = _dK0(s + tau0, delta)
        return float(K1 * K2)

    return _quad(g, -w, w, settings, points=(-p, p, -tau0 - p, -tau0 + p))


def _dK0(t, delta):
    t = float(np.clip(t, -350, 350))
    den = 1.0 + (delta / 3.0) * (2.0 * math.cosh(SQRT3 * t) - 1.0)
    return -(delta / 3.0) * 2.0 * SQRT3 * math.sinh(SQRT3 * t) / (den * den)


def delta_homoclinic_potential(tau0: float, coeffs: ReducedCoeffs, delta: float,
                               settings: QuadratureSettings = DEFAULT_Q) -> float:
    """The tau0-dependent part d12 * overlap (N = 2)."""
    return float(coeffs.d[0, 1]) * delta_overlap(tau0, delta, settings)


def delta_leading_order(tau0: float, coeffs: ReducedCoeffs) -> float:
    """Leading order in delta of the tau0-dependent part: -d12 f(tau0)."""
    return -float(coeffs.d[0, 1]) * coth_profile(tau0)[0]


# ---------------------------------------------------------------------------
# N-tuple leading order


def n_tuple_potential(tau_tilde, coeffs: ReducedCoeffs) -> tuple[float, np.ndarray, np.ndarray]:
    """Leading order -sum_{i<j} d_ij f(tau_i - tau_j) with tau_N = 0.

    Returns (value, gradient, Hessian at the origin); the Hessian equals -D/sqrt3.
    """
    N = coeffs.N
    tt = np.append(np.asarray(tau_tilde, dtype=float), 0.0)
    val = 0.0
    grad = np.zeros(N)
    for i in range(N):
        for j in range(i + 1, N):
            f, f1, _ = coth_profile(tt[i] - tt[j])
            val -= coeffs.d[i, j] * f
            grad[i] -= coeffs.d[i, j] * f1
            grad[j] += coeffs.d[i, j] * f1
    hess = -D_matrix(coeffs) / SQRT3
    return val, grad[:-1], hess


def n_tuple_hessian(tau_tilde, coeffs: ReducedCoeffs) -> np.ndarray:
    N = coeffs.N
    tt = np.append(np.asarray(tau_tilde, dtype=float), 0.0)
    H = np.zeros((N, N))
    for i in range(N):
        for j in range(i + 1, N):
            f2 = coth_profile(tt[i] - tt[j])[2]
            w = coeffs.d[i, j] * f2
            H[i, i] -= w
            H[j, j] -= w
            H[i, j] += w
            H[j, i] += w
    return H[:-1, :-1]


def n_tuple_quadrature(tau_tilde, coeffs: ReducedCoeffs, settings: QuadratureSettings = DEFAULT_Q) -> float:
    """Oracle: -sum d_ij int [K+_i(1 - K+_j) + K+_j(1 - K+_i)] along heteroclinic profiles."""
    N = coeffs.N
    tt = np.append(np.asarray(tau_tilde, dtype=float), 0.0)
    tot = 0.0
    for i in range(N):
        for j in range(i + 1, N):
            if coeffs.d[i, j] == 0:
                continue
            u = tt[i] - tt[j]
            tot -= coeffs.d[i, j] * (kernel_quadrature(u, settings) + kernel_quadrature(-u, settings))
    return tot


def n_tuple_delta_quadrature(tau_tilde, coeffs: ReducedCoeffs, delta: float,
                             settings: QuadratureSettings = DEFAULT_Q) -> float:
    """sum_{i<j} d_ij int K0_i K0_j along modified loops (tau-dependent part of the potential)."""
    N = coeffs.N
    tt = np.append(np.asarray(tau_tilde, dtype=float), 0.0)
    tot = 0.0
    for i in range(N):
        for j in range(i + 1, N):
            if coeffs.d[i, j] != 0:
                tot += coeffs.d[i, j] * delta_overlap(tt[i] - tt[j], delta, settings)
    return tot


# ---------------------------------------------------------------------------
# critical points


@dataclass
class MelnikovReport:
    family: str
    tau_star: list
    value_at_star: float
    hessian: list
    nondegenerate: bool
    method: str
    delta: float | None = None
    h: float | None = None
    epsilon: float | None = None
    constants: dict = field(default_factory=dict)
    gradient_norm: float = 0.0
    iterations: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def is_nondegenerate(H) -> bool:
    H = np.atleast_2d(np.asarray(H, dtype=float))
    scale = float(np.max(np.abs(H))) if H.size else 0.0
    if scale == 0.0:
        return False
    smin = float(np.min(np.linalg.svd(H, compute_uv=False)))
    return abs(float(np.linalg.det(H))) > 1e-8 * scale ** H.shape[0] and smin > 1e-8 * scale


def _newton(grad_hess, x0, tol=1e-10, maxit=50):
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    for it in range(1, maxit + 1):
        g, H = grad_hess(x)
        if np.linalg.norm(g) < tol:
            return x, it
        try:
            step = np.linalg.solve(np.atleast_2d(H), g)
        except np.linalg.LinAlgError:
            raise DegenerateHessian("singular Hessian during Newton iteration")
        lam = 1.0
        n0 = np.linalg.norm(g)
        while lam > 1e-4:
            xn = x - lam * step
            if np.linalg.norm(grad_hess(xn)[0]) < n0:
                break
            lam /= 2
        x = x - lam * step
    g, _ = grad_hess(x)
    if np.linalg.norm(g) < tol:
        return x, maxit
    raise NoConvergence(f"Newton did not converge (|grad| = {np.linalg.norm(g):.2e})")


def find_critical_point(family: str, coeffs: ReducedCoeffs, delta: float | None = None,
                        h: float | None = None, init=None, tol: float = 1e-10,
                        settings: QuadratureSettings = DEFAULT_Q) -> MelnikovReport:
    """Nondegenerate critical point of a Melnikov potential.

    family: "heteroclinic" (closed form), "delta_homoclinic" (quadrature along the
    modified loops, N = 2), "chain_vector" (N-tuple leading order).
    """
    if family == "heteroclinic":
        def gh(x):
            _, d1, d2 = het_reduced_potential(x[0], coeffs)
            return np.array([d1]), np.array([[d2]])

        A = coeffs.a[0] + coeffs.b[0]
        B = coeffs.a[1] + coeffs.b[1]
        if A * B <= 0:
            raise DegenerateHessian("(a1+b1)(a2+b2) > 0 fails: no critical point")
        # f'(tau) = (B - A)/(A + B) has a unique root; bracket then polish
        target = (B - A) / (A + B)
        lo, hi = -1.0, 1.0
        while coth_profile(lo)[1] > target:
            lo *= 2
        while coth_profile(hi)[1] < target:
            hi *= 2
        x0 = brentq(lambda t: coth_profile(t)[1] - target, lo, hi, xtol=1e-14)
        x, it = _newton(gh, [x0] if init is None else init, tol)
        val = het_reduced_potential(x[0], coeffs)[0]
        g, H = gh(x)
        rep = MelnikovReport("heteroclinic", x.tolist(), val, H.tolist(), is_nondegenerate(H),
                             "closed_form", epsilon=coeffs.epsilon,
                             constants={"eta_tilde": het_eta_closed(coeffs)},
                             gradient_norm=float(np.linalg.norm(g)), iterations=it)
    elif family == "delta_homoclinic":
        if delta is None:
            raise ValueError("delta required")
        d12 = float(coeffs.d[0, 1])

        def grad(t):
            return d12 * delta_overlap(t, delta, settings, derivative=True)

        def gh(x, hstep=1e-4):
            g = grad(x[0])
            H = (grad(x[0] + hstep) - grad(x[0] - hstep)) / (2 * hstep)
            return np.array([g]), np.array([[H]])

        _, H0 = gh(np.zeros(1))
        if not is_nondegenerate(H0):
            raise DegenerateHessian("d12 = 0: the modified potential is constant")
        x, it = _newton(gh, [0.0] if init is None else init, tol)
        g, H = gh(x)
        rep = MelnikovReport("delta_homoclinic", x.tolist(), delta_homoclinic_potential(x[0], coeffs, delta, settings),
                             H.tolist(), is_nondegenerate(H), "quadrature", delta=delta,
                             epsilon=coeffs.epsilon, gradient_norm=float(np.linalg.norm(g)),
                             iterations=it)
    elif family == "chain_vector":
        def gh(x):
            _, g, _ = n_tuple_potential(x, coeffs)
            return g, n_tuple_hessian(x, coeffs)

        H0 = n_tuple_hessian(np.zeros(coeffs.N - 1), coeffs)
        if not is_nondegenerate(H0):
            raise DegenerateHessian("det D = 0: degenerate Hessian at the origin")
        x, it = _newton(gh, np.zeros(coeffs.N - 1) if init is None else init, tol)
        g, H = gh(x)
        rep = MelnikovReport("chain_vector", x.tolist(), n_tuple_potential(x, coeffs)[0], H.tolist(),
                             is_nondegenerate(H), "closed_form", delta=delta, epsilon=coeffs.epsilon,
                             gradient_norm=float(np.linalg.norm(g)), iterations=it)
    else:
        raise ValueError(f"unknown family {family!r}")
    if not rep.nondegenerate:
        raise DegenerateHessian(f"degenerate critical point at {rep.tau_star}")
    return rep


# ---------------------------------------------------------------------------
# periodic orbits: Melnikov function and chain distance vector


def modified_plane_coeffs(delta: float) -> ReducedCoeffs:
    """Single plane carrying K(1-K)(1+2cos psi) - delta K^2."""
    return delta_model(1, delta)


def aligned_periodic_orbit(h: float, delta: float) -> PeriodicOrbit:
    """Level-h orbit of the modified plane, phase 0 at its top (psi = 0, upper branch).

    As h -> 0 it converges to the loop parametrized with its top at time 0.
    """
    po = periodic_orbit(h, 0, modified_plane_coeffs(delta))
    # shift phase so that s = 0 sits at the maximum of K
    s = np.linspace(0, po.T_h, 4097)
    _, K = po.at(s)
    k = int(np.argmax(K))
    lo, hi = s[max(k - 1, 0)], s[min(k + 1, len(s) - 1)]
    from scipy.optimize import minimize_scalar
    r = minimize_scalar(lambda x: -po.at(x)[1], bounds=(lo, hi), method="bounded",
                        options={"xatol": 1e-13})
    shift = float(r.x)
    base = po.sol
    T = po.T_h

    def shifted(x, base=base, shift=shift, T=T):
        return base(np.mod(np.asarray(x) + shift, T))

    po2 = PeriodicOrbit(h, 0, po.t, *shifted(po.t), T, delta, shifted)
    return po2


def _bracket_integrand(k: int, psi, K, co: ReducedCoeffs, only_coupling: bool) -> float:
    """{H0^(k), H1} where H0^(k) is the modified plane Hamiltonian."""
    Hpsi = -2.0 * K[k] * (1 - K[k]) * math.sin(psi[k])
    HK = (1 - 2 * K[k]) * (1 + 2 * math.cos(psi[k])) - 2 * 0.0 * K[k]
    coup = sum(co.d[l, k] * K[l] for l in range(co.N) if l != k)
    if only_coupling:
        return Hpsi * coup
    h1K = co.a[k] + 2 * (co.b[k] + 1) * K[k] + co.c[k] * (1 - 2 * K[k]) * math.cos(psi[k]) + coup
    h1psi = -co.c[k] * K[k] * (1 - K[k]) * math.sin(psi[k])
    # H0_K of the modified plane includes -2 delta K; it multiplies h1psi
    return Hpsi * h1K - HK * h1psi


def _bracket_integrand_delta(k, psi, K, co, delta, only_coupling):
    if only_coupling:
        return _bracket_integrand(k, psi, K, co, True)
    Hpsi = -2.0 * K[k] * (1 - K[k]) * math.sin(psi[k])
    HK = (1 - 2 * K[k]) * (1 + 2 * math.cos(psi[k])) - 2 * delta * K[k]
    coup = sum(co.d[l, k] * K[l] for l in range(co.N) if l != k)
    h1K = co.a[k] + 2 * (co.b[k] + 1) * K[k] + co.c[k] * (1 - 2 * K[k]) * math.cos(psi[k]) + coup
    h1psi = -co.c[k] * K[k] * (1 - K[k]) * math.sin(psi[k])
    return Hpsi * h1K - HK * h1psi


def melnikov_homoclinic(tau0: float, coeffs: ReducedCoeffs, delta: float, k: int = 1,
                        settings: QuadratureSettings = DEFAULT_Q) -> float:
    """int {H0^(k), H1} along the modified loops with tau = (tau0, 0) (N = 2)."""
    p = homoclinic_shift(delta)
    tau = np.array([tau0, 0.0])

    def g(t):
        psi, K = modified_homoclinic_components(tau + t, delta)
        return _bracket_integrand_delta(k, psi, K, coeffs, delta, False)

    w = settings.t_cut + p + abs(tau0)
    return _quad(g, -w, w, settings, points=(-p, p, -tau0 - p, -tau0 + p))


def melnikov_periodic(h: float, delta: float, coeffs: ReducedCoeffs, tau0: float,
                      settings: QuadratureSettings = DEFAULT_Q,
                      orbit: PeriodicOrbit | None = None) -> float:
    """int {H0^(2), H1} along (periodic orbit of plane 1 at level h, loop of plane 2), tau = (tau0, 0)."""
    po = orbit or aligned_periodic_orbit(h, delta)
    p = homoclinic_shift(delta)

    def g(t):
        ps1, K1 = po.at(tau0 + t)
        ps2, K2 = modified_homoclinic_components(t, delta)
        return _bracket_integrand_delta(1, np.array([ps1, ps2]), np.array([K1, K2]), coeffs, delta, False)

    w = settings.t_cut + p
    return _quad(g, -w, w, settings, points=(-p, p))


def melnikov_periodic_limit(delta: float, coeffs: ReducedCoeffs, tau0: float,
                            settings: QuadratureSettings = DEFAULT_Q) -> float:
    """The h -> 0 limit: both planes on the modified loop."""
    return melnikov_homoclinic(tau0, coeffs, delta, k=1, settings=settings)


def chain_distance_vector(i: int, j: int, tau_vec, coeffs: ReducedCoeffs, h: float, delta: float,
                          settings: QuadratureSettings = DEFAULT_Q,
                          orbit: PeriodicOrbit | None = None) -> np.ndarray:
    """First-order distance d_{0,h} + eps M_h between W^u(P_i) and W^s(P_j) (0-based planes).

    Components k = 0..N-2.  Plane i (resp. j) runs on the level-h periodic orbit in
    the backward (resp. forward) half-line integral; the other planes on modified loops.
    """
    if i == j:
        raise ValueError("i and j must differ")
    N = coeffs.N
    tau = np.asarray(tau_vec, dtype=float)
    po = orbit or aligned_periodic_orbit(h, delta)
    p = homoclinic_shift(delta)
    out = np.zeros(N - 1)
    for k in range(N - 1):
        out[k] = h * ((k == i) - (k == j))
    if coeffs.epsilon == 0:
        return out

    def state(t, periodic_plane):
        psi = np.empty(N)
        K = np.empty(N)
        for l in range(N):
            if l == periodic_plane:
                psi[l], K[l] = po.at(tau[l] + t)
            else:
                a, b = modified_homoclinic_components(tau[l] + t, delta)
                psi[l], K[l] = float(a), float(b)
        return psi, K

    w = settings.t_cut + p + float(np.max(np.abs(tau)))
    pts = tuple(-tau - p) + tuple(-tau + p)
    for k in range(N - 1):
        g_back = lambda t: _bracket_integrand(k, *state(t, i), coeffs, True)
        g_fwd = lambda t: _bracket_integrand(k, *state(t, j), coeffs, True)
        Mk = _quad(g_back, -w, 0.0, settings, pts) + _quad(g_fwd, 0.0, w, settings, pts)
        out[k] += coeffs.epsilon * Mk
    return out


def chain_limit_vector(tau_vec, coeffs: ReducedCoeffs, delta: float,
                       settings: QuadratureSettings = DEFAULT_Q) -> np.ndarray:
    """M_0: full-line integrals of {H0^(k), H~1} along the modified loops."""
    N = coeffs.N
    tau = np.asarray(tau_vec, dtype=float)
    p = homoclinic_shift(delta)
    w = settings.t_cut + p + float(np.max(np.abs(tau)))
    pts = tuple(-tau - p) + tuple(-tau + p)
    out = np.zeros(N - 1)
    for k in range(N - 1):
        def g(t, k=k):
            psi, K = modified_homoclinic_components(tau + t, delta)
            return _bracket_integrand(k, psi, K, coeffs, True)
        out[k] = _quad(g, -w, w, settings, pts)
    return out
