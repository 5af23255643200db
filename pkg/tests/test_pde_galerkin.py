from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reslab.errors import KindMismatch
from reslab.model_coeffs import EquationKind, hartree_zero, reduced_coeffs
from reslab.pde_galerkin import (FourierState, GalerkinSet, GalerkinSystem, ResonantModel, approximation_experiment,
                                 bnf_generator, bnf_transform, fit_exponent, full_field, galerkin_set, rescale,
                                 resonant_field, synthesize_solution, w_rho_norm)
from reslab.resonant_set import build_lambda, make_lambda
from reslab.toy_dynamics import ReducedState, lift_state

SQUARE = make_lambda([[(1, 0), (2, 0), (2, 1), (1, 1)]], "hartree")
EQ = EquationKind.hartree(0.1, seed=3)


def test_norm_examples():
    assert w_rho_norm(FourierState({(1, 0): 1.0}, 0.1)) == pytest.approx(math.exp(0.1))
    s = FourierState({(1, 0): 1 + 1j, (3, 4): -2.0}, 0.0)
    assert w_rho_norm(s) == pytest.approx(math.sqrt(2) + 2)
    with pytest.raises(ValueError):
        FourierState({}, -1.0)


modes = st.tuples(st.integers(-4, 4), st.integers(-4, 4))
amps = st.dictionaries(modes, st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
                       max_size=6)


@given(amps, amps, st.floats(0, 1))
def test_norm_triangle(a, b, rho):
    x, y = FourierState(a, rho), FourierState(b, rho)
    s = x - y.scaled(-1)
    assert w_rho_norm(s) <= w_rho_norm(x) + w_rho_norm(y) + 1e-9


def test_galerkin_set_contains_lambda_and_negatives():
    gs = galerkin_set(SQUARE, 1)
    assert set(SQUARE.modes) <= set(gs.modes)
    assert all((-m[0], -m[1]) in gs.index for m in gs.modes)
    with pytest.raises(ValueError):
        GalerkinSet([(2, 1)], "beam")


def test_linear_flow_keeps_moduli():
    gs = galerkin_set(SQUARE, 1)
    sysm = GalerkinSystem(gs, EQ, quartic=False)
    rng = np.random.default_rng(0)
    a0 = 0.1 * (rng.normal(size=gs.n) + 1j * rng.normal(size=gs.n))
    tr = sysm.integrate(a0, (0, 5))
    assert np.allclose(np.abs(tr(5.0)), np.abs(a0), atol=1e-10)


def test_full_field_conservation():
    gs = galerkin_set(SQUARE, 1)
    sysm = GalerkinSystem(gs, EQ)
    rng = np.random.default_rng(1)
    a0 = rng.normal(size=gs.n) + 1j * rng.normal(size=gs.n)
    a0 *= 0.1 / np.sum(np.abs(a0))
    tr = sysm.integrate(a0, (0, 100), rtol=1e-12, atol=1e-15)
    vals = tr.values()
    E = [sysm.energy(v) for v in vals]
    M = [sysm.mass(v) for v in vals]
    P = np.array([sysm.momentum(v) for v in vals])
    assert np.ptp(E) < 1e-9 and np.ptp(M) < 1e-9
    assert np.max(np.ptp(P, axis=0)) < 1e-9
    f = full_field(FourierState(dict(zip(gs.modes, a0))), EQ, gs)
    assert np.allclose(f.vector(gs.modes), sysm.field(a0))
    with pytest.raises(ValueError):
        full_field(FourierState({(50, 50): 1.0}), EQ, gs)


def test_kind_mismatch():
    gs = galerkin_set(SQUARE, 0)
    with pytest.raises(KindMismatch):
        GalerkinSystem(gs, EquationKind.beam())


def test_resonant_model_integrals():
    L = build_lambda("hartree", 2, 0.2, 1)
    co = reduced_coeffs(L, EquationKind.hartree(0.1, seed=0))
    m = ResonantModel(L, co)
    rng = np.random.default_rng(2)
    a0 = 0.1 * (rng.normal(size=8) + 1j * rng.normal(size=8))
    tr = m.integrate(a0, (0, 100))
    vals = tr.values()
    S = np.array([m.all_integrals(v) for v in vals])
    assert np.max(np.ptp(S, axis=0)) < 1e-9
    assert np.ptp([m.mass(v) for v in vals]) < 1e-9
    assert np.ptp([m.energy(v) for v in vals]) < 1e-9


def test_resonant_zero_tuple_stays_zero():
    L = build_lambda("hartree", 2, 0.2, 1)
    co = reduced_coeffs(L, EquationKind.hartree(0.1, seed=0))
    a0 = np.zeros(8, dtype=complex)
    a0[:4] = [0.3, 0.2j, -0.1, 0.25]
    tr = ResonantModel(L, co).integrate(a0, (0, 20))
    assert np.max(np.abs(tr.values()[:, 4:])) == 0.0
    f = resonant_field(dict(zip(L.modes, a0)), L, co)
    assert all(f.amplitudes[m] == 0 for m in L.modes[4:])
    with pytest.raises(ValueError):
        resonant_field({(99, 99): 1.0}, L, co)


def test_lambda_one_torus_has_constant_moduli():
    # only generation-one modes populated: the quartic resonant coupling vanishes
    L = build_lambda("hartree", 2, 0.2, 1)
    co = reduced_coeffs(L, EquationKind.hartree(0.1, seed=0))
    a0 = np.zeros(8, dtype=complex)
    a0[[0, 2, 4, 6]] = [0.3, 0.1j, -0.2, 0.15]
    tr = ResonantModel(L, co).integrate(a0, (0, 20))
    assert np.allclose(np.abs(tr(20.0)), np.abs(a0), atol=1e-12)


def test_scaling_covariance():
    L = build_lambda("hartree", 2, 0.2, 1)
    co = reduced_coeffs(L, EquationKind.hartree(0.1, seed=0))
    m = ResonantModel(L, co)
    rng = np.random.default_rng(5)
    a0 = rng.normal(size=8) + 1j * rng.normal(size=8)
    d = 0.3
    base = m.integrate(a0, (0, 2))
    small = m.integrate(d * a0, (0, 2 / d ** 2))
    assert np.allclose(small(1.5 / d ** 2), d * base(1.5), atol=1e-9)
    r = rescale(base, d)
    for t in (0.0, 3.0, 11.0):
        h = 1e-4
        drdt = (r(t + h) - r(t - h)) / (2 * h)
        assert np.max(np.abs(drdt - m.field(r(t)))) < 1e-8
    one = rescale(base, 1.0)
    assert np.allclose(one(0.7), base(0.7))
    two = rescale(rescale(base, 0.5), 0.4)
    assert np.allclose(two(3.0), rescale(base, 0.2)(3.0))
    with pytest.raises(ValueError):
        rescale(base, 0.0)


def test_bnf_generator_and_transform():
    gen = bnf_generator(SQUARE, EQ)
    assert len(gen.monomials) > 0
    for ms, sig, c in gen.monomials:
        assert all(sum(s * m[k] for s, m in zip(sig, ms)) == 0 for k in (0, 1))
    assert np.all(gen.table.coef[gen.divisors == 0] == 0)
    assert np.max(np.abs(gen.table.coef)) <= 2 / gen.min_divisor() * 1.0000001
    base = lift_state(ReducedState.angular([0.2], [0.3]), SQUARE, [0.1, 0.2, 0.3, 0.4])
    a = FourierState({k: 0.03 * v for k, v in base.items()}, 0.1)
    back = bnf_transform(bnf_transform(a, gen, 1), gen, -1)
    for m in gen.gset.modes:
        assert abs(back.amplitudes.get(m, 0) - a.amplitudes.get(m, 0)) < 1e-10
    ratios = []
    for d in (0.1, 0.05, 0.025):
        s = FourierState({k: d * v for k, v in base.items()}, 0.1)
        s = s.scaled(d / w_rho_norm(s))
        diff = bnf_transform(s, gen, 1) - s
        ratios.append(w_rho_norm(diff) / d ** 3)
    assert max(ratios) / min(ratios) < 1.5


def test_bnf_warns_on_large_state():
    gen = bnf_generator(SQUARE, EQ)
    with pytest.warns(UserWarning):
        bnf_transform(FourierState({(1, 0): 1.0}, 0.1), gen, 1)


def test_approximation_trivial_cases():
    r0 = FourierState(lift_state(ReducedState.angular([0.0], [0.3]), SQUARE, [0, 0, 0, 0]), 0.1)
    rep = approximation_experiment(r0, [0.1, 0.05], 1.0, SQUARE, EQ, zero_perturbation=True, n_samples=201)
    assert max(rep.sup_errors) < 1e-7
    assert all(e == 0.0 for e in rep.initial_errors)
    with pytest.raises(ValueError):
        approximation_experiment(r0, [0.1], 25.0, SQUARE, EQ)


def test_fit_exponent_exact():
    d = np.array([0.1, 0.07, 0.05])
    assert fit_exponent(d, 3 * d ** 2.5) == pytest.approx(2.5)


def test_synthesis_actions():
    L = build_lambda("beam", 2, 0.2, 1)
    co = reduced_coeffs(L)
    s = ReducedState.angular([0.3, -0.5], [0.4, 0.7])
    a0 = lift_state(s, L, np.zeros(8))
    m = ResonantModel(L, co)
    ts = np.linspace(0, 1e-3, 5)
    tr = m.integrate(np.array([a0[k] for k in L.modes]), (0, 1e-3))
    vals = np.array([tr(t) for t in ts])
    res = synthesize_solution(ts, vals, L, 1.0)
    I = res.actions.reshape(len(ts), 2, 4)
    assert np.allclose(I[:, :, 0], I[:, :, 2], atol=1e-10)
    assert np.allclose(I[:, :, 0], 1 - I[:, :, 1], atol=1e-10)
    assert np.allclose(I[:, :, 1], I[:, :, 3], atol=1e-10)
    plain = synthesize_solution(ts, vals, L, 1.0, rotate=False)
    assert np.allclose(plain.actions, res.actions)
    with pytest.raises(KindMismatch):
        synthesize_solution(ts, vals, L, 1.0, kind="wave")
