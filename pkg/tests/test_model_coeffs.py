from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reslab.errors import KindMismatch
from reslab.model_coeffs import (D_matrix, EquationKind, ReducedCoeffs, d12_closed_form, det_D, factored_det,
                                 gauge_params, hartree_zero, nondegeneracy_report, quartic_coefficient,
                                 reduced_coeffs, solve_gamma_energy_matching)
from reslab.resonant_set import build_lambda, make_lambda

BEAM_TUPLE = [(1, 0), (1, 2), (3, 2), (3, 0)]


def test_hartree_unit_potential_coefficient():
    eq = hartree_zero(0.1)
    assert quartic_coefficient(*BEAM_TUPLE, (1, -1, 1, -1), eq) == 1.0
    assert quartic_coefficient(*BEAM_TUPLE, (1, 1, -1, -1), eq) == 0.0


def test_beam_coefficient_value():
    val = quartic_coefficient(*BEAM_TUPLE, (1, -1, 1, -1), EquationKind.beam())
    assert val == pytest.approx(1 / (48 * math.sqrt(65)), rel=1e-14)


def test_non_momentum_pattern_is_zero():
    assert quartic_coefficient(*BEAM_TUPLE, (1, 1, 1, 1), EquationKind.beam()) == 0.0


@given(st.lists(st.tuples(st.integers(-9, 9), st.integers(-9, 9)), min_size=4, max_size=4),
       st.lists(st.sampled_from([1, -1]), min_size=4, max_size=4), st.permutations(range(4)))
def test_coefficient_bound_and_symmetry(js, sig, perm):
    for eq in (EquationKind.wave(), EquationKind.beam(), EquationKind.hartree(0.5, seed=1)):
        v = quartic_coefficient(*js, sig, eq)
        assert abs(v) <= 2
        if eq.kind.value != "hartree":
            w = quartic_coefficient(*[js[p] for p in perm], [sig[p] for p in perm], eq)
            assert v == pytest.approx(w, rel=1e-14)


def test_hartree_gauge_is_one():
    L = build_lambda("hartree", 2, 0.2, 1)
    assert gauge_params(L, EquationKind.hartree(0.1))[0] == 1.0


def test_wave_effective_eps_band_limited():
    L = build_lambda("wave", 2, 0.2, 3)
    g, eff = gauge_params(L)
    assert g == pytest.approx(1 / L.radius ** 2)
    assert 0 < eff <= 0.5


def test_integrable_hartree_all_zero():
    L = build_lambda("hartree", 2, 0.2, 1)
    co = reduced_coeffs(L, hartree_zero(0.1))
    for x in (co.a, co.b, co.c, co.d, co.A):
        assert np.all(x == 0)


def test_d_symmetric_bitwise():
    for kind in ("beam", "wave", "hartree"):
        co = reduced_coeffs(build_lambda(kind, 3, 0.2, 2))
        assert np.array_equal(co.d, co.d.T)
        assert np.array_equal(co.A, co.A.T)


def test_hartree_couplings_close_to_one():
    co = reduced_coeffs(build_lambda("hartree", 2, 0.2, 4), EquationKind.hartree(0.05, seed=2))
    assert np.all(np.abs(co.C_h - 1) <= 10 * 0.05)


@pytest.mark.parametrize("kind", ["beam", "wave"])
def test_d12_matches_product_formula(kind):
    for seed in range(5):
        L = build_lambda(kind, 2, 0.2, seed)
        co = reduced_coeffs(L)
        d, P = d12_closed_form(L)
        assert co.d[0, 1] == pytest.approx(d, rel=1e-10)
        assert all(p != 0 for p in P)


def test_closed_form_rejects_hartree():
    with pytest.raises(KindMismatch):
        d12_closed_form(build_lambda("hartree", 2, 0.2, 1))


def test_p_factor_scaling():
    L = build_lambda("wave", 2, 0.2, 1)
    lam = 3
    quads = [[(lam * m[0], lam * m[1]) for m in t.modes] for t in L.tuples]
    Ls = make_lambda(quads, "wave", L.epsilon_target, lam * L.radius)
    _, P = d12_closed_form(L)
    _, Ps = d12_closed_form(Ls)
    assert np.allclose(np.array(Ps), np.array(P) / lam, rtol=1e-12)


def test_equal_norm_tuple_kills_d12():
    # |n1| = |n2| in the first tuple makes its product factor vanish
    a = [(31, 30), (30, 31), (29, 30), (30, 29)]
    b = [(42, 12), (39, 11), (40, 8), (43, 9)]
    L = make_lambda([a, b], "beam", 0.2, 42)
    co = reduced_coeffs(L)
    assert abs(co.d[0, 1]) < 1e-12
    assert not nondegeneracy_report(co, L)["d12_nonzero"]


def test_det_D_two_by_two_is_d12():
    co = ReducedCoeffs.synthetic(0.1, [0, 0], [0, 0], [0, 0], 0.7)
    assert D_matrix(co).shape == (1, 1)
    assert det_D(co)[0] == pytest.approx(0.7)


def test_zero_couplings_det_zero():
    co = ReducedCoeffs.synthetic(0.1, [0] * 3, [0] * 3, [0] * 3, np.zeros((3, 3)))
    assert det_D(co)[0] == 0.0


@settings(max_examples=40)
@given(st.integers(2, 5), st.lists(st.floats(0.2, 3.0), min_size=5, max_size=5),
       st.lists(st.sampled_from([1, -1]), min_size=5, max_size=5))
def test_factored_det_random_P(N, mags, signs):
    P = np.array([m * s for m, s in zip(mags[:N], signs[:N])])
    d = 3.0 / 32.0 * np.outer(P, P)
    co = ReducedCoeffs.synthetic(0.1, np.zeros(N), np.zeros(N), np.zeros(N), d)
    direct = np.linalg.det(D_matrix(co))
    fac = factored_det(P)
    assert direct == pytest.approx(fac, rel=1e-10, abs=1e-14)


@pytest.mark.parametrize("N", [2, 3, 4])
def test_det_D_builder_sets(N):
    L = build_lambda("beam", N, 0.2, 11)
    direct, fac = det_D(reduced_coeffs(L), L)
    assert direct == pytest.approx(fac, rel=1e-10)
    assert direct != 0


def test_nondegeneracy_builder_sets():
    for kind in ("beam", "wave"):
        L = build_lambda(kind, 3, 0.2, 5)
        rep = nondegeneracy_report(reduced_coeffs(L), L)
        assert rep["d12_nonzero"] and rep["det_D_nonzero"]


def test_energy_matching_helper():
    L = build_lambda("hartree", 2, 0.2, 1)
    eq = EquationKind.hartree(0.1, seed=0)
    t0, t1 = L.tuples
    eq2 = solve_gamma_energy_matching(L, eq, t0.n1 - t1.n1)
    rep = nondegeneracy_report(reduced_coeffs(L, eq2))
    assert abs(rep["energy_matching_residual"]) < 1e-9


def test_coeffs_dict_round_trip():
    co = reduced_coeffs(build_lambda("beam", 2, 0.2, 1))
    back = ReducedCoeffs.from_dict(co.to_dict())
    assert np.array_equal(back.d, co.d) and np.array_equal(back.A, co.A)
    assert back.time_scale == co.time_scale
