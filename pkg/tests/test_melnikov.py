from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reslab.errors import DegenerateHessian, NonDecaying
from reslab.melnikov import (DEFAULT_Q, QuadratureSettings, chain_distance_vector, coth_profile,
                             delta_homoclinic_potential, find_critical_point, het_eta_closed,
                             het_reduced_potential, is_nondegenerate, kernel_integral, kernel_quadrature,
                             melnikov_periodic, melnikov_periodic_limit, n_tuple_hessian, n_tuple_potential,
                             n_tuple_quadrature, potential_quadrature, second_derivative_bracket)
from reslab.model_coeffs import D_matrix, ReducedCoeffs

SQ3 = math.sqrt(3)
MATCHED = ReducedCoeffs.synthetic(0.01, [0.3, -0.1], [0.2, -0.5], [0.4, -0.2], 0.1)


def coeffs_from_P(P, eps=0.01):
    P = np.asarray(P, dtype=float)
    N = len(P)
    return ReducedCoeffs.synthetic(eps, np.zeros(N), np.zeros(N), np.zeros(N), 3 / 32 * np.outer(P, P))


def test_kernel_values():
    assert kernel_integral(0.0) == pytest.approx(1 / SQ3, abs=1e-12)
    assert kernel_integral(30.0) == pytest.approx(30.0, rel=1e-12)
    assert kernel_integral(1.0) == pytest.approx(kernel_quadrature(1.0), abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5))
def test_kernel_oracle(tau):
    assert kernel_integral(tau) == pytest.approx(kernel_quadrature(tau), abs=1e-10)


def test_bracket_limit():
    assert second_derivative_bracket(0.0) == pytest.approx(-2 / 3, abs=1e-6)
    assert second_derivative_bracket(1e-4) == pytest.approx(-2 / 3, abs=1e-6)


@given(st.floats(-4, 4))
def test_coth_profile_derivatives(tau):
    h = 1e-5
    f, f1, f2 = coth_profile(tau)
    assert f1 == pytest.approx((coth_profile(tau + h)[0] - coth_profile(tau - h)[0]) / (2 * h), abs=1e-7)
    assert f2 == pytest.approx((coth_profile(tau + h)[1] - coth_profile(tau - h)[1]) / (2 * h), abs=1e-6)


def test_het_potential_matches_quadrature():
    eta = het_eta_closed(MATCHED)
    for tau in np.linspace(-5, 5, 11):
        q = potential_quadrature("heteroclinic", [tau, 0.0], MATCHED)
        assert het_reduced_potential(tau, MATCHED)[0] + eta == pytest.approx(q, abs=1e-9)


def test_het_potential_symmetric_case_and_limits():
    co = ReducedCoeffs.synthetic(0.01, [0.3, 0.3], [0.2, 0.2], [0, 0], -1.0)
    for tau in (0.5, 1.7):
        L = het_reduced_potential(tau, co)[0]
        assert L == pytest.approx(het_reduced_potential(-tau, co)[0], abs=1e-14)
        assert L == pytest.approx(0.5 * tau / math.tanh(SQ3 * tau / 2), rel=1e-12)
    A, B = 0.5, 0.2
    co = ReducedCoeffs.synthetic(0.01, [A, B], [0, 0], [0, 0], -(A + B))
    assert het_reduced_potential(40, co)[1] == pytest.approx(A, abs=1e-9)
    assert het_reduced_potential(-40, co)[1] == pytest.approx(-B, abs=1e-9)


def test_het_potential_reflection():
    sw = ReducedCoeffs.synthetic(0.01, [-0.1, 0.3], [-0.5, 0.2], [-0.2, 0.4], 0.1)
    for tau in (-1.2, 0.4, 2.0):
        assert het_reduced_potential(tau, sw)[0] == pytest.approx(het_reduced_potential(-tau, MATCHED)[0],
                                                                  abs=1e-12)


def test_second_derivative_finite_difference():
    h = 1e-4
    for tau in (-2.0, 0.3, 1.1):
        fd = (het_reduced_potential(tau + h, MATCHED)[1] - het_reduced_potential(tau - h, MATCHED)[1]) / (2 * h)
        assert het_reduced_potential(tau, MATCHED)[2] == pytest.approx(fd, abs=1e-7)


def test_nondecaying_detected():
    bad = ReducedCoeffs.synthetic(0.01, [0.3, 0.3], [0.2, 0.2], [0, 0], 0.0)
    with pytest.raises(NonDecaying):
        potential_quadrature("heteroclinic", [0.0, 0.0], bad)


def test_translation_invariance():
    tau = np.array([0.7, -0.4])
    a = potential_quadrature("heteroclinic", tau, MATCHED)
    b = potential_quadrature("heteroclinic", tau + 1.3, MATCHED)
    assert a == pytest.approx(b, abs=1e-9)
    c = potential_quadrature("delta_homoclinic", tau, MATCHED, delta=0.05)
    d = potential_quadrature("delta_homoclinic", tau - 0.8, MATCHED, delta=0.05)
    assert c == pytest.approx(d, abs=1e-9)


def test_delta_potential_flat_without_coupling():
    co = ReducedCoeffs.synthetic(0.01, [0.3, -0.1], [0.2, -0.5], [0.4, -0.2], 0.0)
    vals = [potential_quadrature("delta_homoclinic", [t, 0.0], co, delta=0.05) for t in (-2, 0, 1.5)]
    assert np.ptp(vals) < 1e-9
    assert delta_homoclinic_potential(0.7, co, 0.05) == 0.0


def test_delta_potential_approaches_leading_order():
    co = ReducedCoeffs.synthetic(0.01, [0, 0], [-1, -1], [0, 0], 1.0)
    taus = np.linspace(-2, 2, 9)
    devs = []
    for delta in (0.1, 0.05, 0.025):
        # remove the tau0-independent offset before comparing shapes
        v = np.array([delta_homoclinic_potential(t, co, delta) for t in taus])
        lo = np.array([-coth_profile(t)[0] for t in taus])
        devs.append(np.max(np.abs((v - v[4]) - (lo - lo[4]))))
    assert devs[0] > devs[1] > devs[2]


@settings(max_examples=10, deadline=None)
@given(st.lists(st.floats(0.3, 2.0), min_size=3, max_size=3), st.floats(-3, 3), st.floats(-3, 3))
def test_n_tuple_oracle_and_hessian(P, t1, t2):
    co = coeffs_from_P(P)
    assert n_tuple_potential([t1, t2], co)[0] == pytest.approx(n_tuple_quadrature([t1, t2], co), abs=1e-9)
    H = n_tuple_potential([0, 0], co)[2]
    assert np.allclose(H, -D_matrix(co) / SQ3, atol=1e-12)
    assert np.allclose(n_tuple_hessian([0, 0], co), H, atol=1e-12)
    assert np.allclose(n_tuple_potential([0, 0], co)[1], 0, atol=1e-14)


def test_n_tuple_two_planes():
    co = ReducedCoeffs.synthetic(0.01, [0, 0], [0, 0], [0, 0], 0.4)
    H = n_tuple_potential([0.0], co)[2]
    assert H.shape == (1, 1)
    assert abs(H[0, 0]) == pytest.approx(0.4 / SQ3)


def test_critical_points():
    co = ReducedCoeffs.synthetic(0.01, [0.3, 0.3], [0.2, 0.2], [0, 0], -1.0)
    r = find_critical_point("heteroclinic", co)
    assert abs(r.tau_star[0]) < 1e-10 and r.nondegenerate
    rng = np.random.default_rng(3)
    r = find_critical_point("chain_vector", coeffs_from_P(rng.uniform(0.5, 2, 3) * [1, -1, 1]))
    assert r.nondegenerate and np.max(np.abs(r.tau_star)) < 1e-8
    stars = []
    co = ReducedCoeffs.synthetic(0.05, [0.5, -0.3], [-1, -0.8], [0.2, 0.1], 1.0)
    for delta in (0.1, 0.05, 0.025):
        r = find_critical_point("delta_homoclinic", co, delta=delta)
        assert r.nondegenerate and r.gradient_norm < 1e-8
        stars.append(abs(r.tau_star[0]))
    assert stars[0] >= stars[1] >= stars[2]
    assert stars[-1] < 0.1


def test_degenerate_hessian_raised():
    co = ReducedCoeffs.synthetic(0.01, np.zeros(3), np.zeros(3), np.zeros(3), np.zeros((3, 3)))
    with pytest.raises(DegenerateHessian):
        find_critical_point("chain_vector", co)
    assert not is_nondegenerate(np.zeros((2, 2)))
    assert is_nondegenerate(np.eye(2))


def test_report_serializes():
    r = find_critical_point("chain_vector", coeffs_from_P([1.0, 0.7, -1.3]))
    d = r.to_dict()
    assert d["family"] == "chain_vector" and len(d["hessian"]) == 2


def test_periodic_melnikov_converges():
    co = ReducedCoeffs.synthetic(0.05, [0, 0], [-1, -1], [0, 0], 1.0)
    taus = (-1.0, 0.0, 0.5, 1.5)
    sups = []
    for h in (0.0025, 0.00125):
        sups.append(max(abs(melnikov_periodic(h, 0.05, co, t) - melnikov_periodic_limit(0.05, co, t))
                        for t in taus))
    assert sups[1] < sups[0]


def test_periodic_melnikov_zero_without_coupling():
    co = ReducedCoeffs.synthetic(0.05, [0, 0], [-1, -1], [0, 0], 0.0)
    assert abs(melnikov_periodic(0.01, 0.05, co, 0.3)) < 1e-9


def test_chain_distance_offsets():
    co = coeffs_from_P([1.0, 0.7, -1.3], eps=0.0)
    v = chain_distance_vector(0, 1, [0.0, 0.0, 0.0], co, 0.001, 0.05)
    assert np.array_equal(v, [0.001, -0.001])
    co4 = ReducedCoeffs.synthetic(0.0, np.zeros(4), np.zeros(4), np.zeros(4), np.ones((4, 4)))
    v = chain_distance_vector(2, 0, np.zeros(4), co4, 0.002, 0.05)
    assert np.array_equal(v, [-0.002, 0.0, 0.002])
    with pytest.raises(ValueError):
        chain_distance_vector(1, 1, [0, 0, 0], co, 0.001, 0.05)


def test_settings_validation():
    with pytest.raises(ValueError):
        QuadratureSettings(t_cut=5)
    assert DEFAULT_Q.t_cut >= 10
