from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reslab.diagnostics import (ChainSpec, SectionCrossing, SectionSpec, chain_model, chain_shadow,
                                find_heteroclinic, find_homoclinic, hitting_symbols, homoclinic_splitting,
                                manifold_shoot, profile_deviation, regime_segmentation, section_returns, wrap)
from reslab.errors import NoCrossing
from reslab.model_coeffs import ReducedCoeffs
from reslab.resonant_set import build_lambda
from reslab.toy_dynamics import PSI_STAR, SQRT3, ReducedState, delta_model, periodic_orbit, saddle_point

ONE = ReducedCoeffs.synthetic(0.0, [0], [0], [0], np.zeros((1, 1)))


def test_section_spec_validation():
    with pytest.raises(ValueError):
        SectionSpec(psi_window_halfwidth=0.0)
    with pytest.raises(ValueError):
        SectionSpec(psi_window_halfwidth=math.pi / 3)
    with pytest.raises(ValueError):
        SectionSpec(crossing_direction=0)
    s = SectionSpec(psi_window_center=1.0, psi_window_halfwidth=0.1)
    assert s.accepts(ReducedState.angular([0.0, 1.05], [0.0, 0.5]))
    assert not s.accepts(ReducedState.angular([0.0, 1.2], [0.0, 0.5]))


def test_symbols_from_fixed_spacing():
    T = 4.295
    times = [5.3 * T * k for k in range(6)]
    seq = hitting_symbols(times, T, C_star=4)
    assert seq.symbols == [1] * 5
    assert hitting_symbols(times, T).symbols == [1] * 5
    with pytest.raises(ValueError):
        hitting_symbols([1.0], T)


def test_symbols_floor_jump():
    T = 2.0
    below = hitting_symbols([0.0, 6 * T - 1e-9], T, C_star=0).symbols[0]
    above = hitting_symbols([0.0, 6 * T + 1e-9], T, C_star=0).symbols[0]
    assert (below, above) == (5, 6)


@given(st.lists(st.floats(1.0, 20.0), min_size=2, max_size=8), st.integers(-3, 3))
def test_symbols_shift_with_c_star(gaps, shift):
    times = np.concatenate([[0.0], np.cumsum(gaps)])
    base = hitting_symbols(times, 1.3, C_star=0)
    moved = hitting_symbols(times, 1.3, C_star=shift)
    assert [a - shift for a in base.symbols] == moved.symbols
    auto = hitting_symbols(times, 1.3)
    assert min(auto.symbols) == 1


def _decoupled_section():
    co = delta_model(2, 0.01)
    po = periodic_orbit(0.3, 1, co)
    ts = np.linspace(0, po.T_h, 2001)
    psi, K = po.at(ts)
    i = int(np.nonzero((K[:-1] > 0.5) & (K[1:] <= 0.5))[0][0])
    return co, po, float(ts[i]), SectionSpec(psi_window_center=float(psi[i]), psi_window_halfwidth=0.2)


def test_section_returns_periodic_spacing():
    co, po, t_start, sec = _decoupled_section()
    psi, K = po.at(np.array([0.0]))
    z0 = ReducedState.angular([0.0, float(psi[0])], [0.0, float(K[0])])
    rets, tr = section_returns(z0, co, sec, t_max=6 * po.T_h, chunk=10.0)
    assert len(rets) >= 5
    gaps = np.diff([r.t for r in rets])
    assert np.max(np.abs(gaps - po.T_h)) < 1e-7
    assert all(isinstance(r, SectionCrossing) for r in rets)
    assert rets[0].t == pytest.approx(t_start, abs=po.T_h / 1000)


def test_no_return_from_saddle():
    co, _, _, sec = _decoupled_section()
    z0 = saddle_point(1, [0, 0], co).location
    rets, _ = section_returns(z0, co, sec, t_max=30.0)
    assert rets == []


def test_saddle_unstable_manifold_is_heteroclinic():
    m = manifold_shoot(saddle_point(1, [0], ONE), ONE, "u")
    assert m.eigenvalue == pytest.approx(SQRT3, abs=1e-10)
    hit = 0
    for o in m.orbits:
        P, K = o.sample(np.linspace(0, 8, 60))
        sel = (K[:, 0] > 0.01) & (K[:, 0] < 0.99)
        hit += int(sel.any())
        assert np.max(np.abs(wrap(P[sel, 0] - PSI_STAR)), initial=0.0) < 1e-6
    assert hit > 0


def test_delta_saddle_manifold_on_zero_level():
    delta = 0.05
    dm = delta_model(1, delta)
    m = manifold_shoot(saddle_point(1, [0], dm), dm, "u")
    for o in m.orbits:
        P, K = o.sample(np.linspace(0, 10, 200))
        c = 1 + 2 * np.cos(P[:, 0])
        sel = K[:, 0] > 1e-3
        # H = 0 off K = 0 means K = c / (c + delta)
        assert np.max(np.abs(K[sel, 0] - c[sel] / (c[sel] + delta))) < 1e-6


def test_splitting_vanishes_without_coupling():
    co = ReducedCoeffs.synthetic(0.05, [0, 0], [-1, -1], [0, 0], 0.0)
    for tau in (-0.5, 0.0, 0.7):
        assert abs(homoclinic_splitting(tau, co, 0.05).distance) < 1e-8


def test_homoclinic_is_transverse():
    co = ReducedCoeffs.synthetic(0.01, [0, 0], [-1, -1], [0, 0], 1.0)
    r = find_homoclinic(co, 0.01)
    assert r["f_lo"] * r["f_hi"] < 0
    assert abs(r["tau0"]) < 0.1
    assert r["slope"] != 0


def test_heteroclinic_needs_perturbation():
    co = ReducedCoeffs.synthetic(0.0, np.zeros(3), -np.ones(3), np.zeros(3), np.ones((3, 3)))
    with pytest.raises(NoCrossing):
        find_heteroclinic(0, 1, co, 1e-3)


def test_chain_spec_validation():
    with pytest.raises(ValueError):
        ChainSpec([], [0.05], 1e-5, 0.01)
    with pytest.raises(ValueError):
        ChainSpec([0, 0, 1], [0.05], 1e-5, 0.01)
    with pytest.raises(ValueError):
        ChainSpec([0, 1], [0.05, -1.0], 1e-5, 0.01)
    assert ChainSpec([0, 1, 2], [0.05], 1e-5, 0.01).radii == [0.05] * 3


def test_single_visit_chain():
    d = np.array([[0, 1, -0.5], [1, 0, 0.7], [-0.5, 0.7, 0]])
    co = ReducedCoeffs.synthetic(0.01, np.zeros(3), -np.ones(3), np.zeros(3), d)
    r = chain_shadow(ChainSpec([1], [0.05], 1e-5, 0.01), co)
    assert r.success and len(r.visits) == 1 and r.visits[0].plane == 1
    assert r.energy_drift == 0.0


def test_chain_model_normalized():
    L = build_lambda("beam", 3, 0.2, 1)
    co = chain_model(L, 0.01)
    assert np.max(np.abs(co.d)) == pytest.approx(1.0)
    assert np.all(co.b == -1) and co.epsilon == 0.01
    assert np.array_equal(co.d, co.d.T)


def test_profile_deviation_zero_on_orbit():
    po = periodic_orbit(0.3, 0, delta_model(1, 0.01))
    ts = np.linspace(0, 3 * po.T_h, 600)
    _, K = po.at(ts - 1.234)
    dev, tp = profile_deviation(ts, K, po)
    assert dev < 1e-6
    assert wrap(2 * math.pi * (tp - 1.234) / po.T_h) == pytest.approx(0.0, abs=1e-4)


def test_regime_single_beating_interval():
    po = periodic_orbit(0.3, 0, delta_model(2, 0.01))
    ts = np.linspace(0, 4 * po.T_h, 800)
    _, K1 = po.at(ts)
    K = np.column_stack([K1, np.zeros_like(K1)])
    out = regime_segmentation(ts, K, 0.05, profiles={0: po}, crossing_plane=0)
    assert len(out["intervals"]) == 1
    iv = out["intervals"][0]
    assert iv["kind"] == "beating" and iv["active"] == 0
    assert iv["deviation"] < 0.05
    assert len(out["crossings"]) >= 7
    for c in out["certificates"]:
        assert c["sup"] > 0.5
        assert c.get("inf", 0.0) < 0.5


def test_regime_transition_when_two_planes_active():
    ts = np.linspace(0, 10, 101)
    K = np.column_stack([np.full(101, 0.4), np.where(ts < 5, 0.4, 0.0)])
    out = regime_segmentation(ts, K, 0.05)
    kinds = [r["kind"] for r in out["intervals"]]
    assert kinds == ["transition", "beating"]
