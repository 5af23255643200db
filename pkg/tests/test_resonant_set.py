from __future__ import annotations

import json
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from reslab.errors import GiveUp
from reslab.resonant_set import (Kind, LambdaSet, Mode, ResonantTuple, build_beam_lambda, build_hartree_lambda,
                                 build_lambda, build_wave_lambda, is_resonant, make_lambda, sqrt_sum_is_zero,
                                 validate_lambda)


def tup(ms, kind):
    return ResonantTuple(*ms, kind=kind)


def test_beam_rectangle_is_resonant():
    assert is_resonant(tup([(1, 0), (1, 2), (3, 2), (3, 0)], "beam"))


def test_wave_circle_tuple_is_resonant():
    assert is_resonant(tup([(5, 0), (3, 4), (-5, 0), (-3, -4)], "wave"))


def test_repeated_mode_is_not_resonant():
    assert not is_resonant(tup([(1, 0), (1, 2), (3, 2), (3, 2)], "beam"))


def test_wave_rejects_beam_rectangle():
    # momentum holds but 1 - sqrt5 + sqrt13 - 3 != 0
    assert not is_resonant(tup([(1, 0), (1, 2), (3, 2), (3, 0)], "wave"))


def test_sqrt_sum_exact():
    assert sqrt_sum_is_zero([1, 1, -1], [2, 8, 18])
    assert not sqrt_sum_is_zero([1, -1], [2, 3])
    assert sqrt_sum_is_zero([1, -1, 1, -1], [25, 25, 25, 25])


@given(st.integers(-20, 20), st.integers(-20, 20), st.integers(-6, 6), st.integers(-6, 6), st.integers(1, 6))
def test_rectangles_resonant_and_permutation_invariant(cx, cy, px, py, s):
    if (px, py) == (0, 0):
        return
    # square with center c: n1 = c + p, n3 = c - p, n2/n4 = c +- rot(p), scaled by 1/1
    n1, n3 = (cx + px, cy + py), (cx - px, cy - py)
    n2, n4 = (cx - py, cy + px), (cx + py, cy - px)
    for kind in ("beam", "hartree"):
        t = tup([n1, n2, n3, n4], kind)
        assert is_resonant(t)
        for perm in ([n1, n4, n3, n2], [n3, n2, n1, n4], [n3, n4, n1, n2]):
            assert is_resonant(tup(perm, kind))
        ms = t.modes
        assert ms[0].norm2 + ms[2].norm2 == ms[1].norm2 + ms[3].norm2


@given(st.integers(1, 50))
def test_wave_resonance_homogeneous(lam):
    base = [(5, 0), (3, 4), (-5, 0), (-3, -4)]
    assert is_resonant(tup([(lam * a, lam * b) for a, b in base], "wave"))


def test_degenerate_prototype_fails():
    quads = [[(1, 0), (0, 1), (-1, 0), (0, -1)]] * 2
    rep = validate_lambda(make_lambda(quads, "beam"))
    assert not rep.checks["modes_distinct"].ok
    assert not rep.checks["distinct_norms"].ok
    assert rep.checks["modes_distinct"].witness is not None


def test_duplicate_mode_uniqueness_failure():
    L = build_beam_lambda(2, 0.2, 1)
    t0, t1 = L.tuples
    bad = ResonantTuple(t0.n1, t1.n2, t1.n3, t1.n4, kind=L.kind)
    rep = validate_lambda(LambdaSet((t0, bad), L.kind, L.epsilon_target, L.radius))
    assert not rep.ok
    assert not (rep.checks["parents_unique"].ok and rep.checks["children_unique"].ok
                and rep.checks["modes_distinct"].ok)


def test_congruent_translated_rectangles_fail_differences():
    a = [(1, 0), (1, 2), (3, 2), (3, 0)]
    b = [(x + 10, y + 7) for x, y in a]
    rep = validate_lambda(make_lambda([a, b], "hartree"))
    assert not rep.checks["distinct_differences"].ok
    assert rep.checks["distinct_differences"].witness is not None


def test_beam_builder_example():
    L = build_beam_lambda(2, 0.2, 1)
    assert len(set(L.modes)) == 8
    assert validate_lambda(L).ok
    for t in L.tuples:
        a = (t.n1[0] - t.n2[0], t.n1[1] - t.n2[1])
        b = (t.n3[0] - t.n2[0], t.n3[1] - t.n2[1])
        assert a[0] * b[0] + a[1] * b[1] == 0
    R = L.radius
    for m in L.modes:
        assert abs(m.norm2 ** 0.5 - R) < R * L.epsilon_target


def test_hartree_builder_example():
    L = build_hartree_lambda(2, 1)
    rep = validate_lambda(L)
    assert rep.ok and "distinct_differences" in rep.checks


def test_hartree_builder_complete():
    L = build_hartree_lambda(2, 1)
    S = set(L.modes)
    ms = L.modes
    # any three modes of Lambda closing a rectangle relation put the fourth in Lambda
    for a in ms:
        for b in ms:
            for c in ms:
                if len({a, b, c}) < 3:
                    continue
                d = Mode(a[0] - b[0] + c[0], a[1] - b[1] + c[1])
                if a.norm2 - b.norm2 + c.norm2 == d.norm2 and d not in (a, b, c):
                    assert d in S, f"partner {d} of {a}, {b}, {c} missing"


def test_wave_builder_parity_and_geometry():
    L = build_wave_lambda(2, 0.2, 4)
    assert validate_lambda(L).ok
    for m in L.modes:
        assert m[0] % 2 == 1 and m[1] % 2 == 0
    for t in L.tuples:
        # parallelogram: n1 + n3 = n2 + n4, and |n1| + |n3|... both pairs sum to the focal distance 2a
        s = (t.n1[0] + t.n3[0], t.n1[1] + t.n3[1])
        assert s == (t.n2[0] + t.n4[0], t.n2[1] + t.n4[1])
        assert sqrt_sum_is_zero([1, -1, 1, -1], [m.norm2 for m in t.modes])


def test_builders_deterministic():
    for kind in ("beam", "wave", "hartree"):
        assert build_lambda(kind, 2, 0.2, 7).to_json() == build_lambda(kind, 2, 0.2, 7).to_json()


def test_json_round_trip():
    L = build_wave_lambda(2, 0.2, 2)
    L2 = LambdaSet.from_json(L.to_json())
    assert L2 == L
    data = json.loads(L.to_json())
    assert set(data) == {"kind", "tuples", "epsilon_target", "radius"}


def test_json_rejects_non_integers():
    data = {"kind": "beam", "tuples": [[[1.5, 0], [1, 2], [3, 2], [3, 0]]]}
    with pytest.raises(ValueError):
        LambdaSet.from_json(json.dumps(data))


def test_give_up_on_tiny_budget():
    with pytest.raises(GiveUp):
        build_beam_lambda(6, 0.01, 0, budget=1)


@settings(max_examples=15, deadline=None)
@given(st.sampled_from(list(Kind)), st.integers(0, 10_000))
def test_builder_round_trip_fuzz(kind, seed):
    L = build_lambda(kind, 2, 0.2, seed)
    assert validate_lambda(L).ok


def test_scaled_wave_rational_check():
    # rational points on the unit circle scaled to integers keep resonance
    p = (Fraction(3, 5), Fraction(4, 5))
    pts = [(1, 0), p, (-1, 0), (-p[0], -p[1])]
    assert is_resonant(tup([(int(15 * x), int(15 * y)) for x, y in pts], "wave"))
