import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kwc.errors import EpsilonTooLarge, InvalidArgument
from kwc.grid import GridField
from kwc.potential import custom, quadratic, quartic, weight_quadratic
from kwc.profile import (build_profile, check_elpf, profile_table, psi, recovery_field, shift_s0,
                         signed_distance)
from kwc.setvalued import Limit2D, SlicedLimit1D


def test_psi_examples(pot, pot4):
    assert psi(pot, 0.0, 0.3) == pytest.approx(0.3, abs=1e-12)
    assert psi(pot, math.log(2.0), 0.0) == pytest.approx(0.5, abs=1e-10)
    for p in (pot, pot4):
        assert psi(p, 0.7, 1.0) == 1.0
        assert psi(p, -3.0, 1.0) == 1.0


@settings(max_examples=40, deadline=None)
@given(s=st.floats(-8, 8), c=st.floats(-2, 3))
def test_psi_closed_form_and_even(s, c):
    pot = quadratic()
    assert psi(pot, s, c) == psi(pot, -s, c)
    assert psi(pot, s, c) == pytest.approx(1 - (1 - c) * math.exp(-abs(s)), abs=1e-10)


@pytest.mark.parametrize("make", [quadratic, quartic])
@pytest.mark.parametrize("c", [-1.0, 0.0, 0.3, 1.5, 3.0])
def test_ode_residual(make, c):
    table = profile_table(make(), c)
    assert table.s_star == math.inf
    res = table.ode_residual()
    assert res.size > 100
    assert res.max() <= 1e-5


def test_finite_arrival():
    # F = |v - 1| has sqrt(F) integrable against 1/sqrt(F): arrival in finite time 2 sqrt(1 - c)
    spec = custom(lambda v: np.abs(v - 1.0))
    table = profile_table(spec, 0.0)
    assert table.s_star == pytest.approx(2.0, rel=1e-3)
    assert psi(spec, 2.5, 0.0) == 1.0
    assert psi(spec, 1.0, 0.0) == pytest.approx(0.75, abs=1e-8)


def test_build_profile_examples(pot):
    prof = build_profile(0.04, 1.0, 1.0, pot)
    s = np.linspace(-1, 1, 1001)
    assert np.all(prof(s) == 1.0)
    prof = build_profile(0.01, 0.3, 1.0, pot)
    assert prof(np.array([0.0]))[0] == pytest.approx(0.3, abs=1e-12)
    expect = 1 - 0.7 * math.exp(-10)
    r = 0.1
    assert prof(np.array([-r, r])) == pytest.approx([expect, expect], abs=1e-10)


def test_build_profile_errors(pot):
    with pytest.raises(InvalidArgument):
        build_profile(0.01, 1.2, 1.5, pot)
    with pytest.raises(InvalidArgument):
        build_profile(0.01, 0.2, 0.5, pot)
    with pytest.raises(InvalidArgument):
        build_profile(1.5, 0.2, 1.5, pot)


@settings(max_examples=25, deadline=None)
@given(eps=st.floats(1e-5, 0.5), a=st.floats(-1, 1), b=st.floats(1, 3))
def test_profile_invariants(eps, a, b):
    pot = quadratic()
    prof = build_profile(eps, a, b, pot)
    r = math.sqrt(eps)
    for x in prof.breakpoints:
        left = prof(np.array([x - 1e-13 * r]))[0]
        right = prof(np.array([x + 1e-13 * r]))[0]
        assert abs(left - right) <= 1e-10
    assert prof(np.array([0.0]))[0] == pytest.approx(a, abs=1e-12)
    assert prof(np.array([3 * r]))[0] == pytest.approx(b, abs=1e-12)
    out = np.concatenate([np.linspace(-3 * r, -2 * r, 51)[:-1], np.linspace(5 * r, 6 * r, 51)[1:]])
    assert np.all(prof(out) == 1.0)
    # monotone or constant on each piece; the psi piece around 3 sqrt(eps)
    # is even about its centre, so it is checked on both halves
    edges = [-3 * r, -2 * r, -r, 0.0, r, 2 * r, 3 * r, 4 * r, 5 * r, 6 * r]
    for lo, hi in zip(edges[:-1], edges[1:]):
        vals = prof(np.linspace(lo, hi, 1000))
        d = np.diff(vals)
        assert np.all(d >= -1e-12) or np.all(d <= 1e-12)


def test_shift_examples(pot):
    prof = build_profile(0.01, 0.3, 1.0, pot)
    assert shift_s0(prof, 0.3) == 0.0
    s0 = shift_s0(prof, 0.5)
    assert s0 == pytest.approx(0.01 * math.log(0.7 / 0.5), abs=1e-12)
    assert prof.shifted(s0)(np.array([0.0]))[0] == pytest.approx(0.5, abs=1e-10)
    # with b = 1 the value 1 is first reached at the end of the first connector
    assert shift_s0(prof, 1.0) == pytest.approx(2 * 0.1, rel=1e-9)
    with pytest.raises(InvalidArgument):
        shift_s0(prof, 1.5)


def test_shift_order_bracket(pot):
    # eta = 1 / (1 + r) is the inner minimiser for the jump r = 1
    ratios = []
    for eps in (1e-1, 1e-2, 1e-3, 1e-4, 1e-5):
        s0 = shift_s0(build_profile(eps, 0.3, 1.0, pot), 0.5)
        ratios.append(s0 / eps ** 1.5)
    assert all(0.1 <= q <= 100 for q in ratios), ratios


# signed distance

def test_signed_distance_flat():
    seg = np.array([[0.2, 0.5], [0.8, 0.5]])
    pts = np.column_stack([np.linspace(0.2, 0.8, 7), np.full(7, 0.7)])
    assert np.allclose(signed_distance(seg, pts), 0.2)
    assert np.allclose(signed_distance(seg, pts - [0, 0.4]), -0.2)
    assert signed_distance(seg, np.array([0.5, 0.5])) == 0.0


def _dense_sd(a, b, pts):
    t = np.linspace(0, 1, 100_000)
    curve = a[None, :] + t[:, None] * (b - a)[None, :]
    d = np.array([np.min(np.hypot(*(curve - p).T)) for p in pts])
    cross = (b - a)[0] * (pts[:, 1] - a[1]) - (b - a)[1] * (pts[:, 0] - a[0])
    return np.sign(cross) * d


@pytest.mark.parametrize("seg", [((0.1, 0.2), (0.9, 0.6)), ((0.3, 0.9), (0.7, 0.1)), ((0.2, 0.45), (0.85, 0.55))])
def test_signed_distance_oblique(seg, rng):
    a, b = np.array(seg[0]), np.array(seg[1])
    pts = rng.uniform(0, 1, size=(200, 2))
    ref = _dense_sd(a, b, pts)
    got = signed_distance(np.array([a, b]), pts)
    h = np.hypot(*(b - a)) / 99_999
    assert np.max(np.abs(got - ref)) <= h


def test_signed_distance_not_graph():
    with pytest.raises(InvalidArgument):
        signed_distance(np.array([[0, 0], [1, 1], [0, 0.5]]), np.zeros((1, 2)))


# recovery field

def test_recovery_empty(pot, wq):
    g = GridField.on_domain(0, 1, 64)
    assert np.all(recovery_field(0.01, SlicedLimit1D((0, 1)), wq, pot, g).values == 1.0)
    g2 = GridField.on_domain((0, 0), (1, 1), (32, 32))
    assert np.all(recovery_field(0.01, Limit2D(()), wq, pot, g2).values == 1.0)


def test_recovery_1d_value(pot, wq):
    g = GridField.on_domain(0.0, 1.0, 1001)
    eps = 1e-3
    tk = float(g.coords(0)[500])
    lim = SlicedLimit1D((0, 1), ((tk, 0.3, 1.2),))
    v = recovery_field(eps, lim, wq, pot, g)
    assert v.values[500] == pytest.approx(0.3, abs=1e-12)
    # support within 5 sqrt(eps) + s0 of the jump
    off = np.abs(g.coords(0) - tk) > 5 * math.sqrt(eps)
    assert np.all(v.values[off] == 1.0)


def test_recovery_2d_band(pot, wq):
    eps = 1e-3
    g = GridField.on_domain((0, 0), (1, 1), (256, 256))
    lim = Limit2D(((0.25, 0.5, 0.75, 0.5, 0.0, 1.5),))
    v = recovery_field(eps, lim, wq, pot, g)
    X, Y = g.mesh()
    eta = 0.0
    on_line = np.abs(Y - 0.5) <= g.h
    inside = on_line & (X > 0.3) & (X < 0.7)
    lip = 1.0 / eps
    assert np.all(np.abs(v.values[inside] - eta) <= 2 * g.h * lip)
    sd = signed_distance(np.array([[0.25, 0.5], [0.75, 0.5]]), np.stack([X, Y], -1))
    assert np.all(v.values[np.abs(sd) > 5 * math.sqrt(eps)] == 1.0)
    area = np.count_nonzero(v.values != 1.0) * g.h ** 2
    r = math.sqrt(eps)
    assert area <= 7 * r * (0.5 + 2 * 5 * r)


def test_recovery_overlap(pot, wq):
    g = GridField.on_domain(0.0, 1.0, 400)
    lim = SlicedLimit1D((0, 1), ((0.4, 0.3, 1.2), (0.45, 0.3, 1.2)))
    with pytest.raises(EpsilonTooLarge):
        recovery_field(0.01, lim, wq, pot, g)
    lim2 = Limit2D(((0.2, 0.5, 0.8, 0.5, 0.0, 1.0), (0.2, 0.55, 0.8, 0.55, 0.0, 1.0)))
    with pytest.raises(EpsilonTooLarge):
        recovery_field(0.01, lim2, wq, pot, GridField.on_domain((0, 0), (1, 1), (64, 64)))


# profile decay lemma

def test_elpf_examples(pot):
    rep = check_elpf(pot, [0.0], [0.1])
    c, d, lhs, rhs = rep.rows[0]
    assert lhs == pytest.approx(math.exp(-20) / 0.01, rel=1e-6)
    assert lhs <= rhs
    rep = check_elpf(pot, [1.0], [0.5])
    assert rep.rows[0][2] == 0.0 and rep.rows[0][3] == 0.0
    rep = check_elpf(pot, [-1.0], [1.0])
    assert rep.rows[0][2] == pytest.approx(4 * math.exp(-2), rel=1e-8)
    assert rep.ok and rep.max_ratio <= 1.0


def test_elpf_quartic(pot4):
    rep = check_elpf(pot4, np.linspace(-2, 3, 11), np.geomspace(1e-2, 1, 9))
    assert rep.ok
