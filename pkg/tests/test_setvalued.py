import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kwc.errors import DegenerateSlice, InvalidArgument
from kwc.grid import GridField
from kwc.setvalued import (DirectionSet, Limit2D, SampledGraph, SlicedLimit1D, d_D, d_D_detail, d_nu,
                           d_nu_detail, essential_hausdorff, graph_of_field, graph_of_limit,
                           hausdorff, read_mask, read_segments, slice_limit, write_mask,
                           write_segments)

HSEG = Limit2D(((0.2, 0.5, 0.8, 0.5, 0.0, 1.0),))


def _brute_hausdorff(a, b):
    d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))
    return max(d.min(1).max(), d.min(0).max())


# slicing

def test_slice_perpendicular():
    sl = slice_limit(HSEG, (0.0, 1.0), (0.5, 0.0))
    assert len(sl.jumps) == 1
    assert sl.jumps[0][0] == pytest.approx(0.5)
    assert sl.jumps[0][1:] == (0.0, 1.0)


def test_slice_misses():
    sl = slice_limit(HSEG, (0.0, 1.0), (0.9, 0.0))
    assert sl.jumps == ()


def test_slice_oblique():
    # segment y = 0.5 over [0.2, 0.8]; line x + t nu with nu = (0.6, 0.8),
    # x = -0.2 (-0.8, 0.6) = (0.16, -0.12):  y = -0.12 + 0.8 t = 0.5 gives
    # t = 0.775, crossing at x-coordinate 0.16 + 0.6 * 0.775 = 0.625
    lim = Limit2D(((0.2, 0.5, 0.8, 0.5, 0.3, 1.2),))
    sl = slice_limit(lim, (0.6, 0.8), (0.16, -0.12))
    assert len(sl.jumps) == 1
    t, a, b = sl.jumps[0]
    assert t == pytest.approx(0.775, abs=1e-12)
    assert (a, b) == (0.3, 1.2)


def test_slice_errors():
    with pytest.raises(InvalidArgument):
        slice_limit(HSEG, (0.0, 1.0), (0.5, 0.1))
    with pytest.raises(DegenerateSlice):
        slice_limit(HSEG, (1.0, 0.0), (0.0, 0.5))


# graphs

def test_graph_of_field():
    g = graph_of_field(np.ones(3), t=[0.0, 0.5, 1.0])
    assert np.array_equal(g.points, [[0, 1], [0.5, 1], [1, 1]])
    assert graph_of_field(np.array([0.0, 1.0]), t=[0, 1]).points.shape == (2, 2)
    field = GridField.on_domain(0, 1, 17, values=np.linspace(0, 1, 17) ** 2)
    assert graph_of_field(field).points.shape[0] == 17
    with pytest.raises(InvalidArgument):
        graph_of_field(np.ones(1), t=[0.0])


def test_graph_of_limit():
    g = graph_of_limit(SlicedLimit1D((0, 1)), 0.5)
    assert g.points.shape[0] >= 3 and np.all(g.points[:, 1] == 1.0)
    g = graph_of_limit(SlicedLimit1D((0, 1), ((0.5, 0.0, 2.0),)), 0.5)
    vert = g.points[g.points[:, 0] == 0.5][:, 1]
    assert set(np.round(vert, 12)) >= {0.0, 0.5, 1.0, 1.5, 2.0}
    g = graph_of_limit(SlicedLimit1D((0, 1), ((0.5, 1.0, 1.0),)), 0.5)
    assert np.all(g.points[:, 1] == 1.0)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-3, 1), b=st.floats(1, 4), res=st.floats(0.01, 0.7))
def test_graph_of_limit_spacing(a, b, res):
    g = graph_of_limit(SlicedLimit1D((0, 1), ((0.4, a, b),)), res)
    vert = np.sort(g.points[g.points[:, 0] == 0.4][:, 1])
    assert vert[0] == pytest.approx(a) and vert[-1] == pytest.approx(b)
    assert np.all(np.diff(vert) <= res + 1e-12)


# Hausdorff

def test_hausdorff_examples(rng):
    a = rng.normal(size=(50, 2))
    b = rng.normal(size=(50, 2))
    assert hausdorff(a, a) == 0.0
    assert hausdorff(np.array([[0.0, 0.0]]), np.array([[3.0, 4.0]])) == 5.0
    assert hausdorff(a, b) == _brute_hausdorff(a, b)
    with pytest.raises(InvalidArgument):
        hausdorff(np.zeros((0, 2)), a)


def test_hausdorff_large_uses_tree(rng):
    a = rng.uniform(size=(12000, 2))
    b = rng.uniform(size=(300, 2))
    assert hausdorff(a, b) == pytest.approx(_brute_hausdorff(a, b), abs=1e-15)


point_sets = st.integers(1, 30).flatmap(
    lambda n: st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=n, max_size=n))


@settings(max_examples=60, deadline=None)
@given(a=point_sets, b=point_sets, c=point_sets)
def test_hausdorff_metric(a, b, c):
    a, b, c = (np.array(x, float) for x in (a, b, c))
    ab, ba = hausdorff(a, b), hausdorff(b, a)
    assert ab == ba
    assert hausdorff(a, c) <= ab + hausdorff(b, c) + 1e-12
    assert hausdorff(a, a) == 0.0


# sliced metrics

FULL = Limit2D(((0.0, 0.5, 1.0, 0.5, 0.0, 1.0),))
EMPTY = Limit2D(())


def test_d_nu_examples():
    assert d_nu(HSEG, HSEG) == 0.0
    s1 = SlicedLimit1D((0, 1))
    s2 = SlicedLimit1D((0, 1), ((0.5, 0.0, 1.0),))
    assert d_nu(s1, s2) == pytest.approx(0.5)
    # every vertical slice: the jump [0, 1] sits at distance 1 from the
    # background graph, so d_g = 1 and the integrand 1/2 integrates to 0.5
    m = d_nu_detail(EMPTY, FULL, (0.0, 1.0))
    assert np.allclose(m.per_slice, 1.0)
    assert m.value == pytest.approx(0.5, abs=1e-12)


def test_d_nu_symmetric():
    other = Limit2D(((0.3, 0.2, 0.6, 0.7, 0.4, 1.5),))
    assert d_nu(HSEG, other, (0.6, 0.8)) == d_nu(other, HSEG, (0.6, 0.8))


def test_d_nu_skips_degenerate():
    m = d_nu_detail(EMPTY, FULL, (1.0, 0.0), positions=[0.5, 0.25])
    # slice y = 0.5 runs along the segment (skipped); y = 0.25 sees no jump
    assert m.skipped == 1
    assert m.value == 0.0


def test_d_D_examples():
    assert d_D(HSEG, HSEG) == 0.0
    one = DirectionSet(np.array([[0.0, 1.0]]))
    assert d_D(EMPTY, FULL, one) == pytest.approx(0.5 * 0.5 / 1.5, abs=1e-12)
    two = DirectionSet(np.array([[0.0, 1.0], [1.0, 0.0]]))
    det = d_D_detail(EMPTY, FULL, two)
    # horizontal slices never cross the segment transversally: d = 0
    assert det.per_direction[1] == 0.0
    assert det.value == pytest.approx(0.5 * 0.5 / 1.5 + 0.25 * 0.0, abs=1e-12)
    assert det.tail_bound == 0.25


def test_direction_set_golden():
    d = DirectionSet.golden(8)
    assert len(d) == 8 and np.allclose(d.directions[0], [1, 0])
    assert d.weights.sum() == pytest.approx(1 - 2 ** -8)
    with pytest.raises(InvalidArgument):
        DirectionSet(np.array([[1.0, 1.0]]))


# essential Hausdorff

def test_essential_hausdorff_examples():
    n, h = 200, 1.0 / 200
    A = np.zeros((n, n), bool)
    A[20:120, 20:120] = True
    assert essential_hausdorff(A, A, h) == 0.0
    B = np.roll(A, 3, axis=0)
    val = essential_hausdorff(A, B, h)
    assert abs(val - 3 * h) <= 2 * h
    assert essential_hausdorff(A, B, h, method="kdtree") == pytest.approx(val)
    with pytest.raises(InvalidArgument):
        essential_hausdorff(A, np.zeros_like(A), h)


def test_essential_hausdorff_bump():
    from kwc.cli import radial_bump_distances
    d_eh, _, h = radial_bump_distances(0.05, n=256)
    assert abs(d_eh - 1.0) <= 2 * h


# file formats

def test_segments_roundtrip(tmp_path):
    lim = Limit2D(((0.2, 0.5, 0.8, 0.5, 0.3, 1.2), (0.1, 0.1, 0.1, 0.3, 1.0, 2.0)))
    write_segments(tmp_path / "s.txt", lim)
    back = read_segments(tmp_path / "s.txt")
    assert len(back.segments) == 2
    assert np.allclose(back.segments[0].a, [0.2, 0.5])
    assert back.segments[1].xi_plus == 2.0


def test_mask_roundtrip(tmp_path, rng):
    m = rng.uniform(size=(7, 5)) > 0.5
    write_mask(tmp_path / "m.pgm", m)
    assert np.array_equal(read_mask(tmp_path / "m.pgm"), m)


def test_limit_validation():
    with pytest.raises(InvalidArgument):
        Limit2D(((0.2, 0.5, 0.8, 0.5, 1.2, 1.3),))
    with pytest.raises(InvalidArgument):
        Limit2D(((0.2, 0.5, 0.8, 0.5, 0, 1), (0.5, 0.2, 0.5, 0.8, 0, 1)))
    with pytest.raises(InvalidArgument):
        SlicedLimit1D((0, 1), ((0.6, 0, 1), (0.4, 0, 1)))
