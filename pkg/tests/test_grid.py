import numpy as np
import pytest

from kwc.errors import InvalidArgument
from kwc.grid import GridField, read_field, write_field


def test_cell_centres():
    g = GridField.on_domain(0.0, 1.0, 4)
    assert np.allclose(g.coords(0), [0.125, 0.375, 0.625, 0.875])
    assert g.h == 0.25 and g.upper[0] == 1.0


def test_roundtrip_2d(tmp_path, rng):
    g = GridField.on_domain((0, -1), (2, 1), (4, 4), values=rng.normal(size=(4, 4)))
    write_field(tmp_path / "f.txt", g)
    back = read_field(tmp_path / "f.txt")
    assert back.same_grid(g)
    assert np.array_equal(back.values, g.values)


def test_roundtrip_1d(tmp_path):
    g = GridField.on_domain(-1.5, 2.5, 8, values=np.arange(8.0))
    write_field(tmp_path / "f.txt", g)
    assert np.array_equal(read_field(tmp_path / "f.txt").values, g.values)


def test_invalid():
    with pytest.raises(InvalidArgument):
        GridField(np.array([1.0, np.nan]), 0.1, (0.0,))
    with pytest.raises(InvalidArgument):
        GridField(np.ones(3), 0.0, (0.0,))
    with pytest.raises(InvalidArgument):
        GridField.on_domain((0, 0), (1, 2), (4, 4))


def test_bad_header(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("dims=1 shape=3\n1 2 3\n")
    with pytest.raises(InvalidArgument):
        read_field(p)
