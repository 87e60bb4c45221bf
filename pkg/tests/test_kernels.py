import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kwc import _pykernels, kernels

try:
    from kwc import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = [_pykernels] + ([_ckernels] if _ckernels is not None else [])
ids = [b.__name__.rsplit(".", 1)[-1] for b in BACKENDS]


def tv_objective(x, y, w):
    return 0.5 * np.sum((x - y) ** 2) + np.sum(w * np.abs(np.diff(x)))


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("mod", BACKENDS, ids=ids)
def test_directed_hausdorff(mod, rng):
    a, b = rng.normal(size=(40, 2)), rng.normal(size=(30, 2))
    d = np.sqrt(((a[:, None] - b[None]) ** 2).sum(-1)).min(1).max()
    assert mod.directed_hausdorff(a, b) == pytest.approx(d, abs=1e-15)


@pytest.mark.parametrize("mod", BACKENDS, ids=ids)
def test_tv_prox_optimality(mod, rng):
    # optimality: the partial sums p of y - x satisfy |p| <= lam, p = -lam sign(Dx) on jumps
    y = np.cumsum(rng.normal(size=200))
    lam = 1.5
    x = mod.tv_prox_1d(y, lam)
    p = np.cumsum(y - x)[:-1]
    assert abs(np.sum(y - x)) < 1e-9
    assert np.all(np.abs(p) <= lam + 1e-9)
    d = np.diff(x)
    jump = np.abs(d) > 1e-10
    assert np.allclose(p[jump], -lam * np.sign(d[jump]), atol=1e-8)


@pytest.mark.parametrize("mod", BACKENDS, ids=ids)
def test_weighted_matches_uniform(mod, rng):
    y = rng.normal(size=300)
    a = mod.tv_prox_1d(y, 0.7)
    b = mod.tv_prox_1d_weighted(y, np.full(299, 0.7))
    assert np.max(np.abs(a - b)) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**20), n=st.integers(2, 60))
def test_weighted_prox_is_minimal(seed, n):
    rng = np.random.default_rng(seed)
    y = rng.normal(size=n) * 2
    w = rng.uniform(0, 1.5, n - 1)
    best = tv_objective(kernels.tv_prox_1d_weighted(y, w), y, w)
    # any perturbation increases the strictly convex objective
    for _ in range(20):
        z = kernels.tv_prox_1d_weighted(y, w) + 1e-3 * rng.normal(size=n)
        assert tv_objective(z, y, w) >= best - 1e-12


def test_weighted_length_check():
    with pytest.raises(ValueError):
        kernels.tv_prox_1d_weighted(np.zeros(5), np.zeros(5))


@pytest.mark.parametrize("mod", BACKENDS, ids=ids)
def test_chain_dp_enumeration(mod, rng):
    n, k = 6, 4
    node = rng.uniform(size=(n, k))
    J = rng.uniform(size=(k, k))
    np.fill_diagonal(J, 0.0)
    labels, total = mod.chain_dp(node, J)
    best = min(node[np.arange(n), lab].sum() + J[list(lab[:-1]), list(lab[1:])].sum()
               for lab in itertools.product(range(k), repeat=n))
    assert total == pytest.approx(best, abs=1e-12)
    assert node[np.arange(n), labels].sum() + J[labels[:-1], labels[1:]].sum() == pytest.approx(total)


@pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")
def test_backends_agree(rng):
    y = rng.normal(size=5000)
    w = rng.uniform(0, 1, 4999)
    assert np.max(np.abs(_ckernels.tv_prox_1d(y, 0.3) - _pykernels.tv_prox_1d(y, 0.3))) <= 1e-12
    assert np.max(np.abs(_ckernels.tv_prox_1d_weighted(y, w) - _pykernels.tv_prox_1d_weighted(y, w))) <= 1e-12
    node, J = rng.uniform(size=(50, 12)), rng.uniform(size=(12, 12))
    lc, tc = _ckernels.chain_dp(node, J)
    lp, tp = _pykernels.chain_dp(node, J)
    assert np.array_equal(lc, lp) and tc == pytest.approx(tp, abs=1e-12)
    a, b = rng.normal(size=(300, 2)), rng.normal(size=(200, 2))
    assert _ckernels.directed_hausdorff(a, b) == _pykernels.directed_hausdorff(a, b)
