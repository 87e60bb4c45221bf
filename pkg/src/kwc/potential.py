"""Single-well potentials, jump weights and the relaxed jump cost.

A potential ``F`` vanishes only at ``v = 1``; a weight ``alpha`` multiplies
the total variation of ``u``.  The derived quantities are

* ``G(sigma) = |int_1^sigma sqrt(F)|``, the optimal one-sided transition cost,
* ``alpha_min(a, b)``, the minimum of ``alpha`` over ``[a, b]``,
* ``sigma_jump_cost(r)``, the cheapest phase-field price of a jump of size ``r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from .errors import InvalidArgument, NumericFailure

DEFAULT_SAMPLE_GRID = np.union1d(np.linspace(-10.0, 12.0, 2201), [1.0])

# 16-point Gauss-Legendre rule on [0, 1], used for cumulative integrals.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


@dataclass(frozen=True)
class AssumptionReport:
    F1_ok: bool
    F2_ok: bool
    F2prime_ok: bool
    worst_violation: float


def check_assumptions(spec: "PotentialSpec", sample_grid) -> AssumptionReport:
    """Pointwise check of the single-well assumptions on ``sample_grid``.

    F1: ``F >= 0`` with a zero exactly at 1 and nowhere else.
    F2: ``F`` stays positive on the outer half of the sampled range.
    F2': ``F'(v)(v - 1) >= 0``.
    """
    v = np.asarray(sample_grid, dtype=float).ravel()
    if v.size == 0:
        raise InvalidArgument("sample grid is empty")
    if not np.any(v == 1.0):
        v = np.union1d(v, [1.0])
    f = np.asarray(spec.F(v), dtype=float)
    df = np.asarray(spec.dF(v), dtype=float)
    off = v != 1.0

    negativity = float(max(0.0, -f.min()))
    at_well = float(abs(spec.F(1.0)))
    f1 = negativity == 0.0 and at_well <= 1e-14 and bool(np.all(f[off] > 0.0))

    radius = float(np.abs(v - 1.0).max())
    outer = np.abs(v - 1.0) >= 0.5 * radius
    f2 = radius > 0 and bool(np.all(f[outer] > 0.0))

    mono = df * (v - 1.0)
    f2p = bool(np.all(mono >= -1e-12))
    worst = max(negativity, at_well, float(max(0.0, -mono.min())))
    return AssumptionReport(f1, f2, f2p, worst)


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """Single-well potential ``F`` with its derivative.

    Assumption flags are computed on construction over ``sample_grid``.
    """

    kind: str
    F: Callable
    dF: Callable
    params: dict = field(default_factory=dict)
    sample_grid: np.ndarray = field(default=DEFAULT_SAMPLE_GRID, repr=False)
    satisfies_F1: bool = field(init=False)
    satisfies_F2: bool = field(init=False)
    satisfies_F2prime: bool = field(init=False)

    def __post_init__(self):
        rep = check_assumptions(self, self.sample_grid)
        object.__setattr__(self, "satisfies_F1", rep.F1_ok)
        object.__setattr__(self, "satisfies_F2", rep.F2_ok)
        object.__setattr__(self, "satisfies_F2prime", rep.F2prime_ok)

    def __call__(self, v):
        return self.F(v)

    def sqrt_F(self, v):
        return np.sqrt(np.maximum(self.F(v), 0.0))


def quadratic() -> PotentialSpec:
    """``F(v) = (v - 1)^2``."""
    return PotentialSpec(
        "quadratic",
        lambda v: (np.asarray(v, dtype=float) - 1.0) ** 2,
        lambda v: 2.0 * (np.asarray(v, dtype=float) - 1.0),
    )


def quartic() -> PotentialSpec:
    """``F(v) = (v - 1)^2 (v^2 + 1)``."""

    def F(v):
        v = np.asarray(v, dtype=float)
        return (v - 1.0) ** 2 * (v * v + 1.0)

    def dF(v):
        v = np.asarray(v, dtype=float)
        return 2.0 * (v - 1.0) * (v * v + 1.0) + 2.0 * v * (v - 1.0) ** 2

    return PotentialSpec("quartic", F, dF)


def custom(F: Callable, dF: Callable | None = None, h: float = 1e-6) -> PotentialSpec:
    """Wrap an arbitrary callable; ``dF`` defaults to a centred difference."""
    if dF is None:

        def dF(v):
            v = np.asarray(v, dtype=float)
            return (np.asarray(F(v + h)) - np.asarray(F(v - h))) / (2 * h)

    def Fv(v):
        return np.asarray(F(np.asarray(v, dtype=float)), dtype=float) + 0.0 * np.asarray(v, dtype=float)

    return PotentialSpec("custom", Fv, dF)


def tabulated(values, fvalues) -> PotentialSpec:
    """Monotone piecewise-cubic interpolant through ``(value, F-value)`` pairs.

    Outside the table the end segments are continued by the interpolant's own
    extrapolation, so keep tables wide.
    """
    x = np.asarray(values, dtype=float)
    y = np.asarray(fvalues, dtype=float)
    order = np.argsort(x)
    x, y = x[order], y[order]
    if x.size < 2 or np.any(np.diff(x) <= 0):
        raise InvalidArgument("table needs at least two distinct values")
    interp = PchipInterpolator(x, y, extrapolate=True)
    deriv = interp.derivative()
    lo, hi = float(x[0]), float(x[-1])
    grid = np.union1d(np.linspace(lo, hi, 2001), [1.0])
    return PotentialSpec(
        "tabulated",
        lambda v: interp(np.asarray(v, dtype=float)),
        lambda v: deriv(np.asarray(v, dtype=float)),
        {"table": (x, y)},
        grid,
    )


def load_table(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a two-column plain-text table (``#`` comments allowed)."""
    data = np.loadtxt(Path(path), comments="#", ndmin=2)
    if data.shape[1] != 2:
        raise InvalidArgument(f"{path}: expected two columns, got {data.shape[1]}")
    return data[:, 0], data[:, 1]


@dataclass(frozen=True, eq=False)
class WeightSpec:
    """Jump weight ``alpha >= 0`` multiplying ``|Du|``."""

    kind: str
    alpha: Callable
    params: dict = field(default_factory=dict)

    def __call__(self, v):
        return self.alpha(v)


def weight_quadratic() -> WeightSpec:
    return WeightSpec("quadratic", lambda v: np.asarray(v, dtype=float) ** 2)


def weight_shifted(offset: float) -> WeightSpec:
    if offset < 0:
        raise InvalidArgument("offset must be non-negative")
    return WeightSpec(
        "shifted", lambda v: np.asarray(v, dtype=float) ** 2 + offset, {"offset": offset}
    )


def weight_custom(alpha: Callable | None = None, table=None) -> WeightSpec:
    """Custom weight from a callable or a piecewise-linear ``(v, alpha)`` table."""
    if table is not None:
        x, y = (np.asarray(t, dtype=float) for t in table)
        if np.any(y < 0):
            raise InvalidArgument("weight table has negative entries")
        return WeightSpec(
            "custom", lambda v: np.interp(np.asarray(v, dtype=float), x, y), {"table": (x, y)}
        )
    if alpha is None:
        raise InvalidArgument("need a callable or a table")
    return WeightSpec(
        "custom", lambda v: np.asarray(alpha(np.asarray(v, dtype=float)), dtype=float) + 0.0 * np.asarray(v, dtype=float)
    )


def potential_from_config(block: dict | None) -> PotentialSpec:
    block = dict(block or {})
    name = block.get("name", "quadratic")
    if name == "quadratic":
        return quadratic()
    if name == "quartic":
        return quartic()
    if name in ("table", "tabulated"):
        return tabulated(*load_table(block["file"]))
    raise InvalidArgument(f"unknown potential {name!r}")


def weight_from_config(block: dict | None) -> WeightSpec:
    block = dict(block or {})
    name = block.get("name", "quadratic")
    if name == "quadratic":
        return weight_quadratic()
    if name == "shifted":
        return weight_shifted(float(block.get("offset", 0.0)))
    if name in ("table", "custom"):
        return weight_custom(table=load_table(block["file"]))
    raise InvalidArgument(f"unknown weight {name!r}")


# ---------------------------------------------------------------------------
# G and cumulative integrals of sqrt(F)


def G(spec: PotentialSpec, sigma: float, tol: float = 1e-10) -> float:
    """``|int_1^sigma sqrt(F)|`` by adaptive Gauss-Kronrod quadrature."""
    sigma = float(sigma)
    if sigma == 1.0:
        return 0.0
    lo, hi = min(1.0, sigma), max(1.0, sigma)
    val, err = integrate.quad(
        lambda t: math.sqrt(max(float(spec.F(t)), 0.0)), lo, hi,
        epsabs=1e-13, epsrel=1e-13, limit=200,
    )
    if not err <= tol:
        raise NumericFailure(f"G({sigma}) quadrature did not converge", achieved=err)
    return abs(val)


def G_cumulative(spec: PotentialSpec, grid) -> np.ndarray:
    """``G`` at every point of a sorted ``grid`` that contains 1.

    Uses a 16-point Gauss-Legendre rule per cell, accumulated outward from 1.
    Much cheaper than calling :func:`G` per point and accurate to roundoff
    for smooth ``F``.
    """
    x = np.asarray(grid, dtype=float)
    i1 = int(np.searchsorted(x, 1.0))
    if i1 >= x.size or x[i1] != 1.0:
        raise InvalidArgument("grid must contain 1")
    a, b = x[:-1], x[1:]
    nodes = a[:, None] + (b - a)[:, None] * _GL_X[None, :]
    cell = (b - a) * (spec.sqrt_F(nodes) @ _GL_W)
    out = np.zeros_like(x)
    out[i1 + 1:] = np.cumsum(cell[i1:])
    out[:i1] = np.cumsum(cell[:i1][::-1])[::-1]
    return out


# ---------------------------------------------------------------------------
# interval minimum of alpha

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden(f, a, b, tol=1e-10):
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    x = c if fc <= fd else d
    return x, min(fc, fd)


def alpha_min(weight: WeightSpec, xi_minus: float, xi_plus: float, nodes: int = 4097):
    """Return ``(eta, alpha(eta))`` with ``eta`` minimising ``alpha`` on the interval.

    Dense sampling then golden-section refinement around the best node; the
    smallest minimiser wins ties.
    """
    lo, hi = float(xi_minus), float(xi_plus)
    if lo > hi:
        raise InvalidArgument(f"inverted interval [{lo}, {hi}]")
    if lo == hi:
        return lo, float(weight(lo))
    x = np.linspace(lo, hi, nodes)
    y = np.asarray(weight(x), dtype=float)
    k = int(np.argmin(y))
    eta, val = float(x[k]), float(y[k])
    a, b = x[max(k - 1, 0)], x[min(k + 1, nodes - 1)]
    ref, fref = _golden(lambda t: float(weight(t)), a, b)
    if fref < val - 1e-15 * max(1.0, abs(val)):
        eta, val = ref, fref
    return eta, val


# ---------------------------------------------------------------------------
# relaxed jump cost


@dataclass(frozen=True)
class JumpCost:
    value: float
    xi_minus: float
    xi_plus: float
    eta: float


def _running_min_toward(values: np.ndarray) -> np.ndarray:
    """Running minimum accumulated from the end of the array to the start."""
    return np.minimum.accumulate(values[::-1])[::-1]


def sigma_minimizer(weight: WeightSpec, pot: PotentialSpec, r: float,
                    xi_max: float = 10.0, nodes: int = 4001) -> JumpCost:
    """Minimise ``r * min_{[xi-, xi+]} alpha + 2(G(xi-) + G(xi+))``.

    When ``alpha(v) >= alpha(1)`` for ``v >= 1`` the upper end is pinned at 1
    and only ``xi-`` in ``[1 - xi_max, 1]`` is searched.
    """
    r = float(r)
    if r < 0:
        raise InvalidArgument("jump size must be non-negative")
    if r == 0:
        return JumpCost(0.0, 1.0, 1.0, 1.0)
    a1 = float(weight(1.0))
    upper = np.linspace(1.0, 1.0 + xi_max, 1001)
    pinned = bool(np.all(np.asarray(weight(upper)) >= a1 - 1e-14))

    left = np.linspace(1.0 - xi_max, 1.0, nodes)
    gl = G_cumulative(pot, left)
    # dense grid for the interval minimum of alpha
    fine_l = np.linspace(1.0 - xi_max, 1.0, 8 * (nodes - 1) + 1)
    ml = _running_min_toward(np.asarray(weight(fine_l), dtype=float))[::8]

    def inner(lo, hi):
        return alpha_min(weight, lo, hi)

    if pinned:
        obj = r * ml + 2.0 * gl
        k = int(np.argmin(obj))
        a, b = left[max(k - 1, 0)], left[min(k + 1, nodes - 1)]

        def f(x):
            return r * inner(x, 1.0)[1] + 2.0 * G(pot, x)

        x, fx = _golden(f, a, b, tol=1e-11)
        if fx > obj[k]:
            x, fx = float(left[k]), f(float(left[k]))
        eta = inner(x, 1.0)[0]
        return JumpCost(float(fx), float(x), 1.0, float(eta))

    right = np.linspace(1.0, 1.0 + xi_max, nodes)
    gr = G_cumulative(pot, right)
    fine_r = np.linspace(1.0, 1.0 + xi_max, 8 * (nodes - 1) + 1)
    mr = np.minimum.accumulate(np.asarray(weight(fine_r), dtype=float))[::8]
    # coarse 2D search on a thinned lattice, separable interval minimum
    step = max(1, nodes // 400)
    L, R = slice(None, None, step), slice(None, None, step)
    obj = r * np.minimum(ml[L][:, None], mr[R][None, :]) + 2.0 * (gl[L][:, None] + gr[R][None, :])
    i, j = np.unravel_index(int(np.argmin(obj)), obj.shape)
    x, y = float(left[L][i]), float(right[R][j])
    hx, hy = step * (left[1] - left[0]), step * (right[1] - right[0])

    def f2(p, q):
        return r * inner(p, q)[1] + 2.0 * (G(pot, p) + G(pot, q))

    best = f2(x, y)
    for _ in range(30):
        x, _ = _golden(lambda p: f2(p, y), max(1.0 - xi_max, x - hx), min(1.0, x + hx), 1e-11)
        y, fy = _golden(lambda q: f2(x, q), max(1.0, y - hy), min(1.0 + xi_max, y + hy), 1e-11)
        if best - fy < 1e-14:
            best = min(best, fy)
            break
        best = fy
    eta = inner(x, y)[0]
    return JumpCost(float(best), x, y, float(eta))


def sigma_jump_cost(weight: WeightSpec, pot: PotentialSpec, r: float, xi_max: float = 10.0) -> float:
    """Cheapest phase-field cost of a jump of size ``r`` (``r/(1+r)`` for the defaults)."""
    return sigma_minimizer(weight, pot, r, xi_max).value
