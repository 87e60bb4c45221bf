"""Recovery sequences: the optimal transition profile and its grid transport.

``psi(s, c)`` runs from ``c`` toward the well at 1 along
``dpsi/ds = sqrt(F(psi))``; it is defined through the inverse map
``s(psi) = int_c^psi dz / sqrt(F(z))`` which is tabulated on a mesh graded
geometrically toward 1, where the integrand blows up.  Eight pieces of rescaled
``psi`` and linear connectors make up the profile ``Psi_eps(s, a, b)``, which
is transported to the grid through the signed distance to each jump.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import EpsilonTooLarge, InvalidArgument, NumericFailure, PropertyViolation
from .grid import GridField
from .potential import PotentialSpec, WeightSpec, alpha_min
from .setvalued import Limit2D, SlicedLimit1D

_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def _inv_sqrt_F(pot, z):
    f = np.asarray(pot.F(z), dtype=float)
    with np.errstate(divide="ignore"):
        return 1.0 / np.sqrt(np.maximum(f, 0.0))


class ProfileTable:
    """Tabulated ``psi(., c)`` for one potential and anchor ``c``.

    ``s_grid`` and ``psi_values`` hold the inverse map on the graded mesh;
    ``s_star`` is the arrival time at the well (``inf`` for potentials with a
    non-degenerate minimum, where the well is reached only asymptotically).
    """

    def __init__(self, potential: PotentialSpec, c: float, step: float = 1e-3, q_min: float = 1e-15):
        self.potential = potential
        self.c = float(c)
        if self.c == 1.0:
            self.s_grid = np.array([0.0])
            self.psi_values = np.array([1.0])
            self.s_star = 0.0
            self._spline = None
            return
        sign = 1.0 if self.c < 1.0 else -1.0
        # stop while consecutive mesh values are still distinct in floating point
        q_min = max(q_min, 16.0 * np.finfo(float).eps / (step * abs(1.0 - self.c)))
        k = np.arange(int(math.ceil(math.log(1.0 / q_min) / step)) + 1)
        q = np.exp(-step * k)
        psi = 1.0 - (1.0 - self.c) * q
        psi[0] = self.c
        a, b = psi[:-1], psi[1:]
        nodes = a[:, None] + (b - a)[:, None] * _GL_X[None, :]
        cell = np.abs(b - a) * (_inv_sqrt_F(potential, nodes) @ _GL_W)
        if not np.all(np.isfinite(cell)):
            raise NumericFailure(f"1/sqrt(F) not integrable between {self.c} and 1 (F1 violated?)")
        s = np.concatenate([[0.0], np.cumsum(cell)])
        # tail behaviour decides whether the well is reached in finite time:
        # geometric decay of the cells means a convergent remainder
        k1, k2 = cell.size // 2, cell.size - 1
        expo = 0.0
        if cell[k1] > 0 and cell[k2] > 0:
            expo = -math.log(cell[k2] / cell[k1]) / (step * (k2 - k1))
        if expo > 1e-3:
            rho = math.exp(-expo * step)
            self.s_star = float(s[-1] + cell[k2] * rho / (1.0 - rho))
        else:
            self.s_star = math.inf
        keep = np.concatenate([[True], np.diff(s) > 0])
        s, psi = s[keep], psi[keep]
        self.s_grid = s
        self.psi_values = psi
        slope = sign * np.sqrt(np.maximum(potential.F(psi), 0.0))
        self._spline = CubicHermiteSpline(s, psi, slope, extrapolate=False)

    def __call__(self, s):
        s = np.abs(np.asarray(s, dtype=float))
        if self._spline is None:
            return np.ones_like(s)
        out = np.empty_like(s)
        inside = s <= self.s_grid[-1]
        out[inside] = self._spline(s[inside])
        out[~inside] = np.where(s[~inside] >= self.s_star, 1.0, self.psi_values[-1])
        return out

    def arrival(self, target: float) -> float:
        """Parameter ``s >= 0`` at which the profile takes the value ``target``."""
        if self._spline is None:
            return 0.0
        target = float(target)
        lo, hi = sorted((self.c, 1.0))
        if not lo <= target <= hi:
            raise InvalidArgument(f"{target} not between {self.c} and 1")
        if target == 1.0:
            return self.s_star
        psi = self.psi_values
        if self.c < 1.0:
            k = int(np.searchsorted(psi, target, side="right")) - 1
        else:
            k = int(np.searchsorted(-psi, -target, side="right")) - 1
        k = min(max(k, 0), psi.size - 1)
        start = psi[k]
        nodes = start + (target - start) * _GL_X
        return float(self.s_grid[k] + abs(target - start) * (_inv_sqrt_F(self.potential, nodes) @ _GL_W))

    def ode_residual(self) -> np.ndarray:
        """Centred-difference residual of ``dpsi/ds = +-sqrt(F(psi))`` at interior nodes."""
        s, p = self.s_grid, self.psi_values
        if s.size < 3:
            return np.zeros(0)
        dp = (p[2:] - p[:-2]) / (s[2:] - s[:-2])
        sign = 1.0 if self.c < 1.0 else -1.0
        return np.abs(dp - sign * np.sqrt(np.maximum(self.potential.F(p[1:-1]), 0.0)))


@functools.lru_cache(maxsize=256)
def profile_table(potential: PotentialSpec, c: float) -> ProfileTable:
    return ProfileTable(potential, c)


def psi(pot: PotentialSpec, s, c: float):
    """Even profile ``psi(s, c)``; scalar in, scalar out.

    Interpolated from the table, then polished by Newton steps on the
    quadrature map.
    """
    table = profile_table(pot, float(c))
    s_arr = np.asarray(s, dtype=float)
    guess = table(s_arr)
    if s_arr.ndim or table._spline is None:
        return guess if s_arr.ndim else float(guess)
    target = abs(float(s_arr))
    p = float(guess)
    if target >= table.s_grid[-1] or p == 1.0:
        return p
    sign = 1.0 if table.c < 1.0 else -1.0
    for _ in range(3):
        resid = table.arrival(p) - target
        slope = math.sqrt(max(float(pot.F(p)), 0.0))
        if slope == 0.0 or abs(resid) < 1e-15:
            break
        p -= sign * resid * slope
    return p


# ---------------------------------------------------------------------------
# eight-piece profile


@dataclass(frozen=True)
class Piece:
    lo: float
    hi: float
    kind: str  # "constant", "linear" or "psi"
    slope: float = 0.0
    intercept: float = 0.0  # linear pieces: value at ``lo``
    anchor: float = 1.0
    center: float = 0.0


@dataclass(frozen=True, eq=False)
class PiecewiseProfile:
    """``Psi_eps(s + s0, a, b)`` assembled from eight pieces."""

    epsilon: float
    a: float
    b: float
    pieces: tuple
    potential: PotentialSpec
    s0: float = 0.0

    @property
    def breakpoints(self) -> np.ndarray:
        r = math.sqrt(self.epsilon)
        return r * np.array([-2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 5.0])

    @property
    def support(self) -> tuple:
        """Interval outside which the shifted profile equals 1."""
        r = math.sqrt(self.epsilon)
        return (-2.0 * r - self.s0, 5.0 * r - self.s0)

    def unshifted(self, s):
        s = np.asarray(s, dtype=float)
        out = np.ones_like(s)
        for pc in self.pieces:
            if pc.kind == "constant":
                continue
            m = (s >= pc.lo) & (s <= pc.hi)
            if not np.any(m):
                continue
            if pc.kind == "linear":
                out[m] = pc.intercept + pc.slope * (s[m] - pc.lo)
            else:
                table = profile_table(self.potential, pc.anchor)
                out[m] = table((s[m] - pc.center) / self.epsilon)
        return out

    def __call__(self, s):
        return self.unshifted(np.asarray(s, dtype=float) + self.s0)

    def shifted(self, s0: float) -> "PiecewiseProfile":
        return replace(self, s0=float(s0))

    def to_rows(self, samples: int = 2001):
        lo, hi = self.support
        pad = 0.1 * (hi - lo)
        s = np.linspace(lo - pad, hi + pad, samples)
        return np.column_stack([s, self(s)])


def build_profile(eps: float, a: float, b: float, pot: PotentialSpec) -> PiecewiseProfile:
    eps, a, b = float(eps), float(a), float(b)
    if not 0.0 < eps < 1.0:
        raise InvalidArgument("epsilon must lie in (0, 1)")
    if a > 1.0 or b < 1.0:
        raise InvalidArgument(f"need a <= 1 <= b, got a={a}, b={b}")
    r = math.sqrt(eps)
    pa = float(profile_table(pot, a)(r / eps))
    pb = float(profile_table(pot, b)(r / eps))

    def connector(s1, v1, s2, v2):
        return Piece(s1, s2, "linear", (v2 - v1) / (s2 - s1), v1)

    pieces = (
        Piece(-math.inf, -2 * r, "constant"),
        connector(-2 * r, 1.0, -r, pa),
        Piece(-r, 0.0, "psi", anchor=a, center=0.0),
        Piece(0.0, r, "psi", anchor=a, center=0.0),
        connector(r, pa, 2 * r, pb),
        Piece(2 * r, 4 * r, "psi", anchor=b, center=3 * r),
        connector(4 * r, pb, 5 * r, 1.0),
        Piece(5 * r, math.inf, "constant"),
    )
    return PiecewiseProfile(eps, a, b, pieces, pot)


def _bisect(f, lo, hi, tol):
    flo = f(lo)
    if flo == 0.0:
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0) and fm != 0.0:
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def shift_s0(profile: PiecewiseProfile, eta: float) -> float:
    """Smallest ``s0 >= 0`` with ``Psi_eps(s0) = eta``.

    Each piece to the right of 0 is monotone, so the first piece whose range
    contains ``eta`` holds the root; it is located by bisection.
    """
    eta = float(eta)
    r = math.sqrt(profile.epsilon)
    grid = np.concatenate([np.linspace(-2 * r, 5 * r, 2001), [0.0, 3 * r]])
    vals = profile.unshifted(grid)
    if not vals.min() - 1e-14 <= eta <= vals.max() + 1e-14:
        raise InvalidArgument(f"eta={eta} outside the profile range [{vals.min()}, {vals.max()}]")
    if abs(profile.unshifted(np.array([0.0]))[0] - eta) <= 1e-14:
        return 0.0
    tol = 1e-12 * r
    f = lambda s: float(profile.unshifted(np.array([s]))[0]) - eta  # noqa: E731
    # monotone pieces on s >= 0: [0, r], [r, 2r], [2r, 3r], [3r, 4r], [4r, 5r]
    for lo, hi in ((0, r), (r, 2 * r), (2 * r, 3 * r), (3 * r, 4 * r), (4 * r, 5 * r)):
        flo, fhi = f(lo), f(hi)
        if flo == 0.0 and lo > 0:
            return lo
        if flo * fhi <= 0.0:
            return _bisect(f, lo, hi, tol)
    raise InvalidArgument(f"eta={eta} is not attained for s > 0")


# ---------------------------------------------------------------------------
# signed distance


def _as_polyline(obj) -> np.ndarray:
    pts = np.asarray(obj, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise InvalidArgument("a curve needs at least two planar vertices")
    return pts


def _graph_axis(pts: np.ndarray) -> int:
    """Axis over which the polyline is a graph (0: y = p(x), 1: x = p(y))."""
    for axis in (0, 1):
        d = np.diff(pts[:, axis])
        if np.all(d > 0) or np.all(d < 0):
            return axis
    raise InvalidArgument("curve is not a graph over either axis")


def signed_distance(curve, points) -> np.ndarray:
    """Signed distance from ``points`` (``(..., 2)``) to a graph-like polyline.

    The magnitude is the exact Euclidean distance to the curve.  For a graph
    ``y = p(x)`` the sign is positive above it; for ``x = p(y)`` positive to its
    right.  Beyond the ends, ``p`` is continued along the end segments.
    """
    pts = _as_polyline(curve)
    if np.any(np.hypot(*np.diff(pts, axis=0).T) == 0):
        raise InvalidArgument("zero-length segment")
    axis = _graph_axis(pts)
    if pts[-1, axis] < pts[0, axis]:
        pts = pts[::-1]
    z = np.asarray(points, dtype=float)
    flat = z.reshape(-1, 2)
    best = np.full(flat.shape[0], np.inf)
    for p0, p1 in zip(pts[:-1], pts[1:]):
        d = p1 - p0
        t = np.clip(((flat - p0) @ d) / (d @ d), 0.0, 1.0)
        proj = p0 + t[:, None] * d
        best = np.minimum(best, np.hypot(*(flat - proj).T))
    other = 1 - axis
    xs, ys = pts[:, axis], pts[:, other]
    q = flat[:, axis]
    # piecewise-linear p with linear continuation past both ends
    pq = np.interp(q, xs, ys)
    lo_slope = (ys[1] - ys[0]) / (xs[1] - xs[0])
    hi_slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
    pq = np.where(q < xs[0], ys[0] + lo_slope * (q - xs[0]), pq)
    pq = np.where(q > xs[-1], ys[-1] + hi_slope * (q - xs[-1]), pq)
    side = np.where(flat[:, other] - pq > 0, 1.0, -1.0)
    side = np.where(best == 0.0, 0.0, side)
    return (side * best).reshape(z.shape[:-1])


# ---------------------------------------------------------------------------
# recovery field


@dataclass
class RecoveryInfo:
    profiles: list = field(default_factory=list)
    etas: list = field(default_factory=list)
    s0: list = field(default_factory=list)


def _jump_profile(eps, a, b, weight, pot):
    eta, _ = alpha_min(weight, a, b)
    prof = build_profile(eps, a, b, pot)
    s0 = shift_s0(prof, eta)
    return prof.shifted(s0), eta, s0


def recovery_field(eps: float, limit, weight: WeightSpec, pot: PotentialSpec, grid: GridField,
                   info: RecoveryInfo | None = None) -> GridField:
    """Recovery phase field ``w_eps`` for a 1D or 2D set-valued limit on ``grid``."""
    eps = float(eps)
    if isinstance(limit, SlicedLimit1D):
        if grid.dims != 1:
            raise InvalidArgument("1D limit needs a 1D grid")
        return _recovery_1d(eps, limit, weight, pot, grid, info)
    if isinstance(limit, Limit2D):
        if grid.dims != 2:
            raise InvalidArgument("2D limit needs a 2D grid")
        return _recovery_2d(eps, limit, weight, pot, grid, info)
    raise InvalidArgument(f"unsupported limit type {type(limit).__name__}")


def _recovery_1d(eps, limit, weight, pot, grid, info):
    (t,) = grid.mesh()
    out = np.ones_like(t)
    lo_dom, hi_dom = float(grid.lower[0]), float(grid.upper[0])
    spans = []
    for k, (tk, a, b) in enumerate(limit.jumps):
        prof, eta, s0 = _jump_profile(eps, a, b, weight, pot)
        lo, hi = prof.support
        span = (tk + lo, tk + hi)
        if a == 1.0 and b == 1.0:
            span = (tk, tk)
        if span[0] <= lo_dom or span[1] >= hi_dom:
            raise EpsilonTooLarge(f"support {span} of jump {k} leaves the domain", pair=(k, None))
        for j, other in enumerate(spans):
            if span[0] < other[1] and other[0] < span[1]:
                raise EpsilonTooLarge(f"supports of jumps {j} and {k} overlap", pair=(j, k))
        spans.append(span)
        m = (t >= span[0]) & (t <= span[1])
        out[m] = prof(t[m] - tk)
        if info is not None:
            info.profiles.append(prof)
            info.etas.append(eta)
            info.s0.append(s0)
    return grid.with_values(out)


def _recovery_2d(eps, limit, weight, pot, grid, info):
    X, Y = grid.mesh()
    pts = np.stack([X, Y], axis=-1)
    out = np.ones_like(X)
    lo, hi = grid.lower, grid.upper
    radii = []
    for k, seg in enumerate(limit.segments):
        prof, eta, s0 = _jump_profile(eps, seg.xi_minus, seg.xi_plus, weight, pot)
        s_lo, s_hi = prof.support
        radius = max(-s_lo, s_hi)
        for end in (seg.a, seg.b):
            if np.any(end - radius <= lo) or np.any(end + radius >= hi):
                raise EpsilonTooLarge(f"band around segment {k} leaves the domain", pair=(k, None))
        for j, rj in enumerate(radii):
            if limit.segment_distance(j, k) <= radius + rj:
                raise EpsilonTooLarge(f"bands around segments {j} and {k} overlap", pair=(j, k))
        radii.append(radius)
        if seg.xi_minus == 1.0 and seg.xi_plus == 1.0:
            continue
        # restrict work to the bounding box of the band
        bb_lo = np.minimum(seg.a, seg.b) - radius
        bb_hi = np.maximum(seg.a, seg.b) + radius
        box = (X >= bb_lo[0]) & (X <= bb_hi[0]) & (Y >= bb_lo[1]) & (Y <= bb_hi[1])
        sd = signed_distance(np.array([seg.a, seg.b]), pts[box])
        out[box] = prof(sd)
        if info is not None:
            info.profiles.append(prof)
            info.etas.append(eta)
            info.s0.append(s0)
    return grid.with_values(out)


# ---------------------------------------------------------------------------
# profile decay lemma


@dataclass(frozen=True)
class ElpfReport:
    ok: bool
    max_ratio: float
    rows: list


def check_elpf(pot: PotentialSpec, c_grid, delta_grid, slack: float = 1e-8, strict: bool = True) -> ElpfReport:
    """Check ``F(psi(1/delta, c)) / delta^2 <= (1 - c)^2`` on a grid of pairs.

    ``rows`` holds ``(c, delta, lhs, rhs)``; ``max_ratio`` is the largest
    ``lhs / rhs`` over pairs with ``rhs > 0``.
    """
    rows = []
    worst = 0.0
    ok = True
    for c in c_grid:
        c = float(c)
        table = profile_table(pot, c)
        for d in delta_grid:
            d = float(d)
            lhs = float(pot.F(float(table(1.0 / d)))) / (d * d)
            rhs = (1.0 - c) ** 2
            rows.append((c, d, lhs, rhs))
            if rhs > 0:
                worst = max(worst, lhs / rhs)
            if lhs > rhs + slack:
                ok = False
    rep = ElpfReport(ok, worst, rows)
    if strict and not ok:
        raise PropertyViolation("profile decay bound violated", report=rep)
    return rep
