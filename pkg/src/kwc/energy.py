"""Discrete KWC and single-well Modica-Mortola energies and their limits.

Grid conventions: forward differences between neighbouring cell centres
(``n - 1`` faces per axis, nothing across the boundary), node sums for the
potential and fidelity, and face weights ``min(w_i, w_j)`` for the weighted
total variation.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy import ndimage

from .errors import InvalidArgument
from .grid import GridField, require_same_grid
from .potential import PotentialSpec, WeightSpec, G, alpha_min, sigma_jump_cost, weight_quadratic
from .setvalued import Limit2D, SlicedLimit1D, _point_segment_distance

MATCH_TOL_1D = 1e-9
MIN_SEGMENT_NODES = 32


# ---------------------------------------------------------------------------
# report and triplet types


@dataclass
class EnergyReport:
    dirichlet: float = 0.0
    potential: float = 0.0
    weighted_tv: float = 0.0
    jump_term: float = 0.0
    fidelity: float = 0.0
    eps: float = float("nan")
    lam: float = 0.0
    h: float = float("nan")
    total: float = field(init=False)

    FIELDS = ("dirichlet", "potential", "weighted_tv", "jump_term", "fidelity", "total", "eps", "lam", "h")

    def __post_init__(self):
        parts = (self.dirichlet, self.potential, self.weighted_tv, self.jump_term, self.fidelity)
        if any(p < 0 for p in parts):
            raise InvalidArgument(f"negative energy component in {parts}")
        self.total = float(math.fsum(parts))

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: d[k] for k in self.FIELDS}

    def to_keyvalue(self) -> str:
        return "\n".join(f"{k}={float(v)!r}" for k, v in self.to_dict().items()) + "\n"

    @classmethod
    def csv_header(cls) -> str:
        return ",".join(cls.FIELDS)

    def csv_row(self) -> str:
        return ",".join(repr(float(v)) for v in self.to_dict().values())

    @classmethod
    def from_keyvalue(cls, text: str) -> "EnergyReport":
        d = dict(line.split("=", 1) for line in text.split() if "=" in line)
        keys = ("dirichlet", "potential", "weighted_tv", "jump_term", "fidelity", "eps", "lam", "h")
        return cls(**{k: float(d[k]) for k in keys if k in d})


@dataclass(frozen=True, eq=False)
class JumpTriplet:
    """Jump locations ``J``, sizes ``j`` and the weight ``alpha``.

    In 1D a location is a point; in 2D a segment ``(ax, ay, bx, by)``.
    ``u_minus``/``u_plus`` are filled by :func:`approximate_jumps`, and
    ``match_tol`` is the distance below which a location counts as lying on a
    limit's jump set.
    """

    locations: np.ndarray
    sizes: np.ndarray
    weight: WeightSpec = field(default_factory=weight_quadratic)
    dims: int = 1
    u_minus: np.ndarray | None = None
    u_plus: np.ndarray | None = None
    match_tol: float = MATCH_TOL_1D

    def __post_init__(self):
        loc = np.asarray(self.locations, dtype=float)
        loc = loc.reshape(-1) if self.dims == 1 else loc.reshape(-1, 4)
        sizes = np.asarray(self.sizes, dtype=float).reshape(-1)
        if sizes.size != loc.shape[0]:
            raise InvalidArgument("one jump size per location")
        if np.any(sizes < 0):
            raise InvalidArgument("jump sizes must be non-negative")
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "sizes", sizes)

    def __len__(self):
        return self.sizes.size

    def measures(self) -> np.ndarray:
        if self.dims == 1:
            return np.ones(len(self))
        d = self.locations[:, 2:] - self.locations[:, :2]
        return np.hypot(d[:, 0], d[:, 1])


# ---------------------------------------------------------------------------
# helpers


def _check_eps(eps):
    if not eps > 0:
        raise InvalidArgument(f"eps must be positive, got {eps}")


def _values(w, like: GridField):
    if isinstance(w, GridField):
        require_same_grid(like, w)
        return w.values
    arr = np.asarray(w, dtype=float)
    if arr.shape != like.shape:
        raise InvalidArgument(f"shape mismatch: {arr.shape} vs {like.shape}")
    return arr


def forward_differences(values: np.ndarray) -> list:
    return [np.diff(values, axis=k) for k in range(values.ndim)]


def face_weights(w: np.ndarray) -> list:
    """Per-axis face weights: the smaller of the two adjacent node weights."""
    w = np.asarray(w, dtype=float)
    out = []
    for k in range(w.ndim):
        lo = np.take(w, range(0, w.shape[k] - 1), axis=k)
        hi = np.take(w, range(1, w.shape[k]), axis=k)
        out.append(np.minimum(lo, hi))
    return out


def _interp_field(v: GridField, pts: np.ndarray) -> np.ndarray:
    if v.dims == 1:
        return np.interp(pts, v.coords(0), v.values)
    idx = (pts - v.lower[None, :]) / v.spacing - 0.5
    return ndimage.map_coordinates(v.values, idx.T, order=1, mode="nearest")


# ---------------------------------------------------------------------------
# epsilon-level energies


def e_sMM(v: GridField, eps: float, pot: PotentialSpec) -> EnergyReport:
    """``(eps/2) sum |grad_h v|^2 h^N + (1/2eps) sum F(v) h^N``."""
    _check_eps(eps)
    h, vol = v.spacing, v.cell_volume
    grad = sum(float(np.sum(d * d)) for d in forward_differences(v.values)) / (h * h)
    dirichlet = 0.5 * eps * grad * vol
    potential = float(np.sum(pot.F(v.values))) * vol / (2.0 * eps)
    return EnergyReport(dirichlet=dirichlet, potential=potential, eps=eps, h=h)


def weighted_tv(u: GridField, w) -> float:
    """Anisotropic ``sum_faces min(w_i, w_j) |u_j - u_i| h^(N-1)``."""
    wv = _values(w, u)
    if np.any(wv < 0):
        raise InvalidArgument("weights must be non-negative")
    scale = u.spacing ** (u.dims - 1)
    total = 0.0
    for d, wf in zip(forward_differences(u.values), face_weights(wv)):
        total += float(np.sum(wf * np.abs(d)))
    return total * scale


def total_variation(u: GridField) -> float:
    return weighted_tv(u, np.ones(u.shape))


def fidelity(u: GridField, f: GridField, lam: float) -> float:
    if lam < 0:
        raise InvalidArgument("lambda must be non-negative")
    fv = _values(f, u)
    return 0.5 * lam * float(np.sum((u.values - fv) ** 2)) * u.cell_volume


def e_KWC(u: GridField, v: GridField, eps: float, pot: PotentialSpec, weight: WeightSpec,
          f: GridField | None = None, lam: float = 0.0) -> EnergyReport:
    """``weighted_tv(u, alpha(v)) + e_sMM(v)``, plus the fidelity when ``f`` is given."""
    require_same_grid(u, v)
    rep = e_sMM(v, eps, pot)
    rep.weighted_tv = weighted_tv(u, weight(v.values))
    if f is not None:
        rep.fidelity = fidelity(u, f, lam)
        rep.lam = float(lam)
    rep.__post_init__()
    return rep


def _segment_nodes(seg, h):
    a, b = np.asarray(seg[:2]), np.asarray(seg[2:])
    length = float(np.hypot(*(b - a)))
    n = max(MIN_SEGMENT_NODES, int(math.ceil(2.0 * length / h)))
    t = (np.arange(n) + 0.5) / n
    return a[None, :] + t[:, None] * (b - a)[None, :], length / n


def e_sMM_J(v: GridField, eps: float, pot: PotentialSpec, triplet: JumpTriplet) -> float:
    """``e_sMM(v) + sum_J alpha(v) j`` (midpoint rule along segments in 2D)."""
    base = e_sMM(v, eps, pot).total
    if len(triplet) == 0:
        return base
    if triplet.dims != v.dims:
        raise InvalidArgument("triplet and field dimensions differ")
    extra = 0.0
    if v.dims == 1:
        for x, j in zip(triplet.locations, triplet.sizes):
            if not v.contains(x):
                raise InvalidArgument(f"jump location {x} outside the domain")
            extra += float(triplet.weight(_interp_field(v, np.array([x]))[0])) * j
        return base + extra
    for seg, j in zip(triplet.locations, triplet.sizes):
        for end in (seg[:2], seg[2:]):
            if np.any(end < v.lower) or np.any(end > v.upper):
                raise InvalidArgument(f"jump segment {seg} leaves the domain")
        pts, dl = _segment_nodes(seg, v.spacing)
        extra += float(np.sum(triplet.weight(_interp_field(v, pts)))) * dl * j
    return base + extra


# ---------------------------------------------------------------------------
# limit energies


def e0_sMM(limit, pot: PotentialSpec) -> float:
    """``2 sum (G(xi-) + G(xi+))``, times segment length in 2D."""
    if isinstance(limit, SlicedLimit1D):
        return math.fsum(2.0 * (G(pot, a) + G(pot, b)) for _, a, b in limit.jumps)
    if isinstance(limit, Limit2D):
        return math.fsum(2.0 * (G(pot, s.xi_minus) + G(pot, s.xi_plus)) * s.length for s in limit.segments)
    raise InvalidArgument(f"unsupported limit type {type(limit).__name__}")


def _match_1d(x, limit: SlicedLimit1D, tol):
    for t, a, b in limit.jumps:
        if abs(t - x) <= tol:
            return a, b
    return None


def _matched_measure_2d(seg, limit: Limit2D, tol, h):
    """Length of the part of ``seg`` within ``tol`` of each limit segment.

    Returns ``[(limit_segment, length), ...]``; each quadrature node of ``seg``
    is assigned to the nearest limit segment.
    """
    pts, dl = _segment_nodes(seg, h)
    out = []
    taken = np.zeros(len(pts), dtype=bool)
    for s in limit.segments:
        d = np.array([_point_segment_distance(p, s.a, s.b) for p in pts])
        m = (d < tol) & ~taken
        if m.any():
            out.append((s, float(m.sum()) * dl))
            taken |= m
    return out


def e0_sMM_J(limit, triplet: JumpTriplet, pot: PotentialSpec, h: float = 1e-3) -> float:
    """``e0_sMM + sum over J on Sigma of min_[xi-, xi+] alpha * j * measure``.

    ``h`` only sets the quadrature spacing used to measure overlaps in 2D.
    """
    total = e0_sMM(limit, pot)
    extra = []
    if isinstance(limit, SlicedLimit1D):
        for x, j in zip(triplet.locations, triplet.sizes):
            hit = _match_1d(x, limit, triplet.match_tol)
            if hit is not None:
                extra.append(alpha_min(triplet.weight, *hit)[1] * j)
    else:
        for seg, j in zip(triplet.locations, triplet.sizes):
            for s, length in _matched_measure_2d(seg, limit, triplet.match_tol, h):
                extra.append(alpha_min(triplet.weight, s.xi_minus, s.xi_plus)[1] * j * length)
    return total + math.fsum(extra)


# ---------------------------------------------------------------------------
# jump detection and the relaxed functionals


def default_jump_threshold(u: GridField) -> float:
    """``10 h`` times the median absolute slope, floored for clean piecewise-constant data."""
    diffs = np.concatenate([np.abs(d).ravel() for d in forward_differences(u.values)])
    if diffs.size == 0:
        return 1.0
    slope = float(np.median(diffs)) / u.spacing
    floor = 1e-8 * max(1.0, float(np.ptp(u.values)))
    return max(10.0 * u.spacing * slope, floor)


def _jump_mask(u: GridField, jump_threshold):
    thr = default_jump_threshold(u) if jump_threshold is None else float(jump_threshold)
    if not thr > 0:
        raise InvalidArgument("jump threshold must be positive")
    diffs = forward_differences(u.values)
    return diffs, [np.abs(d) > thr for d in diffs], thr


def approximate_jumps(u: GridField, jump_threshold: float | None = None,
                      weight: WeightSpec | None = None) -> JumpTriplet:
    """Faces whose difference exceeds the threshold, as a jump triplet.

    1D locations are face positions; 2D locations are the faces themselves,
    segments of length ``h`` (matched to a limit within ``h/2``).
    """
    weight = weight or weight_quadratic()
    diffs, masks, _ = _jump_mask(u, jump_threshold)
    h = u.spacing
    vals = u.values
    if u.dims == 1:
        (idx,) = np.nonzero(masks[0])
        x = u.lower[0] + (idx + 1) * h
        return JumpTriplet(x, np.abs(diffs[0][idx]), weight, 1, vals[idx], vals[idx + 1])
    locs, um, up = [], [], []
    x0, y0 = u.lower
    for axis, m in enumerate(masks):
        ii, jj = np.nonzero(m)
        if axis == 0:
            xf = x0 + (ii + 1) * h
            ya, yb = y0 + jj * h, y0 + (jj + 1) * h
            locs.append(np.column_stack([xf, ya, xf, yb]))
            um.append(vals[ii, jj])
            up.append(vals[ii + 1, jj])
        else:
            yf = y0 + (jj + 1) * h
            xa, xb = x0 + ii * h, x0 + (ii + 1) * h
            locs.append(np.column_stack([xa, yf, xb, yf]))
            um.append(vals[ii, jj])
            up.append(vals[ii, jj + 1])
    um, up = np.concatenate(um), np.concatenate(up)
    return JumpTriplet(np.vstack(locs), np.abs(up - um), weight, 2, um, up, match_tol=0.5 * h)


def _smooth_tv(diffs, masks, h, dims):
    scale = h ** (dims - 1)
    return math.fsum(float(np.sum(np.abs(d[~m]))) for d, m in zip(diffs, masks)) * scale


def e0_KWC(u: GridField, limit, pot: PotentialSpec, weight: WeightSpec,
           jump_threshold: float | None = None) -> EnergyReport:
    """Limit KWC energy of ``(u, Xi)``.

    ``weighted_tv`` holds ``alpha(1)`` times the variation off ``Sigma`` (the
    absolutely continuous part and jumps not on ``Sigma``); ``jump_term`` the
    discounted jumps on ``Sigma``; ``potential`` the phase-field part
    ``e0_sMM``.
    """
    a1 = float(weight(1.0))
    diffs, masks, thr = _jump_mask(u, jump_threshold)
    smooth = a1 * _smooth_tv(diffs, masks, u.spacing, u.dims)
    trip = approximate_jumps(u, thr, weight)
    off, on = [], []
    if u.dims == 1:
        for x, j in zip(trip.locations, trip.sizes):
            hit = _match_1d(x, limit, trip.match_tol) if isinstance(limit, SlicedLimit1D) else None
            if hit is None:
                off.append(a1 * j)
            else:
                on.append(alpha_min(weight, *hit)[1] * j)
    else:
        for seg, j, m in zip(trip.locations, trip.sizes, trip.measures()):
            mid = 0.5 * (seg[:2] + seg[2:])
            best = None
            for s in getattr(limit, "segments", ()):
                d = _point_segment_distance(mid, s.a, s.b)
                if d < trip.match_tol and (best is None or d < best[0]):
                    best = (d, s)
            if best is None:
                off.append(a1 * j * m)
            else:
                s = best[1]
                on.append(alpha_min(weight, s.xi_minus, s.xi_plus)[1] * j * m)
    return EnergyReport(potential=e0_sMM(limit, pot), weighted_tv=smooth + math.fsum(off),
                        jump_term=math.fsum(on), h=u.spacing)


@lru_cache(maxsize=4096)
def _sigma_cached(weight, pot, r):
    return sigma_jump_cost(weight, pot, r)


def tv_KWC(u: GridField, pot: PotentialSpec, weight: WeightSpec, jump_threshold: float | None = None) -> float:
    """``sum_J sigma(|u+ - u-|) * measure + alpha(1) * TV`` over non-jump faces."""
    a1 = float(weight(1.0))
    diffs, masks, thr = _jump_mask(u, jump_threshold)
    smooth = a1 * _smooth_tv(diffs, masks, u.spacing, u.dims)
    trip = approximate_jumps(u, thr, weight)
    jumps = math.fsum(_sigma_cached(weight, pot, round(float(j), 14)) * m
                      for j, m in zip(trip.sizes, trip.measures()))
    return smooth + jumps
