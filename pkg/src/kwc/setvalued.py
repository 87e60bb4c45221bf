"""Set-valued limits and the distances used to compare them with phase fields.

A limit ``Xi`` equals ``{1}`` away from a jump set and an interval
``[xi-, xi+]`` on it.  Fields and limits are compared slice by slice: along
each line ``x + t nu`` both are turned into planar graphs, their Hausdorff
distance ``d_g`` is taken, and ``d_g / (1 + d_g)`` is integrated over slice
positions (``d_nu``) and summed over directions with weights ``2^-j``
(``d_D``).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from . import kernels
from .errors import DegenerateSlice, InvalidArgument

log = logging.getLogger(__name__)

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))
BRUTE_FORCE_LIMIT = 10_000


# ---------------------------------------------------------------------------
# data types


@dataclass(frozen=True)
class SlicedLimit1D:
    """Limit on an interval: jumps ``(t_k, xi-_k, xi+_k)`` over a background of 1."""

    domain: tuple
    jumps: tuple = ()

    def __post_init__(self):
        lo, hi = (float(x) for x in self.domain)
        if not lo < hi:
            raise InvalidArgument("empty domain")
        jumps = tuple((float(t), float(a), float(b)) for t, a, b in self.jumps)
        ts = [t for t, _, _ in jumps]
        if any(t2 <= t1 for t1, t2 in zip(ts, ts[1:])):
            raise InvalidArgument("jump positions must be strictly increasing")
        for t, a, b in jumps:
            if not lo < t < hi:
                raise InvalidArgument(f"jump at {t} outside ({lo}, {hi})")
            if not a <= 1.0 <= b:
                raise InvalidArgument(f"need xi- <= 1 <= xi+, got [{a}, {b}]")
        object.__setattr__(self, "domain", (lo, hi))
        object.__setattr__(self, "jumps", jumps)


@dataclass(frozen=True)
class Segment:
    a: np.ndarray
    b: np.ndarray
    xi_minus: float
    xi_plus: float

    @property
    def length(self) -> float:
        return float(np.hypot(*(self.b - self.a)))


def _point_segment_distance(p, a, b):
    d = b - a
    t = np.clip(np.dot(p - a, d) / np.dot(d, d), 0.0, 1.0)
    return float(np.hypot(*(p - a - t * d)))


def _segments_intersect(a1, b1, a2, b2):
    def orient(p, q, r):
        return np.sign((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]))

    o1, o2 = orient(a1, b1, a2), orient(a1, b1, b2)
    o3, o4 = orient(a2, b2, a1), orient(a2, b2, b1)
    return o1 * o2 < 0 and o3 * o4 < 0


def segment_distance(s1: Segment, s2: Segment) -> float:
    if _segments_intersect(s1.a, s1.b, s2.a, s2.b):
        return 0.0
    return min(
        _point_segment_distance(s1.a, s2.a, s2.b),
        _point_segment_distance(s1.b, s2.a, s2.b),
        _point_segment_distance(s2.a, s1.a, s1.b),
        _point_segment_distance(s2.b, s1.a, s1.b),
    )


@dataclass(frozen=True)
class Limit2D:
    """Planar limit made of disjoint straight jump segments in a rectangle."""

    segments: tuple
    domain: tuple = ((0.0, 0.0), (1.0, 1.0))

    def __post_init__(self):
        lo = np.asarray(self.domain[0], dtype=float)
        hi = np.asarray(self.domain[1], dtype=float)
        if not np.all(lo < hi):
            raise InvalidArgument("empty domain")
        segs = []
        for s in self.segments:
            if not isinstance(s, Segment):
                ax, ay, bx, by, xm, xp = s
                s = Segment(np.array([ax, ay], float), np.array([bx, by], float), float(xm), float(xp))
            if s.length <= 0:
                raise InvalidArgument("segment of zero length")
            if not s.xi_minus <= 1.0 <= s.xi_plus:
                raise InvalidArgument(f"need xi- <= 1 <= xi+, got [{s.xi_minus}, {s.xi_plus}]")
            for end in (s.a, s.b):
                if np.any(end < lo) or np.any(end > hi):
                    raise InvalidArgument(f"segment endpoint {end} outside the domain")
            segs.append(s)
        for i in range(len(segs)):
            for j in range(i + 1, len(segs)):
                if segment_distance(segs[i], segs[j]) <= 0.0:
                    raise InvalidArgument(f"segments {i} and {j} touch")
        object.__setattr__(self, "segments", tuple(segs))
        object.__setattr__(self, "domain", (tuple(lo), tuple(hi)))

    def segment_distance(self, i: int, j: int) -> float:
        return segment_distance(self.segments[i], self.segments[j])

    @property
    def lower(self):
        return np.asarray(self.domain[0])

    @property
    def upper(self):
        return np.asarray(self.domain[1])


@dataclass(frozen=True)
class SampledGraph:
    """Finite planar point set ``(t, y)`` approximating a slice graph."""

    points: np.ndarray
    resolution: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if pts.shape[0] == 0:
            raise InvalidArgument("empty graph")
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True)
class DirectionSet:
    directions: np.ndarray

    def __post_init__(self):
        d = np.atleast_2d(np.asarray(self.directions, dtype=float))
        if d.shape[0] == 0:
            raise InvalidArgument("no directions")
        if np.any(np.abs(np.linalg.norm(d, axis=1) - 1.0) > 1e-12):
            raise InvalidArgument("directions must be unit vectors")
        object.__setattr__(self, "directions", d)

    @classmethod
    def golden(cls, m: int = 8) -> "DirectionSet":
        """First ``m`` directions of the golden-angle sequence, starting at angle 0."""
        theta = GOLDEN_ANGLE * np.arange(m)
        return cls(np.column_stack([np.cos(theta), np.sin(theta)]))

    @property
    def weights(self) -> np.ndarray:
        return 0.5 ** np.arange(1, len(self.directions) + 1)

    def __len__(self):
        return len(self.directions)


# ---------------------------------------------------------------------------
# slicing


def _perp(nu):
    return np.array([-nu[1], nu[0]])


def _line_box_range(x, nu, lo, hi):
    """Parameter range of ``x + t nu`` inside the box ``[lo, hi]`` (or None)."""
    t_lo, t_hi = -np.inf, np.inf
    for k in range(2):
        if abs(nu[k]) < 1e-15:
            if not lo[k] <= x[k] <= hi[k]:
                return None
            continue
        t1, t2 = (lo[k] - x[k]) / nu[k], (hi[k] - x[k]) / nu[k]
        t_lo, t_hi = max(t_lo, min(t1, t2)), min(t_hi, max(t1, t2))
    if t_hi <= t_lo:
        return None
    return float(t_lo), float(t_hi)


def _unit(nu):
    nu = np.asarray(nu, dtype=float)
    n = np.linalg.norm(nu)
    if abs(n - 1.0) > 1e-9:
        raise InvalidArgument(f"direction {nu} is not a unit vector")
    return nu / n


def slice_limit(limit: Limit2D, nu, x, tol: float = 1e-12) -> SlicedLimit1D:
    """Restriction of a planar limit to the line ``x + t nu``."""
    nu = _unit(nu)
    x = np.asarray(x, dtype=float)
    if abs(float(x @ nu)) > 1e-12 * max(1.0, np.linalg.norm(x)):
        raise InvalidArgument("slice origin must be orthogonal to the direction")
    rng = _line_box_range(x, nu, limit.lower, limit.upper)
    if rng is None:
        raise InvalidArgument("line misses the domain")
    jumps = []
    for k, seg in enumerate(limit.segments):
        d = seg.b - seg.a
        den = nu[0] * d[1] - nu[1] * d[0]
        w = seg.a - x
        if abs(den) <= tol * seg.length:
            # parallel: degenerate only if the line runs along the segment
            if abs(nu[0] * w[1] - nu[1] * w[0]) <= tol * max(1.0, seg.length):
                raise DegenerateSlice(f"slice runs along segment {k}")
            continue
        t = (w[0] * d[1] - w[1] * d[0]) / den
        s = (w[0] * nu[1] - w[1] * nu[0]) / den
        if -1e-12 <= s <= 1 + 1e-12 and rng[0] < t < rng[1]:
            jumps.append((float(t), seg.xi_minus, seg.xi_plus))
    jumps.sort()
    return SlicedLimit1D(rng, tuple(jumps))


def _densify(t, y, resolution):
    """Points along the polyline through ``(t, y)`` no further than ``resolution`` apart."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size < 2:
        return np.column_stack([t, y])
    seg = np.hypot(np.diff(t), np.diff(y))
    n = np.maximum(1, np.ceil(seg / resolution).astype(int))
    idx = np.repeat(np.arange(t.size - 1), n)
    starts = np.cumsum(n) - n
    frac = (np.arange(idx.size) - np.repeat(starts, n)) / np.repeat(n, n)
    pts_t = t[idx] + frac * np.diff(t)[idx]
    pts_y = y[idx] + frac * np.diff(y)[idx]
    return np.column_stack([np.append(pts_t, t[-1]), np.append(pts_y, y[-1])])


def graph_of_field(v, t=None, densify: float | None = None) -> SampledGraph:
    """Graph ``{(t_i, v_i)}`` of samples along a slice.

    ``v`` may be a 1D :class:`~kwc.grid.GridField` (its node coordinates are
    used) or an array with explicit ``t``.  With ``densify`` the polyline
    through the samples is resampled at that spacing, which keeps steep
    transitions represented.
    """
    if hasattr(v, "coords"):
        t = v.coords(0)
        v = v.values
    v = np.asarray(v, dtype=float).ravel()
    if v.size < 2:
        raise InvalidArgument("need at least two samples")
    t = np.asarray(t, dtype=float).ravel()
    res = float(np.min(np.diff(t))) if t.size > 1 else 1.0
    if densify:
        return SampledGraph(_densify(t, v, densify), densify)
    return SampledGraph(np.column_stack([t, v]), res)


def graph_of_limit(sl: SlicedLimit1D, resolution: float) -> SampledGraph:
    """Background at height 1 plus a vertical segment over every jump."""
    if not resolution > 0:
        raise InvalidArgument("resolution must be positive")
    lo, hi = sl.domain
    n = max(2, int(math.ceil((hi - lo) / resolution)) + 1)
    t = np.linspace(lo, hi, n)
    parts = [np.column_stack([t, np.ones_like(t)])]
    for tk, a, b in sl.jumps:
        if b > a:
            m = int(math.ceil((b - a) / resolution)) + 1
            ys = np.linspace(a, b, m)
            parts.append(np.column_stack([np.full(m, tk), ys]))
        else:
            parts.append(np.array([[tk, 1.0]]))
    return SampledGraph(np.vstack(parts), resolution)


# ---------------------------------------------------------------------------
# Hausdorff distances


def _points(obj):
    if isinstance(obj, SampledGraph):
        return obj.points
    pts = np.asarray(obj, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    return pts


def directed_hausdorff(A, B) -> float:
    a, b = _points(A), _points(B)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise InvalidArgument("empty point set")
    if max(a.shape[0], b.shape[0]) <= BRUTE_FORCE_LIMIT:
        return float(kernels.directed_hausdorff(a, b))
    dist, _ = cKDTree(b).query(a, k=1)
    return float(dist.max())


def hausdorff(A, B) -> float:
    """Symmetric Hausdorff distance between two finite point sets.

    Exact: brute force with early exit for small sets, a k-d tree above
    ``BRUTE_FORCE_LIMIT`` points.
    """
    return max(directed_hausdorff(A, B), directed_hausdorff(B, A))


# ---------------------------------------------------------------------------
# sliced metrics


def _domain_of(obj):
    if isinstance(obj, SlicedLimit1D):
        return np.array([obj.domain[0]]), np.array([obj.domain[1]])
    if isinstance(obj, Limit2D):
        return obj.lower, obj.upper
    if hasattr(obj, "lower") and hasattr(obj, "values"):
        return obj.lower, obj.upper
    raise InvalidArgument(f"cannot slice a {type(obj).__name__}")


def _dims(obj):
    if isinstance(obj, SlicedLimit1D):
        return 1
    if isinstance(obj, Limit2D):
        return 2
    return obj.dims


def _slice_graph(obj, x, nu, t_range, resolution) -> SampledGraph:
    """Graph of ``obj`` restricted to the line ``x + t nu`` over ``t_range``."""
    if isinstance(obj, SlicedLimit1D):
        return graph_of_limit(obj, resolution)
    if isinstance(obj, Limit2D):
        sl = slice_limit(obj, nu, x)
        return graph_of_limit(SlicedLimit1D(t_range, tuple(j for j in sl.jumps if t_range[0] < j[0] < t_range[1])), resolution)
    # grid field
    if obj.dims == 1:
        return graph_of_field(obj, densify=resolution)
    n = max(2, int(math.ceil((t_range[1] - t_range[0]) / resolution)) + 1)
    t = np.linspace(t_range[0], t_range[1], n)
    pts = x[None, :] + t[:, None] * nu[None, :]
    idx = (pts - obj.lower[None, :]) / obj.spacing - 0.5
    vals = ndimage.map_coordinates(obj.values, idx.T, order=1, mode="nearest")
    return SampledGraph(_densify(t, vals, resolution), resolution)


@dataclass
class SliceMetric:
    value: float
    skipped: int = 0
    positions: np.ndarray = field(default_factory=lambda: np.zeros(0))
    per_slice: np.ndarray = field(default_factory=lambda: np.zeros(0))
    cell: float = 1.0


def slice_positions(domain_lower, domain_upper, nu, count: int = 64) -> tuple:
    """Midpoints of a uniform partition of the projected domain and the cell width."""
    nu = _unit(nu)
    perp = _perp(nu)
    lo, hi = np.asarray(domain_lower), np.asarray(domain_upper)
    corners = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [lo[0], hi[1]], [hi[0], hi[1]]])
    proj = corners @ perp
    a, b = proj.min(), proj.max()
    width = (b - a) / count
    return a + (np.arange(count) + 0.5) * width, width


def d_nu_detail(gamma1, gamma2, nu=(0.0, 1.0), positions=None, resolution: float = 1e-3,
                count: int = 64) -> SliceMetric:
    """Slice-integrated graph distance ``int d_g / (1 + d_g)`` for one direction.

    ``positions`` are offsets along ``nu``'s perpendicular (defaults to the
    midpoints of ``count`` uniform cells); each slice is weighted by its cell
    width.  Slices running along a jump segment are skipped and counted.
    """
    if not resolution > 0:
        raise InvalidArgument("resolution must be positive")
    dims = _dims(gamma1)
    if _dims(gamma2) != dims:
        raise InvalidArgument("objects of different dimension")
    if dims == 1:
        d = hausdorff(_slice_graph(gamma1, None, None, None, resolution),
                      _slice_graph(gamma2, None, None, None, resolution))
        ratio = d / (1.0 + d)
        return SliceMetric(ratio, 0, np.zeros(1), np.array([d]), 1.0)
    lo, hi = _domain_of(gamma1)
    nu = _unit(nu)
    perp = _perp(nu)
    if positions is None:
        positions, cell = slice_positions(lo, hi, nu, count)
    else:
        positions = np.asarray(positions, dtype=float)
        _, cell = slice_positions(lo, hi, nu, len(positions))
    per = np.full(positions.size, np.nan)
    skipped = 0
    for k, rho in enumerate(positions):
        x = rho * perp
        rng = _line_box_range(x, nu, lo, hi)
        if rng is None:
            per[k] = 0.0
            continue
        try:
            g1 = _slice_graph(gamma1, x, nu, rng, resolution)
            g2 = _slice_graph(gamma2, x, nu, rng, resolution)
        except DegenerateSlice:
            skipped += 1
            continue
        per[k] = hausdorff(g1, g2)
    if skipped:
        log.info("d_nu: skipped %d degenerate slices", skipped)
    ok = ~np.isnan(per)
    # fixed-order reduction
    value = float(np.sum(per[ok] / (1.0 + per[ok])) * cell)
    return SliceMetric(value, skipped, positions, per, cell)


def d_nu(gamma1, gamma2, nu=(0.0, 1.0), positions=None, resolution: float = 1e-3, count: int = 64) -> float:
    return d_nu_detail(gamma1, gamma2, nu, positions, resolution, count).value


@dataclass
class DirectionalMetric:
    value: float
    per_direction: list
    tail_bound: float
    skipped: int


def d_D_detail(gamma1, gamma2, dirs: DirectionSet | None = None, resolution: float = 1e-3,
               count: int = 64) -> DirectionalMetric:
    """``sum_j 2^-j d_j / (1 + d_j)`` over a truncated direction set.

    ``tail_bound`` is the weight ``2^-m`` of the omitted directions.
    """
    dirs = dirs or DirectionSet.golden()
    per, skipped = [], 0
    for nu in dirs.directions:
        m = d_nu_detail(gamma1, gamma2, nu, None, resolution, count)
        per.append(m.value)
        skipped += m.skipped
    per = np.asarray(per)
    value = float(np.sum(dirs.weights * per / (1.0 + per)))
    return DirectionalMetric(value, per.tolist(), float(0.5 ** len(dirs)), skipped)


def d_D(gamma1, gamma2, dirs: DirectionSet | None = None, resolution: float = 1e-3, count: int = 64) -> float:
    return d_D_detail(gamma1, gamma2, dirs, resolution, count).value


# ---------------------------------------------------------------------------
# essential Hausdorff distance on pixel / voxel sets

EDT_CELL_LIMIT = 20_000_000


def essential_hausdorff(A, B, h: float, method: str = "auto") -> float:
    """Essential Hausdorff distance between two boolean masks on a common grid.

    A ball around a cell centre meets a set in positive measure once it reaches
    one of the set's cells, so the essential distance of a cell to a set is
    the distance between cell centres.  ``method`` is ``"edt"`` (Euclidean
    distance transform) or ``"kdtree"``; ``"auto"`` picks the transform for
    grids up to ``EDT_CELL_LIMIT`` cells.
    """
    A = np.asarray(A, dtype=bool)
    B = np.asarray(B, dtype=bool)
    if A.shape != B.shape:
        raise InvalidArgument("masks must share a grid")
    if not A.any() or not B.any():
        raise InvalidArgument("empty pixel set")
    if method == "auto":
        method = "edt" if A.size <= EDT_CELL_LIMIT else "kdtree"
    if method == "edt":
        to_b = ndimage.distance_transform_edt(~B, sampling=h)
        to_a = ndimage.distance_transform_edt(~A, sampling=h)
        return float(max(to_b[A].max(), to_a[B].max()))
    if method == "kdtree":
        pa = np.argwhere(A).astype(float) * h
        pb = np.argwhere(B).astype(float) * h
        da, _ = cKDTree(pb).query(pa, k=1)
        db, _ = cKDTree(pa).query(pb, k=1)
        return float(max(da.max(), db.max()))
    raise InvalidArgument(f"unknown method {method!r}")


def graph_voxels(values: np.ndarray, h: float, z_lo: float, z_hi: float) -> np.ndarray:
    """Voxelise the graph of a 2D field over ``[z_lo, z_hi]`` with cubic cells of side ``h``.

    Each column is filled over the range the bilinear surface takes on the
    cell (node value and edge midpoints), so steep walls stay connected.
    """
    v = np.asarray(values, dtype=float)
    pad = np.pad(v, 1, mode="edge")
    mids = [0.5 * (v + pad[1:-1, :-2]), 0.5 * (v + pad[1:-1, 2:]),
            0.5 * (v + pad[:-2, 1:-1]), 0.5 * (v + pad[2:, 1:-1])]
    lo = np.minimum.reduce([v, *mids])
    hi = np.maximum.reduce([v, *mids])
    nz = int(math.floor((z_hi - z_lo) / h)) + 1
    k_lo = np.clip(np.ceil((lo - z_lo) / h - 0.5), 0, nz - 1).astype(int)
    k_hi = np.clip(np.floor((hi - z_lo) / h + 0.5), 0, nz - 1).astype(int)
    k_hi = np.maximum(k_hi, k_lo)
    k = np.arange(nz)[None, None, :]
    return (k >= k_lo[..., None]) & (k <= k_hi[..., None])


# ---------------------------------------------------------------------------
# plain-text formats


def write_segments(path, limit: Limit2D):
    with open(Path(path), "w") as fh:
        lo, hi = limit.domain
        fh.write("# domain " + " ".join(repr(float(x)) for x in (*lo, *hi)) + "\n")
        for s in limit.segments:
            vals = (*s.a, *s.b, s.xi_minus, s.xi_plus)
            fh.write(" ".join(repr(float(x)) for x in vals) + "\n")


def read_segments(path, domain=None) -> Limit2D:
    """One segment per line: ``ax ay bx by xi_minus xi_plus``.

    A ``# domain x0 y0 x1 y1`` comment sets the rectangle (default: unit square).
    """
    rows = []
    with open(Path(path)) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                tok = line[1:].split()
                if tok and tok[0] == "domain" and domain is None:
                    x0, y0, x1, y1 = (float(t) for t in tok[1:5])
                    domain = ((x0, y0), (x1, y1))
                continue
            vals = [float(t) for t in line.split()]
            if len(vals) != 6:
                raise InvalidArgument(f"{path}: expected 6 numbers per segment, got {line!r}")
            rows.append(tuple(vals))
    return Limit2D(tuple(rows), domain or ((0.0, 0.0), (1.0, 1.0)))


def write_mask(path, mask):
    """Plain PGM (``P2``) with values 0/1; rows are the first array axis."""
    m = np.asarray(mask, dtype=bool)
    if m.ndim != 2:
        raise InvalidArgument("masks are 2D")
    with open(Path(path), "w") as fh:
        fh.write(f"P2\n{m.shape[1]} {m.shape[0]}\n1\n")
        for row in m.astype(int):
            fh.write(" ".join(map(str, row)) + "\n")


def read_mask(path) -> np.ndarray:
    tokens = []
    with open(Path(path)) as fh:
        for line in fh:
            tokens.extend(line.split("#", 1)[0].split())
    if not tokens or tokens[0] != "P2":
        raise InvalidArgument(f"{path}: not a plain PGM file")
    w, hgt, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    data = np.array([int(t) for t in tokens[4:]], dtype=int)
    if data.size != w * hgt:
        raise InvalidArgument(f"{path}: expected {w * hgt} pixels, found {data.size}")
    return data.reshape(hgt, w) * 2 > maxval
