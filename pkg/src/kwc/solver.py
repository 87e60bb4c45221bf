"""Alternating minimisation of the KWC energy with a quadratic fidelity.

``v``-steps: for the quadratic potential and weight, a majorise-minimise loop
in which each face charges its ``|Du|`` to the adjacent node of smaller
weight; the resulting system is SPD and solved by conjugate gradients.  Other
pairs use projected gradient descent on a box.

``u``-steps: weighted TV denoising.  The general path is a first-order
primal-dual iteration with dual variables bounded by the face weights; in 1D
the exact weighted taut string is available (and used by :func:`alternate`,
since primal-dual iteration counts grow with plateau length).

All updates are Jacobi-style (whole-array), so results are deterministic.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from . import kernels
from .energy import EnergyReport, e_KWC, face_weights, forward_differences
from .errors import InvalidArgument, NumericFailure
from .grid import GridField, require_same_grid
from .potential import PotentialSpec, WeightSpec, sigma_jump_cost

log = logging.getLogger(__name__)

DEFAULT_SCHEDULE = (0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001)


@dataclass
class SolveConfig:
    eps_schedule: tuple = DEFAULT_SCHEDULE
    lam: float = 50.0
    outer_iters: int = 30
    v_tol: float = 1e-10
    u_tol: float = 1e-9
    jump_threshold: float | None = None
    tau: float | None = None
    sigma_step: float | None = None
    pd_iters: int = 5000
    v_box: tuple = (-1.0, 3.0)
    u_method: str = "auto"

    def __post_init__(self):
        s = tuple(float(e) for e in self.eps_schedule)
        if not s or any(e <= 0 for e in s) or any(b >= a for a, b in zip(s, s[1:])):
            raise InvalidArgument(f"eps schedule must be positive and strictly decreasing: {s}")
        if self.lam < 0:
            raise InvalidArgument("lambda must be non-negative")
        if not (self.v_tol > 0 and self.u_tol > 0):
            raise InvalidArgument("tolerances must be positive")
        if self.outer_iters < 1:
            raise InvalidArgument("need at least one outer iteration")
        self.eps_schedule = s

    @classmethod
    def from_dict(cls, d: dict) -> "SolveConfig":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        if "lambda" in d:
            known["lam"] = d["lambda"]
        if "v_box" in known:
            known["v_box"] = tuple(known["v_box"])
        return cls(**known)


@dataclass
class SolveTrace:
    reports: list = field(default_factory=list)
    stage: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    failed_stage: float | None = None
    box_active: bool = False

    def totals(self, eps=None) -> np.ndarray:
        return np.array([r.total for r, e in zip(self.reports, self.stage) if eps is None or e == eps])

    def monotone(self, slack: float = 1e-10) -> bool:
        for e in dict.fromkeys(self.stage):
            t = self.totals(e)
            if np.any(np.diff(t) > slack):
                return False
        return True

    def to_csv(self) -> str:
        lines = ["iteration,epsilon,dirichlet,potential,weighted_tv,fidelity,total"]
        for i, (r, e) in enumerate(zip(self.reports, self.stage)):
            vals = (e, r.dirichlet, r.potential, r.weighted_tv, r.fidelity, r.total)
            lines.append(f"{i}," + ",".join(repr(float(x)) for x in vals))
        return "\n".join(lines) + "\n"

    @property
    def final(self):
        return self.snapshots[-1] if self.snapshots else None


# ---------------------------------------------------------------------------
# v-step


def _laplacian(shape) -> sparse.csr_matrix:
    """Graph Laplacian of the grid (natural boundary, unit edge weights)."""
    mats = []
    for n in shape:
        d = sparse.diags([-np.ones(n - 1), -np.ones(n - 1)], [-1, 1], shape=(n, n))
        deg = -np.asarray(d.sum(axis=1)).ravel()
        mats.append((d + sparse.diags(deg)).tocsr())
    if len(shape) == 1:
        return mats[0]
    return (sparse.kron(mats[0], sparse.identity(shape[1])) + sparse.kron(sparse.identity(shape[0]), mats[1])).tocsr()


def _node_masses(du: list, alpha_nodes: np.ndarray) -> np.ndarray:
    """Charge each face's ``|Du|`` to the adjacent node with the smaller weight."""
    m = np.zeros_like(alpha_nodes)
    for k, d in enumerate(du):
        n = alpha_nodes.shape[k]
        a_lo = np.take(alpha_nodes, range(0, n - 1), axis=k)
        a_hi = np.take(alpha_nodes, range(1, n), axis=k)
        to_lo = a_lo <= a_hi
        ad = np.abs(d)
        pad = [(0, 0)] * alpha_nodes.ndim
        pad_lo, pad_hi = list(pad), list(pad)
        pad_lo[k] = (0, 1)
        pad_hi[k] = (1, 0)
        m += np.pad(np.where(to_lo, ad, 0.0), pad_lo)
        m += np.pad(np.where(to_lo, 0.0, ad), pad_hi)
    return m


def _v_energy(u, v_vals, eps, pot, weight):
    return e_KWC(u, u.with_values(v_vals), eps, pot, weight).total


def _is_default_pair(pot, weight):
    return pot.kind == "quadratic" and weight.kind == "quadratic"


def minimize_v(u: GridField, eps: float, pot: PotentialSpec, weight: WeightSpec, tol: float = 1e-10,
               v0: GridField | None = None, box=(-1.0, 3.0), max_iter: int = 200) -> GridField:
    """Minimise ``E_KWC(u, .)`` over ``v``.

    Starts from ``v0`` (default ``v = 1``) and never returns a field with
    higher energy than the start.
    """
    if not eps > 0:
        raise InvalidArgument("eps must be positive")
    v = np.ones(u.shape) if v0 is None else np.array(v0.values, dtype=float)
    if _is_default_pair(pot, weight):
        return u.with_values(_v_mm(u, v, eps, pot, weight, tol, max_iter))
    return u.with_values(_v_projected_gradient(u, v, eps, pot, weight, tol, box, max_iter * 50))


def _v_mm(u, v, eps, pot, weight, tol, max_iter):
    h, N = u.spacing, u.dims
    du = forward_differences(u.values)
    L = _laplacian(u.shape)
    base = eps * h ** (N - 2) * L + sparse.identity(L.shape[0]) * (h ** N / eps)
    rhs = np.full(L.shape[0], h ** N / eps)
    best = _v_energy(u, v, eps, pot, weight)
    for it in range(max_iter):
        m = _node_masses(du, weight(v)).ravel()
        A = (base + sparse.diags(2.0 * h ** (N - 1) * m)).tocsr()
        diag = A.diagonal()
        M = sparse.diags(1.0 / diag)
        x, info = splinalg.cg(A, rhs, x0=v.ravel(), rtol=tol, atol=0.0, M=M, maxiter=20 * L.shape[0])
        if info != 0:
            res = np.linalg.norm(A @ x - rhs) / np.linalg.norm(rhs)
            raise NumericFailure("CG did not converge in the v-step", achieved=res, best=u.with_values(v))
        cand = x.reshape(u.shape)
        e = _v_energy(u, cand, eps, pot, weight)
        if e > best:
            break
        done = best - e <= 1e-14 * max(1.0, abs(best))
        v, best = cand, e
        if done:
            break
    return v


def _v_gradient(u, v, eps, pot, weight, dalpha):
    h, N = u.spacing, u.dims
    g = np.zeros_like(v)
    for k, d in enumerate(forward_differences(v)):
        n = v.shape[k]
        pad_lo = [(0, 0)] * v.ndim
        pad_hi = [(0, 0)] * v.ndim
        pad_lo[k] = (0, 1)
        pad_hi[k] = (1, 0)
        g -= np.pad(d, pad_lo)
        g += np.pad(d, pad_hi)
    g *= eps * h ** (N - 2)
    g += pot.dF(v) * h ** N / (2.0 * eps)
    m = _node_masses(forward_differences(u.values), weight(v))
    g += dalpha(v) * m * h ** (N - 1)
    return g


def _v_projected_gradient(u, v, eps, pot, weight, tol, box, max_iter):
    lo, hi = box

    def dalpha(x, step=1e-7):
        return (weight(x + step) - weight(x - step)) / (2 * step)

    v = np.clip(v, lo, hi)
    e = _v_energy(u, v, eps, pot, weight)
    t = 1.0
    for it in range(max_iter):
        g = _v_gradient(u, v, eps, pot, weight, dalpha)
        while True:
            cand = np.clip(v - t * g, lo, hi)
            ec = _v_energy(u, cand, eps, pot, weight)
            if ec <= e - 1e-4 * np.sum(g * (v - cand)) or t < 1e-16:
                break
            t *= 0.5
        if ec > e:
            return v
        rel = (e - ec) / max(abs(e), 1e-300)
        v, e = cand, ec
        t *= 2.0
        if rel < tol:
            return v
    raise NumericFailure("projected gradient hit the iteration cap", achieved=e, best=v)


# ---------------------------------------------------------------------------
# u-step


def _div_adjoint(p: list, shape) -> np.ndarray:
    """``D^T p`` for forward differences with no boundary faces."""
    out = np.zeros(shape)
    for k, pk in enumerate(p):
        pad_lo = [(0, 0)] * len(shape)
        pad_hi = [(0, 0)] * len(shape)
        pad_lo[k] = (1, 0)
        pad_hi[k] = (0, 1)
        out += np.pad(pk, pad_lo) - np.pad(pk, pad_hi)
    return out


def _u_objective(u_vals, f_vals, wfaces, lam):
    tv = sum(float(np.sum(w * np.abs(d))) for w, d in zip(wfaces, forward_differences(u_vals)))
    return tv + 0.5 * lam * float(np.sum((u_vals - f_vals) ** 2))


def minimize_u(v: GridField, f: GridField, lam: float, weight: WeightSpec, steps=None, iters: int = 5000,
               tol: float = 1e-9, method: str = "pd", u0: GridField | None = None,
               weights: np.ndarray | None = None) -> GridField:
    """Minimise ``weighted_tv(u, alpha(v)) + fidelity(u, f, lam)`` over ``u``.

    ``method="pd"`` runs the accelerated primal-dual iteration (strong
    convexity ``lam``) and stops when the duality gap falls below
    ``tol * max(1, objective)``; ``method="exact"`` uses the 1D weighted taut
    string.  ``weights`` overrides the node weights ``alpha(v)``.
    """
    require_same_grid(v, f)
    if not lam > 0:
        raise InvalidArgument("lambda must be positive")
    h, N = f.spacing, f.dims
    w_nodes = weight(v.values) if weights is None else np.asarray(weights, dtype=float)
    # objective divided by h^N: sum (w/h) |Du| + lam/2 |u - f|^2
    wfaces = [wf / h for wf in face_weights(w_nodes)]
    if not any(np.any(wf) for wf in wfaces):
        return f.with_values(f.values.copy())
    if method == "exact":
        if N != 1:
            raise InvalidArgument("the exact u-step is one-dimensional")
        return f.with_values(kernels.tv_prox_1d_weighted(f.values, wfaces[0] / lam))
    if method != "pd":
        raise InvalidArgument(f"unknown u-step method {method!r}")
    L2 = 4.0 * N
    if steps is None:
        tau = sigma = 0.99 / math.sqrt(L2)
    else:
        tau, sigma = (float(s) for s in steps)
    if tau * sigma * L2 > 1.0 + 1e-12:
        raise InvalidArgument(f"step sizes violate tau*sigma*L^2 <= 1 ({tau * sigma * L2:.4g})")
    fv = f.values
    x = fv.copy() if u0 is None else np.array(u0.values, dtype=float)
    xbar = x.copy()
    p = [np.zeros_like(wf) for wf in wfaces]
    gamma = lam
    for it in range(iters):
        p = [np.clip(pk + sigma * dk, -wf, wf) for pk, dk, wf in zip(p, forward_differences(xbar), wfaces)]
        x_old = x
        x = (x - tau * _div_adjoint(p, fv.shape) + tau * lam * fv) / (1.0 + tau * lam)
        theta = 1.0 / math.sqrt(1.0 + 2.0 * gamma * tau)
        tau, sigma = theta * tau, sigma / theta
        xbar = x + theta * (x - x_old)
        if it % 20 == 19 or it == iters - 1:
            primal = _u_objective(x, fv, wfaces, lam)
            dtp = _div_adjoint(p, fv.shape)
            dual = float(np.sum(fv * dtp)) - float(np.sum(dtp * dtp)) / (2.0 * lam)
            if primal - dual <= tol * max(1.0, abs(primal)):
                break
    return f.with_values(x)


# ---------------------------------------------------------------------------
# alternating minimisation


def _report(u, v, eps, pot, weight, f, lam) -> EnergyReport:
    return e_KWC(u, v, eps, pot, weight, f=f, lam=lam)


def alternate(f: GridField, config: SolveConfig, pot: PotentialSpec, weight: WeightSpec) -> SolveTrace:
    """Alternate u- and v-steps over the epsilon schedule with warm starts.

    Each step is accepted only if the total energy does not increase, so the
    recorded energies are monotone within every stage.
    """
    trace = SolveTrace()
    u = f
    v = f.with_values(np.ones(f.shape))
    method = config.u_method
    if method == "auto":
        method = "exact" if f.dims == 1 else "pd"
    steps = None if config.tau is None else (config.tau, config.sigma_step)
    for eps in config.eps_schedule:
        try:
            cur = _report(u, v, eps, pot, weight, f, config.lam)
            trace.reports.append(cur)
            trace.stage.append(eps)
            for _ in range(config.outer_iters):
                start = cur.total
                un = minimize_u(v, f, config.lam, weight, steps, config.pd_iters, config.u_tol, method, u0=u)
                rep = _report(un, v, eps, pot, weight, f, config.lam)
                if rep.total <= cur.total:
                    u, cur = un, rep
                vn = minimize_v(u, eps, pot, weight, config.v_tol, v0=v, box=config.v_box)
                rep = _report(u, vn, eps, pot, weight, f, config.lam)
                if rep.total <= cur.total:
                    v, cur = vn, rep
                trace.reports.append(cur)
                trace.stage.append(eps)
                if start - cur.total <= config.u_tol * max(1.0, abs(start)):
                    break
        except NumericFailure:
            trace.failed_stage = eps
            raise
        if not _is_default_pair(pot, weight):
            lo, hi = config.v_box
            trace.box_active |= bool(np.any(v.values <= lo) or np.any(v.values >= hi))
        trace.snapshots.append((eps, u, v))
    if float(weight(np.min(v.values))) == 0.0:
        log.warning("alpha vanishes at the phase field minimum; u may decouple across the jump")
    return trace


# ---------------------------------------------------------------------------
# jumps of a solution


def jump_clusters(u: GridField, threshold: float) -> list:
    """Runs of consecutive 1D faces with ``|du| > threshold``: ``[(first, last, size), ...]``.

    A transition smeared over adjacent faces counts as one jump whose size is
    the total rise.
    """
    d = np.diff(u.values)
    big = np.abs(d) > threshold
    out = []
    i = 0
    while i < d.size:
        if big[i]:
            j = i
            while j + 1 < d.size and big[j + 1] and np.sign(d[j + 1]) == np.sign(d[i]):
                j += 1
            out.append((i, j, float(u.values[j + 1] - u.values[i])))
            i = j + 1
        else:
            i += 1
    return out


def jump_face_value(u: GridField, v: GridField, threshold: float) -> list:
    """Smallest ``v`` among the nodes adjacent to each detected 1D jump."""
    vals = []
    for i, j, _ in jump_clusters(u, threshold):
        vals.append(float(np.min(v.values[i:j + 2])))
    return vals


# ---------------------------------------------------------------------------
# dynamic-programming oracle


def quantized_levels(f_vals, level_count: int) -> np.ndarray:
    lo, hi = float(np.min(f_vals)), float(np.max(f_vals))
    span = hi - lo
    if span == 0:
        return np.array([lo]) if level_count < 1 else np.linspace(lo - 1.0, lo + 1.0, level_count)
    return np.linspace(lo - span / 4, hi + span / 4, level_count)


def sigma_matrix(levels, pot, weight) -> np.ndarray:
    diff = np.abs(levels[:, None] - levels[None, :])
    keys = np.round(diff, 12)
    table = {r: (0.0 if r == 0 else sigma_jump_cost(weight, pot, float(r))) for r in np.unique(keys)}
    return np.vectorize(table.__getitem__)(keys)


@dataclass
class DPResult:
    u: GridField
    labels: np.ndarray
    levels: np.ndarray
    objective: float
    jump_cost: float


def minimize_tvkwc_1d(f: GridField, lam: float, pot: PotentialSpec, weight: WeightSpec,
                      level_count: int = 64, levels=None, detail: bool = False):
    """Global minimiser of ``TV_KWC(u) + lam/2 |u - f|^2`` over quantised piecewise-constant ``u``."""
    if f.dims != 1:
        raise InvalidArgument("the DP oracle is one-dimensional")
    if not lam > 0:
        raise InvalidArgument("lambda must be positive")
    if levels is None:
        if level_count < 16:
            raise InvalidArgument("need at least 16 levels")
        fv = f.values
        if np.ptp(fv) == 0:
            levels = np.array([fv[0]])
        else:
            levels = quantized_levels(fv, level_count)
    levels = np.asarray(levels, dtype=float)
    node = 0.5 * lam * (levels[None, :] - f.values[:, None]) ** 2 * f.spacing
    J = sigma_matrix(levels, pot, weight)
    labels, total = kernels.chain_dp(node, J)
    u = f.with_values(levels[labels])
    jc = float(np.sum(J[labels[:-1], labels[1:]]))
    if detail:
        return DPResult(u, labels, levels, total, jc)
    return u
