"""Command-line experiments: ``kwc <subcommand> --config <file> [--out <dir>] [--seed <n>]``.

Exit codes: 0 pass, 2 property violation, 3 configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import math
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .energy import e0_sMM, e_sMM, fidelity, total_variation
from .errors import EpsilonTooLarge, InvalidArgument, KWCError, PropertyViolation
from .grid import GridField, read_field, write_field
from .potential import potential_from_config, sigma_jump_cost, weight_from_config
from .profile import check_elpf, recovery_field
from .setvalued import (Limit2D, SlicedLimit1D, d_nu, essential_hausdorff, graph_voxels,
                        hausdorff, write_mask)
from . import kernels, solver

log = logging.getLogger("kwc")

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 2, 3


class ConfigError(KWCError):
    pass


# ---------------------------------------------------------------------------
# config and output plumbing


def load_config(path) -> tuple[dict, str]:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = tomllib.loads(raw.decode())
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return cfg, hashlib.sha256(raw).hexdigest()[:16]


def _section(cfg, name):
    block = cfg.get(name, {})
    if not isinstance(block, dict):
        raise ConfigError(f"[{name}] must be a table")
    return block


def _limit_1d(block) -> SlicedLimit1D:
    domain = tuple(block.get("domain", (-1.5, 2.5)))
    jumps = tuple(tuple(j) for j in block.get("jumps", ()))
    return SlicedLimit1D(domain, jumps)


def _limit_2d(block) -> Limit2D:
    domain = block.get("domain", ((0.0, 0.0), (1.0, 1.0)))
    segs = tuple(tuple(s) for s in block.get("segments", ()))
    return Limit2D(segs, (tuple(domain[0]), tuple(domain[1])))


class Writer:
    """Collects CSV tables and writes them with a metadata block at the end of a command."""

    def __init__(self, out: Path, command: str, config_hash: str, seed: int):
        self.out = out
        self.meta = [f"# tool=kwc version={__version__}", f"# command={command}",
                     f"# config_sha256={config_hash}", f"# seed={seed}"]
        self.tables = {}

    def table(self, name, header, rows, notes=()):
        self.tables[name] = (header, rows, list(notes))

    def flush(self):
        self.out.mkdir(parents=True, exist_ok=True)
        for name, (header, rows, notes) in self.tables.items():
            lines = self.meta + [f"# {n}" for n in notes] + [",".join(header)]
            lines += [",".join(_fmt(x) for x in row) for row in rows]
            (self.out / name).write_text("\n".join(lines) + "\n")


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


# ---------------------------------------------------------------------------
# gamma-check


def cmd_gamma_check(cfg, w: Writer, rng) -> int:
    pot = potential_from_config(cfg.get("potential"))
    weight = weight_from_config(cfg.get("weight"))
    lim_block = _section(cfg, "limit")
    grid_block = _section(cfg, "grid")
    eps_list = [float(e) for e in _section(cfg, "schedule").get("eps", [1e-1, 1e-2, 1e-3])]
    bound = float(_section(cfg, "gamma").get("bound", 0.05))
    dims = int(lim_block.get("dims", 1))
    limit = _limit_1d(lim_block) if dims == 1 else _limit_2d(lim_block)
    e0 = e0_sMM(limit, pot)
    rows, notes = [], []
    for eps in eps_list:
        if dims == 1:
            h = eps / float(grid_block.get("h_over_eps", 50.0))
            lo, hi = limit.domain
            n = int(round((hi - lo) / h))
            grid = GridField.on_domain(lo, lo + n * h, n)
        else:
            shape = tuple(grid_block.get("shape", (1024, 1024)))
            grid = GridField.on_domain(limit.lower, limit.upper, shape)
        try:
            v = recovery_field(eps, limit, weight, pot, grid)
        except EpsilonTooLarge as exc:
            notes.append(f"skipped eps={float(eps)!r}: {exc}")
            continue
        e = e_sMM(v, eps, pot).total
        rel = (e - e0) / e0 if e0 > 0 else e
        rows.append((eps, e, e0, rel))
        print(f"eps={eps:g} e_sMM={e:.6g} e0={e0:.6g} rel_error={rel:+.4%}")
    w.table("gamma_check.csv", ("epsilon", "e_sMM_of_recovery", "e0_limit", "rel_error"), rows, notes)
    if rows and abs(rows[-1][3]) > bound:
        print(f"FAIL: final relative error exceeds {bound}")
        return EXIT_VIOLATION
    return EXIT_OK


# ---------------------------------------------------------------------------
# sigma-table


def cmd_sigma_table(cfg, w: Writer, rng) -> int:
    pot = potential_from_config(cfg.get("potential"))
    weight = weight_from_config(cfg.get("weight"))
    blk = _section(cfg, "sigma")
    rs = np.concatenate([[0.0], np.logspace(math.log10(float(blk.get("r_min", 1e-2))),
                                             math.log10(float(blk.get("r_max", 10.0))),
                                             int(blk.get("count", 31)))])
    rs = np.union1d(rs, [float(r) for r in blk.get("extra", [0.5, 1.0, 2.0, 5.0, 10.0])])
    default = pot.kind == "quadratic" and weight.kind == "quadratic"
    rows, worst = [], 0.0
    for r in rs:
        s = sigma_jump_cost(weight, pot, float(r))
        if default:
            c = r / (1.0 + r)
            worst = max(worst, abs(s - c))
            rows.append((r, s, c, s - c))
        else:
            rows.append((r, s, "", ""))
    w.table("sigma_table.csv", ("r", "sigma_numeric", "sigma_closed_form", "diff"), rows)
    if default:
        print(f"max |sigma - r/(1+r)| = {worst:.3e}")
        if worst > 1e-6:
            return EXIT_VIOLATION
    return EXIT_OK


# ---------------------------------------------------------------------------
# staircase


def staircase_signal(steps=3, height=1.0, nodes_per_step=8, noise=0.0, rng=None) -> GridField:
    """Monotone staircase with ``steps`` jumps of ``height`` (``steps + 1`` plateaus)."""
    n = (steps + 1) * nodes_per_step
    vals = np.repeat(np.arange(steps + 1) * height, nodes_per_step).astype(float)
    if noise and rng is not None:
        vals = vals + noise * rng.standard_normal(n)
    return GridField.on_domain(0.0, 1.0, n, values=vals)


def _pc_jumps(vals, tol=1e-9):
    d = np.diff(vals)
    return d[np.abs(d) > tol]


def cmd_staircase(cfg, w: Writer, rng) -> int:
    pot = potential_from_config(cfg.get("potential"))
    weight = weight_from_config(cfg.get("weight"))
    blk = _section(cfg, "staircase")
    f = staircase_signal(int(blk.get("steps", 3)), float(blk.get("height", 1.0)),
                         int(blk.get("nodes_per_step", 8)), float(blk.get("noise", 0.0)), rng)
    lam = float(blk.get("lambda", 4.0))
    levels = int(blk.get("levels", 256))
    res = solver.minimize_tvkwc_1d(f, lam, pot, weight, levels, detail=True)
    a1 = float(weight(1.0))
    u_tv = f.with_values(kernels.tv_prox_1d(f.values, a1 / (lam * f.spacing)))
    rows = []
    for name, u, jc in (("tv_kwc_dp", res.u, res.jump_cost),
                        ("tv_taut_string", u_tv, a1 * total_variation(u_tv))):
        jumps = _pc_jumps(u.values)
        obj = jc + fidelity(u, f, lam)
        rows.append((name, len(jumps), " ".join(f"{j:.6g}" for j in jumps), jc, obj))
        print(f"{name}: jumps={len(jumps)} jump_cost={jc:.6g} objective={obj:.6g}")
    rise = float(np.ptp(f.values))
    steps = int(blk.get("steps", 3))
    merged = sigma_jump_cost(weight, pot, rise)
    split = steps * sigma_jump_cost(weight, pot, rise / steps)
    rows.append(("merged_vs_split", 1, f"{rise:.6g}", merged, split))
    w.table("staircase.csv", ("method", "jump_count", "jump_sizes", "jump_cost", "objective"), rows,
            [f"lambda={float(lam)!r} levels={levels}", "merged_vs_split row: jump_cost=sigma(rise), objective column=steps*sigma(rise/steps)"])
    print(f"sigma({rise:g}) = {merged:.6g} vs {steps}*sigma({rise / steps:g}) = {split:.6g}")
    return EXIT_OK if merged < split else EXIT_VIOLATION


# ---------------------------------------------------------------------------
# metric-demo


def radial_bump_grid(n=512, half_width=1.1):
    """``n x n`` pixels of side ``2 half_width / n`` with a pixel centred at the origin."""
    h = 2.0 * half_width / n
    lo = -(n // 2) * h - 0.5 * h
    return GridField.on_domain((lo, lo), (lo + n * h, lo + n * h), (n, n))


def radial_bump(grid: GridField, eps: float) -> GridField:
    X, Y = grid.mesh()
    return grid.with_values(np.maximum(0.0, 1.0 - np.hypot(X, Y) / eps))


def radial_bump_distances(eps, n=512, offsets=(0.1, 0.25, 0.5)):
    """Essential Hausdorff distance of the voxelised graphs and off-centre slice distances."""
    g = radial_bump_grid(n)
    v = radial_bump(g, eps)
    h = g.spacing
    z_lo, z_hi = -2.0 * h, 1.0 + 2.0 * h
    A = graph_voxels(v.values, h, z_lo, z_hi)
    B = graph_voxels(np.zeros(g.shape), h, z_lo, z_hi)
    deh = essential_hausdorff(A, B, h, method="kdtree")
    xs = g.coords(0)
    slices = {}
    for off in offsets:
        for sgn in (1, -1):
            jj = int(np.argmin(np.abs(g.coords(1) - sgn * off)))
            prof = v.values[:, jj]
            d = hausdorff(np.column_stack([xs, prof]), np.column_stack([xs, np.zeros_like(xs)]))
            slices[sgn * float(g.coords(1)[jj])] = d
    return deh, slices, h


def thick_cantor_gaps(depth: int):
    gaps = []
    for k in range(1, depth + 1):
        for a in range(1, 2 ** k + 1):
            c, r = a / 2 ** k, 1.0 / 2 ** (2 * k + 1)
            gaps.append((max(0.0, c - r), min(1.0, c + r)))
    return sorted(gaps)


def in_thick_cantor(r, depth: int):
    r = np.asarray(r, dtype=float)
    ok = (r >= 0) & (r <= 1)
    for lo, hi in thick_cantor_gaps(depth):
        ok &= ~((r > lo) & (r < hi))
    return ok


def cantor_distances(eps, depth=3, n=512):
    h = 2.0 / n
    c = -1.0 + (np.arange(n) + 0.5) * h
    X, Y = np.meshgrid(c, c, indexing="ij")
    R = np.hypot(X, Y)
    K = in_thick_cantor(R, depth)
    Ke = in_thick_cantor(R + eps, depth) & (R + eps <= 1.0)
    d = hausdorff(np.argwhere(K) * h, np.argwhere(Ke) * h)
    # horizontal slices at |x| in G just below a gap: the circle of radius x
    # touches the slice, while the shifted circles leave it
    rights = [lo for lo, _ in thick_cantor_gaps(depth) if lo > 0][:6]
    t = np.linspace(-1.0, 1.0, 4001)
    slices = {}
    for x in rights:
        rr = np.hypot(t, x)
        def graph(mask):
            pts = [np.column_stack([t, np.ones_like(t)])]
            for ti in t[mask]:
                pts.append(np.column_stack([np.full(21, ti), np.linspace(0, 1, 21)]))
            return np.vstack(pts)
        gK = graph(in_thick_cantor(rr, depth))
        gKe = graph(in_thick_cantor(rr + eps, depth) & (rr + eps <= 1.0))
        slices[x] = hausdorff(gK, gKe)
    return d, slices, h, K, Ke


def cmd_metric_demo(cfg, w: Writer, rng) -> int:
    blk = _section(cfg, "metric")
    kinds = blk.get("kinds", ["radial", "cantor"])
    rows, status = [], EXIT_OK
    if "radial" in kinds:
        n = int(blk.get("radial_grid", 512))
        prev = math.inf
        for eps in blk.get("radial_eps", [0.2, 0.1, 0.05]):
            deh, slices, h = radial_bump_distances(float(eps), n)
            worst = max(slices.values())
            rows.append(("radial", eps, "d_eH", deh, h))
            for off, d in sorted(slices.items()):
                rows.append(("radial", eps, f"slice_y={off:.4f}", d, h))
            print(f"radial eps={eps:g}: d_eH={deh:.4f} max off-centre slice distance={worst:.4g} (3h={3 * h:.4g})")
            if not 0.9 <= deh <= 1.1 or worst > prev + 1e-12:
                status = EXIT_VIOLATION
            prev = worst
        if worst >= 3 * h:
            status = EXIT_VIOLATION
    if "cantor" in kinds:
        depth = int(blk.get("cantor_depth", 3))
        n = int(blk.get("cantor_grid", 512))
        for eps in blk.get("cantor_eps", [0.1, 0.05, 0.02]):
            d, slices, h, K, Ke = cantor_distances(float(eps), depth, n)
            rows.append(("cantor", eps, "hausdorff_K_eps_K", d, h))
            for x, ds in sorted(slices.items()):
                rows.append(("cantor", eps, f"slice_x={x:.5f}", ds, h))
            print(f"cantor eps={eps:g}: d_H(K_eps, K)={d:.4f} (bound eps+2h={eps + 2 * h:.4f}); "
                  f"slice distances {min(slices.values()):.3f}..{max(slices.values()):.3f}")
            tag = f"{eps:g}".replace(".", "p")
            w.out.mkdir(parents=True, exist_ok=True)
            write_mask(w.out / f"cantor_K_eps{tag}.pgm", Ke)
            if float(eps) == float(blk.get("cantor_eps", [0.1, 0.05, 0.02])[0]):
                write_mask(w.out / "cantor_K.pgm", K)
            if d > float(eps) + 2 * h + 1e-12:
                status = EXIT_VIOLATION
    w.table("metric_demo.csv", ("fixture", "epsilon", "quantity", "value", "h"), rows)
    return status


# ---------------------------------------------------------------------------
# elpf-check


def cmd_elpf_check(cfg, w: Writer, rng) -> int:
    blk = _section(cfg, "elpf")
    names = blk.get("potentials", [cfg.get("potential", {}).get("name", "quadratic")])
    c_grid = [float(c) for c in blk.get("c", [-1.0, 0.0, 0.5, 0.9, 1.0])]
    deltas = np.logspace(math.log10(float(blk.get("delta_min", 1e-3))), math.log10(float(blk.get("delta_max", 1.0))),
                         int(blk.get("delta_count", 20)))
    rows, ok = [], True
    for name in names:
        pot = potential_from_config({"name": name})
        rep = check_elpf(pot, c_grid, deltas, strict=False)
        ok &= rep.ok
        rows += [(name, *r) for r in rep.rows]
        print(f"{name}: max ratio {rep.max_ratio:.6g} -> {'pass' if rep.ok else 'FAIL'}")
    w.table("elpf_check.csv", ("potential", "c", "delta", "lhs", "rhs"), rows)
    return EXIT_OK if ok else EXIT_VIOLATION


# ---------------------------------------------------------------------------
# denoise


def noisy_step_1d(n=2000, height=2.0, noise=0.05, rng=None):
    g = GridField.on_domain(0.0, 1.0, n)
    x = g.coords(0)
    vals = np.where(x > 0.5, height, 0.0) + noise * rng.standard_normal(n)
    return g.with_values(vals)


def two_region_2d(n=64, height=1.0, noise=0.05, rng=None):
    g = GridField.on_domain((0.0, 0.0), (1.0, 1.0), (n, n))
    X, _ = g.mesh()
    return g.with_values(np.where(X > 0.5, height, 0.0) + noise * rng.standard_normal((n, n)))


def cmd_denoise(cfg, w: Writer, rng) -> int:
    pot = potential_from_config(cfg.get("potential"))
    weight = weight_from_config(cfg.get("weight"))
    inp = _section(cfg, "input")
    if "file" in inp:
        f = read_field(inp["file"])
    else:
        kind = inp.get("synthetic", "noisy_step_1d")
        if kind == "noisy_step_1d":
            f = noisy_step_1d(int(inp.get("n", 2000)), float(inp.get("height", 2.0)), float(inp.get("noise", 0.05)), rng)
        elif kind == "two_region_2d":
            f = two_region_2d(int(inp.get("n", 64)), float(inp.get("height", 1.0)), float(inp.get("noise", 0.05)), rng)
        else:
            raise ConfigError(f"unknown synthetic input {kind!r}")
    sc = _section(cfg, "solve")
    sched = _section(cfg, "schedule").get("eps")
    if sched is not None:
        sc = dict(sc, eps_schedule=sched)
    conf = solver.SolveConfig.from_dict(sc)
    trace = solver.alternate(f, conf, pot, weight)
    eps, u, v = trace.final
    w.out.mkdir(parents=True, exist_ok=True)
    write_field(w.out / "input.txt", f)
    write_field(w.out / "u.txt", u)
    write_field(w.out / "v.txt", v)
    trace_rows = [tuple(line.split(",")) for line in trace.to_csv().strip().splitlines()[1:]]
    w.table("trace.csv", ("iteration", "epsilon", "dirichlet", "potential", "weighted_tv", "fidelity", "total"),
            trace_rows)
    status = EXIT_OK if trace.monotone() else EXIT_VIOLATION
    thr = conf.jump_threshold if conf.jump_threshold is not None else 0.25 * max(float(np.ptp(u.values)), 1e-12)
    if f.dims == 1:
        clusters = solver.jump_clusters(u, thr)
        dips = solver.jump_face_value(u, v, thr)
        rows = []
        jumps = []
        for (i, j, size), dip in zip(clusters, dips):
            x = float(u.lower[0] + (0.5 * (i + j) + 1) * u.spacing)
            rows.append((x, size, dip, 1.0 / (1.0 + abs(size))))
            jumps.append((x, min(dip, 1.0), 1.0))
        limit = SlicedLimit1D((float(u.lower[0]), float(u.upper[0])), tuple(jumps))
        dn = d_nu(v, limit, resolution=min(1e-3, u.spacing))
        w.table("jumps.csv", ("position", "size", "v_dip", "one_over_one_plus_r"), rows,
                [f"threshold={float(thr)!r}", f"d_nu(Gamma_v, Xi)={float(dn)!r}"])
        print(f"eps={eps:g}: {len(clusters)} jump(s); "
              + "; ".join(f"r={r[1]:.4g} v_dip={r[2]:.4g} 1/(1+r)={r[3]:.4g}" for r in rows)
              + f"; d_nu={dn:.4g}")
    else:
        band = v.values < 0.99
        width = float(band.sum(axis=0).max()) * v.spacing if band.any() else 0.0
        bound = 7.0 * math.sqrt(eps)
        w.table("band.csv", ("epsilon", "band_width", "bound_7_sqrt_eps"), [(eps, width, bound)],
                ["band: nodes with v < 0.99, widest grid row across the interface"])
        print(f"eps={eps:g}: v band width {width:.4g} (7 sqrt(eps) = {bound:.4g}); min v = {v.values.min():.4g}")
    if trace.box_active:
        print("note: v reached the clamp box")
    return status


# ---------------------------------------------------------------------------
# entry point

COMMANDS = {
    "gamma-check": cmd_gamma_check,
    "sigma-table": cmd_sigma_table,
    "staircase": cmd_staircase,
    "metric-demo": cmd_metric_demo,
    "elpf-check": cmd_elpf_check,
    "denoise": cmd_denoise,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kwc", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="TOML experiment configuration")
    ap.add_argument("--out", default=None, help="output directory (default: [output].dir or ./kwc-out)")
    ap.add_argument("--seed", type=int, default=None, help="random seed (default: config seed or 0)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg, digest = load_config(args.config)
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        out = Path(args.out or _section(cfg, "output").get("dir", "kwc-out"))
        w = Writer(out, args.command, digest, seed)
        status = COMMANDS[args.command](cfg, w, np.random.default_rng(seed))
        w.flush()
    except (ConfigError, InvalidArgument, KeyError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PropertyViolation as exc:
        print(f"property violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    return status


if __name__ == "__main__":
    sys.exit(main())
