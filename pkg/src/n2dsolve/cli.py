"""Command-line front end.

Commands build problems from a small INI config file and write delimited
reports (plus companion figures) into an output directory:

    solve      build + solve once, export all edge values
    converge   sweep nodes-per-edge, report max error vs an exact solution
    scaling    sweep tree depth, report flop counts and fitted slopes
    rankprobe  build to the root, report off-diagonal block ranks
    verify     run the independent consistency checks, nonzero exit on failure

Exit codes: 0 ok, 1 runtime or check failure, 2 configuration error. CSV
bodies are deterministic for a fixed config; wall-clock timing goes to a
separate log file.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, oracle, report, solver
from .errors import DegenerateProblemError, InvalidArgumentError, N2DError
from .flops import fit_loglog_slope
from .geometry import Square, build_tree
from .leafop import build_box_n2d
from .merge import merge_four, merge_four_vertical_first
from .operators import offdiag_side_ranks, reciprocity_residual
from .problem import A_PRESETS, B_PRESETS, V_PRESETS, make_spec
from .quadrature import gauss_legendre


@dataclass
class RunConfig:
    """Validated knobs for one run."""

    a: str = "const"
    b: str = "const"
    v: str = "cosh_x"
    kappa: float = 1.0
    bump_amp: float = 0.5
    bump_width: float = 0.3
    osc_amp: float = 0.3
    domain_x: float = 0.0
    domain_y: float = 0.0
    domain_side: float = 1.0
    levels: int = 2
    n_gauss: int = 10
    epsilon: float = 1e-10
    n_samp: int = 0
    enlargement: float = 0.0
    n_gauss_values: tuple[int, ...] = (4, 6, 8, 10)
    level_values: tuple[int, ...] = (2, 3, 4, 5)
    fd_grids: tuple[int, ...] = (128, 256)
    threads: int = 1
    out: str = "out"
    seed: int | None = None  # reserved; all algorithms are deterministic

    def domain(self) -> Square:
        return Square(self.domain_x, self.domain_y, self.domain_side)

    def validate(self) -> None:
        if self.a not in A_PRESETS:
            raise InvalidArgumentError(f"unknown preset for a: {self.a!r} (choose from {A_PRESETS})")
        if self.b not in B_PRESETS:
            raise InvalidArgumentError(f"unknown preset for b: {self.b!r} (choose from {B_PRESETS})")
        if self.v not in V_PRESETS:
            raise InvalidArgumentError(f"unknown preset for v: {self.v!r} (choose from {V_PRESETS})")
        for name, val, lo, hi in (
            ("levels", self.levels, 1, 7),
            ("n_gauss", self.n_gauss, 3, 24),
            ("threads", self.threads, 1, 64),
        ):
            if not lo <= val <= hi:
                raise InvalidArgumentError(f"{name} = {val} outside [{lo}, {hi}]")
        for L in self.level_values:
            if not 1 <= L <= 7:
                raise InvalidArgumentError(f"sweep level {L} outside [1, 7]")
        for g in self.n_gauss_values:
            if not 3 <= g <= 24:
                raise InvalidArgumentError(f"sweep n_gauss {g} outside [3, 24]")
        if self.domain_side <= 0:
            raise InvalidArgumentError(f"domain_side must be positive, got {self.domain_side}")

    def summary(self) -> str:
        pairs = []
        for k in sorted(self.__dataclass_fields__):
            v = getattr(self, k)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            pairs.append(f"{k}={v}")
        return " ".join(pairs)

    def make_spec(self, n_gauss: int | None = None):
        return make_spec(
            self.domain(),
            a=self.a,
            b=self.b,
            v=self.v,
            kappa=self.kappa,
            epsilon=self.epsilon,
            n_gauss=n_gauss if n_gauss is not None else self.n_gauss,
            n_samp=self.n_samp,
            enlargement=self.enlargement,
            bump_amp=self.bump_amp,
            bump_width=self.bump_width,
            osc_amp=self.osc_amp,
        )


def load_config(path: str | None) -> RunConfig:
    cfg = RunConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise InvalidArgumentError(f"config file not found: {path}")
    casts = {f: type(getattr(cfg, f)) for f in cfg.__dataclass_fields__}
    for section in parser.sections():
        for key, raw in parser[section].items():
            if key not in casts:
                raise InvalidArgumentError(f"unknown config key {key!r} in [{section}]")
            kind = casts[key]
            try:
                if kind is tuple:
                    parts = raw.replace(",", " ").split()
                    setattr(cfg, key, tuple(int(x) for x in parts))
                elif kind is int:
                    setattr(cfg, key, int(raw))
                elif kind is float:
                    setattr(cfg, key, float(raw))
                else:
                    setattr(cfg, key, raw.strip())
            except ValueError as exc:
                raise InvalidArgumentError(f"bad value for {key!r}: {raw!r}") from exc
    return cfg


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def write_csv(path: Path, config_line: str, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# config: {config_line}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def _analytic_twin(cfg: RunConfig):
    """The exact solution matching the configured problem, if there is one."""
    if cfg.a != "const" or cfg.b != "const":
        return None
    key = f"{cfg.v}_k{cfg.kappa:g}"
    for sol in oracle.analytic_suite(cfg.domain(), kappas=(cfg.kappa,)):
        if sol.name == key:
            return sol
    return None


def _max_edge_error(tree, solution, exact) -> float:
    return max(
        float(np.max(np.abs(solution.edge_potential[e.id] - exact.value(e.nodes))))
        for e in tree.edges
    )


# -- commands -------------------------------------------------------------------


def cmd_solve(cfg: RunConfig, out: Path, log) -> int:
    spec = cfg.make_spec()
    tree = build_tree(cfg.domain(), cfg.levels, gauss_legendre(cfg.n_gauss))
    t0 = time.monotonic()
    state = solver.build(spec, tree, threads=cfg.threads)
    t_build = time.monotonic() - t0
    t0 = time.monotonic()
    solution = solver.solve(state)
    t_solve = time.monotonic() - t0
    log(f"build {t_build:.3f}s solve {t_solve:.3f}s")

    rows = solution.rows()
    write_csv(
        out / "solution.csv",
        cfg.summary(),
        ["edge_id", "orientation", "node_x", "node_y", "u", "v"],
        rows,
    )
    report.render_solution(rows, out / "solution.png")

    exact = _analytic_twin(cfg)
    lines = [
        f"edges={len(tree.edges)}",
        f"nodes={len(tree.edges) * cfg.n_gauss}",
        f"flops_leaf={state.flops.leaf}",
        f"flops_merge={state.flops.merge}",
        f"flops_solve={state.flops.solve}",
    ]
    if exact is not None:
        lines.append(f"max_edge_error={_max_edge_error(tree, solution, exact):.6e}")
    else:
        lines.append("max_edge_error=n/a")
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    for line in lines:
        print(line)
    return 0


def cmd_converge(cfg: RunConfig, out: Path, log) -> int:
    exact = _analytic_twin(cfg)
    if exact is None:
        raise InvalidArgumentError(
            "converge needs a preset with an exact solution "
            "(a = const, b = const, v analytic)"
        )
    rows = []
    for g in cfg.n_gauss_values:
        spec = cfg.make_spec(n_gauss=g)
        tree = build_tree(cfg.domain(), cfg.levels, gauss_legendre(g))
        t0 = time.monotonic()
        state = solver.build(spec, tree, threads=cfg.threads)
        solution = solver.solve(state)
        err = _max_edge_error(tree, solution, exact)
        log(f"n_gauss={g} err={err:.3e} ({time.monotonic() - t0:.2f}s)")
        rows.append((g, err))
        print(f"n_gauss={g:3d}  max_error={err:.6e}")
    write_csv(out / "converge.csv", cfg.summary(), ["n_gauss", "max_error"], rows)
    report.render_converge(rows, out / "converge.png")
    return 0


def cmd_scaling(cfg: RunConfig, out: Path, log) -> int:
    rows = []
    flop_rows = []
    for L in cfg.level_values:
        spec = cfg.make_spec()
        tree = build_tree(cfg.domain(), L, gauss_legendre(cfg.n_gauss))
        t0 = time.monotonic()
        state = solver.build(spec, tree, threads=cfg.threads)
        solver.solve(state)
        log(f"L={L} {time.monotonic() - t0:.2f}s")
        n_nodes = len(tree.edges) * cfg.n_gauss
        n_edge = len(tree.edges)
        # build cost is the factorization (merge) stage; leaf sampling is
        # reported separately since it is a local O(N) precomputation
        rows.append((L, n_nodes, n_edge, state.flops.merge, state.flops.solve))
        flop_rows.append(
            (L, n_nodes, state.flops.leaf, state.flops.merge, state.flops.leaf + state.flops.merge)
        )
        print(f"L={L}  N_nodes={n_nodes}  flops_build={state.flops.merge}  flops_solve={state.flops.solve}")
    ns = [r[1] for r in rows]
    build_slope = fit_loglog_slope(ns, [r[3] for r in rows])
    solve_slope = fit_loglog_slope(ns, [r[4] for r in rows])
    print(f"build_slope={build_slope:.3f} (target 1.5)")
    print(f"solve_slope={solve_slope:.3f} (target 1.0)")
    write_csv(
        out / "scaling.csv",
        cfg.summary(),
        ["L", "N_nodes", "N_edge", "flops_build", "flops_solve"],
        rows,
    )
    write_csv(
        out / "flops.csv",
        cfg.summary(),
        ["L", "N_nodes", "flops_leaf", "flops_merge", "flops_total"],
        flop_rows,
    )
    report.render_scaling(rows, build_slope, solve_slope, out / "scaling.png")
    return 0


def cmd_rankprobe(cfg: RunConfig, out: Path, log) -> int:
    spec = cfg.make_spec()
    tree = build_tree(cfg.domain(), cfg.levels, gauss_legendre(cfg.n_gauss))
    t0 = time.monotonic()
    state = solver.build(spec, tree, threads=cfg.threads)
    log(f"build {time.monotonic() - t0:.2f}s")
    rows = offdiag_side_ranks(state.root_op)
    csv_rows = [
        (cfg.levels, r["block"], r["dim"], r["rank@1e-06"], r["rank@1e-08"], r["rank@1e-10"])
        for r in rows
    ]
    write_csv(
        out / "rank.csv",
        cfg.summary(),
        ["level", "block", "dim", "rank@1e-6", "rank@1e-8", "rank@1e-10"],
        csv_rows,
    )
    report.render_ranks(rows, out / "rank.png")
    for r in csv_rows:
        print(f"block {r[1]:<12} dim {r[2]:4d} ranks {r[3]}/{r[4]}/{r[5]}")
    return 0


def run_verify(cfg: RunConfig, corrupt_box_id: int | None = None):
    """All consistency checks; returns (rows, ok). The corrupt hook is a
    test aid that damages one leaf operator after the build."""
    rows = []
    domain = cfg.domain()
    spec = cfg.make_spec()
    tree = build_tree(domain, cfg.levels, gauss_legendre(cfg.n_gauss))
    state = solver.build(spec, tree, threads=cfg.threads)
    if corrupt_box_id is not None:
        # damage one leaf operator after the merge records were built; the
        # flat path reads the damaged operator while the downward pass uses
        # the stale records, so the cross-path check must trip
        state.leaf_ops[corrupt_box_id].matrix += 1e-3

    def add(check, detail, value, threshold):
        rows.append((check, detail, value, threshold, "pass" if value <= threshold else "fail"))

    # hierarchical vs flat interior fluxes
    solution = solver.solve(state)
    system = solver.assemble_flat(spec, tree, state.leaf_ops)
    flat = solver.solve_flat(system)
    stack_h = np.concatenate([solution.edge_flux[e] for e in tree.interior_edge_ids])
    stack_f = np.concatenate([flat.flux[e] for e in tree.interior_edge_ids])
    rel = float(np.linalg.norm(stack_h - stack_f) / max(np.linalg.norm(stack_f), 1e-300))
    add("cross_path", "interior fluxes", rel, 1e-9)
    add("cross_path", "flat residual", flat.residual_rel, 1e-11)
    counts = sorted(system.block_counts.values())
    add("cross_path", "max blocks per row", float(counts[-1]), 7.0)

    # reciprocity on every leaf and the root, over same-equation pairs
    suite = [s for s in oracle.analytic_suite(domain, kappas=(cfg.kappa,))]
    worst = 0.0
    for bid in list(tree.leaf_ids) + [1]:
        op = state.leaf_ops.get(bid, state.root_op)
        box = tree.boxes[bid]
        for i in range(len(suite)):
            for j in range(i + 1, len(suite)):
                u1, v1 = oracle.box_boundary_data(suite[i], box, tree)
                u2, v2 = oracle.box_boundary_data(suite[j], box, tree)
                worst = max(worst, reciprocity_residual(op, tree, spec.coeff_a, v1, v2))
    add("greens_identity", "leaves and root", worst, 1e-8)

    # merge-order invariance at the root
    def op_of(bid):
        box = tree.boxes[bid]
        if box.is_leaf:
            return state.leaf_ops[bid]
        return merge_four(tuple(op_of(c) for c in tree.child_order(box)))[0]

    box = tree.boxes[1]
    kids = tuple(op_of(c) for c in tree.child_order(box))
    horiz = merge_four(kids)[0]
    vert = merge_four_vertical_first(kids)[0]
    worst = 0.0
    for sol in suite:
        u, v = oracle.box_boundary_data(sol, box, tree)
        worst = max(
            worst,
            float(np.linalg.norm(horiz.matrix @ v - vert.matrix @ v) / np.linalg.norm(u)),
        )
    add("merge_order", "root operator", worst, 1e-8)

    # FD oracle band
    g1, g2 = cfg.fd_grids[0], cfg.fd_grids[-1]
    nodes = np.vstack([e.nodes for e in tree.edges])
    u_spec = np.concatenate([solution.edge_potential[e.id] for e in tree.edges])
    extrap, band = oracle.richardson_pair(spec, domain, (g1, g2), nodes)
    diff = float(np.max(np.abs(u_spec - extrap)))
    add("fd_oracle", f"grids {g1}/{g2}", diff, 5.0 * band + 1e-9)

    ok = all(r[4] == "pass" for r in rows)
    return rows, ok


def cmd_verify(cfg: RunConfig, out: Path, log) -> int:
    t0 = time.monotonic()
    rows, ok = run_verify(cfg)
    log(f"verify {time.monotonic() - t0:.2f}s")
    write_csv(
        out / "verify_report.csv",
        cfg.summary(),
        ["check", "detail", "value", "threshold", "status"],
        rows,
    )
    report.render_verify(rows, out / "verify.png")
    for check, detail, value, threshold, status in rows:
        print(f"[{status.upper():4}] {check:<16} {detail:<22} {value:.3e} (tol {threshold:.3e})")
    if not ok:
        print("verification FAILED")
        return 1
    print("all checks passed")
    return 0


COMMANDS = {
    "solve": cmd_solve,
    "converge": cmd_converge,
    "scaling": cmd_scaling,
    "rankprobe": cmd_rankprobe,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="n2dsolve",
        description="direct solver for variable-coefficient elliptic problems on a square",
    )
    parser.add_argument("--version", action="version", version=f"n2dsolve {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="INI config file")
        p.add_argument("--out", default=None, help="output directory (default: config value)")
        p.add_argument("--threads", type=int, default=None, help="leaf-stage worker threads")
        p.add_argument("--seed", type=int, default=None, help="reserved; algorithms are deterministic")

    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.threads is not None:
            cfg.threads = args.threads
        if args.out is not None:
            cfg.out = args.out
        if args.seed is not None:
            cfg.seed = args.seed
        cfg.validate()
        # reject degenerate coefficient configurations before any build
        cfg.make_spec().validate(cfg.domain())
    except (InvalidArgumentError, DegenerateProblemError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "run.log"

    def log(msg: str) -> None:
        with open(log_path, "a") as fh:
            fh.write(f"{time.strftime('%Y-%m-%d %H:%M:%S')} [{args.command}] {msg}\n")

    try:
        return COMMANDS[args.command](cfg, out, log)
    except (N2DError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
