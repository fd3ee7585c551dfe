"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 invalid scenario, 3 integration
failure, 4 unreachable terminal target, 5 iteration cap hit.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, ccd, scenario as scn, shooting, simulate
from .errors import (
    InfeasiblePathError,
    InfeasibleTargetError,
    NonConvergenceError,
    ScenarioError,
    SolverError,
)
from .model import dynamics
from .trajectory import Grid, Trajectory

log = logging.getLogger("harvestopt")

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_INTEGRATION, EXIT_INFEASIBLE, EXIT_NONCONVERGENCE = range(6)
BUILTIN_BASE = "builtin:base_case"
UNBOUNDED_HMAX = 1e6
FMT = "%.6g"
DEFAULT_K_GRID = "-2:2:0.4"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# I/O helpers


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return FMT % float(v)


def write_csv(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path: Path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise UsageError(f"{path}: empty CSV")
    header, body = rows[0], rows[1:]
    try:
        data = np.array([[float(v) for v in r] for r in body], dtype=np.float64).reshape(len(body), len(header))
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None
    return {name: data[:, m] for m, name in enumerate(header)}


def trajectory_rows(traj: Trajectory):
    header = ["t"] + [f"x_{i + 1}" for i in range(traj.stocks.shape[0])] + [
        f"h_{i + 1}" for i in range(traj.stocks.shape[0])
    ]
    rows = [
        [t, *traj.stocks[:, k], *traj.harvests[:, k]] for k, t in enumerate(traj.times)
    ]
    return header, rows


def read_trajectory(path: Path, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    cols = read_csv(path)
    try:
        t = cols["t"]
        x = np.array([cols[f"x_{i + 1}"] for i in range(n)])
        h = np.array([cols[f"h_{i + 1}"] for i in range(n)])
    except KeyError as exc:
        raise UsageError(f"{path}: missing column {exc.args[0]}") from None
    return t, x, h


def parse_list(text: str) -> list[float]:
    """Comma-separated numbers, or ``start:stop:step`` with ``stop`` included."""
    text = text.strip()
    try:
        if ":" in text:
            start, stop, step = (float(p) for p in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            return [round(start + m * step, 12) for m in range(count)]
        values = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"cannot parse number list {text!r}") from None
    if not values:
        raise UsageError("empty number list")
    return values


# scenario loading


def read_scenario(source: str) -> tuple[scn.Scenario, str, str]:
    """Return ``(scenario, digest, label)``; ``builtin:base_case`` names the shipped fixture."""
    if source == BUILTIN_BASE:
        data = resources.files("harvestopt").joinpath("data/base_case.json").read_bytes()
    else:
        try:
            data = Path(source).read_bytes()
        except OSError as exc:
            raise UsageError(f"cannot read {source}: {exc.strerror}") from None
    digest = hashlib.sha256(data).hexdigest()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ScenarioError(f"not UTF-8 text ({exc.reason})", "line 1 column 1") from None
    return scn.parse(text), digest, source


def checked_scenario(source: str):
    sc, digest, label = read_scenario(source)
    violations = scn.validate(sc)
    if violations:
        raise _Invalid(violations)
    return sc, digest, label


class _Invalid(Exception):
    def __init__(self, violations):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


def with_overrides(sc: scn.Scenario, args) -> scn.Scenario:
    settings = sc.settings
    if getattr(args, "steps", None) is not None:
        settings = replace(settings, n_steps=args.steps)
    if getattr(args, "max_outer_iters", None) is not None:
        settings = replace(settings, ccd=replace(settings.ccd, max_outer_iters=args.max_outer_iters))
    return replace(sc, settings=settings)


def write_manifest(out: Path, command: str, argv, digest: str, label: str, sc: scn.Scenario,
                   started: str, outputs: list[Path], summary: dict) -> Path:
    manifest = {
        "tool": "harvestopt",
        "version": __version__,
        "command": command,
        "argv": list(argv),
        "scenario": {"source": label, "sha256": digest, "name": sc.name},
        "settings": asdict(sc.settings),
        "started": started,
        "finished": _now(),
        "outputs": sorted(str(p.relative_to(out)) for p in outputs),
        "summary": summary,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _floats(arr) -> list[float]:
    return [float(v) for v in np.asarray(arr).ravel()]


# commands


def cmd_check(args) -> int:
    sc, digest, _ = read_scenario(args.scenario)
    violations = scn.validate(sc)
    for v in violations:
        print(v)
    if violations:
        return EXIT_INVALID
    print(f"ok: {sc.n} species, horizon {sc.horizon:g}, sha256 {digest[:12]}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    started = _now()
    sc, digest, label = checked_scenario(args.scenario)
    out = Path(args.out)
    harvest = args.harvest
    horizon = args.horizon if args.horizon is not None else sc.horizon
    steps = args.steps
    if harvest in (None, "none"):
        harvests = None
    else:
        try:
            harvests = float(harvest)
        except ValueError:
            t, _, h = read_trajectory(Path(harvest), sc.n)
            harvests = h
            if args.horizon is None:
                horizon = float(t[-1])
            if steps is None:
                steps = len(t) - 1
    spec = simulate.SimSpec(horizon, steps, harvests)
    try:
        traj = simulate.integrate(sc, spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    header, rows = trajectory_rows(traj)
    outputs = [write_csv(out / "trajectory.csv", header, rows)]

    terminal = traj.stocks[:, -1]
    rates = [dynamics(i, sc, terminal, float(traj.harvests[i, -1])) for i in range(sc.n)]
    report = {
        "terminal_stocks": _floats(traj.stocks[:, -1]),
        "max_abs_rate": float(np.max(np.abs(rates))),
        "at_rest": bool(np.max(np.abs(rates)) < args.tol),
    }
    if harvests is None:
        ss = simulate.steady_state(sc, tol=args.tol)
        report["steady_state"] = {"stocks": _floats(ss.stocks), "converged": ss.converged, "years": ss.years}
    print("terminal stocks: " + ", ".join(FMT % v for v in traj.stocks[:, -1]))
    print(f"at rest (|dx/dt| < {args.tol:g}): {report['at_rest']}")
    if "steady_state" in report:
        s = report["steady_state"]
        print("steady state: " + ", ".join(FMT % v for v in s["stocks"])
              + f" (converged={s['converged']}, {s['years']:g} years)")
    write_manifest(out, "simulate", args.argv, digest, label, sc, started, outputs, report)
    return EXIT_OK


def history_rows(history):
    n = len(history[0].K) if history else 0
    header = ["iter"] + [f"K_{i + 1}" for i in range(n)] + ["objective"]
    return header, [[rec.iteration, *rec.K, rec.objective] for rec in history]


def cmd_optimize(args) -> int:
    started = _now()
    sc, digest, label = checked_scenario(args.scenario)
    sc = with_overrides(sc, args)
    out = Path(args.out)
    try:
        sol = ccd.solve(sc)
    except NonConvergenceError as exc:
        if exc.history:
            write_csv(out / "history.csv", *history_rows(exc.history))
        raise
    header, rows = trajectory_rows(sol.trajectory)
    outputs = [
        write_csv(out / "solution.csv", header, rows),
        write_csv(out / "history.csv", *history_rows(sol.history)),
    ]
    summary = {
        "revenue": sol.revenue,
        "K": _floats(sol.K),
        "outer_iterations": sol.outer_iters,
        "terminal_residuals": _floats(sol.residuals(sc)),
        "plateau": [bool(v) for v in sol.plateau],
    }
    write_manifest(out, "optimize", args.argv, digest, label, sc, started, outputs, summary)
    print(f"revenue: {sol.revenue:.6f}")
    print("K: " + ", ".join("%.7f" % k for k in sol.K))
    print(f"outer iterations: {sol.outer_iters}")
    return EXIT_OK


def _species(sc, key) -> int:
    try:
        return sc.index(key)
    except (KeyError, IndexError) as exc:
        raise UsageError(str(exc.args[0])) from None


def _sweep_scenario(sc, args):
    return sc.with_control_bounds(h_max=UNBOUNDED_HMAX) if args.unbounded_control else sc


def cmd_sweep_k(args) -> int:
    started = _now()
    sc, digest, label = checked_scenario(args.scenario)
    sc = with_overrides(sc, args)
    i = _species(sc, args.species)
    k_values = parse_list(args.k_grid)
    grid = Grid.for_scenario(sc)
    if args.companions:
        t, companions, _ = read_trajectory(Path(args.companions) / "solution.csv", sc.n)
        if len(t) != grid.n_nodes or not np.isclose(t[-1], sc.horizon):
            raise UsageError(
                f"companion grid has {len(t)} nodes up to t={t[-1]:g}; "
                f"scenario needs {grid.n_nodes} up to {sc.horizon:g}"
            )
    else:
        companions = ccd.solve(sc, grid).trajectory.stocks
    points = shooting.sweep_K(i, _sweep_scenario(sc, args), companions, grid, k_values, args.coupling)

    out = Path(args.out)
    outputs = [write_csv(out / "sweep.csv", ["K", "terminal_stock", "feasible"],
                         [[p.K, p.terminal, p.feasible] for p in points])]
    for m, p in enumerate(points):
        rows = [[t, x, h, int(f)] for t, x, h, f in zip(grid.times, p.path.stocks, p.path.harvests, p.path.flags)]
        outputs.append(write_csv(out / "paths" / f"path_{m:03d}.csv", ["t", "x", "h", "clamp"], rows))
    summary = {
        "species": sc.names[i],
        "K": k_values,
        "terminal_stock": [p.terminal for p in points],
        "feasible": [p.feasible for p in points],
    }
    write_manifest(out, "sweep-k", args.argv, digest, label, sc, started, outputs, summary)
    for p in points:
        print(f"{p.K:g}\t{FMT % p.terminal}" + ("" if p.feasible else f"\tinfeasible at node {p.failed_node}"))
    return EXIT_OK


def plateau_stock(i, sc, companions, grid, coupling, k_start=0.0, k_step=0.2, diff=1e-3, max_points=200):
    """Sweep K upward from ``k_start`` until two consecutive terminal stocks agree to ``diff``."""
    prev = None
    K = k_start
    for _ in range(max_points):
        point = shooting.sweep_K(i, sc, companions, grid, [K], coupling, workers=1)[0]
        if prev is not None and abs(point.terminal - prev) < diff:
            return K, point.terminal
        prev = point.terminal
        K = round(K + k_step, 12)
    raise NonConvergenceError(f"no plateau within {max_points} K steps from {k_start:g}")


def cmd_sweep_horizon(args) -> int:
    started = _now()
    sc, digest, label = checked_scenario(args.scenario)
    sc = with_overrides(sc, args)
    i = _species(sc, args.species)
    horizons = parse_list(args.horizons)
    if any(T <= 0 for T in horizons):
        raise UsageError("horizons must be > 0")

    def one(T):
        sc_T = sc.with_horizon(T)
        grid = Grid.for_scenario(sc_T)
        sol = ccd.solve(sc_T, grid)
        K, stock = plateau_stock(i, _sweep_scenario(sc_T, args), sol.trajectory.stocks, grid, args.coupling)
        return sol, K, stock

    workers = shooting.worker_count()
    if workers > 1 and len(horizons) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, horizons))
    else:
        results = [one(T) for T in horizons]

    out = Path(args.out)
    outputs = [write_csv(out / "horizons.csv", ["T", "max_terminal_stock"],
                         [[T, r[2]] for T, r in zip(horizons, results)])]
    summary = {
        "species": sc.names[i],
        "T": horizons,
        "max_terminal_stock": [r[2] for r in results],
        "plateau_K": [r[1] for r in results],
        "outer_iterations": [r[0].outer_iters for r in results],
        "revenue": [r[0].revenue for r in results],
    }
    write_manifest(out, "sweep-horizon", args.argv, digest, label, sc, started, outputs, summary)
    for T, r in zip(horizons, results):
        print(f"{T:g}\t{FMT % r[2]}")
    return EXIT_OK


# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="harvestopt", description="Optimal harvesting schedules for multi-species fisheries.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def scenario_arg(sp):
        sp.add_argument("scenario", help=f"scenario JSON file, or {BUILTIN_BASE} for the shipped base case")

    def solver_args(sp):
        sp.add_argument("--steps", type=int, help="grid steps N (overrides the scenario)")
        sp.add_argument("--max-outer-iters", type=int, help="cap on coordinate-ascent passes")

    sp = sub.add_parser("check", help="validate a scenario file")
    scenario_arg(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("simulate", help="forward run under a fixed harvest schedule")
    scenario_arg(sp)
    sp.add_argument("--horizon", type=float, help="years (default: scenario horizon)")
    sp.add_argument("--steps", type=int, help="Euler steps (default: 10 per year)")
    sp.add_argument("--harvest", default="none",
                    help="'none', a constant rate for every species, or a CSV with h_1..h_n columns")
    sp.add_argument("--tol", type=float, default=1e-6, help="rest threshold on |dx/dt| per year")
    sp.add_argument("--out", default="out", help="output directory")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("optimize", help="solve for the revenue-maximizing schedule")
    scenario_arg(sp)
    solver_args(sp)
    sp.add_argument("--out", default="out", help="output directory")
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("sweep-k", help="terminal stock of one species over a K grid")
    scenario_arg(sp)
    solver_args(sp)
    sp.add_argument("--species", required=True, help="species name or 1-based index")
    sp.add_argument("--k-grid", default=DEFAULT_K_GRID, help="comma list or start:stop:step (default %(default)s)")
    sp.add_argument("--companions", help="directory holding a solution.csv from 'optimize' (default: solve now)")
    sp.add_argument("--unbounded-control", action="store_true", help=f"raise every h_max to {UNBOUNDED_HMAX:g}")
    sp.add_argument("--coupling", choices=scn.COUPLINGS, default="own",
                    help="co-state integrand for the one-species problem (default %(default)s)")
    sp.add_argument("--out", default="out", help="output directory")
    sp.set_defaults(func=cmd_sweep_k)

    sp = sub.add_parser("sweep-horizon", help="plateau terminal stock of one species per horizon")
    scenario_arg(sp)
    solver_args(sp)
    sp.add_argument("--species", required=True, help="species name or 1-based index")
    sp.add_argument("--horizons", required=True, help="comma list or start:stop:step")
    sp.add_argument("--unbounded-control", action="store_true", help=f"raise every h_max to {UNBOUNDED_HMAX:g}")
    sp.add_argument("--coupling", choices=scn.COUPLINGS, default="own")
    sp.add_argument("--out", default="out", help="output directory")
    sp.set_defaults(func=cmd_sweep_horizon)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"harvestopt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ScenarioError as exc:
        print(f"harvestopt: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except _Invalid as exc:
        for v in exc.violations:
            print(f"harvestopt: invalid scenario: {v}", file=sys.stderr)
        return EXIT_INVALID
    except InfeasiblePathError as exc:
        print(f"harvestopt: integration failed: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    except InfeasibleTargetError as exc:
        print(f"harvestopt: infeasible target: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SolverError as exc:
        print(f"harvestopt: no convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
