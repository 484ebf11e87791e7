"""Command-line front end: single solves, algorithm comparisons, and sweeps.

Exit codes: 0 success, 1 case parse error, 2 infeasible model, 3 solver
failure with no plan.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .heuristics import (AlgoBudget, RadConfig, brute_force_optimal, rad, rrr,
                         util_order)
from .milp import ExternalBackendConfig, SolveOptions, solve_external, solve_mip
from .models import build_rop, evaluate_plan, extract_plan, plan_to_assignment
from .network import (CaseParseError, DamageScenario, Network, RestorationPlan,
                      build_schedule, parse_case, random_damage)
from .postprocess import RestorationReport, build_report

BACKEND_ENV = "GRIDRESTORE_BACKEND_CMD"
ALGORITHMS = ("util", "rrr", "rad", "rop", "oracle")

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_INFEASIBLE = 2
EXIT_SOLVER = 3


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    case: str
    algorithm: str
    damage_fraction: float | None = None
    damage_lines: tuple[int, ...] | None = None
    seed: int = 0
    time_limit: float = 300.0
    rel_gap: float = 0.01
    n_periods: int | None = None  # default: one period per damaged line
    output_dir: str = "."
    backend_cmd: str | None = None
    record_timing: bool = False
    parallel: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if (self.damage_fraction is None) == (self.damage_lines is None):
            raise ValueError("exactly one of damage_fraction or damage_lines required")


def _load_network(path: str) -> Network:
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise CliError(f"cannot read case file: {e}", EXIT_PARSE)
    try:
        return parse_case(text)
    except CaseParseError as e:
        raise CliError(f"parse error in {path}: {e}", EXIT_PARSE)


def _make_damage(network: Network, config: RunConfig) -> DamageScenario:
    if config.damage_lines is not None:
        dmg = DamageScenario(tuple(sorted(config.damage_lines)), seed=config.seed)
        try:
            dmg.validate(network)
        except ValueError as e:
            raise CliError(str(e), EXIT_PARSE)
        return dmg
    try:
        return random_damage(network, config.damage_fraction, config.seed)
    except ValueError as e:
        raise CliError(str(e), EXIT_PARSE)


def _mip_solver(config: RunConfig):
    cmd = config.backend_cmd or os.environ.get(BACKEND_ENV)
    if cmd:
        backend = ExternalBackendConfig(command_template=cmd)
        return lambda prog, opts: solve_external(prog, opts, backend)
    return solve_mip


def run_algorithm(network: Network, damage: DamageScenario,
                  config: RunConfig) -> tuple[RestorationPlan, object, float | None]:
    """Run the configured algorithm; returns (plan, schedule, gap or None)."""
    n = len(damage.damaged_lines)
    budget = AlgoBudget(time_limit=config.time_limit, rel_gap=config.rel_gap,
                        seed=config.seed)
    n_periods = config.n_periods or max(n, 1)
    schedule = build_schedule(n, n_periods)
    mip_solver = _mip_solver(config)

    def rop_solver(net, dmg, sched, opts):
        from .models import build_rop as _build
        art = _build(net, dmg, sched)
        return art, mip_solver(art.program, opts)

    if n == 0:
        return RestorationPlan.from_lists([[]]), build_schedule(0, 1), None
    if config.algorithm == "util":
        plan = util_order(network, damage)
        return plan, build_schedule(n, plan.n_periods), None
    if config.algorithm == "rrr":
        plan = rrr(network, damage, budget, rop_solver=rop_solver,
                   parallel=config.parallel)
        return plan, build_schedule(n, plan.n_periods), None
    if config.algorithm == "rad":
        plan = rad(network, damage, budget, rop_solver=rop_solver)
        return plan, build_schedule(n, plan.n_periods), None
    if config.algorithm == "oracle":
        try:
            plan, _ = brute_force_optimal(network, damage, schedule)
        except ValueError as e:
            raise CliError(str(e), EXIT_SOLVER)
        return plan, schedule, None
    # rop: warm-started ordering MILP
    art = build_rop(network, damage, schedule)
    warm = plan_to_assignment(art, util_order(network, damage))
    opts = SolveOptions(time_limit=config.time_limit, rel_gap=config.rel_gap,
                        warm_start=warm)
    sol = mip_solver(art.program, opts)
    if sol.status == "infeasible":
        raise CliError("restoration ordering model is infeasible", EXIT_INFEASIBLE)
    if not sol.has_incumbent:
        raise CliError("solver failed with no incumbent plan", EXIT_SOLVER)
    try:
        plan = extract_plan(art, sol)
    except ValueError as e:
        raise CliError(f"cannot extract plan: {e}", EXIT_SOLVER)
    return plan, schedule, sol.gap


def solve_to_report(config: RunConfig) -> tuple[RestorationReport, float | None, dict]:
    network = _load_network(config.case)
    damage = _make_damage(network, config)
    t0 = time.monotonic()
    plan, schedule, gap = run_algorithm(network, damage, config)
    try:
        series = evaluate_plan(network, damage, plan, schedule)
    except RuntimeError as e:
        raise CliError(f"plan evaluation failed: {e}", EXIT_INFEASIBLE)
    wall = time.monotonic() - t0
    report = build_report(network, damage, plan, series)
    report.algorithm = config.algorithm
    report.wall_time = wall if config.record_timing else None
    summary = {
        "algorithm": config.algorithm,
        "case": config.case,
        "seed": config.seed,
        "damaged_lines": sorted(damage.damaged_lines),
        "total_energy_pu": report.total_energy,
        "gap": gap,
        "wall_time_s": report.wall_time,
        "plan": [sorted(p) for p in report.plan.periods],
    }
    return report, gap, summary


def cmd_solve(config: RunConfig) -> int:
    report, _, summary = solve_to_report(config)
    os.makedirs(config.output_dir, exist_ok=True)
    _atomic_write(os.path.join(config.output_dir, "report.csv"), report.to_csv())
    _atomic_write(os.path.join(config.output_dir, "summary.json"),
                  json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_compare(base: RunConfig, algorithms: list[str]) -> int:
    if len(algorithms) < 2:
        raise CliError("compare needs at least 2 algorithms", EXIT_PARSE)
    rows = []
    for algo in algorithms:
        cfg = RunConfig(**{**base.__dict__, "algorithm": algo})
        try:
            report, gap, _ = solve_to_report(cfg)
            rows.append({"algorithm": algo, "energy": report.total_energy,
                         "time": report.wall_time, "gap": gap, "status": "ok"})
        except CliError as e:
            if e.code == EXIT_PARSE:
                raise
            rows.append({"algorithm": algo, "energy": None, "time": None,
                         "gap": None, "status": f"failed({e.code})"})
    best = max((r["energy"] for r in rows if r["energy"] is not None), default=None)
    for r in rows:
        r["best"] = r["energy"] is not None and best is not None and r["energy"] >= best - 1e-12
        r["within_1pct"] = (r["energy"] is not None and best is not None
                            and r["energy"] >= 0.99 * best - 1e-12)
    os.makedirs(base.output_dir, exist_ok=True)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["algorithm", "energy", "time", "gap",
                                        "status", "best", "within_1pct"])
    w.writeheader()
    for r in rows:
        w.writerow(r)
    _atomic_write(os.path.join(base.output_dir, "compare.csv"), buf.getvalue())
    print(f"{'algorithm':<10} {'energy':>14} {'time':>8} {'flags'}")
    for r in rows:
        e = "-" if r["energy"] is None else f"{r['energy']:.6f}"
        t = "-" if r["time"] is None else f"{r['time']:.2f}"
        flags = ("*" if r["best"] else "") + ("~" if r["within_1pct"] and not r["best"] else "")
        if r["status"] != "ok":
            flags = r["status"]
        print(f"{r['algorithm']:<10} {e:>14} {t:>8} {flags}")
    return EXIT_OK


def _cell_name(fraction: float, seed: int, algorithm: str) -> str:
    return f"cell_f{fraction:g}_s{seed}_{algorithm}.json"


def _run_cell(args) -> dict:
    base_dict, fraction, seed, algorithm = args
    cfg = RunConfig(**{**base_dict, "algorithm": algorithm,
                       "damage_fraction": fraction, "damage_lines": None,
                       "seed": seed})
    cell = {"case": cfg.case, "fraction": fraction, "seed": seed,
            "algorithm": algorithm}
    try:
        report, gap, _ = solve_to_report(cfg)
        cell.update(energy=report.total_energy, time=report.wall_time,
                    gap=gap, status="ok")
    except CliError as e:
        cell.update(energy=None, time=None, gap=None, status=f"failed({e.code})")
    return cell


def cmd_sweep(base: RunConfig, fractions: list[float], seeds: list[int],
              algorithms: list[str], workers: int | None = None) -> int:
    if not fractions or not seeds or not algorithms:
        raise CliError("sweep needs nonempty fractions, seeds and algorithms",
                       EXIT_PARSE)
    _load_network(base.case)  # fail fast on parse errors
    cell_dir = os.path.join(base.output_dir, "cells")
    os.makedirs(cell_dir, exist_ok=True)
    grid = [(f, s, a) for f in fractions for s in seeds for a in algorithms]
    pending = []
    for f, s, a in grid:
        if not os.path.exists(os.path.join(cell_dir, _cell_name(f, s, a))):
            pending.append((base.__dict__, f, s, a))
    if pending:
        workers = workers or os.cpu_count() or 1
        if workers > 1 and len(pending) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_run_cell, pending))
        else:
            results = [_run_cell(p) for p in pending]
        for cell in results:
            path = os.path.join(cell_dir, _cell_name(cell["fraction"], cell["seed"],
                                                     cell["algorithm"]))
            _atomic_write(path, json.dumps(cell, sort_keys=True) + "\n")
    rows = []
    for f, s, a in grid:
        with open(os.path.join(cell_dir, _cell_name(f, s, a))) as fh:
            rows.append(json.load(fh))
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["case", "fraction", "seed", "algorithm",
                                        "energy", "time", "gap"],
                       extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    _atomic_write(os.path.join(base.output_dir, "sweep.csv"), buf.getvalue())
    print(f"sweep complete: {len(rows)} cells ({len(pending)} computed, "
          f"{len(rows) - len(pending)} cached)")
    return EXIT_OK


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as f:
        f.write(text)
    os.replace(tmp, path)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--case", required=True, help="MATPOWER-subset case file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--time-limit", type=float, default=300.0)
    p.add_argument("--rel-gap", type=float, default=0.01)
    p.add_argument("--n-periods", type=int, default=None,
                   help="restoration periods (default: one per damaged line)")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--backend-cmd", default=None,
                   help=f"external solver command template (or ${BACKEND_ENV})")
    p.add_argument("--record-timing", action="store_true",
                   help="include wall time in outputs (off by default so "
                        "repeated runs are byte-identical)")
    p.add_argument("--parallel", action="store_true",
                   help="run independent recursive halves concurrently")


def _add_damage(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--damage-fraction", type=float, default=None)
    g.add_argument("--damage-lines", type=int, nargs="+", default=None)


def _base_config(args, algorithm: str) -> RunConfig:
    # sweep has no per-run damage flags; cells fill in their own fractions
    return RunConfig(
        case=args.case, algorithm=algorithm,
        damage_fraction=getattr(args, "damage_fraction", None)
        if hasattr(args, "damage_fraction") else 1.0,
        damage_lines=tuple(args.damage_lines) if getattr(args, "damage_lines", None) else None,
        seed=args.seed, time_limit=args.time_limit, rel_gap=args.rel_gap,
        n_periods=args.n_periods, output_dir=args.out,
        backend_cmd=args.backend_cmd, record_timing=args.record_timing,
        parallel=args.parallel)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridrestore",
                                     description="Transmission grid restoration "
                                                 "prioritization toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one algorithm on one scenario")
    _add_common(p)
    _add_damage(p)
    p.add_argument("--algo", required=True, choices=ALGORITHMS)

    p = sub.add_parser("compare", help="run several algorithms on one scenario")
    _add_common(p)
    _add_damage(p)
    p.add_argument("--algos", required=True, nargs="+", choices=ALGORITHMS)

    p = sub.add_parser("sweep", help="full factorial fraction x seed x algorithm")
    _add_common(p)
    p.add_argument("--fractions", required=True, type=float, nargs="+")
    p.add_argument("--seeds", required=True, type=int, nargs="+")
    p.add_argument("--algos", required=True, nargs="+", choices=ALGORITHMS)
    p.add_argument("--workers", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            return cmd_solve(_base_config(args, args.algo))
        if args.command == "compare":
            return cmd_compare(_base_config(args, args.algos[0]), args.algos)
        if args.command == "sweep":
            base = _base_config(args, args.algos[0])
            return cmd_sweep(base, args.fractions, args.seeds, args.algos,
                             args.workers)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
