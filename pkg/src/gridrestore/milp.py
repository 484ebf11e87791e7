"""Branch-and-bound MILP solver over the internal LP core.

Node selection is best bound, branching is most-fractional with lowest
variable index as the tie-break, so the search is fully deterministic.
An optional external backend drives a command-line solver through MPS
and a simple solution-file format.
"""
from __future__ import annotations

import heapq
import os
import shlex
import subprocess
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from .lp import LinearProgram, LpSolution, Variable, mps_column_name, solve_lp, write_mps

INT_TOL = 1e-6


@dataclass
class MixedIntegerProgram:
    base: LinearProgram
    binary_vars: frozenset[int] = frozenset()

    def __post_init__(self):
        self.binary_vars = frozenset(self.binary_vars)
        for j in self.binary_vars:
            v = self.base.variables[j]
            if v.lower < -INT_TOL or v.upper > 1 + INT_TOL:
                raise ValueError(f"binary variable {v.name} has bounds outside [0, 1]")


@dataclass
class SolveOptions:
    time_limit: float = 60.0
    rel_gap: float = 0.01
    warm_start: dict[int, int] | None = None  # full binary assignment
    iteration_limit: int = 50000

    def __post_init__(self):
        if self.time_limit <= 0:
            raise ValueError("time_limit must be positive")
        if not 0 <= self.rel_gap < 1:
            raise ValueError("rel_gap must be in [0, 1)")


@dataclass
class MipSolution:
    status: str  # 'optimal_within_gap', 'feasible_time_limit', 'infeasible', 'failure'
    objective_value: float = float("nan")
    best_bound: float = float("nan")
    gap: float = float("nan")
    assignment: dict[int, int] = field(default_factory=dict)
    primal: np.ndarray | None = None
    elapsed: float = 0.0
    nodes: int = 0

    @property
    def has_incumbent(self) -> bool:
        return self.status in ("optimal_within_gap", "feasible_time_limit")


def _relative_gap(incumbent: float, bound: float) -> float:
    return abs(bound - incumbent) / max(abs(incumbent), 1e-10)


def _solve_with_bounds(mip: MixedIntegerProgram, fixes: dict[int, tuple[float, float]],
                       iteration_limit: int) -> LpSolution:
    lp = mip.base
    if fixes:
        patched = LinearProgram(
            variables=list(lp.variables),
            constraints=lp.constraints,
            objective_sense=lp.objective_sense,
            objective_terms=lp.objective_terms,
        )
        for j, (lo, hi) in fixes.items():
            v = lp.variables[j]
            patched.variables[j] = Variable(v.name, lo, hi)
        lp = patched
    return solve_lp(lp, iteration_limit)


def solve_mip(mip: MixedIntegerProgram, opts: SolveOptions) -> MipSolution:
    """Best-bound branch and bound with LP relaxations per node.

    The warm start, if feasible, becomes the initial incumbent. The time
    limit is checked between node solves only, so the overshoot is at
    most one LP solve. A time limit with no incumbent yields 'failure'.
    """
    mip.base.validate()
    start = time.monotonic()
    sense_max = mip.base.objective_sense == "maximize"
    better = (lambda a, b: a > b) if sense_max else (lambda a, b: a < b)
    binaries = sorted(mip.binary_vars)

    incumbent_obj = None
    incumbent_x = None
    nodes_solved = 0

    if opts.warm_start is not None:
        fixes = {j: (float(v), float(v)) for j, v in opts.warm_start.items() if j in mip.binary_vars}
        if len(fixes) == len(binaries):
            sol = _solve_with_bounds(mip, fixes, opts.iteration_limit)
            nodes_solved += 1
            if sol.status == "optimal":
                incumbent_obj = sol.objective_value
                incumbent_x = sol.primal
        # an infeasible or partial warm start is silently discarded

    # heap of (priority, tiebreak, fixes); priority = -bound for max
    counter = 0
    heap: list = []
    root = _solve_with_bounds(mip, {}, opts.iteration_limit)
    nodes_solved += 1
    if root.status == "infeasible":
        return MipSolution(status="infeasible", elapsed=time.monotonic() - start,
                           nodes=nodes_solved)
    if root.status == "unbounded":
        return MipSolution(status="failure", elapsed=time.monotonic() - start,
                           nodes=nodes_solved)
    if root.status != "optimal":
        return _timeout_result(mip, incumbent_obj, incumbent_x, None, start, nodes_solved)

    heapq.heappush(heap, ((-root.objective_value if sense_max else root.objective_value),
                          counter, {}, root))
    counter += 1

    def current_bound():
        vals = [(-h[0] if sense_max else h[0]) for h in heap]
        if incumbent_obj is not None:
            vals.append(incumbent_obj)
        if sense_max:
            return max(vals) if vals else float("-inf")
        return min(vals) if vals else float("inf")

    abs_tol = 1e-9

    while heap:
        if time.monotonic() - start > opts.time_limit:
            return _timeout_result(mip, incumbent_obj, incumbent_x, current_bound(),
                                   start, nodes_solved)
        _, _, fixes, relax = heapq.heappop(heap)
        bound = relax.objective_value
        if incumbent_obj is not None:
            slack = max(opts.rel_gap * abs(incumbent_obj), abs_tol)
            if (sense_max and bound <= incumbent_obj + slack) or \
               (not sense_max and bound >= incumbent_obj - slack):
                continue  # cannot improve enough
        # choose the most fractional binary
        frac_j = -1
        frac_best = -1.0
        for j in binaries:
            v = relax.primal[j]
            f = min(abs(v - round(v)), 0.5)
            if f > INT_TOL and f > frac_best + 1e-12:
                frac_best = f
                frac_j = j
        if frac_j < 0:
            # integral: candidate incumbent
            if incumbent_obj is None or better(bound, incumbent_obj):
                incumbent_obj = bound
                incumbent_x = relax.primal
            continue
        for branch_val in (0.0, 1.0):
            child_fixes = dict(fixes)
            child_fixes[frac_j] = (branch_val, branch_val)
            child = _solve_with_bounds(mip, child_fixes, opts.iteration_limit)
            nodes_solved += 1
            if child.status != "optimal":
                continue  # infeasible (or pathological) child is pruned
            heapq.heappush(heap, ((-child.objective_value if sense_max else child.objective_value),
                                  counter, child_fixes, child))
            counter += 1
        if incumbent_obj is not None:
            bnd = current_bound()
            if _relative_gap(incumbent_obj, bnd) <= opts.rel_gap:
                return _final_result(mip, incumbent_obj, incumbent_x, bnd, start,
                                     nodes_solved, "optimal_within_gap")

    if incumbent_obj is None:
        return MipSolution(status="infeasible", elapsed=time.monotonic() - start,
                           nodes=nodes_solved)
    return _final_result(mip, incumbent_obj, incumbent_x, incumbent_obj, start,
                         nodes_solved, "optimal_within_gap")


def _assignment_from(mip: MixedIntegerProgram, x: np.ndarray) -> dict[int, int]:
    return {j: int(round(x[j])) for j in sorted(mip.binary_vars)}


def _final_result(mip, obj, x, bound, start, nodes, status) -> MipSolution:
    return MipSolution(status=status, objective_value=obj, best_bound=bound,
                       gap=_relative_gap(obj, bound), assignment=_assignment_from(mip, x),
                       primal=x, elapsed=time.monotonic() - start, nodes=nodes)


def _timeout_result(mip, obj, x, bound, start, nodes) -> MipSolution:
    if obj is None:
        return MipSolution(status="failure", elapsed=time.monotonic() - start, nodes=nodes)
    if bound is None:
        bound = obj
    return _final_result(mip, obj, x, bound, start, nodes, "feasible_time_limit")


# ---------------------------------------------------------------------------
# External solver backend
# ---------------------------------------------------------------------------

@dataclass
class ExternalBackendConfig:
    """Command template with {mps}, {timelimit}, {gap}, {solfile} placeholders.

    The solution file must contain one ``name value`` pair per line using
    the generated MPS column names (X0000001, ...), plus a line
    ``objective <value>``. Lines starting with ``#`` are ignored.
    """

    command_template: str


def parse_solution_file(text: str) -> tuple[float | None, dict[str, float]]:
    objective = None
    values: dict[str, float] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"malformed solution line: {raw!r}")
        name, val = parts
        if name.lower() == "objective":
            objective = float(val)
        else:
            values[name] = float(val)
    return objective, values


def solve_external(mip: MixedIntegerProgram, opts: SolveOptions,
                   backend: ExternalBackendConfig) -> MipSolution:
    """Solve via an external command; any failure maps to status 'failure'."""
    mip.base.validate()
    start = time.monotonic()
    mps_text = write_mps(mip)
    with tempfile.TemporaryDirectory(prefix="gridrestore_") as tmp:
        mps_path = os.path.join(tmp, "model.mps")
        sol_path = os.path.join(tmp, "model.sol")
        with open(mps_path, "w") as f:
            f.write(mps_text)
        cmd = backend.command_template.format(mps=mps_path, timelimit=opts.time_limit,
                                              gap=opts.rel_gap, solfile=sol_path)
        try:
            proc = subprocess.run(shlex.split(cmd), capture_output=True,
                                  timeout=opts.time_limit + 30)
        except (OSError, subprocess.TimeoutExpired, ValueError):
            return MipSolution(status="failure", elapsed=time.monotonic() - start)
        if proc.returncode != 0 or not os.path.exists(sol_path):
            return MipSolution(status="failure", elapsed=time.monotonic() - start)
        try:
            with open(sol_path) as f:
                _, values = parse_solution_file(f.read())
        except (OSError, ValueError):
            return MipSolution(status="failure", elapsed=time.monotonic() - start)
    n = len(mip.base.variables)
    x = np.zeros(n)
    for j in range(n):
        name = mps_column_name(j)
        if name in values:
            x[j] = values[name]
    for j in mip.binary_vars:
        if abs(x[j] - round(x[j])) > INT_TOL:
            return MipSolution(status="failure", elapsed=time.monotonic() - start)
    if mip.base.constraint_violation(x) > 1e-5:
        return MipSolution(status="failure", elapsed=time.monotonic() - start)
    obj = mip.base.objective_value(x)
    return MipSolution(status="optimal_within_gap", objective_value=obj, best_bound=obj,
                       gap=0.0, assignment=_assignment_from(mip, x), primal=x,
                       elapsed=time.monotonic() - start)


def enumerate_binaries(mip: MixedIntegerProgram, iteration_limit: int = 50000):
    """Exhaustive oracle: best objective over all full binary assignments.

    Returns (objective, assignment) or (None, None) if infeasible. Only
    usable for small binary counts; intended for verification.
    """
    binaries = sorted(mip.binary_vars)
    if len(binaries) > 20:
        raise ValueError("too many binaries to enumerate")
    sense_max = mip.base.objective_sense == "maximize"
    best = None
    best_assign = None
    for mask in range(1 << len(binaries)):
        fixes = {j: (float((mask >> i) & 1), float((mask >> i) & 1))
                 for i, j in enumerate(binaries)}
        sol = _solve_with_bounds(mip, fixes, iteration_limit)
        if sol.status != "optimal":
            continue
        if best is None or (sol.objective_value > best if sense_max else sol.objective_value < best):
            best = sol.objective_value
            best_assign = {j: int(fixes[j][0]) for j in binaries}
    return best, best_assign
