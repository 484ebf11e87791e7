import os
import random

import numpy as np
import pytest

from gridrestore.lp import INF, LinearProgram, mps_column_name, solve_lp
from gridrestore.milp import (ExternalBackendConfig, MixedIntegerProgram,
                              SolveOptions, enumerate_binaries,
                              parse_solution_file, solve_external, solve_mip)


def random_mip(seed, max_binaries=12):
    """Random MILP: knapsack-like rows over binaries plus continuous vars."""
    rng = random.Random(seed)
    nb = rng.randint(2, max_binaries)
    nc = rng.randint(0, 3)
    lp = LinearProgram()
    for j in range(nb):
        lp.add_variable(f"z{j}", 0.0, 1.0)
    for j in range(nc):
        lp.add_variable(f"y{j}", 0.0, rng.uniform(1, 5))
    n = nb + nc
    for i in range(rng.randint(1, 4)):
        terms = [(j, rng.uniform(-2, 4)) for j in
                 rng.sample(range(n), rng.randint(1, min(n, 4)))]
        lp.add_constraint(f"c{i}", terms, rng.choice(["<=", "<=", ">="]),
                          rng.uniform(0, 6))
    lp.set_objective("maximize", [(j, rng.uniform(-1, 3)) for j in range(n)])
    return MixedIntegerProgram(base=lp, binary_vars=frozenset(range(nb)))


class TestBranchAndBound:
    @pytest.mark.parametrize("seed", range(20))
    def test_matches_enumeration(self, seed):
        mip = random_mip(seed)
        best, _ = enumerate_binaries(mip)
        sol = solve_mip(mip, SolveOptions(time_limit=60, rel_gap=0.0))
        if best is None:
            assert sol.status == "infeasible"
        else:
            assert sol.status == "optimal_within_gap"
            assert sol.objective_value == pytest.approx(best, abs=1e-6, rel=1e-6)
            assert mip.base.constraint_violation(sol.primal) <= 1e-6
            for j in mip.binary_vars:
                assert abs(sol.primal[j] - round(sol.primal[j])) <= 1e-6

    def test_all_binaries_fixed_is_lp(self):
        lp = LinearProgram()
        lp.add_variable("z", 1.0, 1.0)
        lp.add_variable("y", 0.0, 5.0)
        lp.add_constraint("c", [(0, 2.0), (1, 1.0)], "<=", 4.0)
        lp.set_objective("maximize", [(1, 1.0)])
        mip = MixedIntegerProgram(base=lp, binary_vars=frozenset({0}))
        sol = solve_mip(mip, SolveOptions(time_limit=10, rel_gap=0.0))
        assert sol.status == "optimal_within_gap"
        assert sol.objective_value == pytest.approx(2.0)

    def test_gap_invariant(self):
        for seed in range(10):
            mip = random_mip(seed + 300)
            sol = solve_mip(mip, SolveOptions(time_limit=30, rel_gap=0.01))
            if sol.status == "optimal_within_gap":
                assert sol.gap <= 0.01 + 1e-12

    @staticmethod
    def _feasible_seed(start):
        for seed in range(start, start + 50):
            mip = random_mip(seed)
            best, assign = enumerate_binaries(mip)
            if best is not None:
                return mip, best, assign
        raise AssertionError("no feasible instance found")

    def test_warm_start_feasible(self):
        mip, best, assign = self._feasible_seed(4)
        sol = solve_mip(mip, SolveOptions(time_limit=30, rel_gap=0.0,
                                          warm_start=assign))
        assert sol.status == "optimal_within_gap"
        assert sol.objective_value == pytest.approx(best, abs=1e-6, rel=1e-6)

    def test_infeasible_warm_start_discarded(self):
        lp = LinearProgram()
        lp.add_variable("z0", 0.0, 1.0)
        lp.add_variable("z1", 0.0, 1.0)
        lp.add_constraint("c", [(0, 1.0), (1, 1.0)], "=", 1.0)
        lp.set_objective("maximize", [(0, 2.0), (1, 1.0)])
        mip = MixedIntegerProgram(base=lp, binary_vars=frozenset({0, 1}))
        sol = solve_mip(mip, SolveOptions(time_limit=10, rel_gap=0.0,
                                          warm_start={0: 1, 1: 1}))
        assert sol.status == "optimal_within_gap"
        assert sol.objective_value == pytest.approx(2.0)
        assert sol.assignment == {0: 1, 1: 0}

    def test_infeasible_instance(self):
        lp = LinearProgram()
        lp.add_variable("z", 0.0, 1.0)
        lp.add_constraint("c", [(0, 1.0)], ">=", 2.0)
        lp.set_objective("maximize", [(0, 1.0)])
        mip = MixedIntegerProgram(base=lp, binary_vars=frozenset({0}))
        sol = solve_mip(mip, SolveOptions(time_limit=10))
        assert sol.status == "infeasible"
        assert not sol.has_incumbent

    def test_binary_bound_validation(self):
        lp = LinearProgram()
        lp.add_variable("z", 0.0, 2.0)
        with pytest.raises(ValueError, match="bounds outside"):
            MixedIntegerProgram(base=lp, binary_vars=frozenset({0}))

    def test_determinism(self):
        mip, _, _ = self._feasible_seed(11)
        opts = SolveOptions(time_limit=30, rel_gap=0.0)
        a = solve_mip(mip, opts)
        b = solve_mip(mip, opts)
        assert a.assignment == b.assignment
        assert a.nodes == b.nodes
        assert a.objective_value == b.objective_value


class TestSolutionFileParsing:
    def test_basic(self):
        obj, vals = parse_solution_file(
            "# comment\nobjective 4.5\nX0000001 1\nX0000002 0.25\n")
        assert obj == 4.5
        assert vals == {"X0000001": 1.0, "X0000002": 0.25}

    def test_malformed_line(self):
        with pytest.raises(ValueError, match="malformed"):
            parse_solution_file("X0000001 1 extra\n")


@pytest.fixture
def simple_binary_mip():
    lp = LinearProgram()
    lp.add_variable("z0", 0.0, 1.0)
    lp.add_variable("z1", 0.0, 1.0)
    lp.add_constraint("c", [(0, 1.0), (1, 1.0)], "<=", 1.0)
    lp.set_objective("maximize", [(0, 3.0), (1, 2.0)])
    return MixedIntegerProgram(base=lp, binary_vars=frozenset({0, 1}))


class TestExternalBackend:
    def test_echo_fixture(self, simple_binary_mip, tmp_path):
        prepared = tmp_path / "ready.sol"
        prepared.write_text(f"objective 3\n{mps_column_name(0)} 1\n"
                            f"{mps_column_name(1)} 0\n")
        backend = ExternalBackendConfig(command_template=f"cp {prepared} {{solfile}}")
        sol = solve_external(simple_binary_mip, SolveOptions(time_limit=10), backend)
        assert sol.status == "optimal_within_gap"
        assert sol.assignment == {0: 1, 1: 0}
        assert sol.objective_value == pytest.approx(3.0)

    def test_nonzero_exit(self, simple_binary_mip):
        backend = ExternalBackendConfig(command_template="false {mps} {solfile}")
        sol = solve_external(simple_binary_mip, SolveOptions(time_limit=10), backend)
        assert sol.status == "failure"

    def test_missing_solution_file(self, simple_binary_mip):
        backend = ExternalBackendConfig(command_template="true {mps} {solfile}")
        sol = solve_external(simple_binary_mip, SolveOptions(time_limit=10), backend)
        assert sol.status == "failure"

    def test_unparseable_solution(self, simple_binary_mip, tmp_path):
        prepared = tmp_path / "junk.sol"
        prepared.write_text("garbage line with words\n")
        backend = ExternalBackendConfig(command_template=f"cp {prepared} {{solfile}}")
        sol = solve_external(simple_binary_mip, SolveOptions(time_limit=10), backend)
        assert sol.status == "failure"

    def test_infeasible_solution_rejected(self, simple_binary_mip, tmp_path):
        prepared = tmp_path / "bad.sol"
        prepared.write_text(f"{mps_column_name(0)} 1\n{mps_column_name(1)} 1\n")
        backend = ExternalBackendConfig(command_template=f"cp {prepared} {{solfile}}")
        sol = solve_external(simple_binary_mip, SolveOptions(time_limit=10), backend)
        assert sol.status == "failure"

    def test_fractional_binary_rejected(self, simple_binary_mip, tmp_path):
        prepared = tmp_path / "frac.sol"
        prepared.write_text(f"{mps_column_name(0)} 0.4\n")
        backend = ExternalBackendConfig(command_template=f"cp {prepared} {{solfile}}")
        sol = solve_external(simple_binary_mip, SolveOptions(time_limit=10), backend)
        assert sol.status == "failure"
