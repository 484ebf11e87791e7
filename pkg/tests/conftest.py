import os
import random

import pytest

from gridrestore.network import (Bus, DamageScenario, Generator, Line, Load,
                                 Network)

CASES_DIR = os.path.join(os.path.dirname(__file__), "cases")


def tiny3_network() -> Network:
    """3-bus reference grid: one generator, two loads, a triangle of lines."""
    return Network(
        buses=(Bus(1), Bus(2), Bus(3)),
        lines=(Line(1, 1, 2, -10.0, 1.5), Line(2, 1, 3, -5.0, 1.0),
               Line(3, 2, 3, -8.0, 1.2)),
        generators=(Generator(1, 1, 2.0),),
        loads=(Load(1, 2, 0.8), Load(2, 3, 0.6)),
    )


def random_network(seed: int, n_buses: int | None = None,
                   n_lines: int | None = None) -> Network:
    """Random connected test grid with valid on/off flow relaxations.

    Topology is a random spanning tree plus identical parallel duplicates
    of tree edges. On such grids the dispatch LP reduces to a capacitated
    tree flow, so energizing more lines never reduces deliverable power:
    restoring all lines is always at least as good as any partial state.
    Loop-induced congestion effects (where an added line can hurt) cannot
    occur, which keeps exhaustive plan enumeration a true optimum oracle.
    Reactances stay in [0.05, 0.3] and each thermal limit is kept below
    |b| * angle_diff_max, so disabling a line's flow equation can never
    force its flow bound to bind spuriously.
    """
    rng = random.Random(seed)
    nb = n_buses if n_buses is not None else rng.randint(4, 8)
    nl = n_lines if n_lines is not None else rng.randint(max(5, nb - 1), 10)
    nl = max(nl, nb - 1)
    tree = []
    for i in range(2, nb + 1):
        fb = rng.randint(1, i - 1)
        x = rng.uniform(0.05, 0.3)
        susceptance = -1.0 / x
        cap = min(1.5, 0.9 * abs(susceptance) * 0.5236)
        tree.append((fb, i, susceptance, round(rng.uniform(0.3, cap), 4)))
    lines = [Line(i + 1, *edge) for i, edge in enumerate(tree)]
    while len(lines) < nl:
        fb, tb, susceptance, limit = tree[rng.randrange(len(tree))]
        lines.append(Line(len(lines) + 1, fb, tb, susceptance, limit))
    gens = []
    for gid, bus in enumerate(rng.sample(range(1, nb + 1), rng.randint(1, 3)),
                              start=1):
        gens.append(Generator(gid, bus, round(rng.uniform(0.5, 1.5), 4)))
    loads = []
    load_buses = rng.sample(range(1, nb + 1), max(2, nb // 2))
    for did, bus in enumerate(load_buses, start=1):
        loads.append(Load(did, bus, round(rng.uniform(0.2, 0.8), 4)))
    return Network(buses=tuple(Bus(i) for i in range(1, nb + 1)),
                   lines=tuple(lines), generators=tuple(gens),
                   loads=tuple(loads))


def random_scenario(seed: int, n_damaged_range=(3, 5)):
    """(network, damage) pair for oracle-vs-solver comparisons."""
    net = random_network(seed)
    rng = random.Random(seed + 10_000)
    k = min(rng.randint(*n_damaged_range), len(net.lines))
    damaged = tuple(sorted(rng.sample([l.id for l in net.lines], k)))
    return net, DamageScenario(damaged, seed=seed)


@pytest.fixture
def tiny3():
    return tiny3_network()


@pytest.fixture
def tiny3_case_path():
    return os.path.join(CASES_DIR, "tiny3.m")
