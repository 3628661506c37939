"""Named worst-case instances and seeded random instance generators.

The two fixed small markets (the 3x3 best-response cycle and the running
example with one blocking edge) load from bundled files so their rank
labels exist in exactly one place.  The parametric families reproduce the
value-dependence worst cases: the 2x2 cyclic markets whose two-phase runs
take time proportional to the capacity bound N, and the 2x2 market whose
unique best-response path has length 2N.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources

from .core import Allocation, Instance, build_instance
from .fileio import parse_instance

KINDS = (
    "fig1_cycle",
    "fig2_example",
    "fig5_left",
    "fig5_right",
    "exp_best",
    "random_general",
    "random_correlated",
)


@dataclass(frozen=True)
class GeneratorSpec:
    """A named instance family plus its parameters."""

    kind: str
    n: int = 1
    jobs: int = 4
    machines: int = 4
    density: float = 0.5
    max_quota: int = 3
    max_capacity: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not 0 < self.density <= 1:
            raise ValueError("density must be in (0, 1]")
        if self.jobs < 0 or self.machines < 0:
            raise ValueError("vertex counts must be nonnegative")
        if self.max_quota < 0 or self.max_capacity < 0:
            raise ValueError("value bounds must be nonnegative")


def generate(spec: GeneratorSpec) -> tuple[Instance, Allocation]:
    if spec.kind == "fig1_cycle":
        return fig1_cycle()
    if spec.kind == "fig2_example":
        return fig2_example()
    if spec.kind == "fig5_left":
        return fig5_left(spec.n)
    if spec.kind == "fig5_right":
        return fig5_right(spec.n)
    if spec.kind == "exp_best":
        return exp_best(spec.n)
    args = (spec.jobs, spec.machines, spec.density, spec.max_quota, spec.max_capacity, spec.seed)
    if spec.kind == "random_general":
        return random_general(*args)
    return random_correlated(*args)


def _load_bundled(name: str) -> tuple[Instance, Allocation]:
    text = resources.files("stablealloc.data").joinpath(name).read_text(encoding="utf-8")
    instance, x = parse_instance(text)
    assert x is not None
    return instance, x


def fig1_cycle() -> tuple[Instance, Allocation]:
    """3x3 unit market admitting a 6-step best-response cycle."""
    return _load_bundled("fig1_cycle.alloc")


def fig2_example() -> tuple[Instance, Allocation]:
    """The running example: one blocking edge, fractional quotas."""
    return _load_bundled("fig2_example.alloc")


def fig5_left(n: int) -> tuple[Instance, Allocation]:
    """2x2 cyclic market where phase one shifts value 1 around a cycle
    about N times; the accelerated algorithm clears it in one round."""
    cap = Fraction(n)
    instance = build_instance(
        jobs=[("j1", Fraction(n)), ("j2", Fraction(n))],
        machines=[("m1", Fraction(n)), ("m2", Fraction(n + 1))],
        edges=[
            ("j1", "m2", cap, 1, 2),
            ("j1", "m1", cap, 2, 1),
            ("j2", "m1", cap, 1, 2),
            ("j2", "m2", cap, 2, 1),
        ],
    )
    x = Allocation.from_pairs(instance, {("j1", "m1"): cap, ("j2", "m2"): cap})
    return instance, x


def fig5_right(n: int) -> tuple[Instance, Allocation]:
    """2x2 cyclic market whose phase two takes about N iterations from
    the empty allocation."""
    cap = Fraction(n)
    instance = build_instance(
        jobs=[("j1", Fraction(n + 1)), ("j2", Fraction(n))],
        machines=[("m1", Fraction(n)), ("m2", Fraction(n))],
        edges=[
            ("j1", "m2", cap, 1, 2),
            ("j1", "m1", cap, 2, 1),
            ("j2", "m1", cap, 1, 2),
            ("j2", "m2", cap, 2, 1),
        ],
    )
    return instance, Allocation.zero(instance)


def exp_best(n: int) -> tuple[Instance, Allocation]:
    """Complete 2x2 market whose unique best-response path has 2N steps.

    Each job starts saturated on its own top edge while each machine
    prefers the other job; capacities are N+1 so they never bind.
    """
    cap = Fraction(n + 1)
    instance = build_instance(
        jobs=[("j1", Fraction(n + 1)), ("j2", Fraction(n))],
        machines=[("m1", Fraction(n)), ("m2", Fraction(n))],
        edges=[
            ("j1", "m1", cap, 1, 2),
            ("j1", "m2", cap, 2, 1),
            ("j2", "m2", cap, 1, 2),
            ("j2", "m1", cap, 2, 1),
        ],
    )
    x = Allocation.from_pairs(
        instance, {("j1", "m1"): Fraction(n), ("j2", "m2"): Fraction(n)}
    )
    return instance, x


def _random_fraction(rng: random.Random, bound: int) -> Fraction:
    den = rng.randint(1, 4)
    return Fraction(rng.randint(0, bound * den), den)


def _random_frame(
    rng: random.Random, jobs: int, machines: int, density: float, max_quota: int
) -> tuple[list[tuple[str, Fraction]], list[tuple[str, Fraction]], list[tuple[int, int]]]:
    job_rows = [(f"j{i + 1}", _random_fraction(rng, max_quota)) for i in range(jobs)]
    machine_rows = [(f"m{i + 1}", _random_fraction(rng, max_quota)) for i in range(machines)]
    pairs = [(j, m) for j in range(jobs) for m in range(machines) if rng.random() < density]
    return job_rows, machine_rows, pairs


def _random_initial(instance: Instance, rng: random.Random) -> Allocation:
    """A feasible allocation: fill a random subset of edges greedily."""
    x = Allocation.zero(instance)
    order = list(range(instance.n_edges))
    rng.shuffle(order)
    for e in order:
        if rng.random() < 0.5:
            continue
        j = instance.edge_job[e]
        m = instance.edge_machine[e]
        room = min(
            instance.capacity[e],
            instance.job_quota[j] - x.job_total(j),
            instance.machine_quota[m] - x.machine_total(m),
        )
        if room <= 0:
            continue
        den = rng.randint(1, 4)
        cap = int(room * den)
        amount = Fraction(rng.randint(0, cap), den)
        x.add(e, min(amount, room))
    return x


def random_general(
    jobs: int,
    machines: int,
    density: float,
    max_quota: int,
    max_capacity: int,
    seed: int,
) -> tuple[Instance, Allocation]:
    """Random rational market: independent edge draws, shuffled
    preference lists, random feasible starting allocation."""
    rng = random.Random(seed)
    job_rows, machine_rows, pairs = _random_frame(rng, jobs, machines, density, max_quota)
    ranks_job: dict[int, int] = {}
    ranks_machine: dict[int, int] = {}
    for j in range(jobs):
        incident = [i for i, (pj, _) in enumerate(pairs) if pj == j]
        rng.shuffle(incident)
        for r, i in enumerate(incident, start=1):
            ranks_job[i] = r
    for m in range(machines):
        incident = [i for i, (_, pm) in enumerate(pairs) if pm == m]
        rng.shuffle(incident)
        for r, i in enumerate(incident, start=1):
            ranks_machine[i] = r
    edges = [
        (
            job_rows[j][0],
            machine_rows[m][0],
            _random_fraction(rng, max_capacity),
            ranks_job[i],
            ranks_machine[i],
        )
        for i, (j, m) in enumerate(pairs)
    ]
    instance = build_instance(job_rows, machine_rows, edges)
    return instance, _random_initial(instance, rng)


def random_correlated(
    jobs: int,
    machines: int,
    density: float,
    max_quota: int,
    max_capacity: int,
    seed: int,
) -> tuple[Instance, Allocation]:
    """Random correlated market: a global edge order is drawn first and
    every preference list is read off it, so no preference cycle exists."""
    rng = random.Random(seed)
    job_rows, machine_rows, pairs = _random_frame(rng, jobs, machines, density, max_quota)
    order = list(range(len(pairs)))
    rng.shuffle(order)
    position = {edge: pos for pos, edge in enumerate(order)}
    ranks_job = {}
    ranks_machine = {}
    for j in range(jobs):
        incident = sorted(
            (i for i, (pj, _) in enumerate(pairs) if pj == j), key=position.__getitem__
        )
        for r, i in enumerate(incident, start=1):
            ranks_job[i] = r
    for m in range(machines):
        incident = sorted(
            (i for i, (_, pm) in enumerate(pairs) if pm == m), key=position.__getitem__
        )
        for r, i in enumerate(incident, start=1):
            ranks_machine[i] = r
    edges = [
        (
            job_rows[j][0],
            machine_rows[m][0],
            _random_fraction(rng, max_capacity),
            ranks_job[i],
            ranks_machine[i],
        )
        for i, (j, m) in enumerate(pairs)
    ]
    instance = build_instance(job_rows, machine_rows, edges)
    return instance, _random_initial(instance, rng)
