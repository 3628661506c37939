"""Exact-arithmetic data model for stable allocation markets.

An instance is a bipartite graph of jobs and machines.  Vertices carry
quotas, edges carry capacities, and every vertex ranks its incident edges
strictly.  All quantities are `fractions.Fraction`; nothing in this package
ever rounds, so termination arguments that rely on a positive minimum step
size stay valid.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

JOB = "job"
MACHINE = "machine"

ZERO = Fraction(0)


class InvalidInstanceError(ValueError):
    """Raised by build_instance; carries the complete violation list."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def parse_rational(text: str) -> Fraction:
    """Parse "3", "2.8" or "14/5" into an exact fraction."""
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a rational number: {text!r}") from exc


def format_rational(value: Fraction) -> str:
    """Canonical text form: integer if the denominator is 1, else "p/q"."""
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def _valid_name(name: str) -> bool:
    return bool(name) and "#" not in name and not any(ch.isspace() for ch in name)


class Instance:
    """Immutable problem instance: graph, quotas, capacities, preferences.

    Vertices get stable integer indices in input order; edges get ids in
    input order.  Adjacency lists are sorted best rank first, which every
    algorithm in the package relies on.
    """

    __slots__ = (
        "jobs",
        "machines",
        "job_quota",
        "machine_quota",
        "edge_job",
        "edge_machine",
        "capacity",
        "rank_at_job",
        "rank_at_machine",
        "job_edges",
        "machine_edges",
        "_edge_ids",
        "_job_ids",
        "_machine_ids",
    )

    def __init__(
        self,
        jobs: Sequence[str],
        machines: Sequence[str],
        job_quota: Sequence[Fraction],
        machine_quota: Sequence[Fraction],
        edge_job: Sequence[int],
        edge_machine: Sequence[int],
        capacity: Sequence[Fraction],
        rank_at_job: Sequence[int],
        rank_at_machine: Sequence[int],
    ):
        self.jobs = tuple(jobs)
        self.machines = tuple(machines)
        self.job_quota = tuple(job_quota)
        self.machine_quota = tuple(machine_quota)
        self.edge_job = tuple(edge_job)
        self.edge_machine = tuple(edge_machine)
        self.capacity = tuple(capacity)
        self.rank_at_job = tuple(rank_at_job)
        self.rank_at_machine = tuple(rank_at_machine)
        self._job_ids = {name: i for i, name in enumerate(self.jobs)}
        self._machine_ids = {name: i for i, name in enumerate(self.machines)}
        self._edge_ids = {
            (j, m): e for e, (j, m) in enumerate(zip(self.edge_job, self.edge_machine))
        }
        by_job: list[list[int]] = [[] for _ in self.jobs]
        by_machine: list[list[int]] = [[] for _ in self.machines]
        for e, (j, m) in enumerate(zip(self.edge_job, self.edge_machine)):
            by_job[j].append(e)
            by_machine[m].append(e)
        for j, edges in enumerate(by_job):
            edges.sort(key=lambda e: self.rank_at_job[e])
        for m, edges in enumerate(by_machine):
            edges.sort(key=lambda e: self.rank_at_machine[e])
        self.job_edges = tuple(tuple(edges) for edges in by_job)
        self.machine_edges = tuple(tuple(edges) for edges in by_machine)

    @property
    def n_jobs(self) -> int:
        return len(self.jobs)

    @property
    def n_machines(self) -> int:
        return len(self.machines)

    @property
    def n_vertices(self) -> int:
        return len(self.jobs) + len(self.machines)

    @property
    def n_edges(self) -> int:
        return len(self.edge_job)

    def edge_id(self, job: str, machine: str) -> int:
        j = self._job_ids.get(job)
        m = self._machine_ids.get(machine)
        if j is None or m is None or (j, m) not in self._edge_ids:
            raise ValueError(f"no edge between job {job!r} and machine {machine!r}")
        return self._edge_ids[(j, m)]

    def edge_names(self, e: int) -> tuple[str, str]:
        return self.jobs[self.edge_job[e]], self.machines[self.edge_machine[e]]

    def vertex(self, name: str) -> tuple[str, int]:
        """Resolve a vertex name to (side, index)."""
        if name in self._job_ids:
            return JOB, self._job_ids[name]
        if name in self._machine_ids:
            return MACHINE, self._machine_ids[name]
        raise ValueError(f"unknown vertex {name!r}")

    def quota(self, side: str, v: int) -> Fraction:
        return self.job_quota[v] if side == JOB else self.machine_quota[v]

    def edges_at(self, side: str, v: int) -> tuple[int, ...]:
        """Incident edges, best rank first."""
        return self.job_edges[v] if side == JOB else self.machine_edges[v]

    def rank(self, side: str, e: int) -> int:
        return self.rank_at_job[e] if side == JOB else self.rank_at_machine[e]

    def endpoint(self, side: str, e: int) -> int:
        return self.edge_job[e] if side == JOB else self.edge_machine[e]

    def transposed(self) -> "Instance":
        """Swap the two sides; edge ids and names are preserved."""
        return Instance(
            jobs=self.machines,
            machines=self.jobs,
            job_quota=self.machine_quota,
            machine_quota=self.job_quota,
            edge_job=self.edge_machine,
            edge_machine=self.edge_job,
            capacity=self.capacity,
            rank_at_job=self.rank_at_machine,
            rank_at_machine=self.rank_at_job,
        )


def validate_instance(
    jobs: Sequence[tuple[str, Fraction]],
    machines: Sequence[tuple[str, Fraction]],
    edges: Sequence[tuple[str, str, Fraction, int, int]],
) -> list[str]:
    """Return the complete list of invariant violations (empty = valid).

    Edge rows are (job, machine, capacity, rank_at_job, rank_at_machine).
    """
    errors: list[str] = []
    job_names = [name for name, _ in jobs]
    machine_names = [name for name, _ in machines]
    for name in job_names + machine_names:
        if not _valid_name(name):
            errors.append(f"invalid vertex name {name!r}")
    seen: set[str] = set()
    for name in job_names:
        if name in seen:
            errors.append(f"duplicate job {name}")
        seen.add(name)
    for name in machine_names:
        if name in seen:
            errors.append(f"duplicate or job-colliding machine {name}")
        seen.add(name)
    for name, q in list(jobs) + list(machines):
        if q < 0:
            errors.append(f"negative quota at {name}")
    job_set = set(job_names)
    machine_set = set(machine_names)
    seen_edges: set[tuple[str, str]] = set()
    for jname, mname, cap, rj, rm in edges:
        if jname not in job_set:
            side = "a machine, not a job" if jname in machine_set else "unknown"
            errors.append(f"edge {jname}-{mname}: {side} endpoint {jname!r}")
        if mname not in machine_set:
            side = "a job, not a machine" if mname in job_set else "unknown"
            errors.append(f"edge {jname}-{mname}: {side} endpoint {mname!r}")
        if (jname, mname) in seen_edges:
            errors.append(f"duplicate edge {jname}-{mname}")
        seen_edges.add((jname, mname))
        if cap < 0:
            errors.append(f"negative capacity on {jname}-{mname}")
        for r, vertex in ((rj, jname), (rm, mname)):
            if not isinstance(r, int) or r < 1:
                errors.append(f"rank {r!r} at {vertex} on {jname}-{mname} is not a positive integer")
    # Rank structure: each vertex must use exactly 1..degree.
    ranks_at: dict[str, list[int]] = {}
    for jname, mname, _cap, rj, rm in edges:
        ranks_at.setdefault(jname, []).append(rj)
        ranks_at.setdefault(mname, []).append(rm)
    for vertex, ranks in sorted(ranks_at.items()):
        if vertex not in job_set and vertex not in machine_set:
            continue
        counted: dict[int, int] = {}
        for r in ranks:
            counted[r] = counted.get(r, 0) + 1
        for r, n in sorted(counted.items()):
            if n > 1:
                errors.append(f"duplicate rank {r} at {vertex}")
        expected = set(range(1, len(ranks) + 1))
        missing = expected - set(counted)
        extra = set(counted) - expected
        if missing or extra:
            errors.append(
                f"rank gap at {vertex}: expected 1..{len(ranks)}, got {sorted(counted)}"
            )
    return errors


def build_instance(
    jobs: Sequence[tuple[str, Fraction]],
    machines: Sequence[tuple[str, Fraction]],
    edges: Sequence[tuple[str, str, Fraction, int, int]],
) -> Instance:
    """Validate and build an Instance; raises InvalidInstanceError with all violations."""
    errors = validate_instance(jobs, machines, edges)
    if errors:
        raise InvalidInstanceError(errors)
    job_ids = {name: i for i, (name, _) in enumerate(jobs)}
    machine_ids = {name: i for i, (name, _) in enumerate(machines)}
    return Instance(
        jobs=[name for name, _ in jobs],
        machines=[name for name, _ in machines],
        job_quota=[Fraction(q) for _, q in jobs],
        machine_quota=[Fraction(q) for _, q in machines],
        edge_job=[job_ids[j] for j, _, _, _, _ in edges],
        edge_machine=[machine_ids[m] for _, m, _, _, _ in edges],
        capacity=[Fraction(c) for _, _, c, _, _ in edges],
        rank_at_job=[rj for _, _, _, rj, _ in edges],
        rank_at_machine=[rm for _, _, _, _, rm in edges],
    )


class Allocation:
    """An edge-indexed value function bound to one instance.

    Vertex totals are cached and maintained incrementally.  Steps and
    solvers mutate a private copy and hand the result back, so treat any
    allocation you received as a value.
    """

    __slots__ = ("instance", "_value", "_job_total", "_machine_total")

    def __init__(self, instance: Instance, values: Iterable[Fraction] | None = None):
        self.instance = instance
        if values is None:
            self._value = [ZERO] * instance.n_edges
        else:
            self._value = [Fraction(v) for v in values]
            if len(self._value) != instance.n_edges:
                raise ValueError("allocation length does not match edge count")
        self._job_total = [ZERO] * instance.n_jobs
        self._machine_total = [ZERO] * instance.n_machines
        for e, v in enumerate(self._value):
            if v:
                self._job_total[instance.edge_job[e]] += v
                self._machine_total[instance.edge_machine[e]] += v

    @classmethod
    def zero(cls, instance: Instance) -> "Allocation":
        return cls(instance)

    @classmethod
    def from_pairs(
        cls, instance: Instance, pairs: Mapping[tuple[str, str], Fraction]
    ) -> "Allocation":
        x = cls(instance)
        for (jname, mname), v in pairs.items():
            x.add(instance.edge_id(jname, mname), Fraction(v))
        return x

    def __getitem__(self, e: int) -> Fraction:
        return self._value[e]

    def add(self, e: int, delta: Fraction) -> None:
        """In-place change; caller owns this allocation."""
        if not delta:
            return
        self._value[e] += delta
        self._job_total[self.instance.edge_job[e]] += delta
        self._machine_total[self.instance.edge_machine[e]] += delta

    def job_total(self, j: int) -> Fraction:
        return self._job_total[j]

    def machine_total(self, m: int) -> Fraction:
        return self._machine_total[m]

    def vertex_total(self, side: str, v: int) -> Fraction:
        return self._job_total[v] if side == JOB else self._machine_total[v]

    def total(self) -> Fraction:
        return sum(self._job_total, ZERO)

    def copy(self) -> "Allocation":
        dup = Allocation.__new__(Allocation)
        dup.instance = self.instance
        dup._value = list(self._value)
        dup._job_total = list(self._job_total)
        dup._machine_total = list(self._machine_total)
        return dup

    def key(self) -> tuple[tuple[int, int], ...]:
        """Canonical encoding, usable as an exact state identity."""
        return tuple((v.numerator, v.denominator) for v in self._value)

    def as_dict(self) -> dict[tuple[str, str], Fraction]:
        return {
            self.instance.edge_names(e): v
            for e, v in enumerate(self._value)
            if v
        }

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Allocation):
            return NotImplemented
        return self.instance is other.instance and self._value == other._value

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        inner = ", ".join(
            f"{j}-{m}={format_rational(v)}" for (j, m), v in sorted(self.as_dict().items())
        )
        return f"Allocation({inner})"


@dataclass(frozen=True)
class VertexView:
    """Allocated total, residual quota and the worst positively allocated edge."""

    vertex: str
    allocated: Fraction
    residual: Fraction
    worst_allocated_edge: int | None


def check_feasible(instance: Instance, x: Allocation) -> list[str]:
    """All capacity/quota violations; empty list means x is an allocation."""
    if x.instance is not instance:
        raise ValueError("allocation is bound to a different instance")
    violations: list[str] = []
    for e in range(instance.n_edges):
        if x[e] < 0:
            jname, mname = instance.edge_names(e)
            violations.append(f"negative value on {jname}-{mname}")
        elif x[e] > instance.capacity[e]:
            jname, mname = instance.edge_names(e)
            violations.append(f"capacity exceeded on {jname}-{mname}")
    for j, name in enumerate(instance.jobs):
        if x.job_total(j) > instance.job_quota[j]:
            violations.append(f"quota exceeded at {name}")
    for m, name in enumerate(instance.machines):
        if x.machine_total(m) > instance.machine_quota[m]:
            violations.append(f"quota exceeded at {name}")
    return violations


def worst_allocated(instance: Instance, x: Allocation, side: str, v: int) -> int | None:
    """The vertex's positively allocated edge of worst rank, if any.

    For jobs this is the refusal pointer: the edge allocation is shed from
    first in any myopic change.
    """
    for e in reversed(instance.edges_at(side, v)):
        if x[e]:
            return e
    return None


def vertex_view(instance: Instance, x: Allocation, name: str) -> VertexView:
    side, v = instance.vertex(name)
    allocated = x.vertex_total(side, v)
    return VertexView(
        vertex=name,
        allocated=allocated,
        residual=instance.quota(side, v) - allocated,
        worst_allocated_edge=worst_allocated(instance, x, side, v),
    )


def total_value(x: Allocation) -> Fraction:
    """Sum of x over all edges."""
    return x.total()
