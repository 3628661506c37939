"""Blocking edge detection, domination tests and type classification.

A feasible allocation is stable exactly when no edge blocks it.  An edge
blocks when it is unsaturated and dominates the allocation at both ends:
the endpoint either has free quota or prefers the edge to its worst
positively allocated edge.

The job side splits blocking edges into two families.  Type I: the job
prefers the edge to its worst allocated edge (it would shed allocation to
move).  Type II: the edge is no better than anything the job holds, but
free quota remains.  Best-response analysis refines type I by whether the
acting job itself must refuse allocation (I(a)) or its free quota absorbs
the whole increase (I(b)).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from .core import JOB, MACHINE, ZERO, Allocation, Instance, worst_allocated


class BlockKind(enum.Enum):
    TYPE_I = "TYPE_I"
    TYPE_II = "TYPE_II"
    TYPE_IA = "TYPE_IA"
    TYPE_IB = "TYPE_IB"


@dataclass(frozen=True)
class BlockingReport:
    """All blocking edges, sorted by (job index, rank at job)."""

    edges: tuple[tuple[int, BlockKind], ...]
    best_by_job: Mapping[int, int]

    @property
    def empty(self) -> bool:
        return not self.edges

    def edge_ids(self) -> tuple[int, ...]:
        return tuple(e for e, _ in self.edges)


def _worst_ranks(instance: Instance, x: Allocation) -> tuple[list[int | None], list[int | None]]:
    """Per-vertex rank of the worst positively allocated edge (None if empty)."""
    job_worst: list[int | None] = [None] * instance.n_jobs
    for j in range(instance.n_jobs):
        e = worst_allocated(instance, x, JOB, j)
        if e is not None:
            job_worst[j] = instance.rank_at_job[e]
    machine_worst: list[int | None] = [None] * instance.n_machines
    for m in range(instance.n_machines):
        e = worst_allocated(instance, x, MACHINE, m)
        if e is not None:
            machine_worst[m] = instance.rank_at_machine[e]
    return job_worst, machine_worst


def dominates_at(instance: Instance, x: Allocation, e: int, vertex: str) -> bool:
    """True iff the vertex has free quota or prefers e to its worst allocated edge."""
    side, v = instance.vertex(vertex)
    if instance.endpoint(side, e) != v:
        raise ValueError(f"edge {instance.edge_names(e)} is not incident to {vertex!r}")
    return _dominates(instance, x, e, side, v)


def _dominates(instance: Instance, x: Allocation, e: int, side: str, v: int) -> bool:
    if x.vertex_total(side, v) < instance.quota(side, v):
        return True
    worst = worst_allocated(instance, x, side, v)
    return worst is not None and instance.rank(side, e) < instance.rank(side, worst)


def is_blocking(instance: Instance, x: Allocation, e: int) -> bool:
    """Unsaturated and dominating at both endpoints."""
    return (
        x[e] < instance.capacity[e]
        and _dominates(instance, x, e, JOB, instance.edge_job[e])
        and _dominates(instance, x, e, MACHINE, instance.edge_machine[e])
    )


def blocking_snapshot(instance: Instance, x: Allocation) -> list[list[int]]:
    """Per job, its blocking edges best rank first.  Shared hot path."""
    job_worst, machine_worst = _worst_ranks(instance, x)
    job_quota = instance.job_quota
    machine_quota = instance.machine_quota
    capacity = instance.capacity
    rank_j = instance.rank_at_job
    rank_m = instance.rank_at_machine
    out: list[list[int]] = [[] for _ in range(instance.n_jobs)]
    for j in range(instance.n_jobs):
        j_free = x.job_total(j) < job_quota[j]
        jw = job_worst[j]
        for e in instance.job_edges[j]:
            if x[e] >= capacity[e]:
                continue
            if not (j_free or (jw is not None and rank_j[e] < jw)):
                continue
            m = instance.edge_machine[e]
            mw = machine_worst[m]
            if x.machine_total(m) < machine_quota[m] or (mw is not None and rank_m[e] < mw):
                out[j].append(e)
    return out


def blocking_edges(instance: Instance, x: Allocation) -> BlockingReport:
    """All blocking edges with their better-response classification."""
    job_worst, _ = _worst_ranks(instance, x)
    per_job = blocking_snapshot(instance, x)
    entries: list[tuple[int, BlockKind]] = []
    best: dict[int, int] = {}
    for j, edges in enumerate(per_job):
        if not edges:
            continue
        best[j] = edges[0]
        jw = job_worst[j]
        for e in edges:
            if jw is not None and instance.rank_at_job[e] < jw:
                kind = BlockKind.TYPE_I
            else:
                kind = BlockKind.TYPE_II
            entries.append((e, kind))
    return BlockingReport(edges=tuple(entries), best_by_job=best)


def dominated_value(instance: Instance, x: Allocation, e: int, side: str) -> Fraction:
    """Total allocation on edges the endpoint ranks strictly worse than e."""
    v = instance.endpoint(side, e)
    bar = instance.rank(side, e)
    total = ZERO
    for other in instance.edges_at(side, v):
        if instance.rank(side, other) > bar and x[other]:
            total += x[other]
    return total


def classify_best_edge(instance: Instance, x: Allocation, j: int) -> tuple[int, BlockKind] | None:
    """Index-based core of classify_best_response."""
    best = None
    for e in instance.job_edges[j]:
        if is_blocking(instance, x, e):
            best = e
            break
    if best is None:
        return None
    worst = worst_allocated(instance, x, JOB, j)
    if worst is None or instance.rank_at_job[best] >= instance.rank_at_job[worst]:
        return best, BlockKind.TYPE_II
    m = instance.edge_machine[best]
    machine_room = (
        instance.machine_quota[m]
        - x.machine_total(m)
        + dominated_value(instance, x, best, MACHINE)
    )
    free = instance.job_quota[j] - x.job_total(j)
    if free < min(instance.capacity[best] - x[best], machine_room):
        return best, BlockKind.TYPE_IA
    return best, BlockKind.TYPE_IB


def classify_best_response(
    instance: Instance, x: Allocation, job: str
) -> tuple[int, BlockKind] | None:
    """The job's best blocking edge with its I(a)/I(b)/II classification.

    I(a): the job prefers the edge to its worst allocated edge and its free
    quota is smaller than what the edge and the machine can take, so the
    job itself sheds allocation.  I(b): preferred likewise but free quota
    absorbs the whole increase.  II: the edge is no better than the job's
    worst allocated edge (or nothing is allocated yet).
    """
    side, j = instance.vertex(job)
    if side != JOB:
        raise ValueError(f"{job!r} is a machine, not a job")
    return classify_best_edge(instance, x, j)
