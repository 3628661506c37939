"""Deterministic paths to stability and the stability certifier.

Two two-phase algorithms drive an arbitrary feasible allocation to a
stable one: a better-response variant that first clears type-I blocking
edges by swapping worst edges for better ones, then fills type-II edges,
and a best-response variant that always acts on a job's best blocking
edge, clearing types I(a)/I(b) before type II.  Correlated markets (a
global edge ranking consistent with every preference list) get a direct
greedy solver whose output is the market's unique stable allocation.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import chain

from .blocking import BlockKind, blocking_snapshot, classify_best_edge, is_blocking
from .core import (
    JOB,
    MACHINE,
    ZERO,
    Allocation,
    Instance,
    check_feasible,
    worst_allocated,
)
from .dynamics import (
    STABLE,
    Step,
    Trace,
    _apply_response,
    _improvement1_amount,
)


class NotCorrelatedError(ValueError):
    """The instance admits no global edge ranking (preference cycle)."""


class BudgetExceededError(RuntimeError):
    """Safety valve: a solver ran past its implied worst-case step bound."""


class InvariantViolation(AssertionError):
    """A per-step monotonicity claim failed while check hooks were active."""


@dataclass(frozen=True)
class BetterPotential:
    """Lexicographic potential of the better-response algorithm: total
    allocation value, then allocation weighted by rank at the job."""

    total_value: Fraction
    rank_weighted: Fraction

    def as_tuple(self) -> tuple[Fraction, Fraction]:
        return (self.total_value, self.rank_weighted)

    def __lt__(self, other: "BetterPotential") -> bool:
        return self.as_tuple() < other.as_tuple()


@dataclass(frozen=True)
class LexPosition:
    """A vertex's allocated (rank, value) pairs, best rank first.

    Positions compare by walking ranks from best to worst; at the first
    rank where the allocated values differ, more allocation wins.
    """

    entries: tuple[tuple[int, Fraction], ...]

    def compare(self, other: "LexPosition") -> int:
        """1 if self is strictly better, -1 if worse, 0 if equal."""
        a, b = self.entries, other.entries
        ia = ib = 0
        while ia < len(a) or ib < len(b):
            ra = a[ia][0] if ia < len(a) else None
            rb = b[ib][0] if ib < len(b) else None
            if rb is None or (ra is not None and ra < rb):
                va, vb = a[ia][1], ZERO
                ia += 1
            elif ra is None or rb < ra:
                va, vb = ZERO, b[ib][1]
                ib += 1
            else:
                va, vb = a[ia][1], b[ib][1]
                ia += 1
                ib += 1
            if va != vb:
                return 1 if va > vb else -1
        return 0

    def improves_on(self, other: "LexPosition") -> bool:
        return self.compare(other) > 0


@dataclass(frozen=True)
class GlobalRanking:
    """Distinct positive integers per edge, consistent with every
    preference list: a lower value is preferred at every shared vertex."""

    f: tuple[int, ...]

    def edge_order(self) -> list[int]:
        return sorted(range(len(self.f)), key=lambda e: self.f[e])

    def consistent_with(self, instance: Instance) -> bool:
        for side in (JOB, MACHINE):
            count = instance.n_jobs if side == JOB else instance.n_machines
            for v in range(count):
                edges = instance.edges_at(side, v)
                for a, b in zip(edges, edges[1:]):
                    if self.f[a] >= self.f[b]:
                        return False
        return True


def potential_better(instance: Instance, x: Allocation) -> BetterPotential:
    weighted = ZERO
    for e in range(instance.n_edges):
        if x[e]:
            weighted += x[e] * instance.rank_at_job[e]
    return BetterPotential(total_value=x.total(), rank_weighted=weighted)


def lex_position(instance: Instance, x: Allocation, vertex: str) -> LexPosition:
    side, v = instance.vertex(vertex)
    return _lex_position(instance, x, side, v)


def _lex_position(instance: Instance, x: Allocation, side: str, v: int) -> LexPosition:
    entries = tuple(
        (instance.rank(side, e), x[e]) for e in instance.edges_at(side, v) if x[e]
    )
    return LexPosition(entries=entries)


def is_stable(instance: Instance, x: Allocation) -> bool:
    """No edge blocks: unsaturated edges fail domination at some endpoint."""
    return not any(blocking_snapshot(instance, x))


def derive_global_ranking(instance: Instance) -> GlobalRanking | None:
    """Topologically order the edge preference relation; None on a cycle.

    Consecutive edges in each preference list give the generating arcs;
    ties are impossible because ranks are strict.  Kahn's algorithm with a
    lowest-edge-id heap makes the ranking canonical.
    """
    n = instance.n_edges
    succ: list[list[int]] = [[] for _ in range(n)]
    indegree = [0] * n
    for side in (JOB, MACHINE):
        count = instance.n_jobs if side == JOB else instance.n_machines
        for v in range(count):
            edges = instance.edges_at(side, v)
            for a, b in zip(edges, edges[1:]):
                succ[a].append(b)
                indegree[b] += 1
    ready = [e for e in range(n) if indegree[e] == 0]
    heapq.heapify(ready)
    f = [0] * n
    placed = 0
    while ready:
        e = heapq.heappop(ready)
        placed += 1
        f[e] = placed
        for nxt in succ[e]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                heapq.heappush(ready, nxt)
    if placed < n:
        return None
    return GlobalRanking(f=tuple(f))


def solve_correlated(instance: Instance) -> Allocation:
    """Greedy fix of the globally best remaining edge; the unique stable
    allocation of a correlated market."""
    ranking = derive_global_ranking(instance)
    if ranking is None:
        raise NotCorrelatedError("instance has a preference cycle, no global ranking exists")
    x = Allocation.zero(instance)
    job_room = list(instance.job_quota)
    machine_room = list(instance.machine_quota)
    for e in ranking.edge_order():
        j = instance.edge_job[e]
        m = instance.edge_machine[e]
        amount = min(instance.capacity[e], job_room[j], machine_room[m])
        if amount:
            x.add(e, amount)
            job_room[j] -= amount
            machine_room[m] -= amount
    return x


def implied_step_bound(instance: Instance, x0: Allocation) -> int:
    """Generous worst-case step count for the two-phase algorithms.

    Rational data admits a minimum step of 1/scale, so the scaled
    potential ranges bound the number of steps; one order of magnitude is
    added on top.  Exceeding this is a bug, not a long run.
    """
    scale = 1
    for v in chain(
        instance.job_quota,
        instance.machine_quota,
        instance.capacity,
        (x0[e] for e in range(instance.n_edges)),
    ):
        scale = math.lcm(scale, v.denominator)
    total_cap = sum(instance.capacity, ZERO)
    scaled_cap = int(total_cap * scale)
    max_deg = max((len(edges) for edges in instance.job_edges), default=1)
    return max(10_000, 10 * (scaled_cap + 1) * (scaled_cap * max_deg + 1))


def _find_type1(instance: Instance, x: Allocation) -> tuple[int, int] | None:
    """Lowest-index job with a type-I blocking edge and its best such edge."""
    capacity = instance.capacity
    rank_j = instance.rank_at_job
    rank_m = instance.rank_at_machine
    for j in range(instance.n_jobs):
        worst = worst_allocated(instance, x, JOB, j)
        if worst is None:
            continue
        wr = rank_j[worst]
        for e in instance.job_edges[j]:
            if rank_j[e] >= wr:
                break
            if x[e] >= capacity[e]:
                continue
            m = instance.edge_machine[e]
            if x.machine_total(m) < instance.machine_quota[m]:
                return j, e
            mw = worst_allocated(instance, x, MACHINE, m)
            if mw is not None and rank_m[e] < rank_m[mw]:
                return j, e
    return None


def _find_best_blocking(instance: Instance, x: Allocation) -> tuple[int, int] | None:
    """Lowest-index job with any blocking edge and its best blocking edge."""
    for j in range(instance.n_jobs):
        for e in instance.job_edges[j]:
            if is_blocking(instance, x, e):
                return j, e
    return None


def _require_feasible(instance: Instance, x0: Allocation) -> None:
    violations = check_feasible(instance, x0)
    if violations:
        raise ValueError("infeasible starting allocation: " + "; ".join(violations))


def _machine_lex_all(instance: Instance, x: Allocation) -> list[LexPosition]:
    return [_lex_position(instance, x, MACHINE, m) for m in range(instance.n_machines)]


def two_phase_better(
    instance: Instance,
    x0: Allocation,
    *,
    record_steps: bool = True,
    check_invariants: bool = False,
    max_steps: int | None = None,
) -> Trace:
    """Clear type-I blocking edges by worst-for-better reassignment, then
    saturate type-II edges; always terminates stable on rational data.

    Type-I steps freeze the job's quota: the job sheds from its worst edge
    even with room to spare, so total value never rises in phase one.  The
    phase boundary is re-evaluated after every step.
    """
    _require_feasible(instance, x0)
    budget = implied_step_bound(instance, x0) if max_steps is None else max_steps
    x = x0.copy()
    steps: list[Step] | None = [] if record_steps else None
    count = 0
    saw_phase2 = False
    while True:
        found = _find_type1(instance, x)
        if found is not None:
            j, e = found
            if check_invariants and saw_phase2:
                raise InvariantViolation("a type-I blocking edge appeared after phase two began")
            pot_before = potential_better(instance, x) if check_invariants else None
            amount, rj, rm = _improvement1_amount(instance, x, e)
            x.add(e, amount)
            x.add(rj, -amount)
            refusals = [(rj, amount)]
            if rm is not None:
                x.add(rm, -amount)
                refusals.append((rm, amount))
            kind = "improve1"
            if check_invariants:
                if check_feasible(instance, x):
                    raise InvariantViolation("type-I step left an infeasible allocation")
                if not (potential_better(instance, x) < pot_before):
                    raise InvariantViolation("potential did not decrease on a type-I step")
        else:
            found = _find_best_blocking(instance, x)
            if found is None:
                break
            j, e = found
            saw_phase2 = True
            m = instance.edge_machine[e]
            lex_before = _machine_lex_all(instance, x) if check_invariants else None
            resid_cap = instance.capacity[e] - x[e]
            job_free = instance.job_quota[j] - x.job_total(j)
            machine_free = instance.machine_quota[m] - x.machine_total(m)
            if machine_free > 0:
                amount = min(resid_cap, job_free, machine_free)
                refusals = []
            else:
                rm = worst_allocated(instance, x, MACHINE, m)
                amount = min(x[rm], resid_cap, job_free)
                x.add(rm, -amount)
                refusals = [(rm, amount)]
            x.add(e, amount)
            kind = "improve2"
            if check_invariants:
                if check_feasible(instance, x):
                    raise InvariantViolation("type-II step left an infeasible allocation")
                lex_after = _machine_lex_all(instance, x)
                for mi, (before, after) in enumerate(zip(lex_before, lex_after)):
                    cmp = after.compare(before)
                    if mi == m and cmp <= 0:
                        raise InvariantViolation("acting machine did not improve in phase two")
                    if mi != m and cmp < 0:
                        raise InvariantViolation("a passive machine lost position in phase two")
        count += 1
        if steps is not None:
            steps.append(Step(job=j, edge=e, amount=amount, refusals=tuple(refusals), kind=kind))
        if count > budget:
            raise BudgetExceededError(
                f"two_phase_better exceeded {budget} steps; termination argument violated"
            )
    return Trace(
        instance=instance,
        initial=x0.copy(),
        steps=tuple(steps) if steps is not None else None,
        final=x,
        reason=STABLE,
        step_count=count,
    )


def _refusal_state(instance: Instance, x: Allocation, j: int) -> tuple[int, Fraction]:
    """(rank, value) of the job's worst allocated edge; (0, 0) when drained."""
    worst = worst_allocated(instance, x, JOB, j)
    if worst is None:
        return (0, ZERO)
    return (instance.rank_at_job[worst], x[worst])


def two_phase_best(
    instance: Instance,
    x0: Allocation,
    *,
    record_steps: bool = True,
    check_invariants: bool = False,
    max_steps: int | None = None,
) -> Trace:
    """Best-response path to stability: act on jobs whose best blocking
    edge is of type I(a)/I(b) first, then on type-II jobs.

    Every step is a full best response of the acting job.  Once only
    type-II best edges remain, none of type I(a)/I(b) ever reappears; the
    loop re-derives the classification after each step regardless.
    """
    _require_feasible(instance, x0)
    budget = implied_step_bound(instance, x0) if max_steps is None else max_steps
    x = x0.copy()
    steps: list[Step] | None = [] if record_steps else None
    count = 0
    saw_phase2 = False
    while True:
        acting: tuple[int, int, BlockKind] | None = None
        fallback: tuple[int, int, BlockKind] | None = None
        for j in range(instance.n_jobs):
            classified = classify_best_edge(instance, x, j)
            if classified is None:
                continue
            e, kind = classified
            if kind in (BlockKind.TYPE_IA, BlockKind.TYPE_IB):
                acting = (j, e, kind)
                break
            if fallback is None:
                fallback = (j, e, kind)
        if acting is None:
            acting = fallback
        if acting is None:
            break
        j, e, kind = acting
        if kind is BlockKind.TYPE_II:
            saw_phase2 = True
        elif check_invariants and saw_phase2:
            raise InvariantViolation("a type-I(a)/I(b) best edge appeared after phase two began")
        pairs_before = (
            [_refusal_state(instance, x, ji) for ji in range(instance.n_jobs)]
            if check_invariants
            else None
        )
        lex_before = _machine_lex_all(instance, x) if check_invariants else None
        m = instance.edge_machine[e]
        x, step = _apply_response(instance, x, e, "best")
        count += 1
        if steps is not None:
            steps.append(step)
        if check_invariants:
            if check_feasible(instance, x):
                raise InvariantViolation("best-response step left an infeasible allocation")
            pairs_after = [_refusal_state(instance, x, ji) for ji in range(instance.n_jobs)]
            lex_after = _machine_lex_all(instance, x)
            if kind is BlockKind.TYPE_IA and not pairs_after[j] < pairs_before[j]:
                raise InvariantViolation("type-I(a) step did not shrink the acting job's worst edge")
            if kind is not BlockKind.TYPE_IA:
                if not lex_after[m].improves_on(lex_before[m]):
                    raise InvariantViolation("acting machine's position did not improve")
            if kind is BlockKind.TYPE_IB:
                if any(a > b for a, b in zip(pairs_after, pairs_before)):
                    raise InvariantViolation("a job's worst-edge state grew on a type-I(b) step")
            if kind is BlockKind.TYPE_II:
                if any(a.compare(b) < 0 for a, b in zip(lex_after, lex_before)):
                    raise InvariantViolation("a machine lost position during phase two")
        if count > budget:
            raise BudgetExceededError(
                f"two_phase_best exceeded {budget} steps; termination argument violated"
            )
    return Trace(
        instance=instance,
        initial=x0.copy(),
        steps=tuple(steps) if steps is not None else None,
        final=x,
        reason=STABLE,
        step_count=count,
    )
