"""Strongly polynomial path to stability via alternating-walk augmentation.

Instead of single proposal-refusal steps, each round reassigns allocation
along a whole alternating walk of proposal and refusal edges, so the
number of rounds is bounded by the graph size alone and never depends on
the numeric values.  A helper graph over the current allocation drives the
search:

  * blocking set: type-I blocking edges (the job would trade up),
  * possibly blocking set: unsaturated edges a job prefers to its worst
    allocated edge, whose machine currently holds someone's refusal
    pointer; these turn blocking the moment that machine loses allocation,
  * refusal pointers: each job's worst positively allocated edge.

Walks start at a machine holding a blocking edge, alternate the machine's
best proposal edge with the job's refusal pointer, and stop when a machine
has no proposal edge or its best one returns to a visited job.  The
augmentation amount is the largest value that keeps the result feasible
while forcing the helper graph to change.

Phase two reuses phase one on a modified instance: a dummy job absorbs
every machine's free quota (ranked last everywhere) and the two sides swap
roles, making machines the active class.  The result restricted to the
original edges is stable.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .blocking import dominated_value
from .core import (
    JOB,
    MACHINE,
    ZERO,
    Allocation,
    Instance,
    build_instance,
    check_feasible,
    format_rational,
    worst_allocated,
)
from .solvers import BudgetExceededError, InvariantViolation, _find_type1


@dataclass
class HelperGraph:
    """Edge sets steering the walk search; a function of (instance, x)."""

    blocking: set[int]
    possibly_blocking: set[int]
    refusal: dict[int, int]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HelperGraph):
            return NotImplemented
        return (
            self.blocking == other.blocking
            and self.possibly_blocking == other.possibly_blocking
            and self.refusal == other.refusal
        )

    def copy(self) -> "HelperGraph":
        return HelperGraph(
            blocking=set(self.blocking),
            possibly_blocking=set(self.possibly_blocking),
            refusal=dict(self.refusal),
        )

    def best_proposal(self, instance: Instance, m: int) -> int | None:
        """The machine's best-ranked edge in blocking | possibly_blocking."""
        for e in instance.machine_edges[m]:
            if e in self.blocking or e in self.possibly_blocking:
                return e
        return None


@dataclass(frozen=True)
class AlternatingWalk:
    """Alternating proposal/refusal edge sequence found by find_walk.

    proposals[i] and refusals[i] share job i of the walk; refusals[i]
    leads to the next machine.  is_cycle means the last refusal edge
    returns to start_machine, closing a single cycle.
    """

    start_machine: int
    proposals: tuple[int, ...]
    refusals: tuple[int, ...]
    is_cycle: bool

    @property
    def edges(self) -> tuple[int, ...]:
        out: list[int] = []
        for p, r in zip(self.proposals, self.refusals):
            out.append(p)
            out.append(r)
        return tuple(out)


@dataclass(frozen=True)
class AcceleratedPotential:
    """Per-job worst-edge ranks and per-machine negated best-proposal ranks.

    A job with nothing allocated contributes 0: once drained it never
    re-enters play during the phase, so the minimum encoding keeps the
    vector monotone.  A machine without proposal edges contributes the
    minimum -(n_jobs + 1).

    Rounds never worsen the pair: the job vector is componentwise
    non-increasing over the whole phase, and while it stands still the
    machine vector is componentwise non-increasing too.  A round can leave
    both unchanged: when the amount is set by the starting machine's term,
    the first walk edge merely demotes from blocking to possibly blocking
    and stays that machine's best proposal edge.  Progress in such rounds
    shows up as a helper-graph change instead, so the round bound comes
    from the pair monotonicity together with the graph-change guarantee.
    """

    job_worst_rank: tuple[int, ...]
    machine_proposal: tuple[int, ...]

    def lex_decreases_to(self, nxt: "AcceleratedPotential") -> bool:
        """Strict componentwise pair order; most rounds satisfy this."""
        if not self.decreases_weakly_to(nxt):
            return False
        return self != nxt

    def decreases_weakly_to(self, nxt: "AcceleratedPotential") -> bool:
        """No job component may grow, ever; machine components may only
        grow in rounds where some job component strictly shrank."""
        if any(c > p for p, c in zip(self.job_worst_rank, nxt.job_worst_rank)):
            return False
        if any(c < p for p, c in zip(self.job_worst_rank, nxt.job_worst_rank)):
            return True
        return not any(
            c > p for p, c in zip(self.machine_proposal, nxt.machine_proposal)
        )


@dataclass(frozen=True)
class RoundRecord:
    """One augmentation round: the walk, the amount, the starting
    machine's off-walk refusals, and the potential after the round."""

    start_machine: int
    walk_edges: tuple[int, ...]
    is_cycle: bool
    amount: Fraction
    refusals: tuple[tuple[int, Fraction], ...]
    potential: AcceleratedPotential


def build_helper(instance: Instance, x: Allocation) -> HelperGraph:
    """Compute the three edge sets from scratch."""
    refusal: dict[int, int] = {}
    for j in range(instance.n_jobs):
        worst = worst_allocated(instance, x, JOB, j)
        if worst is not None:
            refusal[j] = worst
    machines_with_refusal = {instance.edge_machine[e] for e in refusal.values()}
    machine_worst: dict[int, int | None] = {}
    blocking: set[int] = set()
    possibly: set[int] = set()
    for e in range(instance.n_edges):
        if x[e] >= instance.capacity[e]:
            continue
        j = instance.edge_job[e]
        pointer = refusal.get(j)
        if pointer is None or instance.rank_at_job[e] >= instance.rank_at_job[pointer]:
            continue
        m = instance.edge_machine[e]
        if m not in machine_worst:
            machine_worst[m] = worst_allocated(instance, x, MACHINE, m)
        mw = machine_worst[m]
        if x.machine_total(m) < instance.machine_quota[m] or (
            mw is not None and instance.rank_at_machine[e] < instance.rank_at_machine[mw]
        ):
            blocking.add(e)
        elif m in machines_with_refusal:
            possibly.add(e)
    return HelperGraph(blocking=blocking, possibly_blocking=possibly, refusal=refusal)


def check_lemma1(instance: Instance, helper: HelperGraph) -> None:
    """Blocking edges outrank possibly blocking edges at a shared machine."""
    best_blocking: dict[int, int] = {}
    for e in helper.blocking:
        m = instance.edge_machine[e]
        r = instance.rank_at_machine[e]
        best_blocking[m] = max(best_blocking.get(m, 0), r)
    for e in helper.possibly_blocking:
        m = instance.edge_machine[e]
        if m in best_blocking and instance.rank_at_machine[e] < best_blocking[m]:
            raise InvariantViolation(
                f"possibly blocking edge {instance.edge_names(e)} outranks a blocking edge"
            )


def find_walk(instance: Instance, helper: HelperGraph) -> AlternatingWalk:
    """Walk from the lowest-index machine holding a blocking edge.

    Machines contribute their best proposal edge, jobs their refusal
    pointer.  Stops at a machine without proposal edges (plain path) or
    when the best proposal edge leads back to a visited job; if the walk
    is back at its start the edges close a single cycle.
    """
    if not helper.blocking:
        raise ValueError("no type-I blocking edge, nothing to augment")
    start = min(instance.edge_machine[e] for e in helper.blocking)
    proposals: list[int] = []
    refusals: list[int] = []
    visited_jobs: set[int] = set()
    m = start
    is_cycle = False
    while True:
        e = helper.best_proposal(instance, m)
        if e is None:
            break
        if not proposals and e not in helper.blocking:
            raise AssertionError("walk must start on a blocking edge")
        j = instance.edge_job[e]
        if j in visited_jobs:
            is_cycle = m == start
            break
        proposals.append(e)
        pointer = helper.refusal[j]
        refusals.append(pointer)
        visited_jobs.add(j)
        m = instance.edge_machine[pointer]
    return AlternatingWalk(
        start_machine=start,
        proposals=tuple(proposals),
        refusals=tuple(refusals),
        is_cycle=is_cycle,
    )


def augment(
    instance: Instance, x: Allocation, walk: AlternatingWalk
) -> tuple[Allocation, Fraction, tuple[tuple[int, Fraction], ...]]:
    """Shift the augmentation amount along the walk.

    The amount is the minimum of the refusal edges' values and the
    proposal edges' residual capacities; on a non-cycle walk additionally
    the starting machine's free quota plus everything it holds on edges
    worse than the first proposal edge.  Only the starting machine can go
    over quota, and it sheds worst-first; those off-walk refusals are
    returned alongside the new allocation and the amount.
    """
    terms = [x[r] for r in walk.refusals]
    terms += [instance.capacity[p] - x[p] for p in walk.proposals]
    first = walk.proposals[0]
    m1 = walk.start_machine
    if not walk.is_cycle:
        room = instance.machine_quota[m1] - x.machine_total(m1)
        terms.append(room + dominated_value(instance, x, first, MACHINE))
    amount = min(terms)
    if amount <= 0:
        raise AssertionError("augmentation amount must be positive")
    out = x.copy()
    for p in walk.proposals:
        out.add(p, amount)
    for r in walk.refusals:
        out.add(r, -amount)
    offwalk: list[tuple[int, Fraction]] = []
    if not walk.is_cycle:
        overflow = out.machine_total(m1) - instance.machine_quota[m1]
        if overflow > 0:
            bar = instance.rank_at_machine[first]
            for e in reversed(instance.machine_edges[m1]):
                if instance.rank_at_machine[e] <= bar or not out[e]:
                    continue
                cut = min(out[e], overflow)
                out.add(e, -cut)
                offwalk.append((e, cut))
                overflow -= cut
                if not overflow:
                    break
            if overflow:
                raise AssertionError("starting machine could not shed its overflow")
    return out, amount, tuple(offwalk)


def update_helper(
    helper: HelperGraph,
    instance: Instance,
    old_x: Allocation,
    new_x: Allocation,
    walk: AlternatingWalk,
) -> HelperGraph:
    """Recompute the helper sets around the walk only.

    Membership of an edge can change only if one of its endpoints was
    touched: a walk vertex, the starting machine and the jobs it refused,
    or a machine whose set of incoming refusal pointers changed.  The
    result equals build_helper on the new allocation.
    """
    changed = set(walk.proposals) | set(walk.refusals)
    for e in instance.machine_edges[walk.start_machine]:
        if old_x[e] != new_x[e]:
            changed.add(e)
    affected_jobs = {instance.edge_job[e] for e in changed}
    affected_machines = {instance.edge_machine[e] for e in changed}
    refusal = dict(helper.refusal)
    for j in affected_jobs:
        old_pointer = refusal.get(j)
        new_pointer = worst_allocated(instance, new_x, JOB, j)
        if old_pointer is not None:
            affected_machines.add(instance.edge_machine[old_pointer])
        if new_pointer is None:
            refusal.pop(j, None)
        else:
            refusal[j] = new_pointer
            affected_machines.add(instance.edge_machine[new_pointer])
    machines_with_refusal = {instance.edge_machine[e] for e in refusal.values()}
    blocking = set(helper.blocking)
    possibly = set(helper.possibly_blocking)
    candidates: set[int] = set()
    for j in affected_jobs:
        candidates.update(instance.job_edges[j])
    for m in affected_machines:
        candidates.update(instance.machine_edges[m])
    machine_worst: dict[int, int | None] = {}
    for e in candidates:
        blocking.discard(e)
        possibly.discard(e)
        if new_x[e] >= instance.capacity[e]:
            continue
        j = instance.edge_job[e]
        pointer = refusal.get(j)
        if pointer is None or instance.rank_at_job[e] >= instance.rank_at_job[pointer]:
            continue
        m = instance.edge_machine[e]
        if m not in machine_worst:
            machine_worst[m] = worst_allocated(instance, new_x, MACHINE, m)
        mw = machine_worst[m]
        if new_x.machine_total(m) < instance.machine_quota[m] or (
            mw is not None and instance.rank_at_machine[e] < instance.rank_at_machine[mw]
        ):
            blocking.add(e)
        elif m in machines_with_refusal:
            possibly.add(e)
    return HelperGraph(blocking=blocking, possibly_blocking=possibly, refusal=refusal)


def accelerated_potential(
    instance: Instance, x: Allocation, helper: HelperGraph
) -> AcceleratedPotential:
    job_ranks = []
    for j in range(instance.n_jobs):
        pointer = helper.refusal.get(j)
        job_ranks.append(0 if pointer is None else instance.rank_at_job[pointer])
    floor = -(instance.n_jobs + 1)
    machine_ranks = []
    for m in range(instance.n_machines):
        best = helper.best_proposal(instance, m)
        machine_ranks.append(floor if best is None else -instance.rank_at_machine[best])
    return AcceleratedPotential(
        job_worst_rank=tuple(job_ranks), machine_proposal=tuple(machine_ranks)
    )


def verify_round(
    instance: Instance,
    before: Allocation,
    walk: AlternatingWalk,
    amount: Fraction,
    offwalk: tuple[tuple[int, Fraction], ...],
) -> None:
    """Check that the round decomposes into myopic reassignments.

    Walking forward, every proposal edge must be unsaturated and dominate
    the running allocation at both endpoints by the time its machine has
    shed along the preceding refusal edge, each refusal edge must be its
    job's worst allocated edge, and the starting machine may only shed
    edges it ranks below its first proposal edge.
    """
    y = before.copy()
    first = walk.proposals[0]
    m1 = walk.start_machine
    for i, (p, r) in enumerate(zip(walk.proposals, walk.refusals)):
        j = instance.edge_job[p]
        if instance.edge_job[r] != j:
            raise InvariantViolation("walk refusal edge belongs to a different job")
        worst = worst_allocated(instance, y, JOB, j)
        if worst != r:
            raise InvariantViolation("walk refusal edge is not the job's worst allocated edge")
        if instance.rank_at_job[p] >= instance.rank_at_job[r]:
            raise InvariantViolation("proposal edge does not beat the job's refusal pointer")
        if y[p] + amount > instance.capacity[p]:
            raise InvariantViolation("proposal edge overshoots its capacity")
        m = instance.edge_machine[p]
        if i > 0:
            dominated = y.machine_total(m) < instance.machine_quota[m] or (
                (mw := worst_allocated(instance, y, MACHINE, m)) is not None
                and instance.rank_at_machine[p] < instance.rank_at_machine[mw]
            )
            if not dominated:
                raise InvariantViolation("proposal edge stopped dominating mid-walk")
        y.add(p, amount)
        y.add(r, -amount)
        if y[r] < 0:
            raise InvariantViolation("refusal edge went negative")
        if i == 0:
            bar = instance.rank_at_machine[first]
            for refused, cut in offwalk:
                if instance.edge_machine[refused] != m1:
                    raise InvariantViolation("off-walk refusal away from the starting machine")
                if instance.rank_at_machine[refused] <= bar:
                    raise InvariantViolation("starting machine shed a non-dominated edge")
                y.add(refused, -cut)
    if check_feasible(instance, y):
        raise InvariantViolation("augmented allocation is infeasible")


def _check_pointer_monotone(
    instance: Instance, old: dict[int, int], new: dict[int, int], x: Allocation
) -> None:
    """Refusal pointers only move to better edges or vanish with the job."""
    for j, pointer in old.items():
        now = new.get(j)
        if now is None:
            if x.job_total(j) != 0:
                raise InvariantViolation("refusal pointer vanished from a non-empty job")
        elif instance.rank_at_job[now] > instance.rank_at_job[pointer]:
            raise InvariantViolation("refusal pointer moved to a worse edge")
    for j in new:
        if j not in old:
            raise InvariantViolation("a drained job re-entered the allocation")


def accelerated_phase1(
    instance: Instance,
    x0: Allocation,
    *,
    check_invariants: bool = False,
) -> tuple[Allocation, tuple[RoundRecord, ...]]:
    """Augment along alternating walks until no type-I blocking edge remains."""
    violations = check_feasible(instance, x0)
    if violations:
        raise ValueError("infeasible starting allocation: " + "; ".join(violations))
    x = x0.copy()
    helper = build_helper(instance, x)
    if check_invariants:
        check_lemma1(instance, helper)
    records: list[RoundRecord] = []
    limit = max(16, 4 * instance.n_vertices * instance.n_edges)
    potential = accelerated_potential(instance, x, helper) if check_invariants else None
    while helper.blocking:
        if len(records) >= limit:
            raise BudgetExceededError(
                f"accelerated phase one exceeded {limit} rounds on "
                f"{instance.n_vertices} vertices / {instance.n_edges} edges"
            )
        walk = find_walk(instance, helper)
        new_x, amount, offwalk = augment(instance, x, walk)
        new_helper = update_helper(helper, instance, x, new_x, walk)
        if check_invariants:
            verify_round(instance, x, walk, amount, offwalk)
            rebuilt = build_helper(instance, new_x)
            if new_helper != rebuilt:
                raise InvariantViolation("incremental helper update drifted from full rebuild")
            if new_helper == helper:
                raise InvariantViolation("helper graph did not change over a round")
            check_lemma1(instance, new_helper)
            _check_pointer_monotone(instance, helper.refusal, new_helper.refusal, new_x)
            new_potential = accelerated_potential(instance, new_x, new_helper)
            if not potential.decreases_weakly_to(new_potential):
                raise InvariantViolation("round potential worsened")
            potential = new_potential
        x = new_x
        helper = new_helper
        records.append(
            RoundRecord(
                start_machine=walk.start_machine,
                walk_edges=walk.edges,
                is_cycle=walk.is_cycle,
                amount=amount,
                refusals=offwalk,
                potential=accelerated_potential(instance, x, helper),
            )
        )
    return x, tuple(records)


def _dummy_name(instance: Instance) -> str:
    taken = set(instance.jobs) | set(instance.machines)
    name = "_dummy"
    n = 0
    while name in taken:
        n += 1
        name = f"_dummy{n}"
    return name


def extend_with_dummy(instance: Instance, x: Allocation) -> tuple[Instance, Allocation, str]:
    """Absorb every machine's free quota into edges to a fresh dummy job.

    The dummy edges carry the maximum machine quota as capacity, sit last
    on every machine's list, and the dummy job's quota is the sum of the
    machine quotas, so all machines come out exactly saturated.
    """
    dummy = _dummy_name(instance)
    max_quota = max(instance.machine_quota, default=ZERO)
    jobs = [(name, instance.job_quota[i]) for i, name in enumerate(instance.jobs)]
    jobs.append((dummy, sum(instance.machine_quota, ZERO)))
    machines = [(name, instance.machine_quota[i]) for i, name in enumerate(instance.machines)]
    edges = []
    for e in range(instance.n_edges):
        jname, mname = instance.edge_names(e)
        edges.append(
            (jname, mname, instance.capacity[e], instance.rank_at_job[e], instance.rank_at_machine[e])
        )
    for m, mname in enumerate(instance.machines):
        edges.append((dummy, mname, max_quota, m + 1, len(instance.machine_edges[m]) + 1))
    extended = build_instance(jobs, machines, edges)
    values = [x[e] for e in range(instance.n_edges)]
    for m in range(instance.n_machines):
        values.append(instance.machine_quota[m] - x.machine_total(m))
    return extended, Allocation(extended, values), dummy


def accelerated_phase2(
    instance: Instance,
    x: Allocation,
    *,
    check_invariants: bool = False,
) -> tuple[Allocation, tuple[RoundRecord, ...], Instance]:
    """Clear the remaining type-II blocking edges.

    Requires an input without type-I blocking edges.  Builds the
    dummy-extended instance, swaps the active and passive sides by
    transposition and reruns phase one there; machines stay saturated
    throughout, so the restriction to the original edges is stable.  The
    returned instance is the transposed extension the round records refer
    to.
    """
    if _find_type1(instance, x) is not None:
        raise ValueError("phase two requires an allocation without type-I blocking edges")
    extended, x_ext, _dummy = extend_with_dummy(instance, x)
    swapped = extended.transposed()
    x_swapped = Allocation(swapped, [x_ext[e] for e in range(extended.n_edges)])
    final_swapped, records = accelerated_phase1(
        swapped, x_swapped, check_invariants=check_invariants
    )
    restricted = Allocation(instance, [final_swapped[e] for e in range(instance.n_edges)])
    return restricted, records, swapped


@dataclass
class AcceleratedResult:
    allocation: Allocation
    phase1_rounds: tuple[RoundRecord, ...]
    phase2_rounds: tuple[RoundRecord, ...]
    phase2_instance: Instance

    @property
    def round_count(self) -> int:
        return len(self.phase1_rounds) + len(self.phase2_rounds)

    @property
    def modifications(self) -> int:
        """Elementary single-edge allocation changes over both phases."""
        total = 0
        for record in self.phase1_rounds + self.phase2_rounds:
            total += len(record.walk_edges) + len(record.refusals)
        return total


def accelerated_solve(
    instance: Instance,
    x0: Allocation,
    *,
    check_invariants: bool = False,
) -> AcceleratedResult:
    """Run both phases; the result is stable on the input instance."""
    after_phase1, rounds1 = accelerated_phase1(instance, x0, check_invariants=check_invariants)
    allocation, rounds2, swapped = accelerated_phase2(
        instance, after_phase1, check_invariants=check_invariants
    )
    return AcceleratedResult(
        allocation=allocation,
        phase1_rounds=rounds1,
        phase2_rounds=rounds2,
        phase2_instance=swapped,
    )


def format_round(instance: Instance, record: RoundRecord) -> str:
    """One-line record: walk kind, edge list, amount, off-walk refusals."""
    kind = "cycle" if record.is_cycle else "walk"
    parts = [
        f"round kind={kind}",
        f"start {instance.machines[record.start_machine]}",
        f"amount {format_rational(record.amount)}",
    ]
    walk = " , ".join("%s %s" % instance.edge_names(e) for e in record.walk_edges)
    parts.append(f"edges {walk}")
    for e, cut in record.refusals:
        jname, mname = instance.edge_names(e)
        parts.append(f"refuse {jname} {mname} {format_rational(cut)}")
    return " ; ".join(parts)
