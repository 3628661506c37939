"""Single response steps and the seeded random-process engine.

Jobs are the active side.  A step raises the value on one of the acting
job's blocking edges by the largest amount a single myopic change can
reach, then both endpoints restore feasibility by shedding allocation from
their worst edges.  Every edge that loses value is dominated by the chosen
edge at the endpoint that sheds it, so the acting job strictly improves
its lexicographic position and the machine never loses on edges it
prefers to the chosen one.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .blocking import blocking_snapshot, dominated_value, is_blocking
from .core import JOB, MACHINE, Allocation, Instance, check_feasible, worst_allocated

STABLE = "stable"
BUDGET_EXHAUSTED = "budget_exhausted"
CYCLE_DETECTED = "cycle_detected"

RNG_NAME = "python-mt19937"


class NoBlockingEdgeError(ValueError):
    pass


class NotBlockingError(ValueError):
    pass


class ScriptError(ValueError):
    """A scripted choice was not a valid blocking choice at its turn."""

    def __init__(self, index: int, message: str):
        self.index = index
        super().__init__(f"script step {index}: {message}")


@dataclass(frozen=True)
class Step:
    """One myopic change: the chosen edge gains, dominated edges shed.

    Refusals list (edge, decrement) pairs, the acting job's side first,
    each side worst rank first.
    """

    job: int
    edge: int
    amount: Fraction
    refusals: tuple[tuple[int, Fraction], ...]
    kind: str = "better"


@dataclass(frozen=True)
class RandomPolicy:
    """Seeded driver configuration for run_random.

    Cycle detection hashes the canonical rational encoding of every visited
    allocation; past state_cap stored digests it degrades to budget-only.
    """

    mode: str
    seed: int
    budget: int
    cycle_detection: bool = True
    state_cap: int = 50_000
    record_steps: bool = True
    generator: str = RNG_NAME

    def __post_init__(self):
        if self.mode not in ("better", "best"):
            raise ValueError(f"unknown dynamics mode {self.mode!r}")
        if self.budget <= 0:
            raise ValueError("step budget must be positive")


@dataclass
class Trace:
    """A run's record; replaying steps from the initial allocation must
    reproduce the terminal allocation exactly (when steps are recorded)."""

    instance: Instance
    initial: Allocation
    steps: tuple[Step, ...] | None
    final: Allocation
    reason: str
    step_count: int
    policy: RandomPolicy | None = None


def state_digest(x: Allocation) -> int:
    """Deterministic cross-platform digest of the exact allocation state."""
    h = hashlib.blake2b(digest_size=8)
    for v in x.key():
        h.update(b"%d/%d;" % v)
    return int.from_bytes(h.digest(), "big")


def response_amount(instance: Instance, x: Allocation, e: int) -> Fraction:
    """Largest increase a single myopic change can place on edge e.

    The job offers its free quota plus everything on worse edges; the edge
    cannot exceed its capacity; the machine accepts free quota plus
    whatever sits on edges it ranks below e.
    """
    j = instance.edge_job[e]
    m = instance.edge_machine[e]
    job_side = instance.job_quota[j] - x.job_total(j) + dominated_value(instance, x, e, JOB)
    machine_side = (
        instance.machine_quota[m]
        - x.machine_total(m)
        + dominated_value(instance, x, e, MACHINE)
    )
    return min(job_side, instance.capacity[e] - x[e], machine_side)


def _shed_overflow(
    instance: Instance, x: Allocation, side: str, v: int, skip: int
) -> list[tuple[int, Fraction]]:
    """Refuse from worst allocated edges until the quota holds again."""
    overflow = x.vertex_total(side, v) - instance.quota(side, v)
    refusals: list[tuple[int, Fraction]] = []
    if overflow <= 0:
        return refusals
    for e in reversed(instance.edges_at(side, v)):
        if e == skip or not x[e]:
            continue
        cut = min(x[e], overflow)
        x.add(e, -cut)
        refusals.append((e, cut))
        overflow -= cut
        if not overflow:
            break
    if overflow:
        raise AssertionError("feasibility could not be restored; amount formula is wrong")
    return refusals


def _apply_response(instance: Instance, x: Allocation, e: int, kind: str) -> tuple[Allocation, Step]:
    amount = response_amount(instance, x, e)
    out = x.copy()
    out.add(e, amount)
    j = instance.edge_job[e]
    m = instance.edge_machine[e]
    refusals = _shed_overflow(instance, out, JOB, j, e)
    refusals += _shed_overflow(instance, out, MACHINE, m, e)
    return out, Step(job=j, edge=e, amount=amount, refusals=tuple(refusals), kind=kind)


def better_response_step(
    instance: Instance, x: Allocation, job: str, edge: int
) -> tuple[Allocation, Step]:
    """Myopic change along one chosen blocking edge of the job."""
    side, j = instance.vertex(job)
    if side != JOB:
        raise ValueError(f"{job!r} is a machine, not a job")
    if instance.edge_job[edge] != j:
        raise NotBlockingError(f"edge {instance.edge_names(edge)} is not incident to {job}")
    if not is_blocking(instance, x, edge):
        raise NotBlockingError(f"edge {instance.edge_names(edge)} does not block the allocation")
    return _apply_response(instance, x, edge, "better")


def best_response_step(instance: Instance, x: Allocation, job: str) -> tuple[Allocation, Step]:
    """Myopic change along the job's best-ranked blocking edge."""
    side, j = instance.vertex(job)
    if side != JOB:
        raise ValueError(f"{job!r} is a machine, not a job")
    for e in instance.job_edges[j]:
        if is_blocking(instance, x, e):
            return _apply_response(instance, x, e, "best")
    raise NoBlockingEdgeError(f"job {job} has no blocking edge")


def run_random(instance: Instance, x0: Allocation, policy: RandomPolicy) -> Trace:
    """Uniformly pick an active job (and, for better dynamics, one of its
    blocking edges) until stability, the budget, or a repeated state."""
    rng = random.Random(policy.seed)
    x = x0.copy()
    steps: list[Step] | None = [] if policy.record_steps else None
    count = 0
    seen: set[int] | None = None
    if policy.cycle_detection:
        seen = {state_digest(x)}
    reason = BUDGET_EXHAUSTED
    while True:
        per_job = blocking_snapshot(instance, x)
        active = [j for j, edges in enumerate(per_job) if edges]
        if not active:
            reason = STABLE
            break
        if count >= policy.budget:
            reason = BUDGET_EXHAUSTED
            break
        j = active[rng.randrange(len(active))]
        if policy.mode == "best":
            e = per_job[j][0]
        else:
            e = per_job[j][rng.randrange(len(per_job[j]))]
        x, step = _apply_response(instance, x, e, policy.mode)
        count += 1
        if steps is not None:
            steps.append(step)
        if seen is not None:
            digest = state_digest(x)
            if digest in seen:
                reason = CYCLE_DETECTED
                break
            if len(seen) < policy.state_cap:
                seen.add(digest)
    return Trace(
        instance=instance,
        initial=x0.copy(),
        steps=tuple(steps) if steps is not None else None,
        final=x,
        reason=reason,
        step_count=count,
        policy=policy,
    )


def _improvement1_amount(instance: Instance, x: Allocation, e: int) -> tuple[Fraction, int, int | None]:
    """Phase-style amount for a type-I edge: bounded by the job's own worst
    edge even when free quota remains (quotas act as frozen)."""
    j = instance.edge_job[e]
    m = instance.edge_machine[e]
    rj = worst_allocated(instance, x, JOB, j)
    if rj is None:
        raise NotBlockingError("type-I step needs a positively allocated worse edge")
    resid_cap = instance.capacity[e] - x[e]
    machine_free = instance.machine_quota[m] - x.machine_total(m)
    if machine_free > 0:
        return min(x[rj], resid_cap, machine_free), rj, None
    rm = worst_allocated(instance, x, MACHINE, m)
    return min(x[rj], resid_cap, x[rm]), rj, rm


def apply_improvement1(instance: Instance, x: Allocation, e: int) -> tuple[Allocation, Step]:
    """One reassignment step along a type-I blocking edge: the job sheds
    from its worst edge; a full machine sheds from its own worst edge."""
    amount, rj, rm = _improvement1_amount(instance, x, e)
    out = x.copy()
    out.add(e, amount)
    out.add(rj, -amount)
    refusals = [(rj, amount)]
    if rm is not None:
        out.add(rm, -amount)
        refusals.append((rm, amount))
    return out, Step(
        job=instance.edge_job[e], edge=e, amount=amount, refusals=tuple(refusals), kind="improve1"
    )


def replay_script(
    instance: Instance,
    x0: Allocation,
    script: Sequence[tuple[str, str]],
    mode: str = "better",
) -> Trace:
    """Deterministic replay of scripted (job, machine) choices.

    Modes: "better" applies the maximal myopic change at the scripted
    edge; "best" applies the job's best response and errors if the
    scripted edge is not its best blocking edge; "improve1" applies the
    type-I reassignment step (worst-edge for worst-edge).
    """
    if mode not in ("better", "best", "improve1"):
        raise ValueError(f"unknown replay mode {mode!r}")
    x = x0.copy()
    steps: list[Step] = []
    seen = {state_digest(x)}
    cycled = False
    for i, (jname, mname) in enumerate(script):
        try:
            e = instance.edge_id(jname, mname)
        except ValueError as exc:
            raise ScriptError(i, str(exc)) from exc
        if not is_blocking(instance, x, e):
            raise ScriptError(i, f"edge {jname}-{mname} does not block the current allocation")
        if mode == "best":
            x, step = best_response_step(instance, x, jname)
            if step.edge != e:
                chosen = "-".join(instance.edge_names(step.edge))
                raise ScriptError(i, f"{jname}-{mname} is not the best blocking edge ({chosen} is)")
        elif mode == "improve1":
            x, step = apply_improvement1(instance, x, e)
        else:
            x, step = better_response_step(instance, x, jname, e)
        steps.append(step)
        digest = state_digest(x)
        if digest in seen:
            cycled = True
        seen.add(digest)
    per_job = blocking_snapshot(instance, x)
    if not any(per_job):
        reason = STABLE
    elif cycled:
        reason = CYCLE_DETECTED
    else:
        reason = BUDGET_EXHAUSTED
    return Trace(
        instance=instance,
        initial=x0.copy(),
        steps=tuple(steps),
        final=x,
        reason=reason,
        step_count=len(steps),
    )


def verify_better_step(instance: Instance, before: Allocation, step: Step) -> None:
    """Assert the generic validity of any myopic step: the chosen edge
    blocked, the amount is positive, every refusal hits an edge dominated
    by the chosen edge at the shedding endpoint, and the result is
    feasible.  Raises AssertionError with a description otherwise."""
    if step.amount <= 0:
        raise AssertionError("step amount is not positive")
    if not is_blocking(instance, before, step.edge):
        raise AssertionError("chosen edge did not block the previous allocation")
    e = step.edge
    j = instance.edge_job[e]
    m = instance.edge_machine[e]
    after = before.copy()
    after.add(e, step.amount)
    for refused, cut in step.refusals:
        if cut <= 0:
            raise AssertionError("refusal amount is not positive")
        if refused == e:
            raise AssertionError("the chosen edge cannot refuse itself")
        if instance.edge_job[refused] == j:
            side, v = JOB, j
        elif instance.edge_machine[refused] == m:
            side, v = MACHINE, m
        else:
            raise AssertionError("refused edge is not incident to the step's endpoints")
        if instance.rank(side, e) >= instance.rank(side, refused):
            raise AssertionError("refused edge is not dominated by the chosen edge")
        after.add(refused, -cut)
    if check_feasible(instance, after):
        raise AssertionError("step result is infeasible")


def verify_best_step(instance: Instance, before: Allocation, step: Step) -> None:
    """Assert the step is exactly the acting job's best response."""
    verify_better_step(instance, before, step)
    jname = instance.jobs[step.job]
    expected_x, expected = best_response_step(instance, before, jname)
    if expected.edge != step.edge or expected.amount != step.amount:
        raise AssertionError("step is not the job's best response")
    replayed = before.copy()
    replayed.add(step.edge, step.amount)
    for refused, cut in step.refusals:
        replayed.add(refused, -cut)
    if replayed != expected_x:
        raise AssertionError("refusals differ from the best response refusals")
