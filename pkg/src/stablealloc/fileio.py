"""Instance text format and trace emission.

An instance file has up to four sections, each opened by a bare keyword
line.  Values are integers, decimals or "p/q" fractions, all parsed
exactly; "#" starts a comment anywhere on a line.

    JOBS                      # lines: name quota
    j1 1
    MACHINES                  # lines: name quota
    m1 14/5
    EDGES                     # lines: job machine capacity rank@job rank@machine
    j1 m1 1 1 3
    ALLOCATION                # optional lines: job machine value
    j1 m1 4/5

serialize(parse(text)) reproduces the text's content exactly; allocation
lines with value zero are omitted on output.
"""

from __future__ import annotations

from fractions import Fraction
from typing import TextIO

from .core import (
    Allocation,
    Instance,
    build_instance,
    format_rational,
    parse_rational,
)
from .dynamics import Step, Trace

SECTIONS = ("JOBS", "MACHINES", "EDGES", "ALLOCATION")


class ParseError(ValueError):
    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


def parse_instance(text: str) -> tuple[Instance, Allocation | None]:
    """Parse an instance file; returns the allocation when the section exists.

    Syntax problems raise ParseError with the line number; instance
    invariant violations surface as InvalidInstanceError from validation.
    """
    jobs: list[tuple[str, Fraction]] = []
    machines: list[tuple[str, Fraction]] = []
    edges: list[tuple[str, str, Fraction, int, int]] = []
    allocation_rows: list[tuple[int, str, str, Fraction]] = []
    section: str | None = None
    saw_allocation = False
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) == 1 and tokens[0] in SECTIONS:
            section = tokens[0]
            saw_allocation = saw_allocation or section == "ALLOCATION"
            continue
        if section is None:
            raise ParseError(line_no, f"expected a section header, got {line!r}")
        try:
            if section in ("JOBS", "MACHINES"):
                if len(tokens) != 2:
                    raise ValueError("expected: name quota")
                row = (tokens[0], parse_rational(tokens[1]))
                (jobs if section == "JOBS" else machines).append(row)
            elif section == "EDGES":
                if len(tokens) != 5:
                    raise ValueError("expected: job machine capacity rank@job rank@machine")
                edges.append(
                    (
                        tokens[0],
                        tokens[1],
                        parse_rational(tokens[2]),
                        _parse_rank(tokens[3]),
                        _parse_rank(tokens[4]),
                    )
                )
            else:
                if len(tokens) != 3:
                    raise ValueError("expected: job machine value")
                allocation_rows.append((line_no, tokens[0], tokens[1], parse_rational(tokens[2])))
        except ValueError as exc:
            raise ParseError(line_no, str(exc)) from exc
    instance = build_instance(jobs, machines, edges)
    if not saw_allocation:
        return instance, None
    x = Allocation.zero(instance)
    for line_no, jname, mname, value in allocation_rows:
        try:
            e = instance.edge_id(jname, mname)
        except ValueError as exc:
            raise ParseError(line_no, str(exc)) from exc
        if x[e]:
            raise ParseError(line_no, f"duplicate allocation entry for {jname}-{mname}")
        x.add(e, value)
    return instance, x


def _parse_rank(token: str) -> int:
    value = parse_rational(token)
    if value.denominator != 1:
        raise ValueError(f"rank must be an integer, got {token!r}")
    return value.numerator


def serialize(instance: Instance, x: Allocation | None = None) -> str:
    """Canonical text form; exact round trip through parse_instance."""
    lines: list[str] = ["JOBS"]
    for name, quota in zip(instance.jobs, instance.job_quota):
        lines.append(f"{name} {format_rational(quota)}")
    lines.append("MACHINES")
    for name, quota in zip(instance.machines, instance.machine_quota):
        lines.append(f"{name} {format_rational(quota)}")
    lines.append("EDGES")
    for e in range(instance.n_edges):
        jname, mname = instance.edge_names(e)
        lines.append(
            f"{jname} {mname} {format_rational(instance.capacity[e])} "
            f"{instance.rank_at_job[e]} {instance.rank_at_machine[e]}"
        )
    if x is not None:
        lines.append("ALLOCATION")
        for e in range(instance.n_edges):
            if x[e]:
                jname, mname = instance.edge_names(e)
                lines.append(f"{jname} {mname} {format_rational(x[e])}")
    return "\n".join(lines) + "\n"


def format_step(instance: Instance, index: int, step: Step) -> str:
    """One line per step: index, actor, edge, exact amount, refusals."""
    jname, mname = instance.edge_names(step.edge)
    parts = [f"step {index} {jname} {mname} {format_rational(step.amount)} kind={step.kind}"]
    for e, cut in step.refusals:
        rj, rm = instance.edge_names(e)
        parts.append(f"refuse {rj} {rm} {format_rational(cut)}")
    return " ; ".join(parts)


def write_trace(trace: Trace, out: TextIO) -> None:
    """Line-delimited trace: a policy header, one step per line, a footer."""
    out.write("# stablealloc trace\n")
    if trace.policy is not None:
        p = trace.policy
        out.write(
            f"policy mode={p.mode} seed={p.seed} budget={p.budget} "
            f"cycle_detection={'on' if p.cycle_detection else 'off'} rng={p.generator}\n"
        )
    if trace.steps is not None:
        for i, step in enumerate(trace.steps):
            out.write(format_step(trace.instance, i, step) + "\n")
    out.write(f"end reason={trace.reason} steps={trace.step_count}\n")


def read_trace_steps(instance: Instance, text: str) -> list[tuple[int, Step]]:
    """Parse step lines back; used to round-trip traces in tests."""
    steps: list[tuple[int, Step]] = []
    for raw in text.splitlines():
        if not raw.startswith("step "):
            continue
        head, *refusal_parts = [part.strip() for part in raw.split(";")]
        tokens = head.split()
        index = int(tokens[1])
        e = instance.edge_id(tokens[2], tokens[3])
        amount = parse_rational(tokens[4])
        kind = tokens[5].removeprefix("kind=")
        refusals = []
        for part in refusal_parts:
            rt = part.split()
            refusals.append((instance.edge_id(rt[1], rt[2]), parse_rational(rt[3])))
        step = Step(
            job=instance.edge_job[e],
            edge=e,
            amount=amount,
            refusals=tuple(refusals),
            kind=kind,
        )
        steps.append((index, step))
    return steps
