"""Command line front end.

Subcommands: validate, block, step, solve, random, gen.  Exit codes:
0 success, 1 domain error (invalid instance, no blocking edge, market not
correlated), 2 usage or file syntax error.  All output is deterministic
for fixed inputs and seeds.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .accelerated import accelerated_solve, format_round
from .blocking import blocking_edges
from .core import Allocation, InvalidInstanceError, format_rational
from .dynamics import (
    RandomPolicy,
    best_response_step,
    better_response_step,
    run_random,
)
from .fileio import ParseError, parse_instance, serialize, write_trace
from .generators import KINDS, GeneratorSpec, generate
from .solvers import (
    NotCorrelatedError,
    derive_global_ranking,
    solve_correlated,
    two_phase_best,
    two_phase_better,
)

USAGE_ERROR = 2
DOMAIN_ERROR = 1


def _load(path: str):
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    return parse_instance(text)


def _cmd_validate(args) -> int:
    try:
        instance, x = _load(args.file)
    except InvalidInstanceError as exc:
        for error in exc.errors:
            print(error, file=sys.stderr)
        return DOMAIN_ERROR
    summary = f"ok: {instance.n_jobs} jobs, {instance.n_machines} machines, {instance.n_edges} edges"
    if x is not None:
        from .core import check_feasible

        violations = check_feasible(instance, x)
        if violations:
            for violation in violations:
                print(violation, file=sys.stderr)
            return DOMAIN_ERROR
        summary += ", feasible allocation"
    print(summary)
    return 0


def _cmd_block(args) -> int:
    instance, x = _load(args.file)
    if x is None:
        x = Allocation.zero(instance)
    report = blocking_edges(instance, x)
    for e, kind in report.edges:
        jname, mname = instance.edge_names(e)
        print(f"{jname} {mname} {kind.value}")
    return 0


def _parse_edge_option(instance, job: str, text: str) -> int:
    if "," in text:
        jname, mname = text.split(",", 1)
        if jname != job:
            raise ValueError(f"--edge names job {jname!r} but --job is {job!r}")
        return instance.edge_id(jname, mname)
    return instance.edge_id(job, text)


def _cmd_step(args) -> int:
    instance, x = _load(args.file)
    if x is None:
        x = Allocation.zero(instance)
    from .fileio import format_step

    if args.mode == "best":
        new_x, step = best_response_step(instance, x, args.job)
        if args.edge is not None:
            wanted = _parse_edge_option(instance, args.job, args.edge)
            if wanted != step.edge:
                chosen = "-".join(instance.edge_names(step.edge))
                print(f"{args.edge} is not the best blocking edge ({chosen} is)", file=sys.stderr)
                return DOMAIN_ERROR
    else:
        if args.edge is None:
            print("better mode needs --edge", file=sys.stderr)
            return USAGE_ERROR
        edge = _parse_edge_option(instance, args.job, args.edge)
        new_x, step = better_response_step(instance, x, args.job, edge)
    print(format_step(instance, 0, step))
    sys.stdout.write(serialize(instance, new_x))
    return 0


def _cmd_solve(args) -> int:
    instance, x = _load(args.file)
    if x is None:
        x = Allocation.zero(instance)
    trace_out = open(args.trace, "w", encoding="utf-8") if args.trace else None
    try:
        if args.alg == "correlated":
            result = solve_correlated(instance)
            ranking = derive_global_ranking(instance)
            print("# alg=correlated")
            if trace_out:
                for e in ranking.edge_order():
                    jname, mname = instance.edge_names(e)
                    trace_out.write(f"fix {jname} {mname} {format_rational(result[e])}\n")
        elif args.alg == "accel":
            solved = accelerated_solve(instance, x)
            result = solved.allocation
            print(
                f"# alg=accel phase1_rounds={len(solved.phase1_rounds)} "
                f"phase2_rounds={len(solved.phase2_rounds)} "
                f"modifications={solved.modifications}"
            )
            if trace_out:
                for record in solved.phase1_rounds:
                    trace_out.write(format_round(instance, record) + "\n")
                trace_out.write("phase2\n")
                for record in solved.phase2_rounds:
                    trace_out.write(format_round(solved.phase2_instance, record) + "\n")
        else:
            solver = two_phase_better if args.alg == "two-better" else two_phase_best
            trace = solver(instance, x, record_steps=trace_out is not None)
            result = trace.final
            print(f"# alg={args.alg} steps={trace.step_count} reason={trace.reason}")
            if trace_out:
                write_trace(trace, trace_out)
    finally:
        if trace_out:
            trace_out.close()
    sys.stdout.write(serialize(instance, result))
    return 0


def _random_trial(payload) -> tuple[int, int, str]:
    instance, x0, mode, seed, budget = payload
    policy = RandomPolicy(mode=mode, seed=seed, budget=budget, record_steps=False)
    trace = run_random(instance, x0, policy)
    return seed, trace.step_count, trace.reason


def _cmd_random(args) -> int:
    instance, x = _load(args.file)
    if x is None:
        x = Allocation.zero(instance)
    payloads = [
        (instance, x, args.mode, args.seed + i, args.budget) for i in range(args.trials)
    ]
    if args.trials > 1:
        workers = min(args.trials, os.cpu_count() or 1)
        try:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_random_trial, payloads))
        except (OSError, PermissionError):
            results = [_random_trial(p) for p in payloads]
    else:
        results = [_random_trial(p) for p in payloads]
    counts = {"stable": 0, "cycle_detected": 0, "budget_exhausted": 0}
    for i, (seed, steps, reason) in enumerate(results):
        counts[reason] += 1
        print(f"trial {i} seed {seed} steps {steps} reason {reason}")
    print(
        f"summary trials={args.trials} stable={counts['stable']} "
        f"cycle_detected={counts['cycle_detected']} "
        f"budget_exhausted={counts['budget_exhausted']}"
    )
    return 0


def _cmd_gen(args) -> int:
    spec = GeneratorSpec(
        kind=args.kind,
        n=args.n,
        jobs=args.jobs,
        machines=args.machines,
        density=args.density,
        max_quota=args.max_quota,
        max_capacity=args.max_capacity,
        seed=args.seed,
    )
    instance, x = generate(spec)
    text = serialize(instance, x)
    if args.output == "-":
        sys.stdout.write(text)
    else:
        with open(args.output, "w", encoding="utf-8") as handle:
            handle.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stablealloc",
        description="Stable allocation markets: validation, blocking analysis, "
        "response dynamics and paths to stability.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check an instance file")
    p.add_argument("file")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("block", help="list blocking edges of the file's allocation")
    p.add_argument("file")
    p.set_defaults(func=_cmd_block)

    p = sub.add_parser("step", help="apply one response step")
    p.add_argument("file")
    p.add_argument("--job", required=True)
    p.add_argument("--edge", help="machine name, or job,machine")
    p.add_argument("--mode", choices=("better", "best"), required=True)
    p.set_defaults(func=_cmd_step)

    p = sub.add_parser("solve", help="run a path-to-stability solver")
    p.add_argument("file")
    p.add_argument("--alg", choices=("two-better", "two-best", "accel", "correlated"), required=True)
    p.add_argument("--trace", help="write a step/round trace to this file")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("random", help="run seeded random dynamics")
    p.add_argument("file")
    p.add_argument("--mode", choices=("better", "best"), required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--trials", type=int, default=1)
    p.set_defaults(func=_cmd_random)

    p = sub.add_parser("gen", help="write a named or random instance")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--n", type=int, default=1, help="size parameter N for the fixed families")
    p.add_argument("--jobs", type=int, default=4)
    p.add_argument("--machines", type=int, default=4)
    p.add_argument("--density", type=float, default=0.5)
    p.add_argument("--max-quota", type=int, default=3)
    p.add_argument("--max-capacity", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default="-", help="output file, - for stdout")
    p.set_defaults(func=_cmd_gen)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(str(exc), file=sys.stderr)
        return USAGE_ERROR
    except InvalidInstanceError as exc:
        for error in exc.errors:
            print(error, file=sys.stderr)
        return DOMAIN_ERROR
    except (NotCorrelatedError, ValueError) as exc:
        print(str(exc), file=sys.stderr)
        return DOMAIN_ERROR
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
