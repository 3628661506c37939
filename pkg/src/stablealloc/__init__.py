"""Stable allocation markets: exact data model, blocking analysis,
better/best response dynamics, and deterministic paths to stability."""

from .accelerated import (
    AcceleratedResult,
    AlternatingWalk,
    HelperGraph,
    accelerated_phase1,
    accelerated_phase2,
    accelerated_solve,
    augment,
    build_helper,
    find_walk,
    update_helper,
)
from .blocking import (
    BlockKind,
    BlockingReport,
    blocking_edges,
    classify_best_response,
    dominates_at,
    is_blocking,
)
from .core import (
    Allocation,
    Instance,
    InvalidInstanceError,
    VertexView,
    build_instance,
    check_feasible,
    format_rational,
    parse_rational,
    total_value,
    validate_instance,
    vertex_view,
)
from .dynamics import (
    BUDGET_EXHAUSTED,
    CYCLE_DETECTED,
    STABLE,
    RandomPolicy,
    Step,
    Trace,
    best_response_step,
    better_response_step,
    replay_script,
    run_random,
)
from .fileio import ParseError, parse_instance, serialize, write_trace
from .generators import GeneratorSpec, generate
from .solvers import (
    BetterPotential,
    GlobalRanking,
    LexPosition,
    NotCorrelatedError,
    derive_global_ranking,
    is_stable,
    lex_position,
    potential_better,
    solve_correlated,
    two_phase_best,
    two_phase_better,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
