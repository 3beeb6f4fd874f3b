"""divgrid: exact solvers and diagnostics for div v = F on grid domains."""

from .core import (
    GRAPH,
    MESH,
    Constants,
    GridDomain,
    boundary_distance,
    build_domain,
    divergence,
    gradient,
    graph_distance,
    point_boundary_distance,
    sobolev_constants,
    total_variation,
)
from .flows import (
    ChebyshevSolution,
    FlowSolution,
    PencilDecomposition,
    chebyshev_solve,
    decompose_pencil,
    gale_hoffman_brute,
    min_cost_flow,
)
from .measures import (
    AtomicMeasure,
    KochSpec,
    dipole,
    empty_measure,
    eta,
    koch_curve,
    measure_stats,
    mz_norm_above,
    rasterize,
    upper_regularity_profile,
    weight_by,
)
from .norms import (
    GridFunction,
    RadialProfile,
    WeakLqProfile,
    ball_indicator,
    cheeger_constant,
    classify_weak,
    epsilon_q,
    free_norm,
    log_damped_power,
    poincare_bracket,
    power_decay,
    sch_norm,
    truncation_approximant,
)
from .whitney import (
    BumpSpec,
    Partition,
    ScatteredSet,
    bump,
    bump_derivative,
    greedy_scattered,
    partition_of_unity,
)

__version__ = "0.1.0"
