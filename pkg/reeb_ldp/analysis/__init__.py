from .action_functional import (
    ActionValue,
    MinActionResult,
    evaluate_action,
    minimize_action,
    tube_infimum_action,
    zero_speed_at_exterior_vertex_check,
)
from .averaged_coeffs import (
    EdgeCoefficientTable,
    coeff_lookup,
    compute_coeffs,
    tabulate_edge,
    tabulate_graph,
    trace_level_curve,
)
from .hamiltonian_field import (
    CriticalPoint,
    HamiltonianSystem,
    builtin_system,
    check_assumptions,
    evaluate,
    find_critical_points,
    positive_drift_margin,
    system_from_config,
)
from .reeb_graph import (
    GraphPath,
    GraphPoint,
    ReebGraph,
    build_reeb_graph,
    graph_distance,
    path_distance,
    project,
    project_trajectory,
)
