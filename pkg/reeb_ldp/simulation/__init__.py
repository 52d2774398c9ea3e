from .brownian import BrownianReport, OracleParams, brownian_saddle_oracle
from .ldp_verify import (
    TubeEstimate,
    TubeExperiment,
    escape_extremum_probe,
    estimate_tube,
    fit_rate,
    quadratic_variation_check,
)
from .saddle_chart import SaddleChart, build_saddle_chart, exit_time_ode, transit_time
from .sde_sim import SimulationConfig, TrajectoryRecord, integrate_flow, simulate, simulate_batch
