"""Euler-Maruyama simulation of SDEs driven by G-Brownian motion."""

from .gshock import (
    GPath,
    PathBatch,
    ScenarioPolicy,
    SublinearEstimate,
    TimeGrid,
    VolatilityBand,
    generate_path,
    generate_paths,
    ito_sum,
    make_grid,
    refine_couple,
    sublinear_expect,
)
from .problem import SdeProblem, ValidationReport, builtin, validate
from .emsolver import (
    EmSolution,
    SolverFailure,
    coupled_solve,
    em_solve,
    em_step,
    sup_square_diff,
    sup_square_norm,
)
from .bounds import (
    BoundSet,
    bound_set,
    bound_table,
    moment_constants,
    increment_constant,
    strong_error_bound,
)

__version__ = "0.1.0"
