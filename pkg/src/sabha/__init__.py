"""Structure-adaptive Benjamini-Hochberg multiple testing."""

from ._accel import backend
from .complexity import (
    ComplexityReport,
    DependentBoundParams,
    ProductDistribution,
    complexity_report,
    cube_complexity_mc,
    fdr_bound_dependent,
    fdr_bound_independent,
    incidence_rho,
    rad_bound,
    rad_mc,
    rad_mc_points,
)
from .errors import ConvergenceError, DegenerateInputError, InvalidInputError, ParseError, SabhaError
from .optim import (
    AdmmConfig,
    AdmmState,
    Constraint,
    admm_solve,
    operator_norm_sq,
    proj_feasible_G,
    proj_group_mean,
    proj_isotonic,
    proj_l1_ball,
    q_update,
    solve_cubic_branch,
)
from .procedures import (
    MethodConfig,
    RejectionResult,
    WeightVector,
    bh,
    sabha,
    storey_bh,
    storey_pi0,
    verify_weight_constraint,
)
from .simulation import make_dependent_scenario, make_grid_scenario, run_trials
from .stats import paired_t_test, two_sided_z
from .structures import Graph, Grouping, StructureSpec, Variant
from .weights import (
    constant_weights,
    estimate_weights,
    grouped_weights,
    ordered_mle_weights,
    ordered_step_weights,
    sign_grouping,
    tv_l1_weights,
)

__version__ = "0.1.0"
