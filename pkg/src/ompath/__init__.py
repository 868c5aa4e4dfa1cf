"""Most probable transition paths for SDEs with time-varying noise.

The pieces, in dependency order: :mod:`ompath.model` (SDE models and
discrete paths), :mod:`ompath.holder` (path norms), :mod:`ompath.om`
(the path action and its gradient), :mod:`ompath.optimize` (action
minimization and the Euler-Lagrange boundary value problem),
:mod:`ompath.simulate` (Euler-Maruyama ensembles), :mod:`ompath.tube`
(tube probabilities and the ratio law), :mod:`ompath.cli` (the
``ompath`` command).
"""

from .model import (
    BUILTIN_MODEL_NAMES,
    ContractViolation,
    DiscretePath,
    SdeModel,
    builtin_model,
    check_model,
    eval_diffusion,
    eval_drift,
    eval_drift_jacobian,
    linear_path,
    uniform_grid,
)
from .holder import (
    HolderParams,
    holder_distance,
    holder_norm,
    holder_seminorm,
    sup_norm,
)
from .om import (
    OmEvaluation,
    SingularMatrixError,
    discrete_velocity,
    divergence_term,
    jacobian_trace,
    mat_inverse,
    om_functional,
    om_integrand,
    om_path_gradient,
    om_value_and_gradient,
    similarity_trace,
)
from .optimize import (
    NoConvergence,
    OptimizeResult,
    OptimizerConfig,
    euler_lagrange_residual,
    euler_lagrange_rhs_example1,
    minimize_om,
    solve_el_bvp,
    solve_el_relaxation,
)
from .simulate import (
    SimulationDiverged,
    SimulationSpec,
    euler_maruyama,
    sample_paths,
    simulate_ensemble,
)
from .tube import (
    LadderPoint,
    RatioCheck,
    TubeEstimate,
    TubeQuery,
    om_ratio_check,
    om_ratio_ladder,
    tube_probability,
)

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_MODEL_NAMES",
    "ContractViolation",
    "DiscretePath",
    "HolderParams",
    "LadderPoint",
    "NoConvergence",
    "OmEvaluation",
    "OptimizeResult",
    "OptimizerConfig",
    "RatioCheck",
    "SdeModel",
    "SimulationDiverged",
    "SimulationSpec",
    "SingularMatrixError",
    "TubeEstimate",
    "TubeQuery",
    "builtin_model",
    "check_model",
    "discrete_velocity",
    "divergence_term",
    "euler_lagrange_residual",
    "euler_lagrange_rhs_example1",
    "euler_maruyama",
    "eval_diffusion",
    "eval_drift",
    "eval_drift_jacobian",
    "holder_distance",
    "holder_norm",
    "holder_seminorm",
    "jacobian_trace",
    "linear_path",
    "mat_inverse",
    "minimize_om",
    "om_functional",
    "om_integrand",
    "om_path_gradient",
    "om_ratio_check",
    "om_ratio_ladder",
    "om_value_and_gradient",
    "sample_paths",
    "similarity_trace",
    "simulate_ensemble",
    "solve_el_bvp",
    "solve_el_relaxation",
    "sup_norm",
    "tube_probability",
    "uniform_grid",
    "__version__",
]
