"""Dynamics, steady states and stability of an Endex carboniser/calciner pair."""

__version__ = "0.1.0"

from .continuation import (  # noqa: E402
    Branch,
    ParamRef,
    SingularPoint,
    SteadyStateRecord,
    detect_singularities,
    solve_steady,
    trace_branch,
    trace_fold_locus,
)
from .model import (  # noqa: E402
    CarboniserState,
    DomainError,
    EndexState,
    endex_rhs,
    standalone_rhs,
)
from .numerics import (  # noqa: E402
    ConvergenceError,
    StiffnessError,
    Trajectory,
    classify,
    eigenvalues,
    integrate,
    newton_solve,
)
from .params import ModelParams, ParameterError, default_params  # noqa: E402

__all__ = [
    "Branch",
    "CarboniserState",
    "ConvergenceError",
    "DomainError",
    "EndexState",
    "ModelParams",
    "ParamRef",
    "ParameterError",
    "SingularPoint",
    "SteadyStateRecord",
    "StiffnessError",
    "Trajectory",
    "classify",
    "default_params",
    "detect_singularities",
    "eigenvalues",
    "endex_rhs",
    "integrate",
    "newton_solve",
    "solve_steady",
    "standalone_rhs",
    "trace_branch",
    "trace_fold_locus",
]
