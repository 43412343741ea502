"""Polyak stepsizes viewed as gradient descent on a surrogate loss.

Modules:

* :mod:`.problems` -- function oracles and the problem catalog,
* :mod:`.surrogates` -- h-transforms and the surrogate psi = h^2 / 2,
* :mod:`.steppers` -- update rules and the trajectory runner,
* :mod:`.diagnostics` -- inequality certificates and run audits,
* :mod:`.counterexamples` -- non-convergence constructions,
* :mod:`.harness` -- configuration, persistence and reproductions.
"""

__version__ = "0.1.0"

from .exceptions import ConfigurationError, ContractError, DomainError
from .problems import (
    FunctionOracle,
    PropertyConstants,
    StochasticProblem,
    get_problem,
    problem_names,
    zoo,
)
from .steppers import (
    StepRecord,
    Trajectory,
    eta_rewrite_check,
    generalized_step,
    map_T,
    parse_stepper,
    polyak_step,
    run,
    surrogate_gd_step,
)
from .surrogates import (
    Hinge,
    LowerBound,
    ShiftByOpt,
    SurrogateFamily,
    SurrogateSpec,
    build_family,
    make_surrogate,
)

__all__ = [
    "ConfigurationError",
    "ContractError",
    "DomainError",
    "FunctionOracle",
    "Hinge",
    "LowerBound",
    "PropertyConstants",
    "ShiftByOpt",
    "StepRecord",
    "StochasticProblem",
    "SurrogateFamily",
    "SurrogateSpec",
    "Trajectory",
    "build_family",
    "eta_rewrite_check",
    "generalized_step",
    "get_problem",
    "make_surrogate",
    "map_T",
    "parse_stepper",
    "polyak_step",
    "problem_names",
    "run",
    "surrogate_gd_step",
    "zoo",
]
