"""Proximal gradient methods with proximal-subgradient-norm rate certificates."""

from .exceptions import (DimensionError, DivergenceError, EstimationError, FormatError,
                         HypothesisError, ParameterError, PartialReferenceWarning,
                         ProxRateError, ReferenceQualityError, UndefinedBoundError)
from .problem import (CompositeProblem, L1Norm, LeastSquares, Quadratic, SquaredDistance,
                      ZeroFunction, objective, quadratic_approx)
from .prox import (KeyInequalityReport, check_key_inequality, prox_pair, proximal_step,
                   proximal_subgradient, soft_threshold)
from .solvers import (Iterate, PhaseState, SolverConfig, Variant, estimate_iterations, run,
                      stop_criterion)
from .analysis import Reference, Trace, trace_run

__version__ = "0.1.0"
