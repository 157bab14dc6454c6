"""Reference minimizers for bound and Lyapunov checks."""

from __future__ import annotations

import math
import warnings

import numpy as np

from ..analysis import Reference
from ..exceptions import ParameterError, PartialReferenceWarning
from ..problem import CompositeProblem
from ..prox import prox_pair
from ..solvers import SolverConfig, Variant, fista_canonical_run

REFERENCE_R = 4.0
REFERENCE_STEP_FRAC = 0.9


def solve_reference(problem: CompositeProblem, target_eps: float = 1e-10, x0=None,
                    max_iters: int = 1_000_000, r: float = REFERENCE_R,
                    step_frac: float = REFERENCE_STEP_FRAC) -> Reference:
    """Run FISTA until ``|G_s(x_k)| <= target_eps`` and return that iterate.

    ``certified_eps`` is the achieved ``|G_s(x_k)|`` at the returned point.  When
    the budget runs out a :class:`PartialReferenceWarning` is issued and the
    last iterate is returned with whatever accuracy it has.
    """
    if not target_eps > 0:
        raise ParameterError(f"target_eps must be positive, got {target_eps}")
    s = step_frac / problem.lipschitz
    config = SolverConfig(s=s, max_iters=max_iters, r=r, variant=Variant.FISTA_CANONICAL)
    x0 = np.zeros(problem.dimension) if x0 is None else problem.check(x0)
    achieved = math.inf
    x = x0
    for it in fista_canonical_run(problem, config, x0):
        x = it.x
        _, g = prox_pair(problem, s, x)
        achieved = math.sqrt(float(g @ g))
        if achieved <= target_eps:
            break
    else:
        warnings.warn(
            f"reference reached |G_s| = {achieved:.3e} > target {target_eps:.1e} "
            f"after {max_iters} iterations", PartialReferenceWarning, stacklevel=2)
    return Reference(np.array(x), problem.value(x), achieved)
