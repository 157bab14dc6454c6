"""Power-iteration estimate of the gradient Lipschitz constant of 1/2 |Ax - b|^2."""

from __future__ import annotations

import logging

import numpy as np
from scipy.sparse.linalg import aslinearoperator

from ..exceptions import EstimationError, ParameterError
from ..rng import CounterStream

logger = logging.getLogger(__name__)


def lipschitz_estimate(operator, d: int, tol: float = 1e-12, max_iters: int = 100_000,
                       seed: int = 0) -> float:
    """Upper estimate of the largest eigenvalue of ``A^T A``.

    Runs power iteration on ``A^T A`` from a seeded normal vector until the
    Rayleigh quotient changes by less than ``tol`` relative, then returns the
    quotient inflated by ``1 + 10 tol`` so that ``s = 1/L`` stays a valid step.
    With a small spectral gap the quotient keeps creeping up after its change
    drops below ``tol``, so iteration also continues until the geometric tail
    ``change * q / (1 - q)`` (``q`` the ratio of successive changes) is below
    ``tol`` too.
    """
    if not tol > 0:
        raise ParameterError(f"tol must be positive, got {tol}")
    op = aslinearoperator(operator)
    if op.shape[1] != d:
        raise ParameterError(f"operator has {op.shape[1]} columns, expected {d}")
    v = CounterStream(seed).normal(d)
    v /= np.linalg.norm(v)
    previous = None
    last_change = None
    for it in range(1, max_iters + 1):
        w = op.rmatvec(op.matvec(v))
        rayleigh = float(v @ w)
        if previous is not None:
            change = abs(rayleigh - previous)
            scale = tol * abs(rayleigh)
            if change < scale and _tail_small(change, last_change, scale, rayleigh):
                logger.debug("power iteration converged after %d steps", it)
                return rayleigh * (1.0 + 10.0 * tol)
            last_change = change
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0:
            raise ParameterError("operator annihilates the start vector; A^T A looks zero")
        v = w / norm_w
        previous = rayleigh
    raise EstimationError(f"power iteration did not converge in {max_iters} steps",
                          estimate=previous)


def _tail_small(change, last_change, scale, rayleigh):
    if change <= 8 * np.finfo(float).eps * abs(rayleigh):
        return True
    if not last_change:
        return False
    q = change / last_change
    return q < 1.0 and change * q / (1.0 - q) < scale
