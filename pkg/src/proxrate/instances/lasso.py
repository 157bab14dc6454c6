"""Random Lasso instances 1/2 |Ax - b|^2 + lam |x|_1 with a planted sparse signal."""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property
from typing import Optional

import numpy as np

from ..analysis import Reference
from ..exceptions import ParameterError
from ..problem import CompositeProblem, L1Norm, LeastSquares
from ..rng import CounterStream
from .lipschitz import lipschitz_estimate

LIPSCHITZ_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class LassoInstance:
    A: np.ndarray
    b: np.ndarray
    lam: float
    L: float
    planted: Optional[np.ndarray] = None
    reference: Optional[Reference] = None

    @property
    def shape(self):
        return self.A.shape

    @cached_property
    def problem(self) -> CompositeProblem:
        return CompositeProblem(LeastSquares(self.A, self.b, self.L), L1Norm(self.lam),
                                self.A.shape[1])

    def with_reference(self, reference: Reference) -> "LassoInstance":
        return replace(self, reference=reference)


def gen_random_lasso(m: int, d: int, sparsity: int, noise_sigma: float, lam: float,
                     seed: int) -> LassoInstance:
    """Draw a Lasso instance from the Philox stream keyed by ``seed``.

    Draw order: ``A`` (m*d normals, row-major, scaled by 1/sqrt(m)), the support
    (partial Fisher-Yates, ``sparsity`` uniforms), the signs (``sparsity``
    uniforms, ``u < 1/2`` is negative), then ``m`` noise normals.
    """
    if m < 1 or d < 1:
        raise ParameterError(f"need m, d >= 1, got m={m}, d={d}")
    if not 1 <= sparsity <= d:
        raise ParameterError(f"sparsity must lie in [1, {d}], got {sparsity}")
    if not noise_sigma >= 0:
        raise ParameterError(f"noise_sigma must be nonnegative, got {noise_sigma}")
    if not lam > 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    stream = CounterStream(seed)
    A = stream.normal(m * d).reshape(m, d) / np.sqrt(m)
    support = stream.sample_without_replacement(d, sparsity)
    signs = np.where(stream.uniform(sparsity) < 0.5, -1.0, 1.0)
    planted = np.zeros(d)
    planted[support] = signs
    b = A @ planted + noise_sigma * stream.normal(m)
    L = lipschitz_estimate(A, d, tol=LIPSCHITZ_TOL, seed=seed)
    for arr in (A, b, planted):
        arr.setflags(write=False)
    return LassoInstance(A=A, b=b, lam=float(lam), L=L, planted=planted)
