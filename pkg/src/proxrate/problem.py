"""Composite objectives Phi = f + g built from smooth and nonsmooth oracles.

A smooth oracle supplies ``value``, ``gradient`` and a Lipschitz constant of
the gradient; a nonsmooth oracle supplies ``value`` and ``scaled_prox(t, z)``,
the minimizer of ``|u - z|^2 / (2t) + g(u)``.  Any object with these members
plugs into :class:`CompositeProblem`; the concrete oracles below cover the
least-squares / l1 instances used throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from .exceptions import DimensionError, ParameterError
from .prox import soft_threshold


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@runtime_checkable
class SmoothOracle(Protocol):
    lipschitz: float

    def value(self, x: np.ndarray) -> float: ...

    def gradient(self, x: np.ndarray) -> np.ndarray: ...


@runtime_checkable
class NonsmoothOracle(Protocol):
    def value(self, x: np.ndarray) -> float: ...

    def scaled_prox(self, t: float, z: np.ndarray) -> np.ndarray: ...


class LeastSquares:
    """f(x) = 1/2 ||A x - b||^2 for a dense matrix or a matrix-free operator.

    Parameters
    ----------
    A : ndarray or scipy.sparse.linalg.LinearOperator
        Forward map of shape (m, d).  Operators must implement ``rmatvec``.
    b : ndarray
        Observation, shape (m,).
    lipschitz : float, optional
        Upper bound on the largest eigenvalue of A^T A.  Computed exactly
        from the singular values when ``A`` is dense and this is omitted.
    """

    def __init__(self, A, b, lipschitz: float | None = None):
        if isinstance(A, LinearOperator):
            self.A = A
            self._dense = False
        else:
            self.A = _frozen(A)
            if self.A.ndim != 2:
                raise DimensionError(f"A must be 2-D, got shape {self.A.shape}")
            self._dense = True
        self.b = _frozen(b).reshape(-1)
        if self.A.shape[0] != self.b.shape[0]:
            raise DimensionError(
                f"A has {self.A.shape[0]} rows but b has {self.b.shape[0]} entries")
        if lipschitz is None:
            if not self._dense:
                raise ParameterError("lipschitz is required for matrix-free operators")
            lipschitz = float(np.linalg.norm(self.A, 2)) ** 2
        if not lipschitz > 0:
            raise ParameterError(f"lipschitz must be positive, got {lipschitz}")
        self.lipschitz = float(lipschitz)

    @property
    def dimension(self) -> int:
        return self.A.shape[1]

    def residual(self, x):
        if self._dense:
            return self.A @ x - self.b
        return self.A.matvec(x) - self.b

    def value(self, x):
        r = self.residual(x)
        return 0.5 * float(r @ r)

    def gradient(self, x):
        r = self.residual(x)
        if self._dense:
            return self.A.T @ r
        return self.A.rmatvec(r)

    def as_operator(self) -> LinearOperator:
        return aslinearoperator(self.A)


class Quadratic:
    """f(x) = 1/2 x^T Q x - q^T x with Q symmetric positive semidefinite."""

    def __init__(self, Q, q, lipschitz: float | None = None):
        self.Q = _frozen(Q)
        self.q = _frozen(q).reshape(-1)
        if self.Q.shape != (self.q.size, self.q.size):
            raise DimensionError(f"Q has shape {self.Q.shape}, q has {self.q.size} entries")
        if lipschitz is None:
            lipschitz = float(np.max(np.linalg.eigvalsh(self.Q)))
        self.lipschitz = float(lipschitz)

    @property
    def dimension(self) -> int:
        return self.q.size

    def value(self, x):
        return 0.5 * float(x @ (self.Q @ x)) - float(self.q @ x)

    def gradient(self, x):
        return self.Q @ x - self.q


class SquaredDistance:
    """f(x) = (weight / 2) ||x - center||^2, whose gradient is weight-Lipschitz."""

    def __init__(self, center, weight: float = 1.0):
        self.center = _frozen(np.atleast_1d(center))
        if not weight > 0:
            raise ParameterError(f"weight must be positive, got {weight}")
        self.weight = float(weight)
        self.lipschitz = self.weight

    @property
    def dimension(self) -> int:
        return self.center.size

    def value(self, x):
        r = x - self.center
        return 0.5 * self.weight * float(r @ r)

    def gradient(self, x):
        return self.weight * (x - self.center)


class ZeroFunction:
    """g = 0; its scaled prox is the identity."""

    def value(self, x):
        return 0.0

    def scaled_prox(self, t, z):
        return z


class L1Norm:
    """g(x) = lam * ||x||_1 with the soft-thresholding prox."""

    def __init__(self, lam: float):
        if not lam >= 0:
            raise ParameterError(f"l1 weight must be nonnegative, got {lam}")
        self.lam = float(lam)

    def value(self, x):
        return self.lam * float(np.sum(np.abs(x)))

    def scaled_prox(self, t, z):
        return soft_threshold(z, self.lam * t)


@dataclass(frozen=True)
class CompositeProblem:
    """Phi(x) = smooth.value(x) + nonsmooth.value(x) on R^dimension."""

    smooth: SmoothOracle
    nonsmooth: NonsmoothOracle
    dimension: int

    def __post_init__(self):
        if int(self.dimension) < 1:
            raise DimensionError(f"dimension must be positive, got {self.dimension}")

    @property
    def lipschitz(self) -> float:
        return self.smooth.lipschitz

    def check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dimension,):
            raise DimensionError(
                f"expected a vector of length {self.dimension}, got shape {x.shape}")
        return x

    def value(self, x) -> float:
        return self.smooth.value(x) + self.nonsmooth.value(x)


def objective(problem: CompositeProblem, x) -> float:
    """Evaluate Phi(x) = f(x) + g(x)."""
    return problem.value(problem.check(x))


def quadratic_approx(problem: CompositeProblem, s: float, x, y) -> float:
    """Q_s(x, y) = f(y) + <grad f(y), x - y> + |x - y|^2 / (2s) + g(x).

    For ``s = 1/L`` this majorizes Phi(x) for every ``y``.
    """
    if not s > 0:
        raise ParameterError(f"step size must be positive, got {s}")
    x = problem.check(x)
    y = problem.check(y)
    f = problem.smooth
    diff = x - y
    return (f.value(y) + float(f.gradient(y) @ diff) + float(diff @ diff) / (2.0 * s)
            + problem.nonsmooth.value(x))
