"""ISTA and FISTA drivers.

All drivers are generators yielding one :class:`Iterate` per index
``k = 0, 1, ..., max_iters``.  Iterate ``k`` carries ``x_k``, ``y_k`` and the
proximal subgradient at the point the method evaluates next (``x_k`` for
ISTA, ``y_k`` for FISTA), so ``x_{k+1} = point_k - s * gs_k``.

The three FISTA drivers compute the same sequence through different
recursions:

* canonical: ``x_k = P_s(y_{k-1})``, ``y_k = x_k + (k-1)/(k+r) (x_k - x_{k-1})``
* gradient correction: position ``y_k`` and velocity ``v_{k-1} = (y_k - y_{k-1})/sqrt(s)``
* implicit velocity: position ``x_k`` and velocity ``v_k = (x_k - x_{k-1})/sqrt(s)``
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

import numpy as np

from .exceptions import DivergenceError, ParameterError
from .problem import CompositeProblem
from .prox import prox_pair


class Variant(str, enum.Enum):
    ISTA = "ista"
    FISTA_CANONICAL = "fista_canonical"
    FISTA_GRADIENT_CORRECTION = "fista_gradient_correction"
    FISTA_IMPLICIT_VELOCITY = "fista_implicit_velocity"

    @property
    def is_fista(self) -> bool:
        return self is not Variant.ISTA


@dataclass(frozen=True)
class SolverConfig:
    s: float
    max_iters: int
    r: float = 2.0
    stop_eps: float = 0.0
    variant: Variant = Variant.ISTA

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if not (self.s > 0 and math.isfinite(self.s)):
            raise ParameterError(f"step size must be positive and finite, got {self.s}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ParameterError(f"max_iters must be a positive integer, got {self.max_iters}")
        if not self.stop_eps >= 0:
            raise ParameterError(f"stop_eps must be nonnegative, got {self.stop_eps}")
        if self.variant.is_fista and not self.r >= 2:
            raise ParameterError(f"FISTA needs momentum parameter r >= 2, got {self.r}")

    def within_hypothesis(self, lipschitz: float, strict: bool = False) -> bool:
        """Whether ``s <= 1/L`` (or ``s < 1/L`` when ``strict``)."""
        bound = 1.0 / lipschitz
        return self.s < bound if strict else self.s <= bound


@dataclass
class PhaseState:
    """Position/velocity pair of a phase-space FISTA driver at index ``k``.

    ``velocity`` is the velocity that moved the previous position to this one:
    ``v_{k-1}`` for gradient correction (position ``y_k``) and ``v_k`` for
    implicit velocity (position ``x_k``).  ``last_subgradient`` is
    ``G_s(y_{k-1})`` for gradient correction and None otherwise.
    """

    position: np.ndarray
    velocity: np.ndarray
    k: int
    last_subgradient: Optional[np.ndarray] = None


@dataclass
class Iterate:
    k: int
    x: np.ndarray
    y: np.ndarray
    gs: np.ndarray
    gs_norm_sq: float
    state: Optional[PhaseState] = None

    @property
    def gs_norm(self) -> float:
        return math.sqrt(self.gs_norm_sq)


def _evaluate(problem, s, point, k, last):
    # overflow is reported as divergence below, not as a numpy warning
    with np.errstate(over="ignore", invalid="ignore"):
        p, g = prox_pair(problem, s, point)
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(g))):
        raise DivergenceError(f"non-finite iterate at step {k}", k=k, last=last)
    return p, g


def _norm_sq(g) -> float:
    with np.errstate(over="ignore"):
        return float(g @ g)


def _stops(config, gs_norm_sq):
    return config.stop_eps > 0 and math.sqrt(gs_norm_sq) < config.stop_eps


def ista_run(problem: CompositeProblem, config: SolverConfig, x0) -> Iterator[Iterate]:
    """Proximal gradient descent ``x_k = P_s(x_{k-1})``."""
    s = config.s
    x = np.array(problem.check(x0), dtype=np.float64)
    last = None
    for k in range(config.max_iters + 1):
        p, g = _evaluate(problem, s, x, k, last)
        last = Iterate(k, x, x, g, _norm_sq(g))
        yield last
        if _stops(config, last.gs_norm_sq):
            return
        x = p


def fista_canonical_run(problem: CompositeProblem, config: SolverConfig,
                        x0) -> Iterator[Iterate]:
    s, r = config.s, config.r
    x = np.array(problem.check(x0), dtype=np.float64)
    y = x
    last = None
    for k in range(config.max_iters + 1):
        p, g = _evaluate(problem, s, y, k, last)
        last = Iterate(k, x, y, g, _norm_sq(g))
        yield last
        if _stops(config, last.gs_norm_sq):
            return
        k_next = k + 1
        x_next = p
        y = x_next + (k_next - 1) / (k_next + r) * (x_next - x)
        x = x_next


def fista_gradient_correction_run(problem: CompositeProblem, config: SolverConfig,
                                  y0) -> Iterator[Iterate]:
    """FISTA as the explicit position/velocity recursion on ``y``.

    The velocity update solves
    ``(k+r+1) v_k - k v_{k-1} + sqrt(s) [(k+r+1) G(y_k) - k G(y_{k-1})] = -k sqrt(s) G(y_k)``
    for ``v_k``; starting from ``v_0 = -sqrt(s) G(y_0)``.
    """
    s, r = config.s, config.r
    rs = math.sqrt(s)
    y = np.array(problem.check(y0), dtype=np.float64)
    p, g = _evaluate(problem, s, y, 0, None)
    last = Iterate(0, y, y, g, _norm_sq(g),
                   PhaseState(y, np.zeros_like(y), 0, None))
    yield last
    if _stops(config, last.gs_norm_sq):
        return
    v = -rs * g
    for k in range(1, config.max_iters + 1):
        x = p
        y_new = y + rs * v
        g_prev = g
        p, g = _evaluate(problem, s, y_new, k, last)
        last = Iterate(k, x, y_new, g, _norm_sq(g), PhaseState(y_new, v, k, g_prev))
        yield last
        if _stops(config, last.gs_norm_sq):
            return
        v = (k * v - rs * ((k + r + 1) * g - k * g_prev) - k * rs * g) / (k + r + 1)
        y = y_new


def fista_implicit_velocity_run(problem: CompositeProblem, config: SolverConfig,
                                x0) -> Iterator[Iterate]:
    """FISTA as the position/velocity recursion on ``x`` with ``v_0 = 0``.

    Index 0 evaluates at ``y_0 = x_0`` directly; from ``k = 1`` on the
    evaluation point is ``x_k + (k-1)/(k+r) sqrt(s) v_k``.
    """
    s, r = config.s, config.r
    rs = math.sqrt(s)
    x = np.array(problem.check(x0), dtype=np.float64)
    v = np.zeros_like(x)
    last = None
    for k in range(config.max_iters + 1):
        y = x if k == 0 else x + (k - 1) / (k + r) * rs * v
        _, g = _evaluate(problem, s, y, k, last)
        last = Iterate(k, x, y, g, _norm_sq(g), PhaseState(x, v, k, None))
        yield last
        if _stops(config, last.gs_norm_sq):
            return
        v = v - (r + 1) / (k + r) * v - rs * g
        x = x + rs * v


_DRIVERS = {
    Variant.ISTA: ista_run,
    Variant.FISTA_CANONICAL: fista_canonical_run,
    Variant.FISTA_GRADIENT_CORRECTION: fista_gradient_correction_run,
    Variant.FISTA_IMPLICIT_VELOCITY: fista_implicit_velocity_run,
}


def run(problem: CompositeProblem, config: SolverConfig, x0) -> Iterator[Iterate]:
    """Dispatch to the driver selected by ``config.variant``."""
    return _DRIVERS[config.variant](problem, config, x0)


def stop_criterion(stream: Iterable[Iterate], eps: float) -> Optional[int]:
    """First ``k`` with ``|G_s| < eps``; ``eps = 0`` disables the test."""
    if eps < 0:
        raise ParameterError(f"eps must be nonnegative, got {eps}")
    if eps == 0:
        return None
    for it in stream:
        if it.gs_norm < eps:
            return it.k
    return None


def estimate_iterations(eps: float, calibration: float = 1.0) -> int:
    """Predicted stop index ``ceil(C * eps^(-2/3))`` for the FISTA criterion."""
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    if not calibration > 0:
        raise ParameterError(f"calibration must be positive, got {calibration}")
    value = calibration * eps ** (-2.0 / 3.0)
    nearest = round(value)
    # powers like (1e-3)^(-2/3) land a few ulps off the integer they denote
    if abs(value - nearest) <= 1e-9 * max(1.0, value):
        return int(nearest)
    return int(math.ceil(value))
