"""Proximal step P_s, proximal subgradient G_s, and the refined descent inequality.

For a composite problem Phi = f + g and step size s,

    P_s(x) = argmin_z { |z - (x - s grad f(x))|^2 / (2s) + g(z) }
    G_s(x) = (x - P_s(x)) / s

so one proximal-gradient iteration is ``x - s G_s(x)`` and ``G_s`` reduces to
``grad f`` when g is zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .exceptions import ParameterError

if TYPE_CHECKING:
    from .problem import CompositeProblem


def soft_threshold(z, tau: float) -> np.ndarray:
    """Componentwise shrinkage ``sign(z) * max(|z| - tau, 0)``."""
    if not tau >= 0:
        raise ParameterError(f"threshold must be nonnegative, got {tau}")
    z = np.asarray(z, dtype=np.float64)
    return np.sign(z) * np.maximum(np.abs(z) - tau, 0.0)


def _check_step(s):
    if not s > 0:
        raise ParameterError(f"step size must be positive, got {s}")


def prox_pair(problem: CompositeProblem, s: float, x) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(P_s(x), G_s(x))`` with a single gradient and prox evaluation."""
    _check_step(s)
    x = problem.check(x)
    p = problem.nonsmooth.scaled_prox(s, x - s * problem.smooth.gradient(x))
    return p, (x - p) / s


def proximal_step(problem: CompositeProblem, s: float, x) -> np.ndarray:
    return prox_pair(problem, s, x)[0]


def proximal_subgradient(problem: CompositeProblem, s: float, x) -> np.ndarray:
    return prox_pair(problem, s, x)[1]


@dataclass(frozen=True)
class KeyInequalityReport:
    """Both sides of Phi(y - s G) <= Phi(x) + <G, y - x> - (s - s^2 L / 2) |G|^2.

    ``holds`` is ``residual >= -tol`` where ``residual = rhs - lhs`` and ``tol``
    is the absolute slack actually applied.  ``within_hypothesis`` is False
    when ``s > 1/L``, in which case ``holds`` carries no guarantee.
    """

    lhs: float
    rhs: float
    residual: float
    tol: float
    holds: bool
    within_hypothesis: bool


def key_inequality_report(phi_next: float, phi_x: float, g, y_minus_x, s: float,
                          lipschitz: float, rtol: float = 1e-10) -> KeyInequalityReport:
    """Assemble the report from precomputed pieces.

    ``phi_next`` is Phi(P_s(y)), ``phi_x`` is Phi(x), ``g`` is G_s(y).
    """
    g_sq = float(g @ g)
    rhs = phi_x + float(g @ y_minus_x) - (s - 0.5 * s * s * lipschitz) * g_sq
    residual = rhs - phi_next
    tol = rtol * (1.0 + abs(phi_next))
    return KeyInequalityReport(lhs=phi_next, rhs=rhs, residual=residual, tol=tol,
                               holds=bool(residual >= -tol),
                               within_hypothesis=bool(s <= 1.0 / lipschitz))


def check_key_inequality(problem: CompositeProblem, s: float, x, y,
                         rtol: float = 1e-10) -> KeyInequalityReport:
    """Evaluate the refined descent inequality at the pair ``(x, y)``.

    The slack is relative: ``tol = rtol * (1 + |lhs|)``.  Steps above ``1/L``
    are evaluated rather than refused so that sharpness can be probed.
    """
    _check_step(s)
    x = problem.check(x)
    p, g = prox_pair(problem, s, y)
    return key_inequality_report(problem.value(p), problem.value(x), g, y - x, s,
                                 problem.lipschitz, rtol)
