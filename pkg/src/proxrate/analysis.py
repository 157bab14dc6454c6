"""Lyapunov functions, rate bounds and per-iteration traces.

Notation: ``D2 = |x_0 - x*|^2``, ``gap_k = Phi(x_k) - Phi(x*)``.

ISTA:   E(k) = s k gap_k + |x_k - x*|^2 / 2
FISTA:  E(k) = s k (k+r) gap_k + |k (y_k - x_k) + r (y_k - x*)|^2 / 2

The FISTA form is the one both phase-space rewritings reduce to:
``sqrt(s) k v_{k-1} + s k G_s(y_{k-1}) = k (y_k - x_k)`` for gradient
correction and ``sqrt(s) (k-1) v_k = (k+r) (y_k - x_k)`` for implicit
velocity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .exceptions import (DimensionError, HypothesisError, ParameterError,
                         ReferenceQualityError, UndefinedBoundError)
from .problem import CompositeProblem
from .prox import KeyInequalityReport, key_inequality_report
from .solvers import Iterate, PhaseState, SolverConfig, Variant, run

GAP_CLAMP_RTOL = 1e-12
LYAPUNOV_RTOL = 1e-10
BOUND_RTOL = 1e-8


def phi_gap(phi: float, phi_star: float, rtol: float = GAP_CLAMP_RTOL) -> float:
    """``phi - phi_star`` clamped at zero when it is negative only by rounding.

    A gap below ``-rtol * (1 + |phi_star|)`` means the reference is not a
    minimizer and raises :class:`ReferenceQualityError`.
    """
    gap = phi - phi_star
    if gap >= 0:
        return gap
    if gap >= -rtol * (1.0 + abs(phi_star)):
        return 0.0
    raise ReferenceQualityError(
        f"objective {phi!r} lies {-gap:.3e} below the reference value {phi_star!r}")


def reference_budget(certified_eps: float, init_dist: float) -> float:
    """Absolute slack absorbing an inexact reference minimizer."""
    return 2.0 * certified_eps * (1.0 + init_dist)


# -- Lyapunov functions -----------------------------------------------------

def lyapunov_ista(k, x_k, x_star, phi_gap, s) -> float:
    d = np.asarray(x_k) - x_star
    return s * k * phi_gap + 0.5 * float(d @ d)


def lyapunov_fista(k, x_k, y_k, x_star, phi_gap, s, r) -> float:
    w = k * (np.asarray(y_k) - x_k) + r * (np.asarray(y_k) - x_star)
    return s * k * (k + r) * phi_gap + 0.5 * float(w @ w)


def lyapunov_fista_phase(variant, state: PhaseState, x_star, phi_gap, s, r) -> float:
    """Evaluate the FISTA Lyapunov function from a phase-space state.

    Gradient correction uses
    ``|sqrt(s) k v_{k-1} + r (y_k - x*) + s k G_s(y_{k-1})|^2 / 2`` and implicit
    velocity ``|sqrt(s) (k-1) v_k + r (x_k - x*)|^2 / 2``; both agree with
    :func:`lyapunov_fista` on the matching ``(x_k, y_k)``.
    """
    variant = Variant(variant) if not isinstance(variant, Variant) else variant
    k = state.k
    rs = math.sqrt(s)
    if variant is Variant.FISTA_GRADIENT_CORRECTION:
        w = r * (state.position - x_star)
        if k > 0:
            if state.last_subgradient is None:
                raise DimensionError("gradient-correction state needs last_subgradient")
            w = rs * k * state.velocity + w + s * k * state.last_subgradient
    elif variant is Variant.FISTA_IMPLICIT_VELOCITY:
        if state.last_subgradient is not None:
            raise DimensionError("implicit-velocity state carries no last_subgradient")
        w = rs * (k - 1) * state.velocity + r * (state.position - x_star)
    else:
        raise DimensionError(f"{variant.value} has no phase-space Lyapunov form")
    return s * k * (k + r) * phi_gap + 0.5 * float(w @ w)


def ista_decrement_bound(k, s, gs_norm_sq) -> float:
    """Stated ISTA bound ``-(3 k s^2 / 2) |G_s(x_k)|^2`` on ``E(k+1) - E(k)``.

    It rests on a descent coefficient ``2s - s^2 L / 2`` that is too strong,
    so real runs can violate it; see :func:`ista_decrement_bound_refined`.
    """
    return -1.5 * k * s * s * gs_norm_sq


def ista_decrement_bound_refined(k, s, lipschitz, gs_norm_sq) -> float:
    """Decrement bound obtained from the refined descent inequality alone.

    Applying it with ``x = y = x_k`` gives
    ``Phi(x_{k+1}) - Phi(x_k) <= -(s - s^2 L / 2) |G|^2``, and the Lyapunov
    difference becomes ``-(s^2 / 2) [(k+1)(2 - sL) - 1] |G|^2``, which is at
    most ``-(k s^2 / 2) |G|^2`` when ``sL <= 1``.
    """
    return -0.5 * s * s * ((k + 1) * (2.0 - s * lipschitz) - 1.0) * gs_norm_sq


def fista_decrement_bound(k, s, r, lipschitz, gs_norm_sq, next_gap) -> float:
    """Upper bound on ``E(k+1) - E(k)`` for FISTA; ``next_gap`` is ``gap_{k+1}``."""
    return (-0.5 * s * s * (k + r) ** 2 * (1.0 - s * lipschitz) * gs_norm_sq
            - s * ((r - 2) * k + r * r - r - 1) * next_gap)


@dataclass
class LyapunovTrace:
    values: np.ndarray
    decrements: np.ndarray
    certified_decrement_bound: np.ndarray
    violation: np.ndarray
    rtol: float = LYAPUNOV_RTOL

    @property
    def any_violation(self) -> bool:
        return bool(np.any(self.violation))

    def worst_excess(self) -> float:
        """Largest ``decrement - bound - tol``; negative when nothing is violated."""
        if self.decrements.size == 0:
            return -math.inf
        tol = self.rtol * (1.0 + self.values[:-1])
        return float(np.max(self.decrements - self.certified_decrement_bound - tol))


def lyapunov_trace(values: Sequence[float], bounds: Sequence[float],
                   rtol: float = LYAPUNOV_RTOL) -> LyapunovTrace:
    """Compare ``E(k+1) - E(k)`` with ``bounds[k]`` for every step."""
    values = np.asarray(values, dtype=np.float64)
    bounds = np.asarray(bounds, dtype=np.float64)
    if bounds.shape != (max(values.size - 1, 0),):
        raise DimensionError(
            f"need {values.size - 1} decrement bounds for {values.size} values, got {bounds.size}")
    dec = np.diff(values)
    viol = dec > bounds + rtol * (1.0 + values[:-1])
    return LyapunovTrace(values, dec, bounds, viol, rtol)


# -- rate bounds ------------------------------------------------------------

def _check_bound_args(k, s):
    if not s > 0:
        raise ParameterError(f"step size must be positive, got {s}")
    if k < 1:
        raise UndefinedBoundError(f"bound is undefined at k={k}")


def ista_objective_bound(k, s, init_dist_sq) -> float:
    _check_bound_args(k, s)
    return init_dist_sq / (2.0 * s * k)


def ista_gradmin_bound(k, s, init_dist_sq) -> float:
    _check_bound_args(k, s)
    return 2.0 * init_dist_sq / (3.0 * s * s * k * (k + 1))


def ista_objective_bound_lform(k, lipschitz, init_dist_sq) -> float:
    """``L D2 / (2k)``: the ISTA objective bound written for ``s = 1/L``."""
    return lipschitz * init_dist_sq / (2.0 * k)


def ista_gradmin_bound_lform(k, lipschitz, init_dist_sq) -> float:
    return 2.0 * lipschitz ** 2 * init_dist_sq / (3.0 * k * (k + 1))


def fista_objective_bound(k, s, r, init_dist_sq) -> float:
    if not s > 0:
        raise ParameterError(f"step size must be positive, got {s}")
    return r * r * init_dist_sq / (2.0 * s * (k + 1) * (k + r + 1))


def fista_gradmin_bound(k, s, r, lipschitz, init_dist_sq, check_hypothesis: bool = True) -> float:
    """Running-min bound on ``|G_s(y_i)|^2``; proven only for ``s < 1/L``.

    ``check_hypothesis=False`` evaluates the formula anyway (negative when
    ``s > 1/L``), which is only useful for forced negative controls.
    """
    if not s > 0:
        raise ParameterError(f"step size must be positive, got {s}")
    if check_hypothesis and not s < 1.0 / lipschitz:
        raise HypothesisError(f"bound needs s < 1/L, got s*L = {s * lipschitz}")
    return (6.0 * r * r * init_dist_sq
            / (s * s * (1.0 - s * lipschitz) * (k + 1)
               * (2 * k * k + (6 * r + 1) * k + 6 * r * r)))


@dataclass(frozen=True)
class BoundReport:
    k: int
    observed: float
    bound: float
    satisfied: bool


def check_bound(k, observed, bound, rtol: float = BOUND_RTOL, atol: float = 0.0) -> BoundReport:
    return BoundReport(k, observed, bound, bool(observed <= bound * (1.0 + rtol) + atol))


# -- empirical rates --------------------------------------------------------

def running_min(values) -> np.ndarray:
    return np.minimum.accumulate(np.asarray(values, dtype=np.float64))


def loglog_slope(ks, values, k_min, k_max) -> float:
    """Least-squares slope of ``log(value)`` against ``log(k)`` over ``[k_min, k_max]``."""
    ks = np.asarray(ks, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if not k_min < k_max:
        raise ParameterError(f"need k_min < k_max, got {k_min}, {k_max}")
    sel = (ks >= k_min) & (ks <= k_max)
    if np.count_nonzero(sel) < 10:
        raise DimensionError(
            f"need at least 10 points in [{k_min}, {k_max}], found {np.count_nonzero(sel)}")
    v = values[sel]
    if np.any(~(v > 0)):
        first = int(ks[sel][np.argmax(~(v > 0))])
        raise DimensionError(f"values must be positive; first nonpositive value at k={first}")
    slope, _ = np.polyfit(np.log(ks[sel]), np.log(v), 1)
    return float(slope)


def weighted_tail_ratio(ks, values, weight, k_lo=1000, k_hi=10000) -> tuple[float, float]:
    """Return ``(weight(k_lo) * values[k_lo], weight(k_hi) * values[k_hi])``."""
    ks = np.asarray(ks)
    lo = int(np.flatnonzero(ks == k_lo)[0])
    hi = int(np.flatnonzero(ks == k_hi)[0])
    return weight(k_lo) * float(values[lo]), weight(k_hi) * float(values[hi])


# -- traces -----------------------------------------------------------------

@dataclass
class TraceRecord:
    """Observables of iteration ``k``.

    ``key_inequality`` and ``decrement_bound`` describe the transition from
    ``k - 1`` to ``k`` and are None on the first row.
    """

    k: int
    phi: float
    gs_norm_sq: float
    min_gs_norm_sq: float
    phi_gap: Optional[float] = None
    min_phi_gap: Optional[float] = None
    lyapunov: Optional[float] = None
    decrement_bound: Optional[float] = None
    obj_bound: Optional[float] = None
    gradmin_bound: Optional[float] = None
    key_inequality: Optional[KeyInequalityReport] = None


@dataclass(frozen=True)
class Reference:
    x_star: np.ndarray
    phi_star: float
    certified_eps: float = 0.0


def _lyapunov(variant, it: Iterate, ref: Reference, gap, s, r):
    if variant is Variant.ISTA:
        return lyapunov_ista(it.k, it.x, ref.x_star, gap, s)
    if variant is Variant.FISTA_CANONICAL:
        return lyapunov_fista(it.k, it.x, it.y, ref.x_star, gap, s, r)
    return lyapunov_fista_phase(variant, it.state, ref.x_star, gap, s, r)


def trace_records(problem: CompositeProblem, config: SolverConfig,
                  stream: Iterable[Iterate], reference: Optional[Reference] = None,
                  x0=None, ista_certificate: str = "refined",
                  key_rtol: float = LYAPUNOV_RTOL) -> Iterator[TraceRecord]:
    """Annotate a solver stream with objective, bounds and certificates.

    ``ista_certificate`` selects the ISTA decrement bound: ``"refined"`` for
    :func:`ista_decrement_bound_refined`, ``"stated"`` for
    :func:`ista_decrement_bound`.
    """
    if ista_certificate not in ("refined", "stated"):
        raise ParameterError(f"unknown ISTA certificate {ista_certificate!r}")
    variant = config.variant
    s, r, L = config.s, config.r, problem.lipschitz
    strict_ok = config.within_hypothesis(L, strict=True)
    init_dist_sq = None
    if reference is not None and x0 is not None:
        d0 = np.asarray(x0) - reference.x_star
        init_dist_sq = float(d0 @ d0)
    prev: Optional[Iterate] = None
    prev_phi = None
    min_gs = math.inf
    min_gap = math.inf
    for it in stream:
        phi = problem.value(it.x)
        min_gs = min(min_gs, it.gs_norm_sq)
        rec = TraceRecord(it.k, phi, it.gs_norm_sq, min_gs)
        if prev is not None:
            rec.key_inequality = key_inequality_report(
                phi, prev_phi, prev.gs, prev.y - prev.x, s, L, key_rtol)
        if reference is not None:
            gap = phi_gap(phi, reference.phi_star)
            min_gap = min(min_gap, gap)
            rec.phi_gap, rec.min_phi_gap = gap, min_gap
            rec.lyapunov = _lyapunov(variant, it, reference, gap, s, r)
            if prev is not None:
                if variant is Variant.ISTA:
                    rec.decrement_bound = (
                        ista_decrement_bound_refined(prev.k, s, L, prev.gs_norm_sq)
                        if ista_certificate == "refined"
                        else ista_decrement_bound(prev.k, s, prev.gs_norm_sq))
                else:
                    rec.decrement_bound = fista_decrement_bound(
                        prev.k, s, r, L, prev.gs_norm_sq, gap)
            if init_dist_sq is not None:
                if variant is Variant.ISTA:
                    if it.k >= 1:
                        rec.obj_bound = ista_objective_bound(it.k, s, init_dist_sq)
                        rec.gradmin_bound = ista_gradmin_bound(it.k, s, init_dist_sq)
                else:
                    rec.obj_bound = fista_objective_bound(it.k, s, r, init_dist_sq)
                    if strict_ok:
                        rec.gradmin_bound = fista_gradmin_bound(it.k, s, r, L, init_dist_sq)
        yield rec
        prev, prev_phi = it, phi


@dataclass
class Trace:
    """Column arrays of a finished run; absent quantities are NaN."""

    k: np.ndarray
    phi: np.ndarray
    gs_norm_sq: np.ndarray
    min_gs_norm_sq: np.ndarray
    phi_gap: np.ndarray
    min_phi_gap: np.ndarray
    lyapunov: np.ndarray
    decrement_bound: np.ndarray
    obj_bound: np.ndarray
    gradmin_bound: np.ndarray
    key_residual: np.ndarray
    key_tol: np.ndarray
    x: Optional[np.ndarray] = field(default=None, repr=False)

    def lyapunov_trace(self, rtol: float = LYAPUNOV_RTOL) -> LyapunovTrace:
        return lyapunov_trace(self.lyapunov, self.decrement_bound[1:], rtol)


def _nan(v):
    return math.nan if v is None else v


def collect(records: Iterable[TraceRecord], keep_x: Sequence[np.ndarray] | None = None) -> Trace:
    rows = list(records)
    col = lambda name: np.array([_nan(getattr(rec, name)) for rec in rows], dtype=np.float64)
    key = [rec.key_inequality for rec in rows]
    return Trace(
        k=np.array([rec.k for rec in rows], dtype=np.int64),
        phi=col("phi"), gs_norm_sq=col("gs_norm_sq"), min_gs_norm_sq=col("min_gs_norm_sq"),
        phi_gap=col("phi_gap"), min_phi_gap=col("min_phi_gap"), lyapunov=col("lyapunov"),
        decrement_bound=col("decrement_bound"), obj_bound=col("obj_bound"),
        gradmin_bound=col("gradmin_bound"),
        key_residual=np.array([math.nan if r is None else r.residual for r in key]),
        key_tol=np.array([math.nan if r is None else r.tol for r in key]),
        x=None if keep_x is None else np.array(keep_x),
    )


def trace_run(problem: CompositeProblem, config: SolverConfig, x0,
              reference: Optional[Reference] = None, keep_x: bool = False,
              ista_certificate: str = "refined") -> Trace:
    """Run a solver and collect its annotated trace."""
    xs = [] if keep_x else None

    def stream():
        for it in run(problem, config, x0):
            if xs is not None:
                xs.append(it.x)
            yield it

    return collect(trace_records(problem, config, stream(), reference, x0, ista_certificate),
                   xs)
