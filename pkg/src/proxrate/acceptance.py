"""Acceptance criteria, shared by the test suite and ``proxrate verify``.

Every criterion is a function returning a :class:`CriterionResult`.  Solver
traces, instances and reference minimizers are cached per process so the
criteria can share runs.  ``corrupt`` replaces every in-hypothesis step
fraction by the given multiple of ``1/L`` and evaluates the certificates
regardless; it exists as a negative control and should make the certificate
criteria fail.
"""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from . import analysis as an
from .instances import gen_deblur, gen_random_lasso, solve_reference, synthetic_image
from .instances.lasso import LassoInstance
from .problem import CompositeProblem, Quadratic, ZeroFunction
from .prox import check_key_inequality
from .rng import CounterStream
from .solvers import SolverConfig, Variant, run, stop_criterion

CANONICAL = dict(m=50, d=100, sparsity=5, noise_sigma=0.01, lam=0.1)
SEEDS = tuple(range(10))
ITERS = 10_000
REFERENCE_EPS = 1e-10
K_LO, K_HI = 1_000, 10_000


@dataclass(frozen=True)
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str

    def line(self) -> str:
        return (f"criterion {self.number:>2}: {'PASS' if self.passed else 'FAIL'}  "
                f"{self.title}  [{self.detail}]")


# -- shared runs -------------------------------------------------------------

_lock = threading.Lock()


@lru_cache(maxsize=None)
def instance(seed: int) -> LassoInstance:
    inst = gen_random_lasso(seed=seed, **CANONICAL)
    return inst.with_reference(solve_reference(inst.problem, REFERENCE_EPS))


def trace(seed: int, variant: str, step_frac: float, r: float = 2.0,
          iters: int = ITERS) -> an.Trace:
    # normalized key so positional and defaulted calls share a cache entry
    return _trace(int(seed), str(variant), float(step_frac), float(r), int(iters))


@lru_cache(maxsize=None)
def _trace(seed, variant, step_frac, r, iters) -> an.Trace:
    inst = instance(seed)
    config = SolverConfig(step_frac / inst.L, iters, r, 0.0, variant)
    return an.trace_run(inst.problem, config, np.zeros(inst.shape[1]), inst.reference)


def _trace_jobs(corrupt):
    ista = _fracs((1.0, 0.5), corrupt)
    fista = _fracs((1.0, 0.9), corrupt)
    jobs = [(seed, "ista", f, 2.0) for seed in SEEDS for f in ista]
    jobs += [(seed, "fista_canonical", f, 2.0) for seed in SEEDS for f in fista]
    jobs += [(seed, "fista_canonical", 0.9, 4.0) for seed in SEEDS]
    return jobs


def prefetch(threads: int, corrupt: Optional[float] = None) -> None:
    """Compute the shared traces with up to ``threads`` workers."""
    for seed in SEEDS:
        with _lock:
            instance(seed)
    jobs = _trace_jobs(corrupt)
    if threads <= 1:
        for job in jobs:
            trace(*job)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(lambda job: trace(*job), jobs))


def _fracs(default: Sequence[float], corrupt: Optional[float]) -> tuple:
    return tuple(default) if corrupt is None else (float(corrupt),)


def _budget(seed: int) -> float:
    ref = instance(seed).reference
    return an.reference_budget(ref.certified_eps, float(np.linalg.norm(ref.x_star)))


def _init_dist_sq(seed: int) -> float:
    x = instance(seed).reference.x_star
    return float(x @ x)


def _excess(observed, bound, atol):
    """Worst ``observed - (bound (1 + rtol) + atol)``; positive means violated."""
    return float(np.max(observed - (bound * (1.0 + an.BOUND_RTOL) + atol)))


# -- criteria ----------------------------------------------------------------

def criterion_1(corrupt: Optional[float] = None, n_triples: int = 10_000) -> CriterionResult:
    frac = 1.0 if corrupt is None else corrupt
    per_seed = n_triples // len(SEEDS)
    failures, worst = 0, -math.inf
    for seed in SEEDS:
        inst = instance(seed)
        d = inst.shape[1]
        stream = CounterStream(1_000 + seed)
        xs = stream.normal(per_seed * d).reshape(per_seed, d)
        ys = stream.normal(per_seed * d).reshape(per_seed, d)
        # 1 - u lies in (0, 1], so s covers (0, frac / L]
        steps = (1.0 - stream.uniform(per_seed)) * frac / inst.L
        for x, y, s in zip(xs, ys, steps):
            rep = check_key_inequality(inst.problem, float(s), x, y, rtol=an.LYAPUNOV_RTOL)
            worst = max(worst, -rep.residual / rep.tol)
            failures += not rep.holds
    return CriterionResult(1, "key inequality on random triples", failures == 0,
                           f"{failures} of {per_seed * len(SEEDS)} violated; "
                           f"worst -residual/tol = {worst:.3g}")


def criterion_2(corrupt: Optional[float] = None) -> CriterionResult:
    bad = []
    for seed in SEEDS:
        for frac in _fracs((1.0, 0.5), corrupt):
            tr = trace(seed, "ista", frac)
            s = frac / instance(seed).L
            ks = tr.k[1:].astype(np.float64)
            d2 = _init_dist_sq(seed)
            obj = d2 / (2.0 * s * ks)
            grad = 2.0 * d2 / (3.0 * s * s * ks * (ks + 1))
            atol = _budget(seed)
            e_obj = _excess(tr.phi_gap[1:], obj, atol)
            e_grad = _excess(tr.min_gs_norm_sq[1:], grad, atol)
            if e_obj > 0 or e_grad > 0:
                bad.append(f"seed {seed} s={frac}/L (obj {e_obj:.2e}, grad {e_grad:.2e})")
    return CriterionResult(2, "ISTA objective and running-min subgradient bounds", not bad,
                           "; ".join(bad) or "all seeds, both step sizes, every k >= 1")


def criterion_3() -> CriterionResult:
    worst = 0.0
    ks = np.arange(1, ITERS + 1)
    for seed in SEEDS:
        L, d2 = instance(seed).L, _init_dist_sq(seed)
        s = 1.0 / L
        for k in ks:
            for a, b in ((an.ista_objective_bound(k, s, d2), an.ista_objective_bound_lform(k, L, d2)),
                         (an.ista_gradmin_bound(k, s, d2), an.ista_gradmin_bound_lform(k, L, d2))):
                worst = max(worst, abs(a - b) / abs(b))
    return CriterionResult(3, "ISTA bounds at s = 1/L match the L-form", worst <= 1e-12,
                           f"max relative difference {worst:.3g}")


def criterion_4(corrupt: Optional[float] = None) -> CriterionResult:
    bad = []
    for seed in SEEDS:
        inst = instance(seed)
        d2, atol = _init_dist_sq(seed), _budget(seed)
        obj_fracs = _fracs((1.0, 0.9), corrupt)
        grad_fracs = _fracs((0.9,), corrupt)
        for frac in obj_fracs:
            tr = trace(seed, "fista_canonical", frac)
            s = frac / inst.L
            ks = tr.k[1:].astype(np.float64)
            e = _excess(tr.phi_gap[1:], an.fista_objective_bound(ks, s, 2.0, d2), atol)
            if e > 0:
                bad.append(f"seed {seed} obj s={frac}/L ({e:.2e})")
        for frac in grad_fracs:
            tr = trace(seed, "fista_canonical", frac)
            s = frac / inst.L
            ks = tr.k[1:].astype(np.float64)
            bound = an.fista_gradmin_bound(ks, s, 2.0, inst.L, d2,
                                           check_hypothesis=corrupt is None)
            e = _excess(tr.min_gs_norm_sq[1:], bound, atol)
            if e > 0:
                bad.append(f"seed {seed} grad s={frac}/L ({e:.2e})")
    return CriterionResult(4, "FISTA objective and running-min subgradient bounds", not bad,
                           "; ".join(bad) or "all seeds, every k >= 1")


def _tail_series():
    return (
        ("ISTA k(k+1) min|G|^2", "ista", 1.0, 2.0, "min_gs_norm_sq", lambda k: k * (k + 1)),
        ("FISTA r=2 k^3 min|G|^2", "fista_canonical", 0.9, 2.0, "min_gs_norm_sq", lambda k: k ** 3),
        ("FISTA r=4 k^2 min gap", "fista_canonical", 0.9, 4.0, "min_phi_gap", lambda k: k ** 2),
    )


def criterion_5() -> CriterionResult:
    bad = []
    for name, variant, frac, r, column, weight in _tail_series():
        for seed in SEEDS:
            tr = trace(seed, variant, frac, r)
            lo, hi = an.weighted_tail_ratio(tr.k, getattr(tr, column), weight, K_LO, K_HI)
            if not hi < lo:
                bad.append(f"{name} seed {seed}: a({K_HI})={hi:.3g} vs a({K_LO})={lo:.3g}")
    detail = f"{len(bad)} failures" + (f"; first: {bad[0]}" if bad else "")
    return CriterionResult(5, "weighted tails decrease from k=1e3 to k=1e4", not bad, detail)


def criterion_6() -> CriterionResult:
    checks = (
        ("ISTA min|G|^2", "ista", 1.0, "min_gs_norm_sq", -1.9),
        ("FISTA min|G|^2", "fista_canonical", 0.9, "min_gs_norm_sq", -2.7),
        ("ISTA gap", "ista", 1.0, "phi_gap", -0.9),
        ("FISTA gap", "fista_canonical", 0.9, "phi_gap", -1.9),
    )
    parts, ok = [], True
    for name, variant, frac, column, limit in checks:
        tr = trace(0, variant, frac)
        try:
            slope = an.loglog_slope(tr.k, getattr(tr, column), K_LO, K_HI)
        except ValueError as exc:
            ok = False
            parts.append(f"{name}: undefined ({exc})")
            continue
        ok &= slope <= limit
        parts.append(f"{name}: {slope:.3f} (need <= {limit})")
    return CriterionResult(6, "empirical log-log slopes on seed 0", ok, "; ".join(parts))


def criterion_7(corrupt: Optional[float] = None) -> CriterionResult:
    ista_bad, fista_bad, refined_bad = 0, 0, 0
    ista_worst = fista_worst = -math.inf
    runs = 0
    for seed in SEEDS:
        L = instance(seed).L
        for frac in _fracs((1.0, 0.5), corrupt):
            tr = trace(seed, "ista", frac)
            s = frac / L
            ks = tr.k[:-1].astype(np.float64)
            stated = an.lyapunov_trace(tr.lyapunov, an.ista_decrement_bound(ks, s, tr.gs_norm_sq[:-1]))
            refined = an.lyapunov_trace(tr.lyapunov,
                                      an.ista_decrement_bound_refined(ks, s, L, tr.gs_norm_sq[:-1]))
            ista_bad += int(np.count_nonzero(stated.violation))
            refined_bad += int(np.count_nonzero(refined.violation))
            ista_worst = max(ista_worst, stated.worst_excess())
            runs += 1
        for frac in _fracs((1.0, 0.9), corrupt):
            lt = trace(seed, "fista_canonical", frac).lyapunov_trace()
            fista_bad += int(np.count_nonzero(lt.violation))
            fista_worst = max(fista_worst, lt.worst_excess())
    detail = (f"ISTA 3k/2 form: {ista_bad} violating steps (worst excess {ista_worst:.3g}); "
              f"FISTA: {fista_bad} violating steps (worst excess {fista_worst:.3g}); "
              f"supplementary refined ISTA form: {refined_bad} violating steps")
    return CriterionResult(7, "Lyapunov per-step decrement certificates",
                           ista_bad == 0 and fista_bad == 0, detail)


def _iterates(problem, config, x0):
    return [(it.x, it.y) for it in run(problem, config, x0)]


def criterion_8(iters: int = 1_000) -> CriterionResult:
    inst = instance(0)
    x0 = np.zeros(inst.shape[1])
    worst = 0.0
    for r in (2.0, 4.0):
        base = _iterates(inst.problem, SolverConfig(1.0 / inst.L, iters, r, 0.0,
                                                    Variant.FISTA_CANONICAL), x0)
        for variant in (Variant.FISTA_GRADIENT_CORRECTION, Variant.FISTA_IMPLICIT_VELOCITY):
            other = _iterates(inst.problem, SolverConfig(1.0 / inst.L, iters, r, 0.0, variant), x0)
            for (x, y), (xo, yo) in zip(base, other):
                scale = 1.0 + np.linalg.norm(x)
                worst = max(worst, np.linalg.norm(x - xo) / scale,
                            np.linalg.norm(y - yo) / scale)
    return CriterionResult(8, "three FISTA recursions agree", worst <= 1e-6,
                           f"max relative deviation {worst:.3g}")


def degenerate_quadratic(dim: int = 10, seed: int = 9) -> CompositeProblem:
    stream = CounterStream(seed)
    M = stream.normal(dim * dim).reshape(dim, dim)
    Q = M.T @ M / dim + np.eye(dim) * 0.1
    return CompositeProblem(Quadratic(Q, stream.normal(dim)), ZeroFunction(), dim)


def criterion_9(iters: int = 100) -> CriterionResult:
    problem = degenerate_quadratic()
    Q, q = problem.smooth.Q, problem.smooth.q
    s, r = 1.0 / problem.lipschitz, 2.0
    x0 = np.ones(problem.dimension)

    gd = [x0]
    for _ in range(iters):
        x = gd[-1]
        gd.append(x - s * (Q @ x - q))
    ista = [it.x for it in run(problem, SolverConfig(s, iters), x0)]

    nag, x_prev, y = [x0], x0, x0
    for k in range(iters):
        x_new = y - s * (Q @ y - q)
        y = x_new + k / (k + 1 + r) * (x_new - x_prev)
        nag.append(x_new)
        x_prev = x_new
    fista = [it.x for it in run(problem, SolverConfig(s, iters, r, 0.0, Variant.FISTA_CANONICAL), x0)]

    same_gd = len(gd) == len(ista) and all(np.array_equal(a, b) for a, b in zip(gd, ista))
    same_nag = len(nag) == len(fista) and all(np.array_equal(a, b) for a, b in zip(nag, fista))
    return CriterionResult(9, "zero nonsmooth part reduces to GD and NAG", same_gd and same_nag,
                           f"ISTA==GD bitwise: {same_gd}; FISTA==NAG bitwise: {same_nag}")


@lru_cache(maxsize=None)
def deblur_instance():
    return gen_deblur(synthetic_image(64), kernel_sigma=2.0, noise_sigma=1e-3, lam=1e-6, seed=0)


def criterion_10(iters: int = 200, s: float = 0.5) -> CriterionResult:
    inst = deblur_instance()
    problem, x0 = inst.problem, inst.observed
    final = {}
    for variant in (Variant.ISTA, Variant.FISTA_CANONICAL):
        for it in run(problem, SolverConfig(s, iters, 2.0, 0.0, variant), x0):
            pass
        final[variant] = problem.value(it.x)
    phi_obs = problem.value(x0)
    phi_i, phi_f = final[Variant.ISTA], final[Variant.FISTA_CANONICAL]
    ok = phi_f < phi_i and phi_i < phi_obs and phi_f < phi_obs
    return CriterionResult(10, "deblurring: FISTA below ISTA below observed", ok,
                           f"observed {phi_obs:.6g}, ISTA {phi_i:.6g}, FISTA {phi_f:.6g}")


def criterion_11(eps: float = 1e-3, frac: float = 0.9) -> CriterionResult:
    inst = instance(0)
    x0 = np.zeros(inst.shape[1])
    config = SolverConfig(frac / inst.L, 1_000_000, 2.0, 0.0, Variant.FISTA_CANONICAL)
    n1 = stop_criterion(run(inst.problem, config, x0), eps)
    n8 = stop_criterion(run(inst.problem, config, x0), eps / 8)
    target = 8 ** (2.0 / 3.0)
    lo, hi = target / 1.25, target * 1.25
    ratio = n8 / n1 if n1 and n8 is not None else math.nan
    return CriterionResult(11, "stop index scaling from eps to eps/8", lo <= ratio <= hi,
                           f"eps={eps}: stop at {n1}, eps/8: stop at {n8}, ratio {ratio:.3f} "
                           f"(need [{lo:.2f}, {hi:.2f}])")


CRITERIA: dict[int, Callable[..., CriterionResult]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10,
    11: criterion_11,
}
CERTIFICATE_CRITERIA = (1, 2, 4, 7)


def evaluate(numbers: Optional[Sequence[int]] = None, corrupt: Optional[float] = None,
             threads: int = 1) -> list[CriterionResult]:
    """Run the selected criteria in order.

    With ``corrupt`` set, only the certificate criteria accept it; the others
    run unchanged.
    """
    numbers = sorted(CRITERIA) if numbers is None else list(numbers)
    prefetch(threads, corrupt)
    out = []
    for n in numbers:
        fn = CRITERIA[n]
        out.append(fn(corrupt=corrupt) if n in CERTIFICATE_CRITERIA else fn())
    return out
