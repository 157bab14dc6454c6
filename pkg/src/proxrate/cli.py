"""Command-line front end: ``proxrate gen|run|rates|verify``.

Exit codes: 0 ok, 1 usage or input error, 2 I/O error, 3 divergence,
4 certificate violation (or failed acceptance criterion), 5 run outside the
step-size hypothesis so no guarantee is claimed.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from contextlib import contextmanager

import numpy as np

from . import acceptance
from .analysis import (BOUND_RTOL, loglog_slope, reference_budget, running_min,
                       trace_records)
from .exceptions import (DivergenceError, FormatError, ProxRateError, ReferenceQualityError)
from .instances import (DeblurInstance, gen_deblur, gen_random_lasso, load_instance, load_pgm,
                        save_instance, solve_reference, synthetic_image)
from .solvers import SolverConfig, Variant, run

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DIVERGED, EXIT_VIOLATION, EXIT_NO_CLAIM = range(6)

TRACE_HEADER = ("k", "phi", "phi_gap", "gs_norm_sq", "min_gs_norm_sq", "lyapunov",
                "obj_bound", "gradmin_bound", "key_ineq_residual")
CERTIFICATES = ("key", "lyapunov", "bounds")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(value) -> str:
    """Shortest round-trip decimal, ``NA`` for absent values."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "NA"
    return repr(float(value))


# -- argument parsing ---------------------------------------------------------

def _add_instance_args(p):
    g = p.add_argument_group("instance")
    g.add_argument("--instance-in", help="load an instance container instead of generating")
    g.add_argument("--kind", choices=("lasso", "deblur"), default="lasso")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--m", type=int, default=50)
    g.add_argument("--d", type=int, default=100)
    g.add_argument("--sparsity", type=int, default=5)
    g.add_argument("--noise-sigma", type=float, default=None,
                   help="default 0.01 for lasso, 1e-3 for deblur")
    g.add_argument("--lam", type=float, default=None,
                   help="default 0.1 for lasso, 1e-6 for deblur")
    g.add_argument("--image-in", help="PGM image for --kind deblur")
    g.add_argument("--image-size", type=int, default=64,
                   help="side of the synthetic image when no --image-in is given")
    g.add_argument("--kernel-sigma", type=float, default=2.0)
    g.add_argument("--ref-eps", type=float, default=None,
                   help="reference accuracy; 0 disables the reference "
                        "(default 1e-10 for lasso, 0 for deblur)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="proxrate", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    gen = sub.add_parser("gen", help="generate an instance container")
    _add_instance_args(gen)
    gen.add_argument("--instance-out", required=True)
    gen.add_argument("--config")

    rn = sub.add_parser("run", help="run a solver and write a CSV trace")
    _add_instance_args(rn)
    rn.add_argument("--variant", choices=[v.value for v in Variant], default="ista")
    step = rn.add_mutually_exclusive_group()
    step.add_argument("--step-size", type=float)
    step.add_argument("--step-frac-of-inv-l", type=float, default=None,
                      help="step size as a multiple of 1/L (default 1)")
    rn.add_argument("--momentum-r", type=float, default=2.0)
    rn.add_argument("--iters", type=int, default=1000)
    rn.add_argument("--eps", type=float, default=0.0, help="stop once |G_s| < eps")
    rn.add_argument("--trace-out", default="-", help="CSV path, '-' for stdout")
    rn.add_argument("--x0", choices=("zero", "reference", "observed"), default=None,
                    help="start point (default zero for lasso, observed for deblur)")
    rn.add_argument("--certificates", default=",".join(CERTIFICATES),
                    help="comma list from key,lyapunov,bounds or 'none'")
    rn.add_argument("--force-certificates", action="store_true",
                    help="judge certificates even when s > 1/L")
    rn.add_argument("--ista-certificate", choices=("refined", "stated"), default="refined",
                    help="ISTA Lyapunov decrement bound to enforce")
    rn.add_argument("--config")

    rates = sub.add_parser("rates", help="fit log-log rates to CSV traces")
    rates.add_argument("traces", nargs="+")
    rates.add_argument("--k-min", type=int, default=1000)
    rates.add_argument("--k-max", type=int, default=10000)
    rates.add_argument("--tail-lo", type=int, default=1000)
    rates.add_argument("--tail-hi", type=int, default=10000)

    ver = sub.add_parser("verify", help="run the acceptance suite")
    ver.add_argument("--criteria", help="comma list of criterion numbers (default all)")
    ver.add_argument("--corrupt-step-frac", type=float,
                     help="negative control: run certificate criteria at this multiple "
                          "of 1/L with certificates forced")
    return parser


def _read_config(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{n}: expected 'key = value'")
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _apply_config(parser, argv):
    """Reparse with config-file values as defaults so explicit flags win."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    cfg = _read_config(args.config)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in cfg.items():
        if key not in actions or key in ("config", "help"):
            raise UsageError(f"unknown config key {key!r}")
        act = actions[key]
        if act.nargs == 0:
            if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise UsageError(f"config key {key!r} expects a boolean")
            defaults[key] = value.lower() in ("true", "1", "yes")
        else:
            defaults[key] = value
    sub.set_defaults(**defaults)
    args = parser.parse_args(argv)
    if args.command == "run" and args.step_size is not None \
            and args.step_frac_of_inv_l is not None:
        # one of the two came from the file; the command-line flag wins
        if any(a.startswith("--step-size") for a in argv):
            args.step_frac_of_inv_l = None
        elif any(a.startswith("--step-frac-of-inv-l") for a in argv):
            args.step_size = None
        else:
            raise UsageError("config sets both step_size and step_frac_of_inv_l")
    return args


# -- instances ------------------------------------------------------------------

def load_or_generate(args):
    if args.instance_in:
        inst = load_instance(args.instance_in)
    elif args.kind == "lasso":
        inst = gen_random_lasso(args.m, args.d, args.sparsity,
                                _default(args.noise_sigma, 0.01), _default(args.lam, 0.1),
                                args.seed)
    else:
        clean = load_pgm(args.image_in) if args.image_in else synthetic_image(args.image_size)
        inst = gen_deblur(clean, args.kernel_sigma, _default(args.noise_sigma, 1e-3),
                          _default(args.lam, 1e-6), args.seed)
    return inst


def _default(value, fallback):
    return fallback if value is None else value


def ensure_reference(inst, ref_eps):
    """Reference at accuracy ``ref_eps``, reusing a stored one when it is good enough."""
    if not ref_eps:
        return None
    stored = getattr(inst, "reference", None)
    if stored is not None and stored.certified_eps <= ref_eps:
        return stored
    return solve_reference(inst.problem, ref_eps)


def _ref_eps(args, inst):
    if args.ref_eps is not None:
        if args.ref_eps < 0:
            raise UsageError("--ref-eps must be nonnegative")
        return args.ref_eps
    return 0.0 if isinstance(inst, DeblurInstance) else 1e-10


# -- commands -------------------------------------------------------------------

def cmd_gen(args) -> int:
    inst = load_or_generate(args)
    eps = _ref_eps(args, inst)
    if eps and not isinstance(inst, DeblurInstance):
        inst = inst.with_reference(ensure_reference(inst, eps))
    save_instance(inst, args.instance_out)
    kind = "deblur" if isinstance(inst, DeblurInstance) else "lasso"
    shape = inst.image_shape if kind == "deblur" else inst.shape
    ref = getattr(inst, "reference", None)
    print(f"{kind} instance {shape} L={inst.L!r} -> {args.instance_out}"
          + (f" (reference eps {ref.certified_eps:.3g})" if ref is not None else ""))
    return EXIT_OK


@contextmanager
def _open_out(path):
    if path == "-":
        yield sys.stdout
        sys.stdout.flush()
        return
    with open(path, "w", newline="", encoding="ascii") as fh:
        yield fh


def _certificate_set(text):
    if text.strip().lower() == "none":
        return set()
    chosen = {c.strip() for c in text.split(",") if c.strip()}
    unknown = chosen - set(CERTIFICATES)
    if unknown:
        raise UsageError(f"unknown certificates: {', '.join(sorted(unknown))}")
    return chosen


def cmd_run(args) -> int:
    certs = _certificate_set(args.certificates)
    inst = load_or_generate(args)
    problem = inst.problem
    L = inst.L
    if args.step_size is not None:
        s = args.step_size
    else:
        s = _default(args.step_frac_of_inv_l, 1.0) / L
    config = SolverConfig(s, args.iters, args.momentum_r, args.eps, args.variant)
    ref_eps = _ref_eps(args, inst)
    reference = ensure_reference(inst, ref_eps)
    x0_mode = args.x0 or ("observed" if isinstance(inst, DeblurInstance) else "zero")
    if x0_mode == "zero":
        x0 = np.zeros(problem.dimension)
    elif x0_mode == "observed":
        if not isinstance(inst, DeblurInstance):
            raise UsageError("--x0 observed needs a deblur instance")
        x0 = np.array(inst.observed)
    else:
        if reference is None:
            raise UsageError("--x0 reference needs a reference (set --ref-eps > 0)")
        x0 = np.array(reference.x_star)

    within = config.within_hypothesis(L)
    judge = within or args.force_certificates
    if not within:
        print(f"note: s*L = {s * L:.6g} > 1, outside the step-size hypothesis; "
              + ("certificates forced" if judge else "no guarantee claimed"), file=sys.stderr)
    atol = 0.0
    if reference is not None:
        atol = reference_budget(reference.certified_eps,
                                float(np.linalg.norm(x0 - reference.x_star)))

    violations = []
    status = EXIT_OK
    records = trace_records(problem, config, run(problem, config, x0), reference, x0,
                            args.ista_certificate)
    with _open_out(args.trace_out) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        prev_lyap = None
        try:
            for rec in records:
                key = rec.key_inequality
                writer.writerow([
                    rec.k, fmt(rec.phi), fmt(rec.phi_gap), fmt(rec.gs_norm_sq),
                    fmt(rec.min_gs_norm_sq),
                    fmt(rec.lyapunov if "lyapunov" in certs else None),
                    fmt(rec.obj_bound if "bounds" in certs else None),
                    fmt(rec.gradmin_bound if "bounds" in certs else None),
                    fmt(key.residual if key is not None and "key" in certs else None),
                ])
                fh.flush()
                if judge:
                    violations += _violations(rec, certs, prev_lyap, atol)
                prev_lyap = rec.lyapunov
        except DivergenceError as exc:
            print(f"diverged: {exc}", file=sys.stderr)
            status = EXIT_DIVERGED
        except ReferenceQualityError as exc:
            print(f"reference rejected: {exc}", file=sys.stderr)
            status = EXIT_VIOLATION
    if status != EXIT_OK:
        return status
    if violations:
        for line in violations[:20]:
            print(f"violation: {line}", file=sys.stderr)
        print(f"{len(violations)} certificate violations", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK if within else EXIT_NO_CLAIM


def _violations(rec, certs, prev_lyap, atol):
    out = []
    key = rec.key_inequality
    if "key" in certs and key is not None and not key.holds:
        out.append(f"k={rec.k} key inequality residual {key.residual!r}")
    if "lyapunov" in certs and rec.decrement_bound is not None and prev_lyap is not None:
        if rec.lyapunov - prev_lyap > rec.decrement_bound + 1e-10 * (1.0 + prev_lyap):
            out.append(f"k={rec.k} Lyapunov decrement {rec.lyapunov - prev_lyap!r} "
                       f"exceeds {rec.decrement_bound!r}")
    if "bounds" in certs:
        if rec.obj_bound is not None and rec.k >= 1 \
                and rec.phi_gap > rec.obj_bound * (1.0 + BOUND_RTOL) + atol:
            out.append(f"k={rec.k} objective gap {rec.phi_gap!r} above bound {rec.obj_bound!r}")
        if rec.gradmin_bound is not None and rec.k >= 1 \
                and rec.min_gs_norm_sq > rec.gradmin_bound * (1.0 + BOUND_RTOL) + atol:
            out.append(f"k={rec.k} running-min |G|^2 {rec.min_gs_norm_sq!r} "
                       f"above bound {rec.gradmin_bound!r}")
    return out


def read_trace(path) -> dict:
    with open(path, newline="", encoding="ascii") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != TRACE_HEADER:
        raise UsageError(f"{path}: header does not match the trace schema")
    cols = list(zip(*rows[1:])) if len(rows) > 1 else [()] * len(TRACE_HEADER)
    out = {}
    for name, values in zip(TRACE_HEADER, cols):
        try:
            out[name] = np.array([math.nan if v == "NA" else float(v) for v in values])
        except ValueError as exc:
            raise UsageError(f"{path}: bad value in column {name}: {exc}") from None
    return out


def _slope_text(ks, values, k_min, k_max):
    try:
        return f"{loglog_slope(ks, values, k_min, k_max):.6f}"
    except ProxRateError as exc:
        if "at least" in str(exc):
            raise UsageError(str(exc)) from None
        return f"NA ({exc})"


def _tail_text(ks, values, weight, lo, hi):
    idx_lo, idx_hi = np.flatnonzero(ks == lo), np.flatnonzero(ks == hi)
    if not idx_lo.size or not idx_hi.size or not np.isfinite(values[idx_lo[0]]):
        return "NA"
    a_lo = weight(float(lo)) * values[idx_lo[0]]
    a_hi = weight(float(hi)) * values[idx_hi[0]]
    if a_lo == 0:
        return f"NA (a({lo}) = 0, a({hi}) = {a_hi:.6g})"
    return f"{a_hi / a_lo:.6g}"


def cmd_rates(args) -> int:
    if not args.k_min < args.k_max:
        raise UsageError("--k-min must be below --k-max")
    for path in args.traces:
        tr = read_trace(path)
        ks = tr["k"]
        mins = running_min(tr["gs_norm_sq"])
        print(path)
        print(f"  phi_gap slope [{args.k_min}, {args.k_max}]: "
              + _slope_text(ks, tr["phi_gap"], args.k_min, args.k_max))
        print(f"  min_gs_norm_sq slope [{args.k_min}, {args.k_max}]: "
              + _slope_text(ks, mins, args.k_min, args.k_max))
        lo, hi = args.tail_lo, args.tail_hi
        print(f"  tail ratio k(k+1) min_gs_norm_sq a({hi})/a({lo}): "
              + _tail_text(ks, mins, lambda k: k * (k + 1), lo, hi))
        print(f"  tail ratio k^3 min_gs_norm_sq a({hi})/a({lo}): "
              + _tail_text(ks, mins, lambda k: k ** 3, lo, hi))
        print(f"  tail ratio k^2 min_phi_gap a({hi})/a({lo}): "
              + _tail_text(ks, running_min(tr["phi_gap"]), lambda k: k ** 2, lo, hi))
    return EXIT_OK


def _threads() -> int:
    raw = os.environ.get("PROXRATE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"PROXRATE_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def cmd_verify(args) -> int:
    numbers = None
    if args.criteria:
        try:
            numbers = [int(n) for n in args.criteria.split(",")]
        except ValueError:
            raise UsageError("--criteria expects comma-separated integers") from None
        unknown = [n for n in numbers if n not in acceptance.CRITERIA]
        if unknown:
            raise UsageError(f"unknown criteria: {unknown}")
    results = acceptance.evaluate(numbers, args.corrupt_step_frac, _threads())
    for res in results:
        print(res.line())
    failed = [res.number for res in results if not res.passed]
    if failed:
        print(f"failed criteria: {', '.join(map(str, failed))}")
        return EXIT_VIOLATION
    print("all criteria passed")
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "run": cmd_run, "rates": cmd_rates, "verify": cmd_verify}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if not argv:
        parser.print_help()
        return EXIT_OK
    try:
        args = _apply_config(parser, argv)
        if args.command is None:
            parser.print_help()
            return EXIT_OK
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"proxrate: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, FormatError) as exc:
        print(f"proxrate: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ProxRateError as exc:
        # invalid parameters reaching the library (bad step, shape, ...)
        print(f"proxrate: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
