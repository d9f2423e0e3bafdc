"""Command-line entry points: points, solve, verify, moments.

Exit codes: 0 success, 1 malformed flags or input, 2 infeasible solve,
3 assertion failure under --assert.  Seeds and thread counts follow the
precedence flags > environment (CAPQUAD_SEED, CAPQUAD_THREADS) >
defaults; thread count never changes numeric output.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time

from . import io as cqio
from .geometry import Cap, Collar, north_pole
from .points import greedy_maximal_set
from .quadrature import domain_moments
from .solver import Infeasible, solve_weights
from .verify import (
    DoublingWeight,
    VerificationReport,
    bernstein_check_d1,
    change_of_variables_check,
    large_sieve_constant,
    maxmin_equivalence,
    mz_bracket,
    osc_constant,
    weighted_mz,
)

VERIFY_SUBCOMMANDS = ("mz", "osc", "sieve", "maxmin", "bernstein",
                      "weighted-mz", "cov", "change-of-var")


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags by default; the contract here is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def _env_int(name, default):
    raw = os.environ.get(name)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        return default


def _resolve_seed(args):
    if args.seed is not None:
        return args.seed
    return _env_int("CAPQUAD_SEED", 0)


def _resolve_threads(args):
    if args.threads is not None:
        return max(args.threads, 1)
    return max(_env_int("CAPQUAD_THREADS", 1), 1)


def _build_domain(d, alpha, collar_beta):
    if d not in (1, 2):
        raise ValueError(f"--d must be 1 or 2, got {d}")
    if not (0 < alpha <= math.pi - 0.1):
        raise ValueError(f"--alpha must lie in (0, pi - 0.1], got {alpha}")
    center = north_pole(d)
    if collar_beta is not None:
        return Collar(center, alpha, collar_beta)
    return Cap(center, alpha)


def _add_common(p):
    p.add_argument("--seed", type=int, default=None, help="master seed (default: CAPQUAD_SEED or 0)")
    p.add_argument("--threads", type=int, default=None, help="worker threads (does not change output)")
    p.add_argument("--timing", action="store_true",
                   help="embed wall time in reports (breaks byte reproducibility)")


def make_parser():
    parser = _Parser(prog="capquad",
                     description="Positive cubature and sampling-inequality checks on spherical caps")
    sub = parser.add_subparsers(dest="command", required=True)

    p_pts = sub.add_parser("points", help="generate a maximal separated node set")
    p_pts.add_argument("--d", type=int, required=True)
    p_pts.add_argument("--alpha", type=float, required=True)
    p_pts.add_argument("--degree", type=int, required=True)
    p_pts.add_argument("--delta", type=float, required=True)
    p_pts.add_argument("--collar-beta", type=float, default=None)
    p_pts.add_argument("--out", required=True)
    _add_common(p_pts)

    p_sol = sub.add_parser("solve", help="solve positive cubature weights on a node file")
    p_sol.add_argument("--points", required=True)
    p_sol.add_argument("--degree", type=int, required=True)
    p_sol.add_argument("--tol", type=float, default=1e-10)
    p_sol.add_argument("--out", required=True)
    _add_common(p_sol)

    p_ver = sub.add_parser("verify", help="measure an inequality and write a report")
    p_ver.add_argument("subcommand", choices=VERIFY_SUBCOMMANDS)
    p_ver.add_argument("--rule", default=None, help="rule file (mz)")
    p_ver.add_argument("--points", default=None, help="points file (osc/sieve/maxmin/weighted-mz)")
    p_ver.add_argument("--d", type=int, default=2)
    p_ver.add_argument("--alpha", type=float, default=None)
    p_ver.add_argument("--degree", type=int, default=None)
    p_ver.add_argument("--p", type=float, default=2.0)
    p_ver.add_argument("--beta", type=float, default=1.0)
    p_ver.add_argument("--trials", type=int, default=200)
    p_ver.add_argument("--ball-samples", type=int, default=64)
    p_ver.add_argument("--trial-degree", type=int, default=None)
    p_ver.add_argument("--weight", choices=("constant", "boundary-power"), default="constant")
    p_ver.add_argument("--gamma", type=float, default=1.0)
    p_ver.add_argument("--n-ref", type=int, default=8)
    p_ver.add_argument("--statistic", choices=("max", "mean"), default="max",
                       help="trial reduction for bernstein")
    p_ver.add_argument("--probe-resolution", type=int, default=4)
    p_ver.add_argument("--report", required=True)
    p_ver.add_argument("--csv", default=None, help="also write cells as CSV")
    p_ver.add_argument("--assert", dest="enforce", action="store_true",
                       help="enforce acceptance thresholds; exit 3 on violation")
    _add_common(p_ver)

    p_mom = sub.add_parser("moments", help="print analytic cap moments of the basis")
    p_mom.add_argument("--d", type=int, required=True)
    p_mom.add_argument("--alpha", type=float, required=True)
    p_mom.add_argument("--degree", type=int, required=True)
    _add_common(p_mom)

    return parser


def cmd_points(args):
    seed = _resolve_seed(args)
    try:
        domain = _build_domain(args.d, args.alpha, args.collar_beta)
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    if args.degree < 1:
        sys.stderr.write("error: --degree must be >= 1\n")
        return 1
    if not (0 < args.delta <= 1):
        sys.stderr.write("error: --delta must lie in (0, 1]\n")
        return 1
    nodes = greedy_maximal_set(domain, args.delta / args.degree, seed=seed,
                               degree=args.degree, delta=args.delta)
    cqio.write_canonical(args.out, cqio.points_to_dict(nodes))
    sys.stderr.write(f"wrote {len(nodes)} nodes to {args.out}\n")
    return 0


def cmd_solve(args):
    try:
        nodes = cqio.nodes_from_dict(cqio.load_json(args.points))
    except (cqio.FormatError, ValueError) as exc:
        sys.stderr.write(f"error: --points file invalid: {exc}\n")
        return 1
    if args.degree < 0:
        sys.stderr.write("error: --degree must be >= 0\n")
        return 1
    result = solve_weights(nodes, args.degree, tol=args.tol)
    if isinstance(result, Infeasible):
        sys.stderr.write(
            f"infeasible: {result.message}; achieved residual {result.residual:.3e}; "
            f"{len(result.zero_nodes)} zero-weight nodes; "
            f"suggest regenerating the set at delta = {nodes.delta / 2:.6g}\n"
        )
        return 2
    cqio.write_canonical(args.out, cqio.rule_to_dict(result))
    sys.stderr.write(
        f"accepted: {len(result.nodes)} nodes, residual {result.residual:.3e}\n"
    )
    return 0


def _load_nodes_arg(args):
    if args.points is None:
        raise cqio.FormatError("--points is required for this subcommand")
    return cqio.nodes_from_dict(cqio.load_json(args.points))


def _weight_from_args(args):
    if args.weight == "constant":
        return DoublingWeight.constant()
    return DoublingWeight.boundary_power(args.gamma, n_ref=args.n_ref)


def cmd_verify(args):
    seed = _resolve_seed(args)
    threads = _resolve_threads(args)
    sub = args.subcommand
    t0 = time.perf_counter()
    try:
        if sub == "mz":
            if args.rule is None:
                raise cqio.FormatError("--rule is required for mz")
            rule = cqio.rule_from_dict(cqio.load_json(args.rule))
            lo, hi = mz_bracket(rule, args.p, args.trials, seed,
                                trial_degree=args.trial_degree, threads=threads)
            grid = {"d": rule.nodes.domain.dim, "alpha": rule.nodes.domain.alpha,
                    "n": rule.degree, "delta": rule.nodes.delta, "p": args.p}
            cells = [{"ratio_min": lo, "ratio_max": hi, "spread": hi / lo,
                      "trials": args.trials}]
            ok = hi / lo <= 20.0
            report = VerificationReport("mz", grid, cells, seed)
        elif sub == "osc":
            nodes = _load_nodes_arg(args)
            degree = args.degree if args.degree is not None else nodes.degree
            est = osc_constant(nodes, degree, args.p, beta=args.beta,
                               trials=args.trials, ball_samples=args.ball_samples,
                               seed=seed, threads=threads)
            grid = {"d": nodes.domain.dim, "alpha": nodes.domain.alpha, "n": degree,
                    "delta": nodes.delta, "p": args.p, "beta": args.beta}
            cells = [{"estimate": est, "trials": args.trials,
                      "ball_samples": args.ball_samples}]
            ok = math.isfinite(est) and est > 0
            report = VerificationReport("osc", grid, cells, seed)
        elif sub == "sieve":
            nodes = _load_nodes_arg(args)
            degree = args.degree if args.degree is not None else nodes.degree
            est = large_sieve_constant(nodes, degree, args.p, trials=args.trials,
                                       seed=seed, threads=threads)
            grid = {"d": nodes.domain.dim, "alpha": nodes.domain.alpha,
                    "n": degree, "p": args.p}
            cells = [{"estimate": est, "trials": args.trials}]
            ok = math.isfinite(est) and est > 0
            report = VerificationReport("sieve", grid, cells, seed)
        elif sub == "maxmin":
            nodes = _load_nodes_arg(args)
            degree = args.degree if args.degree is not None else nodes.degree
            (mx_lo, mx_hi), (mn_lo, mn_hi) = maxmin_equivalence(
                nodes, degree, args.p, beta=args.beta, trials=args.trials,
                ball_samples=args.ball_samples, seed=seed, threads=threads)
            grid = {"d": nodes.domain.dim, "alpha": nodes.domain.alpha, "n": degree,
                    "delta": nodes.delta, "p": args.p, "beta": args.beta}
            cells = [{"max_lo": mx_lo, "max_hi": mx_hi,
                      "min_lo": mn_lo, "min_hi": mn_hi, "trials": args.trials,
                      "ball_samples": args.ball_samples}]
            ok = (1 / 20 <= mx_lo and mx_hi <= 20 and 1 / 20 <= mn_lo and mn_hi <= 20)
            report = VerificationReport("maxmin", grid, cells, seed)
        elif sub == "bernstein":
            if args.alpha is None or args.degree is None:
                raise cqio.FormatError("--alpha and --degree are required for bernstein")
            weight = _weight_from_args(args)
            est = bernstein_check_d1(args.alpha, args.degree, args.p, weight,
                                     trials=args.trials, seed=seed, threads=threads,
                                     statistic=args.statistic)
            grid = {"d": 1, "alpha": args.alpha, "n": args.degree, "p": args.p,
                    "weight": weight.label(), "statistic": args.statistic}
            cells = [{"estimate": est, "trials": args.trials}]
            ok = math.isfinite(est)
            report = VerificationReport("bernstein", grid, cells, seed)
        elif sub == "weighted-mz":
            nodes = _load_nodes_arg(args)
            if not isinstance(nodes.domain, Cap):
                raise cqio.FormatError("weighted-mz runs on cap node sets")
            degree = args.degree if args.degree is not None else nodes.degree
            weight = _weight_from_args(args)
            brackets = weighted_mz(nodes.domain, weight, nodes, degree, args.p,
                                   trials=args.trials, ball_samples=args.ball_samples,
                                   seed=seed, threads=threads)
            grid = {"d": nodes.domain.dim, "alpha": nodes.domain.alpha, "n": degree,
                    "delta": nodes.delta, "p": args.p, "weight": weight.label()}
            cells = [{f"{name}_{tag}": val
                      for name, (lo, hi) in brackets.items()
                      for tag, val in (("lo", lo), ("hi", hi))}]
            cells[0]["trials"] = args.trials
            cells[0]["ball_samples"] = args.ball_samples
            ok = all(1 / 50 <= lo and hi <= 50 for lo, hi in brackets.values())
            report = VerificationReport("weighted-mz", grid, cells, seed)
        else:  # cov / change-of-var: the dilation identity
            if args.alpha is None:
                raise cqio.FormatError("--alpha is required for the dilation check")
            if not (0.5 <= args.alpha <= math.pi - 0.1):
                raise cqio.FormatError("dilation check needs alpha in [1/2, pi - 0.1]")
            degree = args.degree if args.degree is not None else 8
            cap = Cap(north_pole(args.d), args.alpha)
            est = change_of_variables_check(cap, degree, trials=args.trials,
                                            seed=seed, threads=threads)
            grid = {"d": args.d, "alpha": args.alpha, "n": degree}
            cells = [{"max_discrepancy": est, "trials": args.trials}]
            ok = est <= 1e-9
            report = VerificationReport("cov", grid, cells, seed)
    except (cqio.FormatError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    elapsed = time.perf_counter() - t0
    if args.timing:
        report.wall_time_s = elapsed
    cqio.write_canonical(args.report, report.to_dict())
    if args.csv:
        cqio.write_report_csv(args.csv, report)
    sys.stderr.write(f"report written to {args.report} ({elapsed:.1f}s)\n")
    if args.enforce and not ok:
        sys.stderr.write("assertion failed: report violates acceptance thresholds\n")
        return 3
    return 0


def cmd_moments(args):
    if args.d not in (1, 2):
        sys.stderr.write(f"error: --d must be 1 or 2, got {args.d}\n")
        return 1
    try:
        cap = Cap(north_pole(args.d), args.alpha)
    except ValueError as exc:
        sys.stderr.write(f"error: --alpha invalid: {exc}\n")
        return 1
    if args.degree < 0:
        sys.stderr.write("error: --degree must be >= 0\n")
        return 1
    values = domain_moments(cap, args.degree)
    if args.d == 2:
        labels = [{"l": l, "m": m} for l in range(args.degree + 1)
                  for m in range(-l, l + 1)]
    else:
        labels = [{"k": 0, "kind": "const"}]
        for k in range(1, args.degree + 1):
            labels.append({"k": k, "kind": "cos"})
            labels.append({"k": k, "kind": "sin"})
    moments = [dict(lab, value=float(v)) for lab, v in zip(labels, values)]
    payload = {"d": args.d, "alpha": args.alpha, "degree": args.degree,
               "basis": "fourier" if args.d == 1 else "real-spherical-harmonics",
               "moments": moments}
    sys.stdout.write(cqio.canonical_dumps(payload))
    return 0


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    if args.command == "points":
        code = cmd_points(args)
    elif args.command == "solve":
        code = cmd_solve(args)
    elif args.command == "verify":
        code = cmd_verify(args)
    else:
        code = cmd_moments(args)
    return code


if __name__ == "__main__":
    sys.exit(main())
