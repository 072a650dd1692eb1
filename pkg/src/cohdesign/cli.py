"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

import argparse
import logging
import sys

import numpy as np

from . import baselines, bench
from .dmcm import ContinuationSchedule, dmcm_continuation, random_unit_matrix
from .dmcmp import AmSchedule, Dictionary, dmcmp_continuation
from .errors import CoherenceError, ConfigError
from .matcore import coherence_of, load_matrix, mutual_coherence, save_matrix, welch_bound

log = logging.getLogger("cohdesign")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


def _schedule_flags(p, beta=False):
    p.add_argument("--rho0", type=float, default=0.5)
    p.add_argument("--eta", type=float, default=1.2)
    p.add_argument("--inner", type=int, default=15, help="inner iterations K")
    p.add_argument("--outer", type=int, default=1000, help="outer continuation rounds T")
    p.add_argument("--rho-floor", type=float, default=ContinuationSchedule.rho_floor)
    p.add_argument("--tol", type=float, default=None,
                   help="stop a round early once ||M_k+1 - M_k||_F <= tol")
    if beta:
        p.add_argument("--beta0", type=float, default=2.0)
        p.add_argument("--beta-floor", type=float, default=AmSchedule.beta_floor)


def build_parser():
    ap = argparse.ArgumentParser(prog="cohdesign", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dmcm", help="construct a low-coherence m x n matrix")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    _schedule_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write M here (matrix text format)")

    p = sub.add_parser("dmcm-p", help="optimize a projection P for a dictionary D")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    _schedule_flags(p, beta=True)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--dict", help="dictionary file (matrix text format)")
    src.add_argument("--random-dict", action="store_true",
                     help="draw a Gaussian d x n dictionary (the default)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write P here")
    p.add_argument("--out-m", help="write the auxiliary unit-column M here")

    p = sub.add_parser("baseline", help="run a comparison projection design")
    p.add_argument("--method", choices=["elad", "xu", "duarte", "random"], required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--dict", help="dictionary file; otherwise Gaussian d x n")
    p.add_argument("--elad-t", type=float, default=baselines.EladParams.t)
    p.add_argument("--elad-gamma", type=float, default=baselines.EladParams.down_scale)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write P here")

    for name, helptext in (("coherence-bench", "coherence sweep and Gram histograms"),
                           ("cs-bench", "compressed-sensing recovery sweep")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="YAML experiment config")
        p.add_argument("--out-dir", required=True)
        p.add_argument("--format", choices=["csv", "json", "dat"], default="csv")
        if name == "cs-bench":
            p.add_argument("--trials", type=int, default=None,
                           help="trials per point (overrides the config)")
            p.add_argument("--threshold", type=float, default=None,
                           help="success threshold on the squared error")
    return ap


def _load_dictionary(args):
    if args.dict:
        D = Dictionary(load_matrix(args.dict))
        if args.n is not None and args.n != D.n or args.d is not None and args.d != D.d:
            raise ConfigError(f"--n/--d disagree with dictionary shape {D.d} x {D.n}")
        return D
    if args.n is None or args.d is None:
        raise ConfigError("--n and --d are required without --dict")
    return Dictionary.gaussian(args.d, args.n, bench.derive_seed(args.seed, "dictionary"))


def _report(label, M, m, n):
    print(f"{label}: m={m} n={n} coherence={mutual_coherence(M):.10f} "
          f"welch={welch_bound(m, n):.10f}")


def cmd_dmcm(args):
    sched = ContinuationSchedule(args.rho0, args.eta, args.outer, args.rho_floor,
                                 args.inner, args.tol)
    M, trace = dmcm_continuation(random_unit_matrix(args.m, args.n, args.seed), sched)
    _report("dmcm", M, args.m, args.n)
    print(f"best coherence along the path: {trace.best_f_exact:.10f}")
    if args.out:
        save_matrix(args.out, M)


def cmd_dmcmp(args):
    D = _load_dictionary(args)
    sched = AmSchedule(args.rho0, args.beta0, args.eta, args.outer, args.rho_floor,
                       args.beta_floor, args.inner, args.tol)
    M, P, trace = dmcmp_continuation(D, args.m, sched, seed=args.seed)
    _report("dmcm-p (P D)", P @ D.matrix / np.linalg.norm(P @ D.matrix, axis=0), args.m, D.n)
    print(f"auxiliary M coherence={mutual_coherence(M):.10f} "
          f"coupling gap ||M - PD||_F={trace.records[-1].gap:.3e}")
    if args.out:
        save_matrix(args.out, P)
    if args.out_m:
        save_matrix(args.out_m, M)


def cmd_baseline(args):
    D = _load_dictionary(args)
    if args.method == "elad":
        P = baselines.elad_projection(
            D, args.m, baselines.EladParams(args.elad_t, args.elad_gamma, args.iters), args.seed)
    elif args.method == "xu":
        P = baselines.xu_projection(D, args.m, baselines.XuParams(args.iters), args.seed)
    elif args.method == "duarte":
        P = baselines.duarte_projection(D, args.m, seed=args.seed)
    else:
        P = baselines.random_projection(args.m, D.d, args.seed)
    print(f"{args.method}: m={args.m} n={D.n} coherence={coherence_of(P @ D.matrix):.10f} "
          f"welch={welch_bound(args.m, D.n):.10f}")
    if args.out:
        save_matrix(args.out, P)


def _finish(records, args, histograms=None):
    bad = bench.check_welch(records)
    if bad:
        raise CoherenceError(f"{len(bad)} records fall below the Welch bound, e.g. {bad[0]}")
    for path in bench.emit_results(records, args.format, args.out_dir, histograms=histograms):
        print(path)


def cmd_coherence_bench(args):
    cfg = bench.load_config(args.config)
    records = bench.run_coherence_experiment(cfg)
    hist = None
    if cfg.histogram:
        _, hist = bench.run_histogram_experiment(cfg)
    _finish(records, args, hist)


def cmd_cs_bench(args):
    cfg = bench.load_config(args.config)
    kw = {}
    if args.trials is not None:
        kw["trials_per_point"] = args.trials
    if args.threshold is not None:
        kw["success_threshold"] = args.threshold
    if kw:
        cfg = bench.with_overrides(cfg, **kw)
    _finish(bench.run_cs_experiment(cfg), args)


COMMANDS = {
    "dmcm": cmd_dmcm,
    "dmcm-p": cmd_dmcmp,
    "baseline": cmd_baseline,
    "coherence-bench": cmd_coherence_bench,
    "cs-bench": cmd_cs_bench,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CoherenceError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
