"""Command-line driver: ``nlpbdw {offline,exp1,exp2,estimate}``.

Exit codes: 0 on success, 2 for configuration or input errors, 3 for
numerical failures.
"""
import argparse
import logging
import sys
from pathlib import Path

from .config import KEYS, load_config
from .errors import InputError, NumericalError
from .experiments import (load_context, run_estimate, run_exp1, run_exp2,
                          run_offline)

log = logging.getLogger("nlpbdw")


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat 'key = value' configuration file")
    common.add_argument("--store", help="artifact store directory "
                        "(default: <output_dir>/store)")
    common.add_argument("--plots", action="store_true",
                        help="write SVG figures next to the CSV files")
    common.add_argument("--threads", type=int, default=1,
                        help="worker threads for per-test-point work")
    common.add_argument("-v", "--verbose", action="store_true")
    for key in KEYS:
        common.add_argument(f"--{key}", dest=f"cfg_{key}", metavar="VALUE",
                            help=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(
        prog="nlpbdw",
        description="Nonlinear PBDW state estimation with coarse surrogate "
                    "model selection. Every configuration key can be given "
                    "as --<key> VALUE (JSON syntax).")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("offline", parents=[common],
                   help="solve snapshots, build measurements, spaces, family")
    sub.add_parser("exp1", parents=[common],
                   help="coarse surrogate accuracy and wall time")
    sub.add_parser("exp2", parents=[common],
                   help="coarse vs fine model selection agreement")
    est = sub.add_parser("estimate", parents=[common],
                         help="reconstruct a state from measurement values")
    est.add_argument("--w-file", required=True,
                     help="text file with m measurement values")
    est.add_argument("--raw", action="store_true",
                     help="values are box averages rather than coordinates "
                          "in the orthonormal measurement basis")
    est.add_argument("--level", type=int, default=None,
                     help="surrogate level (default: fine level)")
    est.add_argument("--out", default=None,
                     help="output directory (default: <output_dir>/estimate)")
    return parser


def _run(args):
    overrides = {k: getattr(args, f"cfg_{k}") for k in KEYS
                 if getattr(args, f"cfg_{k}") is not None}
    cfg = load_config(args.config, overrides)
    out_dir = Path(cfg.output_dir)
    store_dir = Path(args.store) if args.store else out_dir / "store"

    if args.command == "offline":
        store = run_offline(cfg, store_dir, args.threads)
        print(f"store written to {store_dir} "
              f"(K={store.manifest['family']['K']})")
        return

    try:
        ctx = load_context(store_dir)
    except FileNotFoundError as exc:
        raise InputError(str(exc)) from exc
    # the store fixes the problem; only reporting options may change
    ctx.cfg.output_dir = cfg.output_dir
    if "coarse_levels" in overrides or args.config:
        ctx.cfg.coarse_levels = cfg.coarse_levels
        ctx.cfg.validate()

    if args.command == "exp1":
        res = run_exp1(ctx, out_dir, args.threads, args.plots)
        for s, err, wall in zip(res["levels"], res["mean_abs_err"], res["wall"]):
            print(f"s={s}  mean|S_h-S_fine|={err:.3e}  wall={wall:.3f}s")
        fit = res["fit"]
        print(f"slope={res['slope']:.3f}  sigma_est={fit['sigma_est']:.3e} "
              f"(mu={fit['mu']:.3e}, eps_est={fit['eps_est']:.3e})")
    elif args.command == "exp2":
        res = run_exp2(ctx, out_dir, args.threads, args.plots)
        for s, af, at in zip(res["levels"], res["agree_fine"], res["agree_true"]):
            print(f"s={s}  agree_fine={af}  agree_true={at}  "
                  f"of {ctx.cfg.n_test}")
    elif args.command == "estimate":
        out = args.out or out_dir / "estimate"
        k, _, values = run_estimate(ctx, args.w_file, out, args.level, args.raw)
        print(f"k*={k + 1}  written to {out}")


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _run(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
