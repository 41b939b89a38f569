"""Command-line interface: ``svprka {sweep,trial,probe,bound}``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

import argparse
import contextlib
import dataclasses
import logging
import sys

from .errors import ConfigError, NumericalError
from .harness import (
    ExperimentConfig,
    bound_diagnostic,
    run_sweep,
    run_trial,
    tessellation_probe,
    write_bound_csv,
    write_csv,
    write_probe_csv,
)

log = logging.getLogger("svprka")


def _load_config(args):
    cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return cfg.validate()


@contextlib.contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
        return
    try:
        fh = open(path, "w", newline="")
    except OSError as exc:
        raise OSError(f"cannot open output {path}: {exc}") from exc
    with fh:
        yield fh


def _cmd_sweep(args):
    cfg = _load_config(args)
    log.info("sweep: lambda=%s trials=%d threads=%d", list(cfg.lambda_grid), cfg.trials, args.threads)
    with _output(args.out) as out:
        run_sweep(cfg, out, threads=args.threads, timing=args.timing)


def _cmd_trial(args):
    cfg = _load_config(args)
    result = run_trial(cfg, args.lam, args.trial_index, timing=args.timing)
    with _output(args.out) as out:
        write_csv([result], [args.lam], out)


def _cmd_probe(args):
    cfg = _load_config(args)
    grid = [int(v) for v in args.n_grid.split(",")]
    cells = tessellation_probe(cfg.n1, cfg.n2, cfg.rank, grid, cfg.trials, cfg.master_seed,
                               threads=args.threads)
    with _output(args.out) as out:
        write_probe_csv(cells, out)


def _cmd_bound(args):
    cfg = _load_config(args)
    report = bound_diagnostic(cfg, args.lam, args.trial_index, trace_every=args.trace_every)
    log.info("bound: kappa(V)=%.6g, non-expansiveness violations=%d", report.kappa_v, report.violations)
    with _output(args.out) as out:
        write_bound_csv(report, out)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--out", help="output CSV path (default: stdout)")
    common.add_argument("--seed", type=int, help="override master_seed")
    common.add_argument("--trials", type=int, help="override trials")
    common.add_argument("--threads", type=int, default=1, help="worker processes (speed only)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="svprka", description="One-bit low-rank matrix sensing experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", parents=[common], help="SVP-RKA vs HSVT over the lambda grid")
    p.add_argument("--timing", action="store_true", help="fill runtime_ms (output no longer reproducible)")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("trial", parents=[common], help="a single seeded trial")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--trial-index", type=int, default=0)
    p.add_argument("--timing", action="store_true")
    p.set_defaults(func=_cmd_trial)

    p = sub.add_parser("probe", parents=[common], help="sign-consistency tessellation probe")
    p.add_argument("--n-grid", default="120,480,1920", help="comma-separated measurement counts")
    p.set_defaults(func=_cmd_probe)

    p = sub.add_parser("bound", parents=[common], help="dense trace against the linear-rate envelope")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--trial-index", type=int, default=0)
    p.add_argument("--trace-every", type=int, default=1)
    p.set_defaults(func=_cmd_bound)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"svprka: config error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"svprka: numerical failure in {exc.module}.{exc.operation}: {exc.detail}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"svprka: I/O error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
