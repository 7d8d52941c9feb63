"""Command-line entry point: ``gen``, ``run``, ``synopsis`` and ``predict``.

Exit codes: 0 success, 2 configuration error, 3 I/O or input-format error,
4 internal assertion (budget audit).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .data import FormatError, InfeasibleSpecError, SyntheticSpec, gen_synthetic, load_csv, normalize, write_csv
from .eugkm import DEFAULT_THETA, Grid, choose_M, format_synopsis, grid_layout, publish_synopsis
from .harness import BudgetAuditError, ConfigError, load_config, predict_table, run_experiment
from .mechanisms import Budget, ParameterError, make_rng

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_AUDIT = 0, 2, 3, 4


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _list(text: str, cast):
    return [cast(x) for x in text.split(",") if x.strip()]


def cmd_gen(args) -> int:
    spec = SyntheticSpec(args.d, args.k, args.n, args.separation, args.std, args.seed, args.r)
    data, centers = gen_synthetic(spec)
    write_csv(args.out, data.points, [f"x{i}" for i in range(spec.d)])
    if args.centers:
        write_csv(args.centers, centers, [f"x{i}" for i in range(spec.d)])
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.protocol:
        cfg = cfg.with_protocol(args.protocol)
    report = run_experiment(cfg)
    _emit(report.to_csv(timing=args.timing), args.out)
    return EXIT_OK


def cmd_synopsis(args) -> int:
    data = normalize(load_csv(args.csv), args.r)
    if args.m is not None:
        grid = Grid(data.d, args.m, args.r)
    else:
        grid = grid_layout(data.d, args.r, max(1.0, choose_M(data.n, args.eps, data.d, args.theta)))
    syn = publish_synopsis(data, grid, args.eps, make_rng(args.seed), Budget(args.eps))
    _emit(format_synopsis(syn), args.out)
    return EXIT_OK


def cmd_predict(args) -> int:
    table = predict_table(_list(args.N, int), _list(args.d, int), _list(args.k, int), _list(args.eps, float),
                          args.t, args.r, args.rho, args.theta)
    _emit(table, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dpkmeans", description="Differentially private k-means benchmarks")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a synthetic Gaussian-cluster CSV")
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--separation", type=float, default=0.5)
    g.add_argument("--std", type=float, default=None, help="cluster std (default separation/6)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--r", type=float, default=1.0)
    g.add_argument("--out", required=True, help="points CSV")
    g.add_argument("--centers", help="optional CSV for the true centers")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="run an experiment config and print the report CSV")
    r.add_argument("config")
    r.add_argument("--out")
    proto = r.add_mutually_exclusive_group()
    proto.add_argument("--desk", dest="protocol", action="store_const", const="desk",
                       help="desk-scale repetition counts (10 init sets, 10 reps)")
    proto.add_argument("--full", dest="protocol", action="store_const", const="full",
                       help="full repetition counts (30 init sets, 100 reps)")
    r.add_argument("--timing", action="store_true", help="fill the wall_ms column (breaks byte-identical reruns)")
    r.set_defaults(func=cmd_run, protocol=None)

    s = sub.add_parser("synopsis", help="publish a noisy grid synopsis of a CSV")
    s.add_argument("csv")
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--theta", type=float, default=DEFAULT_THETA)
    s.add_argument("--r", type=float, default=1.0)
    s.add_argument("--m", type=int, default=None, help="cells per dimension (default: sized from N, eps, theta)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_synopsis)

    q = sub.add_parser("predict", help="error-model table over a parameter lattice")
    q.add_argument("--N", default="10000", help="comma list")
    q.add_argument("--d", default="2", help="comma list")
    q.add_argument("--k", default="5", help="comma list")
    q.add_argument("--eps", default="1.0", help="comma list")
    q.add_argument("--t", type=int, default=5)
    q.add_argument("--r", type=float, default=1.0)
    q.add_argument("--rho", type=float, default=0.25)
    q.add_argument("--theta", type=float, default=DEFAULT_THETA)
    q.add_argument("--out")
    q.set_defaults(func=cmd_predict)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BudgetAuditError as exc:
        print(f"error: budget audit failed: {exc}", file=sys.stderr)
        return EXIT_AUDIT
    except (ConfigError, ParameterError, InfeasibleSpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
