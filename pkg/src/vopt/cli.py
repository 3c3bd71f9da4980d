"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 solver failure,
3 property-suite failure.
"""

from __future__ import annotations

import argparse
import sys

from .harness import TASKS, make_config, report_text, run_props, run_suite


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vopt",
                     description="Run smoothed-surrogate optimization experiments.")
    parser.add_argument("task", choices=TASKS)
    parser.add_argument("--dim", type=int, default=None)
    parser.add_argument("--n", type=int, default=None,
                        help="sample count (SVM); regression tasks use 10*dim")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--repeats", type=int, default=1)
    parser.add_argument("--sigma0", type=float, default=None,
                        help="initial smoothing width")
    parser.add_argument("--shrink", type=float, default=None,
                        help="geometric shrink factor")
    parser.add_argument("--shrink-every", type=int, default=None,
                        help="iterations between shrinks")
    parser.add_argument("--sigma-floor", type=float, default=None)
    parser.add_argument("--tol", type=float, default=None,
                        help="optimizer termination tolerance")
    parser.add_argument("--max-iters", type=int, default=None)
    parser.add_argument("--cost", type=float, default=10.0,
                        help="SVM cost coefficient")
    parser.add_argument("--out", type=str, default=None,
                        help="report path; stdout when omitted")
    parser.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.task == "props":
        results = run_props(seed=args.seed)
        for res in results:
            status = "pass" if res.passed else "FAIL"
            print(f"{res.name}: {status} ({res.checks - res.failures}/{res.checks})")
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
                fh.write("property,checks,failures\n")
                for res in results:
                    fh.write(f"{res.name},{res.checks},{res.failures}\n")
        return 3 if any(not res.passed for res in results) else 0
    try:
        config = make_config(
            task=args.task, dim=args.dim, n=args.n, seed=args.seed,
            repeats=args.repeats, sigma0=args.sigma0, shrink=args.shrink,
            shrink_every=args.shrink_every, sigma_floor=args.sigma_floor,
            tol=args.tol, max_iters=args.max_iters, cost=args.cost,
            out=args.out, fmt=args.fmt)
    except ValueError as exc:
        print(f"vopt: configuration error: {exc}", file=sys.stderr)
        return 1
    rows, failures = run_suite(config)
    if not config.output_path:
        sys.stdout.write(report_text(rows, config.fmt))
    return 2 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())
