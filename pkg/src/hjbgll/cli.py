"""Command-line benchmark driver.

    hjbgll-bench --case 1 --scheme sl --order 2 --nbm 10 --h 0.001 --controls 64
    hjbgll-bench study --case 1 --orders 1,2 --nbm 10,20 --h 0.001 --controls 64

Writes CSV (header plus one row per solve) to stdout or ``--out``.
Exit codes: 0 success, 2 usage error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys

from .problems import ProblemError, load_problem, test_case
from .solver import SCHEMES, STOPPING, SolveConfig, solve

FIELDS = (
    "case", "scheme", "order", "nbm", "h", "hhat", "controls", "stopping",
    "tol", "err", "iterations", "residual", "seconds", "converged",
)
EXIT_USAGE = 2
EXIT_SOLVER = 3


def _int_list(text: str) -> list:
    try:
        values = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("list must not be empty")
    return values


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def _common(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--case", type=int, choices=(1, 2, 3, 4), help="built-in benchmark problem")
    src.add_argument("--problem", help="problem file (key = expression lines)")
    p.add_argument("--as-printed", action="store_true",
                   help="use the literal published coefficients of cases 1-4")
    p.add_argument("--scheme", choices=SCHEMES, default="sl")
    p.add_argument("--h", type=_positive_float, default=0.001)
    p.add_argument("--hhat", type=_positive_float, default=None, help="FD first-order step (default h)")
    p.add_argument("--controls", type=int, default=2000)
    p.add_argument("--tol", type=_positive_float, default=1e-7)
    p.add_argument("--max-iter", type=int, default=100000)
    p.add_argument("--stopping", choices=STOPPING, default="diff")
    p.add_argument("--q", type=float, default=None, help="exponent for analytic stopping")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", help="write CSV here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hjbgll-bench", description="Solve HJB benchmark problems and emit CSV.")
    _common(p)
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--nbm", type=int, default=10, help="meshes per direction")
    return p


def build_study_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hjbgll-bench study", description="Run an order x mesh-count table.")
    _common(p)
    p.add_argument("--orders", type=_int_list, default=[1, 2, 3])
    p.add_argument("--nbm", type=_int_list, required=True, help="comma-separated meshes per direction")
    return p


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def _row(label, cfg: SolveConfig, report) -> dict:
    return {
        "case": label,
        "scheme": cfg.scheme,
        "order": cfg.order,
        "nbm": cfg.meshes_per_dim,
        "h": cfg.h,
        "hhat": cfg.step_hat if cfg.scheme == "fd" else None,
        "controls": cfg.controls,
        "stopping": cfg.stopping,
        "tol": cfg.tol,
        "err": report.sup_error,
        "iterations": report.iterations,
        "residual": report.residual,
        "seconds": round(report.wall_seconds, 3),
        "converged": report.converged,
    }


def _emit(rows, out_path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FIELDS)
    for row in rows:
        writer.writerow([_fmt(row[k]).replace(",", ";") for k in FIELDS])
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
        sys.stdout.flush()


def _run(args, pairs) -> int:
    try:
        if args.problem:
            problem, label = load_problem(args.problem), None
            label = problem.name.replace(",", ";")
        else:
            problem, label = test_case(args.case, args.as_printed), args.case
    except (OSError, ProblemError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    rows = []
    for order, nbm in pairs:
        try:
            cfg = SolveConfig(
                scheme=args.scheme, order=order, meshes_per_dim=nbm, h=args.h, hhat=args.hhat,
                controls=args.controls, stopping=args.stopping, tol=args.tol,
                max_iter=args.max_iter, q=args.q, threads=args.threads,
            )
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        try:
            report = solve(problem, cfg)
        except (ValueError, MemoryError) as exc:
            print(f"solver failed ({type(exc).__name__}): {exc}", file=sys.stderr)
            return EXIT_SOLVER
        rows.append(_row(label, cfg, report))
    _emit(rows, args.out)
    return 0


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        if argv and argv[0] == "study":
            args = build_study_parser().parse_args(argv[1:])
            pairs = [(order, nbm) for nbm in args.nbm for order in args.orders]
        else:
            args = build_parser().parse_args(argv)
            pairs = [(args.order, args.nbm)]
    except SystemExit as exc:
        return int(exc.code or 0) if exc.code in (0, None) else EXIT_USAGE
    return _run(args, pairs)


if __name__ == "__main__":
    sys.exit(main())
