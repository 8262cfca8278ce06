"""Command line entry point: ``lielab analyze | converge | canned``."""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

import numpy as np

from .analysis import GRADING_CHOICES, InputError, analyze, report_dict, report_text
from .deformation import deformed_family
from .experiments import (
    MODES,
    default_eps_grid,
    default_points,
    eps_grid,
    result_summary,
    run_gronwall,
    run_metric_experiment,
    theory_exponent,
    write_csv,
)
from .fileformat import FormatError, canned_names, canned_text, load, parse_span
from .invariants import beta_search, compute_alphas
from .metrics import SolverConfig

EXIT_OK = 0
EXIT_FAIL = 2
EXIT_INPUT = 3
EXIT_BUDGET = 4


def _preference(text, names):
    if text is None:
        return None
    order = [s.strip() for s in text.split(",")]
    index = {b: i for i, b in enumerate(names)}
    if sorted(order) != sorted(names):
        raise InputError("--prefer must list every basis element once")
    return [index[b] for b in order]


def cmd_analyze(args) -> int:
    file = load(args.file)
    names = file.basis_names
    candidates = [parse_span(text, names) for text in args.ideal]
    if args.beta_strategy == "user_supplied" and not candidates:
        raise InputError("--beta-strategy user_supplied needs at least one --ideal")
    report = analyze(file, args.grading, args.beta_strategy, candidates, _preference(args.prefer, names))
    if args.json:
        sys.stdout.write(json.dumps(report_dict(report), sort_keys=True, indent=2) + "\n")
    else:
        sys.stdout.write(report_text(report))
    return EXIT_OK if report.expectations_ok else EXIT_FAIL


def _parse_points(text: str, F, seed: int):
    """``auto``, ``auto:N`` or ``auto:N:R``; or explicit ``p>q;p>q`` with
    comma-separated coordinates."""
    n = F.base.dim
    if text.startswith("auto"):
        parts = text.split(":")
        count = int(parts[1]) if len(parts) > 1 else 4
        radius = float(Fraction(parts[2])) if len(parts) > 2 else None
        return default_points(F, count, seed, radius)
    pairs = []
    for chunk in text.split(";"):
        if ">" not in chunk:
            raise InputError(f"point pair {chunk!r} must look like p>q")
        p, q = (np.array([float(Fraction(c)) for c in side.split(",")]) for side in chunk.split(">"))
        if len(p) != n or len(q) != n:
            raise InputError(f"points need {n} coordinates")
        pairs.append((p, q))
    return pairs


def cmd_converge(args) -> int:
    file = load(args.file)
    T, delta = file.tensor, file.distribution
    analysis = analyze(file, "both")
    if args.mode == "pansu" or (args.mode == "gronwall" and args.side == "asymptotic"):
        side = "asymptotic"
    else:
        side = "tangent"
    if side not in analysis.sides:
        raise InputError(f"the {side} side is unavailable for this algebra (pansu mode needs nilpotency)")
    report = analysis.sides[side]
    F = deformed_family(T, report.grading, side)
    alphas = compute_alphas(T, report.grading, delta, side)
    beta = beta_search(T, report.grading, delta, alpha_inf=alphas.alpha_inf)
    theory = theory_exponent(args.mode, alphas, beta.beta_hat)
    grid = eps_grid(args.eps_grid) if args.eps_grid else default_eps_grid(args.mode)
    norm = file.norm_spec()
    if args.mode == "gronwall":
        result = run_gronwall(F, norm, theory, grid, seed=args.seed, slack=args.slack)
    else:
        cfg = SolverConfig(segments=args.segments, starts=args.starts, seed=args.seed)
        pairs = _parse_points(args.points, F, args.seed)
        result = run_metric_experiment(F, norm, args.mode, theory, grid, pairs, cfg, slack=args.slack)
    if not beta.exhaustive:
        result.notes.append("beta_hat is an upper bound; the theory exponent uses it")
    if args.out:
        write_csv(result, args.out)
    if args.plot:
        from .plotting import plot_experiment

        plot_experiment(result, args.plot)
    summary = result_summary(result)
    if args.json:
        sys.stdout.write(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    else:
        slope = "n/a" if result.slope is None else f"{result.slope:.4f}"
        sys.stdout.write(
            f"{result.mode}: slope {slope}, theory {summary['theory']}, slack {result.slack}: {summary['verdict']}\n"
        )
        for note in result.notes:
            sys.stdout.write(f"  note: {note}\n")
    if result.budget_exceeded:
        return EXIT_BUDGET
    return EXIT_OK if result.verdict else EXIT_FAIL


def cmd_canned(args) -> int:
    if args.name:
        sys.stdout.write(canned_text(args.name))
    else:
        sys.stdout.write("\n".join(canned_names()) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lielab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="exact invariants of an algebra file or canned example")
    a.add_argument("file", help="path to a .lie file or the name of a canned example")
    a.add_argument("--grading", choices=GRADING_CHOICES, default="both")
    a.add_argument("--beta-strategy", choices=("coordinate", "user_supplied"), default="coordinate")
    a.add_argument("--ideal", action="append", default=[], help="candidate ideal span(...) for user_supplied")
    a.add_argument("--prefer", help="basis preference order for built gradings, e.g. e3,e1,e2")
    a.add_argument("--json", action="store_true")
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("converge", help="measure a convergence rate and fit its exponent")
    c.add_argument("file")
    c.add_argument("--mode", choices=MODES, required=True)
    c.add_argument("--side", choices=("asymptotic", "tangent"), default="asymptotic", help="gronwall mode only")
    c.add_argument("--eps-grid", help="lo:hi:n:log|lin or a comma list")
    c.add_argument("--points", default="auto", help="auto[:count[:radius]] or p>q;p>q")
    c.add_argument("--segments", type=int, default=32)
    c.add_argument("--starts", type=int, default=8)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--slack", type=float, default=0.15)
    c.add_argument("--out", help="CSV file for the raw rows")
    c.add_argument("--plot", help="PNG file for a log-log figure")
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=cmd_converge)

    k = sub.add_parser("canned", help="list canned examples or print one")
    k.add_argument("name", nargs="?")
    k.set_defaults(func=cmd_canned)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, InputError, FileNotFoundError) as exc:
        sys.stderr.write(f"lielab: {exc}\n")
        return EXIT_INPUT
    except ValueError as exc:
        sys.stderr.write(f"lielab: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
