"""Command-line interface.

Verbs: generate (classical families), train-nes, run-ga, sweep (experiment
spec file), report (merge/pivot result tables), verify (re-score stored
families). Option names mirror the config field names; --profile picks the
paper-scale or desk-scale preset, and explicit flags override it.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bitseq import save_family
from .classical import WeilFamilySpec, best_of_samples, gold_family, gold_spec_for_degree, weil_family
from .correlation import evaluate_family, welch_bound
from .harness import (
    OUTPUT_DIR_ENV,
    PROFILES,
    compare_report,
    gold_length_degrees,
    run_experiment,
    verify_results,
)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--length", type=int, required=True, help="chips per code")
    parser.add_argument("--codes", type=int, required=True, help="family size K")
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument("--profile", choices=sorted(PROFILES), default="desk")
    parser.add_argument("--out", type=Path, default=None, help=f"output directory (default ${OUTPUT_DIR_ENV} or ./results)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spreadcodes", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a classical code family")
    gen.add_argument("--family", choices=("gold", "weil"), required=True)
    gen.add_argument("--length", type=int, required=True)
    gen.add_argument("--codes", type=int, default=None, help="subset size; omit for the full family")
    gen.add_argument("--samples", type=int, default=1, help="random subsets to score; keeps the best")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--balance-resampling", action="store_true", help="redraw subsets with imbalanced auto/cross components")
    gen.add_argument("--out", type=Path, required=True, help="family file to write")

    nes = sub.add_parser("train-nes", help="train the search distribution")
    _add_common(nes)
    nes.add_argument("--sigma2", type=float, default=None, help="proposal variance")
    nes.add_argument("--batch-size", type=int, default=None)
    nes.add_argument("--iterations", type=int, default=None)
    nes.add_argument("--learning-rate", type=float, default=None)
    nes.add_argument("--no-baseline", action="store_true", help="disable the batch-mean baseline")

    ga = sub.add_parser("run-ga", help="run the genetic-algorithm baseline")
    _add_common(ga)
    ga.add_argument("--population", type=int, default=None)
    ga.add_argument("--iterations", type=int, default=None)
    ga.add_argument("--elite-rate", type=float, default=None)
    ga.add_argument("--mutation-rate", type=float, default=None)

    sweep = sub.add_parser("sweep", help="run every cell of an experiment spec")
    sweep.add_argument("--spec", type=Path, required=True, help="JSON experiment spec")
    sweep.add_argument("--out", type=Path, default=None)
    sweep.add_argument("--workers", type=int, default=1)

    report = sub.add_parser("report", help="merge result tables or align training logs")
    report.add_argument("inputs", nargs="+", type=Path)
    report.add_argument("--out", type=Path, required=True)

    verify = sub.add_parser("verify", help="re-evaluate stored families against results.csv")
    verify.add_argument("results_dir", type=Path)
    return parser


def _cmd_generate(args) -> int:
    if args.family == "gold":
        degrees = gold_length_degrees()
        if args.length not in degrees:
            print(f"error: no Gold family at length {args.length}; available: {sorted(degrees)}", file=sys.stderr)
            return 2
        full = gold_family(gold_spec_for_degree(degrees[args.length]))
    else:
        full = weil_family(WeilFamilySpec(args.length))

    if args.codes is None:
        family, label = full, f"full family ({full.num_codes} codes)"
        report = evaluate_family(family) if full.num_codes >= 2 else None
    else:
        family, report = best_of_samples(
            full,
            args.codes,
            args.samples,
            master_seed=args.seed,
            balance_resampling=args.balance_resampling,
        )
        label = f"best of {args.samples} subsets"
    save_family(args.out, family, seed=args.seed, generator=args.family)
    print(f"wrote {args.out}: {args.family} length={family.length} codes={family.num_codes} ({label})")
    if report is not None:
        print(
            f"f_ac={report.f_ac:.6g} f_cc={report.f_cc:.6g} f={report.f:.6g} "
            f"welch={welch_bound(family.num_codes, family.length):.6g}"
        )
    return 0


def _spec_from_args(args, kind: str) -> dict:
    spec = {
        "kind": kind,
        "length": args.length,
        "family_sizes": [args.codes],
        "seeds": [args.seed],
        "profile": args.profile,
    }
    if kind == "nes_train":
        overrides = {}
        if args.sigma2 is not None:
            overrides["variance"] = args.sigma2
        if args.batch_size is not None:
            overrides["batch_size"] = args.batch_size
        if args.iterations is not None:
            overrides["num_iterations"] = args.iterations
        if args.learning_rate is not None:
            overrides["learning_rate"] = args.learning_rate
        if args.no_baseline:
            overrides["use_baseline"] = False
        if overrides:
            spec["nes"] = overrides
    else:
        overrides = {}
        if args.population is not None:
            overrides["population_size"] = args.population
        if args.iterations is not None:
            overrides["num_iterations"] = args.iterations
        if args.elite_rate is not None:
            overrides["elite_rate"] = args.elite_rate
        if args.mutation_rate is not None:
            overrides["mutation_rate"] = args.mutation_rate
        if overrides:
            spec["ga"] = overrides
    return spec


def _report_failures(result) -> None:
    for failure in result.failures:
        print(f"cell failed: {failure['generator']} K={failure['num_codes']} seed={failure['seed']}: {failure['error']}", file=sys.stderr)


def _cmd_train_nes(args) -> int:
    result = run_experiment(_spec_from_args(args, "nes_train"), output_dir=args.out)
    _report_failures(result)
    if result.rows:
        row = result.rows[0]
        print(f"champion f={row['f']!r} (f_ac={row['f_ac']!r}, f_cc={row['f_cc']!r}) -> {result.output_dir}")
    return 0 if result.ok else 1


def _cmd_run_ga(args) -> int:
    result = run_experiment(_spec_from_args(args, "ga_run"), output_dir=args.out)
    _report_failures(result)
    if result.rows:
        row = result.rows[0]
        print(f"best f={row['f']!r} (f_ac={row['f_ac']!r}, f_cc={row['f_cc']!r}) -> {result.output_dir}")
    return 0 if result.ok else 1


def _cmd_sweep(args) -> int:
    result = run_experiment(args.spec, output_dir=args.out, workers=args.workers)
    _report_failures(result)
    print(f"{len(result.rows)} cells ok, {len(result.failures)} failed -> {result.output_dir}")
    return 0 if result.ok else 1


def _cmd_report(args) -> int:
    out = compare_report(args.inputs, args.out)
    print(f"report -> {out}")
    return 0


def _cmd_verify(args) -> int:
    problems = verify_results(args.results_dir)
    if problems:
        for p in problems:
            print(f"MISMATCH {p}", file=sys.stderr)
        return 1
    print("verified: all stored families reproduce their scores exactly")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "train-nes": _cmd_train_nes,
    "run-ga": _cmd_run_ga,
    "sweep": _cmd_sweep,
    "report": _cmd_report,
    "verify": _cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
