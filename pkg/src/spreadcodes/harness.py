"""Experiment orchestration: sweeps, result tables, reports, verification.

An experiment spec (JSON) expands into a list of independent cells, one per
(generator, family size, seed). Cells run deterministically, in parallel if
requested, and a single writer assembles results.csv, per-cell training-log
CSVs, champion families in the text format, and a manifest that makes every
number re-derivable from the spec and seeds.
"""

from __future__ import annotations

import concurrent.futures
import csv
import hashlib
import json
import math
import os
import sys
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bitseq import load_family, save_family
from .classical import (
    WeilFamilySpec,
    _is_prime,
    best_of_samples,
    default_tap_table,
    gold_spec_for_degree,
    gold_family,
    weil_family,
)
from .correlation import evaluate_family, welch_bound
from .ga import GaConfig, ga_run
from .nes import NesConfig, TrainingDiverged, save_train_checkpoint, train, write_trainlog_csv

__all__ = [
    "DEFAULT_LENGTH_GRID",
    "DEFAULT_FAMILY_SIZE_GRID",
    "PROFILES",
    "OUTPUT_DIR_ENV",
    "ExperimentSpec",
    "ExperimentResult",
    "load_spec",
    "nes_config_for",
    "ga_config_for",
    "classical_samples_for",
    "gold_length_degrees",
    "available_generators",
    "run_experiment",
    "compare_report",
    "verify_results",
    "RESULT_COLUMNS",
]

OUTPUT_DIR_ENV = "SPREADCODES_OUTDIR"

# Lengths exercised in the reference studies; anything else still runs but
# draws a warning since Gold/Weil counterparts may not exist there.
DEFAULT_LENGTH_GRID = (63, 67, 127, 257, 511, 521, 1023, 1031)
DEFAULT_FAMILY_SIZE_GRID = tuple(range(3, 32, 2))

RESULT_COLUMNS = (
    "generator",
    "length",
    "num_codes",
    "seed",
    "f_ac",
    "f_cc",
    "f",
    "sqrt_f",
    "welch_bound",
    "wall_clock_s",
    "config_hash",
)

KINDS = ("nes_train", "ga_run", "classical_baseline", "ablation", "sweep")


@dataclass(frozen=True)
class Profile:
    """Scale preset: full-scale reference settings vs a desk-scale variant
    that finishes in minutes for CI and local iteration."""

    name: str
    batch_size: int
    num_iterations: int
    population_size: int
    classical_samples: int
    max_recommended_length: int | None = None


PROFILES = {
    "paper": Profile(
        name="paper",
        batch_size=100,
        num_iterations=10_000,
        population_size=100,
        classical_samples=10_000,
    ),
    "desk": Profile(
        name="desk",
        batch_size=50,
        num_iterations=1_500,
        population_size=50,
        classical_samples=1_000,
        max_recommended_length=127,
    ),
}


def nes_config_for(profile: str, num_codes: int, code_length: int, seed: int, overrides: dict | None = None) -> NesConfig:
    """Resolve a trainer config from a profile plus explicit overrides."""
    prof = PROFILES[profile]
    fields = {
        "num_codes": num_codes,
        "code_length": code_length,
        "batch_size": prof.batch_size,
        "num_iterations": prof.num_iterations,
        "master_seed": seed,
    }
    fields.update(overrides or {})
    return NesConfig(**fields)


def ga_config_for(profile: str, num_codes: int, code_length: int, seed: int, overrides: dict | None = None) -> GaConfig:
    prof = PROFILES[profile]
    fields = {
        "num_codes": num_codes,
        "code_length": code_length,
        "population_size": prof.population_size,
        "num_iterations": prof.num_iterations,
        "master_seed": seed,
    }
    fields.update(overrides or {})
    return GaConfig(**fields)


def classical_samples_for(profile: str) -> int:
    return PROFILES[profile].classical_samples


def gold_length_degrees() -> dict[int, int]:
    """Map from available Gold code lengths to register degree."""
    return {2**n - 1: n for n in default_tap_table()}


def available_generators(length: int) -> list[str]:
    gens = ["nes", "ga"]
    if length in gold_length_degrees():
        gens.append("gold")
    if _is_prime(length) and length >= 3:
        gens.append("weil")
    return gens


@dataclass
class ExperimentSpec:
    kind: str
    length: int
    family_sizes: list
    seeds: list
    profile: str = "desk"
    generators: list = field(default_factory=list)
    nes_overrides: dict = field(default_factory=dict)
    ga_overrides: dict = field(default_factory=dict)
    classical: dict = field(default_factory=dict)
    output_dir: str | None = None
    raw: dict = field(default_factory=dict)


@dataclass
class ExperimentResult:
    output_dir: Path
    rows: list
    failures: list

    @property
    def ok(self) -> bool:
        return not self.failures


_NES_KEYS = {"variance", "batch_size", "num_iterations", "learning_rate", "use_baseline", "eval_method"}
_GA_KEYS = {"population_size", "num_iterations", "elite_rate", "mutation_rate", "eval_method"}
_CLASSICAL_KEYS = {"family", "num_samples", "balance_resampling", "deviation_threshold", "max_redraws"}


def _check_keys(block: dict, allowed: set, where: str) -> None:
    unknown = set(block) - allowed
    if unknown:
        raise ValueError(f"unknown {where} keys: {sorted(unknown)}; allowed: {sorted(allowed)}")


def load_spec(source) -> ExperimentSpec:
    """Parse and validate an experiment spec from a path or a dict.

    All structural problems are raised here, before any cell runs.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    else:
        raw = dict(source)

    kind = raw.get("kind")
    if kind not in KINDS:
        raise ValueError(f"spec kind must be one of {KINDS}, got {kind!r}")
    if "length" not in raw:
        raise ValueError("spec must set 'length'")
    length = int(raw["length"])
    if length < 2:
        raise ValueError(f"length must be >= 2, got {length}")
    if length not in DEFAULT_LENGTH_GRID:
        warnings.warn(
            f"length {length} is outside the default grid {DEFAULT_LENGTH_GRID}; "
            "Gold/Weil families may not exist at this length",
            stacklevel=2,
        )

    family_sizes = [int(k) for k in raw.get("family_sizes", [])]
    if any(k < 2 for k in family_sizes):
        raise ValueError(f"family sizes must be >= 2, got {family_sizes}")
    seeds = [int(s) for s in raw.get("seeds", [])]
    profile = raw.get("profile", "desk")
    if profile not in PROFILES:
        raise ValueError(f"profile must be one of {sorted(PROFILES)}, got {profile!r}")

    nes_overrides = dict(raw.get("nes", {}))
    ga_overrides = dict(raw.get("ga", {}))
    classical = dict(raw.get("classical", {}))
    _check_keys(nes_overrides, _NES_KEYS, "nes")
    _check_keys(ga_overrides, _GA_KEYS, "ga")
    _check_keys(classical, _CLASSICAL_KEYS, "classical")

    generators = list(raw.get("generators", []))
    avail = available_generators(length)
    if kind == "sweep":
        if not generators:
            generators = avail
        else:
            bad = [g for g in generators if g not in avail]
            if bad:
                raise ValueError(f"generators {bad} unavailable at length {length}; available: {avail}")
    elif generators:
        raise ValueError("'generators' is only valid for kind='sweep'")

    if kind == "classical_baseline" or (kind == "sweep" and any(g in ("gold", "weil") for g in generators)):
        fams = [classical.get("family")] if kind == "classical_baseline" else [g for g in generators if g in ("gold", "weil")]
        for fam in fams:
            if fam not in ("gold", "weil"):
                raise ValueError(f"classical family must be 'gold' or 'weil', got {fam!r}")
            if fam == "gold" and length not in gold_length_degrees():
                raise ValueError(f"no Gold family at length {length}; available: {sorted(gold_length_degrees())}")
            if fam == "weil" and not _is_prime(length):
                raise ValueError(f"no Weil family at length {length} (not prime)")
            cap = 2 ** gold_length_degrees()[length] + 1 if fam == "gold" else (length - 1) // 2
            too_big = [k for k in family_sizes if k > cap]
            if too_big:
                raise ValueError(f"{fam} family at length {length} has {cap} members; cannot draw {too_big}")

    return ExperimentSpec(
        kind=kind,
        length=length,
        family_sizes=family_sizes,
        seeds=seeds,
        profile=profile,
        generators=generators,
        nes_overrides=nes_overrides,
        ga_overrides=ga_overrides,
        classical=classical,
        output_dir=raw.get("output_dir"),
        raw=raw,
    )


def _config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def _nes_cell(spec: ExperimentSpec, num_codes: int, seed: int, use_baseline: bool = True) -> dict:
    overrides = dict(spec.nes_overrides)
    if not use_baseline:
        overrides["use_baseline"] = False
    cfg = nes_config_for(spec.profile, num_codes, spec.length, seed, overrides)
    generator = "nes" if cfg.use_baseline else "nes-nobaseline"
    return {"generator": generator, "length": spec.length, "num_codes": num_codes, "seed": seed, "config": asdict(cfg)}


def _ga_cell(spec: ExperimentSpec, num_codes: int, seed: int) -> dict:
    cfg = ga_config_for(spec.profile, num_codes, spec.length, seed, spec.ga_overrides)
    return {"generator": "ga", "length": spec.length, "num_codes": num_codes, "seed": seed, "config": asdict(cfg)}


def _classical_cell(spec: ExperimentSpec, family: str, num_codes: int, seed: int) -> dict:
    config = {
        "family": family,
        "length": spec.length,
        "num_codes": num_codes,
        "master_seed": seed,
        "num_samples": int(spec.classical.get("num_samples", classical_samples_for(spec.profile))),
        "balance_resampling": bool(spec.classical.get("balance_resampling", True)),
        "deviation_threshold": float(spec.classical.get("deviation_threshold", 0.2)),
        "max_redraws": int(spec.classical.get("max_redraws", 10)),
    }
    if family == "gold":
        degree = gold_length_degrees()[spec.length]
        taps_g1, taps_g2 = default_tap_table()[degree]
        config.update({"degree": degree, "taps_g1": list(taps_g1), "taps_g2": list(taps_g2)})
    return {"generator": family, "length": spec.length, "num_codes": num_codes, "seed": seed, "config": config}


def expand_cells(spec: ExperimentSpec) -> list:
    """Deterministic cell list: iteration order is generator-major, then
    family size, then seed."""
    cells = []
    grid = [(k, s) for k in spec.family_sizes for s in spec.seeds]
    if spec.kind == "nes_train":
        cells = [_nes_cell(spec, k, s) for k, s in grid]
    elif spec.kind == "ga_run":
        cells = [_ga_cell(spec, k, s) for k, s in grid]
    elif spec.kind == "classical_baseline":
        cells = [_classical_cell(spec, spec.classical["family"], k, s) for k, s in grid]
    elif spec.kind == "ablation":
        for use_baseline in (True, False):
            cells.extend(_nes_cell(spec, k, s, use_baseline) for k, s in grid)
    elif spec.kind == "sweep":
        for gen in spec.generators:
            if gen == "nes":
                cells.extend(_nes_cell(spec, k, s) for k, s in grid)
            elif gen == "ga":
                cells.extend(_ga_cell(spec, k, s) for k, s in grid)
            else:
                cells.extend(_classical_cell(spec, gen, k, s) for k, s in grid)
    for cell in cells:
        cell["config_hash"] = _config_hash(cell["config"])
    return cells


def _artifact_stem(cell: dict) -> str:
    return f"{cell['generator']}_l{cell['length']}_k{cell['num_codes']}_seed{cell['seed']}"


def run_cell(cell: dict):
    """Execute one cell; returns (report, family, trainlog or None, seconds)."""
    generator = cell["generator"]
    started = time.perf_counter()
    if generator in ("nes", "nes-nobaseline"):
        result = train(NesConfig(**cell["config"]))
        family, report, trainlog = result.champion, result.report, result.log
    elif generator == "ga":
        result = ga_run(GaConfig(**cell["config"]))
        family, report, trainlog = result.best, result.report, result.log
    elif generator in ("gold", "weil"):
        cfg = cell["config"]
        if generator == "gold":
            full = gold_family(gold_spec_for_degree(cfg["degree"]))
        else:
            full = weil_family(WeilFamilySpec(cfg["length"]))
        family, report = best_of_samples(
            full,
            cfg["num_codes"],
            cfg["num_samples"],
            master_seed=cfg["master_seed"],
            balance_resampling=cfg["balance_resampling"],
            deviation_threshold=cfg["deviation_threshold"],
            max_redraws=cfg["max_redraws"],
        )
        trainlog = None
    else:
        raise ValueError(f"unknown generator {generator!r}")
    return report, family, trainlog, time.perf_counter() - started


def _result_row(cell: dict, report, seconds: float) -> dict:
    return {
        "generator": cell["generator"],
        "length": cell["length"],
        "num_codes": cell["num_codes"],
        "seed": cell["seed"],
        "f_ac": report.f_ac,
        "f_cc": report.f_cc,
        "f": report.f,
        "sqrt_f": math.sqrt(report.f),
        "welch_bound": welch_bound(cell["num_codes"], cell["length"]),
        "wall_clock_s": seconds,
        "config_hash": cell["config_hash"],
    }


def _fmt_cell_value(column: str, value) -> str:
    if column in ("generator", "config_hash"):
        return str(value)
    if column in ("length", "num_codes", "seed"):
        return str(int(value))
    if column == "wall_clock_s":
        return f"{value:.3f}"
    return repr(float(value))


def write_results_csv(path, rows) -> None:
    lines = [",".join(RESULT_COLUMNS)]
    for row in rows:
        lines.append(",".join(_fmt_cell_value(c, row[c]) for c in RESULT_COLUMNS))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, "results"))


def run_experiment(spec_source, output_dir=None, workers: int = 1) -> ExperimentResult:
    """Expand a spec into cells, run them all, and write the results bundle.

    The spec is fully validated before anything runs; individual cell
    failures are recorded in the manifest and do not stop other cells. With
    workers > 1 cells run in separate processes; results are assembled in
    cell order by this process, so the output is identical for any count.
    """
    spec = load_spec(spec_source)
    out = Path(output_dir or spec.output_dir or _default_output_dir())
    out.mkdir(parents=True, exist_ok=True)

    cells = expand_cells(spec)
    outcomes: list = [None] * len(cells)
    if workers > 1 and len(cells) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(run_cell, cell): i for i, cell in enumerate(cells)}
            for fut, i in futures.items():
                try:
                    outcomes[i] = ("ok", fut.result())
                except Exception as err:  # cell failure; others continue
                    outcomes[i] = ("error", err)
    else:
        for i, cell in enumerate(cells):
            try:
                outcomes[i] = ("ok", run_cell(cell))
            except Exception as err:
                outcomes[i] = ("error", err)

    rows, failures, manifest_cells = [], [], []
    for cell, outcome in zip(cells, outcomes):
        stem = _artifact_stem(cell)
        entry = dict(cell)
        if outcome[0] == "error":
            err = outcome[1]
            entry["status"] = "error"
            entry["error"] = f"{type(err).__name__}: {err}"
            if isinstance(err, TrainingDiverged):
                ckpt = f"diverged_{stem}.npz"
                save_train_checkpoint(out / ckpt, err.params, NesConfig(**cell["config"]), err.iteration)
                entry["diagnostic_checkpoint"] = ckpt
            failures.append(entry)
        else:
            report, family, trainlog, seconds = outcome[1]
            row = _result_row(cell, report, seconds)
            rows.append(row)
            family_file = f"family_{stem}.txt"
            save_family(out / family_file, family, seed=cell["seed"], generator=cell["generator"])
            entry["status"] = "ok"
            entry["family_file"] = family_file
            if trainlog is not None:
                trainlog_file = f"trainlog_{stem}.csv"
                write_trainlog_csv(out / trainlog_file, trainlog)
                entry["trainlog_file"] = trainlog_file
        manifest_cells.append(entry)

    write_results_csv(out / "results.csv", rows)
    manifest = {
        "format_version": 1,
        "spec": spec.raw,
        "resolved": {
            "kind": spec.kind,
            "length": spec.length,
            "family_sizes": spec.family_sizes,
            "seeds": spec.seeds,
            "profile": spec.profile,
            "generators": spec.generators,
            "default_family_size_grid": list(DEFAULT_FAMILY_SIZE_GRID),
        },
        "versions": {
            "spreadcodes": __version__,
            "numpy": np.__version__,
            "python": ".".join(str(v) for v in sys.version_info[:3]),
        },
        "cells": manifest_cells,
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ExperimentResult(output_dir=out, rows=rows, failures=failures)


def _read_csv(path) -> tuple[list, list]:
    with open(path, "r", encoding="ascii") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [dict(zip(header, row)) for row in reader]


def compare_report(paths, output_dir) -> Path:
    """Merge result tables (or align training logs) into plot-ready files.

    Result-table inputs produce comparison.csv plus one K-vs-f pivot per
    length (median over seeds per generator, with the Welch reference).
    Training-log inputs produce curves.csv with one best-f column per input,
    aligned by iteration. Mixing the two schemas is an error.
    """
    paths = [Path(p) for p in paths]
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    parsed = [_read_csv(p) for p in paths]
    schemas = {tuple(header) for header, _ in parsed}
    if len(schemas) != 1:
        raise ValueError(f"input files have mismatched schemas: {sorted(schemas)}")
    header = parsed[0][0]

    if header == list(RESULT_COLUMNS):
        rows = [row for _, body in parsed for row in body]
        write_results_csv(out / "comparison.csv", [_parse_result_row(r) for r in rows])
        for length in sorted({int(r["length"]) for r in rows}):
            _write_pivot(out / f"compare_l{length}.csv", [r for r in rows if int(r["length"]) == length])
        return out
    if header[0] == "iteration":
        _write_curves(out / "curves.csv", paths, parsed)
        return out
    raise ValueError(f"unrecognized input schema: {header}")


def _parse_result_row(row: dict) -> dict:
    out = dict(row)
    for key in ("length", "num_codes", "seed"):
        out[key] = int(row[key])
    for key in ("f_ac", "f_cc", "f", "sqrt_f", "welch_bound", "wall_clock_s"):
        out[key] = float(row[key])
    return out


def _write_pivot(path, rows) -> None:
    rows = [_parse_result_row(r) for r in rows]
    generators = sorted({r["generator"] for r in rows})
    sizes = sorted({r["num_codes"] for r in rows})
    lines = [",".join(["num_codes", "welch_bound"] + [f"f_{g}" for g in generators])]
    for k in sizes:
        at_k = [r for r in rows if r["num_codes"] == k]
        cols = [str(k), repr(at_k[0]["welch_bound"])]
        for g in generators:
            fs = sorted(r["f"] for r in at_k if r["generator"] == g)
            cols.append(repr(float(np.median(fs))) if fs else "")
        lines.append(",".join(cols))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_curves(path, paths, parsed) -> None:
    names = [p.stem for p in paths]
    series = []
    for _, body in parsed:
        series.append({int(r["iteration"]): r["best_f"] for r in body})
    iterations = sorted(set().union(*[set(s) for s in series]))
    lines = [",".join(["iteration"] + [f"best_f_{n}" for n in names])]
    for t in iterations:
        lines.append(",".join([str(t)] + [s.get(t, "") for s in series]))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def verify_results(results_dir) -> list:
    """Re-evaluate every stored champion family against its results.csv row.

    Returns a list of mismatch descriptions (empty means fully verified).
    The correlation math is deterministic, so stored and recomputed scores
    must agree exactly, not approximately.
    """
    results_dir = Path(results_dir)
    with open(results_dir / "manifest.json", "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    _, rows = _read_csv(results_dir / "results.csv")
    rows = [_parse_result_row(r) for r in rows]
    by_key = {(r["generator"], r["length"], r["num_codes"], r["seed"]): r for r in rows}
    problems = []
    for entry in manifest["cells"]:
        if entry.get("status") != "ok":
            continue
        key = (entry["generator"], entry["length"], entry["num_codes"], entry["seed"])
        row = by_key.get(key)
        if row is None:
            problems.append(f"{key}: manifest cell has no results.csv row")
            continue
        family, meta = load_family(results_dir / entry["family_file"])
        if (meta["count"], meta["length"]) != (entry["num_codes"], entry["length"]):
            problems.append(f"{key}: family file header disagrees with the cell")
            continue
        report = evaluate_family(family)
        for field_name, stored in (("f_ac", row["f_ac"]), ("f_cc", row["f_cc"]), ("f", row["f"])):
            recomputed = getattr(report, field_name)
            if recomputed != stored:
                problems.append(f"{key}: {field_name} stored {stored!r} != recomputed {recomputed!r}")
    return problems
