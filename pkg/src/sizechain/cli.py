# cli.py
"""
Command-line front door.

    analyze   panel file -> per-pair matrices, trend, entropy, path, summary
    simulate  known chain -> synthetic panel (+ ground-truth states)
    verify    recompute the published appendix numbers from the shipped tables
    ck        two-step (or longer) consistency check on a panel or the fixtures
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import reports
from .analytics import (
    average_entropy,
    chapman_kolmogorov_check,
    compose,
    entropy_table,
    group_entropy,
    propagate_path,
    transition_trend,
    TREND_WEIGHTS,
)
from .classifier import CategoryScheme, classify_panel, default_scheme, load_scheme
from .errors import Diagnostic, ExitCode, InputError, NumericError, SizeChainError, ValidationError
from .estimator import TransitionMatrix, count_transitions, count_transitions_window, empirical_marginal
from .fixtures import load_fixtures, sha256_of
from .panel import ingest_panel, rectangularize, summarize
from .simulator import GroundTruthChain, ladder_chain, simulate_panel
from .verify import Tolerances, run_verify

logger = logging.getLogger(__name__)

OUT_ENV = "SIZECHAIN_OUT"
DEFAULT_OUT = "sizechain-out"
FORMATS = ("csv", "json")
DEFAULT_SIM_YEARS = (1998, 2013)


def _years(text: str) -> Tuple[int, int]:
    try:
        a, b = (int(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A:B with integer years, got {text!r}")
    if b < a:
        raise argparse.ArgumentTypeError(f"year range {text} is empty")
    return a, b


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {text}")
    return v


@dataclass(frozen=True)
class RunConfig:
    input: Optional[Path] = None
    out: Path = Path(DEFAULT_OUT)
    years: Optional[Tuple[int, int]] = None
    scheme: CategoryScheme = field(default_factory=default_scheme)
    scheme_path: Optional[Path] = None
    seed: int = 0
    formats: Tuple[str, ...] = ("csv",)
    trend_weight: str = "dest"
    trend_exclude_entry_exit: bool = False
    tolerances: Tolerances = field(default_factory=Tolerances)
    strict: bool = False
    jobs: int = 1

    def __post_init__(self):
        bad = [f for f in self.formats if f not in FORMATS]
        if bad or not self.formats:
            raise ValidationError(f"output formats must be drawn from {FORMATS}, got {list(self.formats)}")
        if self.trend_weight not in TREND_WEIGHTS:
            raise ValidationError(f"trend weight must be one of {TREND_WEIGHTS}")
        if self.jobs < 1:
            raise ValidationError(f"jobs must be at least 1, got {self.jobs}")

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        out = args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT
        scheme_path = Path(args.scheme) if args.scheme else None
        return cls(
            input=Path(args.input) if args.input else None,
            out=Path(out),
            years=args.years,
            scheme=load_scheme(scheme_path) if scheme_path else default_scheme(),
            scheme_path=scheme_path,
            seed=args.seed,
            formats=tuple(dict.fromkeys(args.format or ["csv"])),
            trend_weight=args.trend_weight,
            trend_exclude_entry_exit=args.trend_exclude_entry_exit,
            tolerances=Tolerances().with_ck(args.tolerance_ck),
            strict=args.strict,
            jobs=args.jobs,
        )

    def prepare_out(self, *sub: str) -> Path:
        path = self.out.joinpath(*sub)
        try:
            path.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise InputError(f"cannot create output directory '{path}': {e}") from e
        if not os.access(path, os.W_OK):
            raise InputError(f"output directory '{path}' is not writable")
        return path

    def to_dict(self) -> dict:
        return {
            "input": None if self.input is None else str(self.input),
            "years": None if self.years is None else list(self.years),
            "scheme": None if self.scheme_path is None else str(self.scheme_path),
            "boundaries": list(self.scheme.boundaries),
            "seed": self.seed,
            "formats": list(self.formats),
            "trend_weight": self.trend_weight,
            "trend_exclude_entry_exit": self.trend_exclude_entry_exit,
            "strict": self.strict,
        }


def _undefined_diagnostics(matrices: Sequence[TransitionMatrix]) -> List[Diagnostic]:
    return [
        Diagnostic("UndefinedColumn", f"no occupants of state {i} in {m.origin_year}", f"{m.label} column {i}")
        for m in matrices
        for i in sorted(m.undefined_columns)
    ]


def _load_grid(config: RunConfig):
    if config.input is None:
        raise InputError("no input panel given (use --input)")
    records = ingest_panel(config.input)
    if not records:
        raise ValidationError(f"panel '{config.input}' has no observations")
    lo, hi = min(r.year for r in records), max(r.year for r in records)
    if config.years is None:
        panel = rectangularize(records, (lo, hi))
    else:
        a, b = config.years
        panel = rectangularize(records, (min(a, lo), max(b, hi))).window(a, b)
    print(f"Panel accepted ({len(panel.entities)} entities, {panel.start_year}:{panel.end_year}, "
          f"{np.count_nonzero(panel.cells)} observations)")
    return panel, classify_panel(panel, config.scheme)


def _estimate_pairs(grid, jobs: int) -> List[TransitionMatrix]:
    years = list(grid.years)[:-1]
    if not years:
        raise ValidationError(f"need at least 2 years to estimate transitions, panel spans {grid.start_year}:{grid.end_year}")
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda y: count_transitions(grid, y, y + 1), years))


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def run_analyze(config: RunConfig) -> ExitCode:
    panel, grid = _load_grid(config)
    matrices = _estimate_pairs(grid, config.jobs)
    print(f"Matrices estimated ({len(matrices)} year pairs)")

    warnings = _undefined_diagnostics(matrices)
    if warnings and config.strict:
        raise NumericError(str(warnings[0]))
    for w in warnings:
        logger.warning("%s", w)

    marginals = {y: empirical_marginal(grid, y) for y in grid.years}
    trend = [
        transition_trend(
            m,
            marginals[m.dest_year if config.trend_weight == "dest" else m.origin_year],
            config.trend_weight,
            config.trend_exclude_entry_exit,
        )
        for m in matrices
    ]
    entropy = [entropy_table(m) for m in matrices]
    try:
        groups = [group_entropy(t) for t in entropy]
    except ValidationError as e:
        warnings.append(Diagnostic("GroupingUnavailable", f"{e}; group_entropy.csv not written"))
        groups = None
    average = average_entropy(entropy)
    try:
        path = propagate_path(marginals[grid.start_year], matrices)
    except NumericError as e:
        if config.strict:
            raise
        warnings.append(Diagnostic("PathUnavailable", str(e)))
        path = None
    summary = summarize(panel)

    out = config.prepare_out()
    mdir = config.prepare_out("matrices")
    written: List[Path] = []
    for m in matrices:
        stem = f"F_{m.origin_year}_{m.dest_year}"
        if "csv" in config.formats:
            written.append(reports.write_matrix_csv(m, mdir / f"{stem}.csv"))
        if "json" in config.formats:
            written.append(reports.write_matrix_json(m, mdir / f"{stem}.json"))
    written.append(reports.write_trend_csv(trend, out / "trend.csv"))
    written.append(reports.write_entropy_csv(entropy, out / "entropy.csv", average))
    written.append(reports.write_entropy_long_csv(entropy, out / "entropy_long.csv"))
    if groups is not None:
        written.append(reports.write_group_csv(groups, out / "group_entropy.csv"))
    if path is not None:
        written.append(reports.write_path_csv(path, list(marginals.values()), out / "path.csv"))
    written.append(reports.write_json(
        {**summary.to_dict(), "entities": len(panel.entities), "years": [panel.start_year, panel.end_year]},
        out / "summary.json",
    ))
    if "json" in config.formats:
        written.append(reports.write_json({
            "trend": [{"end_year": p.end_year, "L": p.L, "R": p.R, "Q": p.Q} for p in trend],
            "entropy": [{"end_year": t.end_year, "values": list(t.values)} for t in entropy],
            "entropy_average": list(average),
            "group_entropy": None if groups is None else [
                {"end_year": g.end_year, "small": g.small, "medium": g.medium, "large": g.large} for g in groups
            ],
        }, out / "analytics.json"))

    manifest = {
        "config": config.to_dict(),
        "input_sha256": sha256_of(config.input),
        "entities": len(panel.entities),
        "pairs": [
            {
                "origin_year": m.origin_year,
                "dest_year": m.dest_year,
                "total_count": m.total_count,
                "undefined_columns": sorted(m.undefined_columns),
            }
            for m in matrices
        ],
        "warnings": [w.to_dict() for w in warnings],
        "csv_decimals": 4,
        "outputs": sorted(p.relative_to(out).as_posix() for p in written),
    }
    reports.write_json(manifest, out / "manifest.json")
    print(f"Outputs written to {out}")
    return ExitCode.OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _chain_from_args(config: RunConfig, args: argparse.Namespace) -> GroundTruthChain:
    n = config.scheme.n_states
    if args.matrix:
        m = reports.read_matrix_csv(args.matrix, 0, 1)
        if m.undefined_columns:
            raise ValidationError(f"chain matrix '{args.matrix}' has undefined columns {sorted(m.undefined_columns)}")
        probs = np.array(m.probs)
        if args.normalize:
            probs = probs / probs.sum(axis=0)
        if probs.shape[0] != n:
            raise ValidationError(f"chain matrix has {probs.shape[0]} states, scheme has {n}")
        return GroundTruthChain((probs,), np.full(n, 1.0 / n), config.seed)

    states = args.states or n
    if states != n:
        raise ValidationError(f"--states {states} needs a scheme with {states - 1} boundaries (use --scheme)")
    return ladder_chain(states, seed=config.seed)


def run_simulate(config: RunConfig, args: argparse.Namespace) -> ExitCode:
    chain = _chain_from_args(config, args)
    years = config.years or DEFAULT_SIM_YEARS
    panel, grid = simulate_panel(chain, args.entities, years, config.scheme, jobs=config.jobs)
    print(f"Panel simulated ({len(panel.entities)} of {args.entities} entities present, {years[0]}:{years[1]})")

    out = config.prepare_out()
    reports.write_panel_csv(panel, out / "panel.csv")
    reports.write_states_csv(grid.entities, grid.years, grid.states, out / "states.csv")
    reports.write_json({
        "seed": chain.seed,
        "n_entities": args.entities,
        "years": list(years),
        "initial": chain.initial,
        "matrices": [m for m in chain.matrices],
        "boundaries": list(config.scheme.boundaries),
    }, out / "chain.json")
    print(f"Outputs written to {out}")
    return ExitCode.OK


# ---------------------------------------------------------------------------
# verify / ck
# ---------------------------------------------------------------------------

def run_verify_command(config: RunConfig, args: argparse.Namespace) -> ExitCode:
    fixtures = load_fixtures(args.fixtures_dir)
    report = run_verify(fixtures, config.tolerances)
    for c in report.checks:
        if not c.passed or args.verbose:
            print(c)
    if args.out:
        reports.write_json(report.to_dict(), config.prepare_out() / "verify.json")
    if report.passed:
        print(f"Verification passed ({len(report.checks)} checks)")
        return ExitCode.OK
    print(f"Verification failed ({len(report.failures)} of {len(report.checks)} checks)")
    return ExitCode.CHECK_FAILED


def run_ck(config: RunConfig, window: Optional[Tuple[int, int]], use_fixtures: bool = False) -> ExitCode:
    """
    Compare the ordered product of the first-order matrices inside `window`
    with the matrix estimated directly over the window.
    """
    tol = config.tolerances.ck_product
    if use_fixtures:
        fixtures = load_fixtures()
        direct = fixtures.second_order_direct
        steps = [fixtures.first_order_for(y) for y in range(direct.origin_year, direct.dest_year)]
    else:
        if window is None:
            raise ValidationError("ck needs --window A:B (or --fixtures)")
        lo, hi = window
        if hi - lo < 2:
            raise ValidationError(f"window {lo}:{hi} spans fewer than 3 years")
        _, grid = _load_grid(config)
        steps = [count_transitions(grid, y, y + 1) for y in range(lo, hi)]
        direct = count_transitions_window(grid, lo, hi)
        if config.strict:
            warnings = _undefined_diagnostics([*steps, direct])
            if warnings:
                raise NumericError(str(warnings[0]))

    first = reduce(compose, steps[:-1])
    report = chapman_kolmogorov_check(first, steps[-1], direct, tol)

    out = config.prepare_out()
    stem = f"ck_{report.origin_year}_{report.dest_year}"
    product = TransitionMatrix.from_probabilities(report.product, report.origin_year, report.dest_year, "product")
    reports.write_matrix_csv(product, out / f"{stem}_product.csv")
    reports.write_matrix_csv(direct, out / f"{stem}_direct.csv")
    reports.write_json(report.to_dict(), out / f"{stem}.json")

    where = "" if report.worst_entry is None else " at row {}, column {}".format(*report.worst_entry)
    if report.passed:
        print(f"Chapman-Kolmogorov check passed (max deviation {report.max_deviation:.6f}{where})")
        return ExitCode.OK
    print(f"Chapman-Kolmogorov check failed (max deviation {report.max_deviation:.6f}{where}, tol {tol:g})")
    return ExitCode.CHECK_FAILED


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="Panel CSV with entity_id,year,size columns")
    common.add_argument("--out", help=f"Output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    common.add_argument("--years", type=_years, help="Inclusive year range A:B")
    common.add_argument("--scheme", help="TOML file with a 'boundaries' list")
    common.add_argument("--seed", type=int, default=0, help="Simulator seed (64-bit)")
    common.add_argument("--format", action="append", choices=FORMATS,
                        help="Matrix output format; repeat for both (default csv)")
    common.add_argument("--trend-weight", choices=TREND_WEIGHTS, default="dest",
                        help="Weight trend sums by the destination or origin marginal")
    common.add_argument("--trend-exclude-entry-exit", action="store_true",
                        help="Leave row and column 0 out of the trend sums")
    common.add_argument("--tolerance-ck", type=_positive_float, help="Override the two-step check tolerance")
    common.add_argument("--strict", action="store_true", help="Treat undefined columns as errors")
    common.add_argument("--jobs", type=_positive_int, default=1, help="Workers for per-pair estimation")
    common.add_argument("-v", "--verbose", action="count", default=0, help="More logging (repeat for debug)")

    ap = argparse.ArgumentParser(prog="analyze_panel.py", description="Firm-size transition analysis")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="Estimate matrices and analytics from a panel")

    sim = sub.add_parser("simulate", parents=[common], help="Draw a synthetic panel from a known chain")
    sim.add_argument("--entities", type=_positive_int, default=10_000)
    sim.add_argument("--states", type=_positive_int, help="Ladder chain size (must match the scheme)")
    sim.add_argument("--matrix", help="Matrix CSV used as a homogeneous chain instead of the ladder")
    sim.add_argument("--normalize", action="store_true", help="Rescale --matrix columns to sum to 1")

    ver = sub.add_parser("verify", parents=[common], help="Recompute published numbers from the shipped tables")
    ver.add_argument("--fixtures-dir", help="Alternative fixture directory (with manifest.json)")

    ck = sub.add_parser("ck", parents=[common], help="Chapman-Kolmogorov consistency check")
    ck.add_argument("--window", type=_years, help="Window A:B spanning at least 3 years")
    ck.add_argument("--fixtures", action="store_true", help="Run on the shipped 1998:2000 tables")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s", force=True)

    try:
        config = RunConfig.from_args(args)
        if args.command == "analyze":
            return int(run_analyze(config))
        if args.command == "simulate":
            return int(run_simulate(config, args))
        if args.command == "verify":
            return int(run_verify_command(config, args))
        return int(run_ck(config, args.window, args.fixtures))
    except SizeChainError as e:
        print(f"{e.category.capitalize()} error: {e}")
        return int(e.exit_code)
    except OSError as e:
        print(f"Input error: {e}")
        return int(ExitCode.INPUT)
