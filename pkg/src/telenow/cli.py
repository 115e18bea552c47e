"""Command-line entry point: ``telenow <subcommand> [flags]``.

Exit status is 0 on success, 1 when an input fails validation and 2 on a
usage error. Diagnostics go to standard error; data goes to ``--out`` or
standard output.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import io
import json
import logging
import os
import sys
from typing import List, Optional, Sequence

from telenow import aggregation, analysis, ingestion, nowcast, regression, synth
from telenow.domain import (
    DEFAULT_FIT_WINDOW,
    DEFAULT_TARGET_QUARTERS,
    AgeGroup,
    Quarter,
    Region,
    parse_quarter_range,
)
from telenow.errors import InputError, InvalidValue, TelenowError

log = logging.getLogger("telenow")

SEED_ENV = "TELENOW_SEED"


class UsageError(Exception):
    pass


# -- argument types ---------------------------------------------------------------


def _quarters(text: str):
    try:
        return parse_quarter_range(text)
    except InvalidValue as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _reference(text: str):
    try:
        return regression.parse_dummy_label(text)
    except InvalidValue as exc:
        raise argparse.ArgumentTypeError(f"{exc} (expected e.g. 'Veneto:M')") from None


def _regions(text: str):
    if text.strip() == "":
        return frozenset()
    try:
        return frozenset(Region.parse(part) for part in text.split(","))
    except InvalidValue as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _age(text: str):
    try:
        return AgeGroup.parse(text)
    except InvalidValue as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _dates(text: str):
    try:
        return frozenset(dt.date.fromisoformat(d.strip()) for d in text.split(",") if d.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _seed(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None


# -- parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="telenow",
        description="Nowcast regional teleworking shares from mobile-network mobility and labour-force data.",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--out", help="output path (default: standard output)")
        return p

    def window(p):
        p.add_argument("--fit-window", type=_quarters, default=DEFAULT_FIT_WINDOW, help="quarters used for fitting, e.g. 2020Q3:2020Q4")

    def reference(p):
        p.add_argument("--reference", type=_reference, default=regression.DEFAULT_REFERENCE, help="omitted region:sex pair (default Veneto:M)")

    def fmt(p, default):
        p.add_argument("--format", choices=("csv", "json"), default=default)

    p = add("synth", "write a synthetic input bundle (OD, LFS, census, municipality map) to the --out directory")
    p.add_argument("--seed", type=_seed)
    p.add_argument("--noise-sigma", type=float, default=0.035)
    p.add_argument("--quarters", type=_quarters, default=DEFAULT_TARGET_QUARTERS, help="nowcast quarters that get mobility data")
    window(p)

    p = add("aggregate", "build the quarterly panel CSV from OD records and LFS rows")
    p.add_argument("--od", required=True)
    p.add_argument("--munimap", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--lfs")
    src.add_argument("--lfs-micro")
    p.add_argument("--quarters", type=_quarters, help="restrict mobility output to these quarters (fit window always included)")
    p.add_argument("--holidays", type=_dates, default=frozenset(), help="comma-separated ISO dates excluded like weekends")
    window(p)

    p = add("fit", "fit the model on a panel; writes FitResult JSON and a text table next to it")
    p.add_argument("--panel", required=True)
    window(p)
    reference(p)

    p = add("compare", "compare R2 with logged versus raw mobility")
    p.add_argument("--panel", required=True)
    window(p)
    reference(p)
    fmt(p, "json")

    p = add("importance", "leave-one-group-out R2 importance")
    p.add_argument("--panel", required=True)
    window(p)
    reference(p)
    fmt(p, "json")

    p = add("validate", "correlate region:sex effects with census commuting shares")
    p.add_argument("--fit", required=True)
    p.add_argument("--census", required=True)
    p.add_argument("--exclude-regions", type=_regions, default=analysis.DEFAULT_CENSUS_EXCLUDE, help="comma-separated regions to drop (default Lombardia,Lazio)")
    fmt(p, "json")

    p = add("nowcast", "predict teleworking shares for quarters without survey data")
    p.add_argument("--fit", required=True)
    inputs = p.add_mutually_exclusive_group(required=True)
    inputs.add_argument("--mobility", help="panel-format CSV with mobility for target quarters")
    inputs.add_argument("--panel", help="alias of --mobility")
    p.add_argument("--quarters", type=_quarters, default=DEFAULT_TARGET_QUARTERS)
    fmt(p, "csv")

    p = add("report", "observed and nowcast series per region (CSV)")
    p.add_argument("--panel", required=True)
    p.add_argument("--fit", required=True)
    p.add_argument("--quarters", type=_quarters, default=DEFAULT_TARGET_QUARTERS)
    fmt(p, "csv")

    p = add("gaps", "female-minus-male nowcast gap per region with cluster labels")
    p.add_argument("--fit", required=True)
    p.add_argument("--mobility", required=True)
    p.add_argument("--quarters", type=_quarters, default=(DEFAULT_TARGET_QUARTERS[-1],), help="a single quarter")
    p.add_argument("--age", type=_age, default=AgeGroup.A35_44)
    fmt(p, "csv")
    return parser


# -- helpers ---------------------------------------------------------------------------

_INPUT_FLAGS = ("od", "munimap", "lfs", "lfs_micro", "panel", "mobility", "fit", "census")


def _check_inputs(args) -> None:
    for name in _INPUT_FLAGS:
        path = getattr(args, name, None)
        if path is not None and not os.path.isfile(path):
            raise InputError("no such file", path=path)


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    parent = os.path.dirname(out)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _round6(value):
    if isinstance(value, float):
        return float(f"{value:.6g}")
    if isinstance(value, dict):
        return {k: _round6(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round6(v) for v in value]
    return value


def _json(data) -> str:
    return json.dumps(_round6(data), indent=2) + "\n"


def _flat_csv(data: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    for k, v in data.items():
        if isinstance(v, dict):
            for k2, v2 in v.items():
                w.writerow([f"{k}.{k2}", _cell(v2)])
        elif isinstance(v, (list, tuple)):
            w.writerow([k, ";".join(str(x) for x in v)])
        else:
            w.writerow([k, _cell(v)])
    return buf.getvalue()


def _cell(v) -> str:
    return f"{v:.6g}" if isinstance(v, float) else str(v)


def _load_fit(path: str) -> regression.FitResult:
    with open(path, encoding="utf-8") as fh:
        try:
            return regression.FitResult.from_json(fh.read())
        except InvalidValue as exc:
            raise InputError(str(exc), path=path) from None


def _fit_panel(args) -> list:
    cells = ingestion.read_panel_csv(args.panel)
    window = set(args.fit_window)
    fit_cells = [c for c in cells if c.quarter in window and c.teleworking is not None]
    if not fit_cells:
        raise InputError(
            "no cells with teleworking in fit window " + ",".join(str(q) for q in sorted(window)), path=args.panel
        )
    return fit_cells


def _seed_value(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None or env.strip() == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None


# -- subcommands -----------------------------------------------------------------------


def cmd_synth(args) -> None:
    if args.out is None:
        raise UsageError("synth requires --out DIRECTORY")
    config = synth.GeneratorConfig(
        seed=_seed_value(args),
        noise_sigma=args.noise_sigma,
        quarters=tuple(args.fit_window),
        target_quarters=tuple(args.quarters),
    )
    bundle = synth.generate_bundle(config)
    paths = synth.write_bundle(bundle, config, args.out)
    log.info("wrote %d OD rows, %d LFS rows to %s", len(bundle.od), len(bundle.lfs), args.out)
    for name in sorted(paths):
        log.debug("%s: %s", name, paths[name])


def cmd_aggregate(args) -> None:
    munimap = ingestion.parse_municipality_map(args.munimap)
    missing = munimap.missing_regions()
    if missing:
        log.warning("municipality map has no code for: %s", ", ".join(r.value for r in missing))
    records = ingestion.parse_od_csv(args.od, munimap)
    if args.lfs is not None:
        lfs = ingestion.parse_lfs_aggregate_csv(args.lfs)
    else:
        lfs = aggregation.aggregate_lfs_micro(ingestion.parse_lfs_micro_csv(args.lfs_micro))
    quarters = None
    if args.quarters is not None:
        quarters = set(args.quarters) | set(args.fit_window)
    mobility = aggregation.mobility_panel(records, munimap, quarters, args.holidays)
    fit_cells = aggregation.assemble_panel(mobility, lfs, args.fit_window)
    others = aggregation.mobility_only_cells(mobility, lfs, exclude_quarters=set(args.fit_window))
    cells = fit_cells + others
    ingestion.write_panel_csv(args.out if args.out is not None else sys.stdout, cells)
    log.info("panel: %d fit-window cells, %d other cells", len(fit_cells), len(others))


def cmd_fit(args) -> None:
    fit = regression.fit_panel(_fit_panel(args), args.reference)
    table = regression.render_table(fit)
    if args.out is None:
        sys.stdout.write(table)
        return
    _emit(fit.to_json(), args.out)
    stem, _ = os.path.splitext(args.out)
    _emit(table, stem + ".txt")
    log.info("fit n=%d p=%d R2=%.3f", fit.n, fit.p, fit.r_squared)


def cmd_compare(args) -> None:
    result = analysis.compare_log_vs_linear(_fit_panel(args), args.reference)
    log.info("%s", result.describe())
    data = result.to_dict()
    _emit(_json(data) if args.format == "json" else _flat_csv(data), args.out)


def cmd_importance(args) -> None:
    report = analysis.variable_importance(_fit_panel(args), args.reference)
    data = report.to_dict()
    _emit(_json(data) if args.format == "json" else _flat_csv(data), args.out)


def cmd_validate(args) -> None:
    fit = _load_fit(args.fit)
    census = ingestion.parse_census_csv(args.census)
    result = analysis.validate_against_census(fit, census, args.exclude_regions)
    data = result.to_dict()
    _emit(_json(data) if args.format == "json" else _flat_csv(data), args.out)
    if args.out is not None:
        stem, _ = os.path.splitext(args.out)
        _emit(result.scatter_csv(), stem + "_scatter.csv")


def _nowcast(fit, cells, quarters) -> nowcast.NowcastResult:
    first = min(quarters)
    mobility = {c.key: c.mobility for c in cells}
    base = nowcast.last_observed_employment(cells, before=first)
    return nowcast.nowcast_quarters(fit, mobility, base, nowcast.Scenario(tuple(quarters)))


def _cells_out(cells, fmt: str) -> str:
    if fmt == "csv":
        return nowcast.cells_to_csv(cells)
    rows = [
        {
            "region": c.region.value, "sex": c.sex.value, "age_group": c.age.value, "quarter": str(c.quarter),
            "predicted": c.predicted, "predicted_clamped": c.predicted_clamped,
            "mobility": c.mobility, "employment": c.employment, "source": c.source,
        }
        for c in sorted(cells, key=lambda c: (c.region.order, c.sex.order, c.age.order, c.quarter))
    ]
    return _json(rows)


def cmd_nowcast(args) -> None:
    fit = _load_fit(args.fit)
    cells = ingestion.read_panel_csv(args.mobility or args.panel)
    result = _nowcast(fit, cells, args.quarters)
    _emit(_cells_out(result.cells, args.format), args.out)
    log.info("nowcast: %d cells", len(result.cells))


def cmd_report(args) -> None:
    fit = _load_fit(args.fit)
    cells = ingestion.read_panel_csv(args.panel)
    result = _nowcast(fit, cells, args.quarters)
    observed = nowcast.observed_cells(c for c in cells if c.quarter < min(args.quarters))
    _emit(_cells_out(list(observed) + list(result.cells), args.format), args.out)


def cmd_gaps(args) -> None:
    if len(args.quarters) != 1:
        raise UsageError("gaps takes a single quarter in --quarters")
    fit = _load_fit(args.fit)
    cells = ingestion.read_panel_csv(args.mobility)
    result = _nowcast(fit, cells, args.quarters)
    rows = nowcast.gender_gap_table(result, args.age, args.quarters[0])
    if args.format == "csv":
        _emit(nowcast.gap_table_csv(rows), args.out)
    else:
        _emit(_json([{"region": r.region.value, "female": r.female, "male": r.male, "gap": r.gap, "cluster": r.cluster.value} for r in rows]), args.out)


COMMANDS = {
    "synth": cmd_synth,
    "aggregate": cmd_aggregate,
    "fit": cmd_fit,
    "compare": cmd_compare,
    "importance": cmd_importance,
    "validate": cmd_validate,
    "nowcast": cmd_nowcast,
    "report": cmd_report,
    "gaps": cmd_gaps,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and return the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("telenow: %(levelname)s: %(message)s"))
    root = logging.getLogger("telenow")
    root.handlers[:] = [handler]
    root.setLevel(logging.INFO if os.environ.get("TELENOW_VERBOSE") else logging.WARNING)
    root.propagate = False
    try:
        _check_inputs(args)
        COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"telenow {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except TelenowError as exc:
        print(f"telenow {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"telenow {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
