"""``mobgraph`` command line.

Exit codes: 0 ok, 1 usage error, 2 missing input, 3 invalid config,
4 stage failure, 5 unknown scholar id.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import pipeline
from .countries import alpha3_codes
from .disambig import disambiguate, read_precluster, read_scholars, scholars_from_mapping, write_scholars
from .flows import flow_matrix, render_alluvial
from .indicators import affiliation_trend, country_profiles, profile_report, write_profile_table
from .ingest import IngestConfig, IngestError, read_records, write_records
from .pipeline import ConfigError, InputMissing, RunConfig, StageFailure, parse_window
from .synth import (enumerate_small_timelines, generate, make_population, oracle_classify,
                    read_scripts, write_corpus)
from .taxonomy import classify_all, classify_sets, read_classifications, write_classifications
from .timeline import read_timelines, timelines_for_corpus, write_timelines

log = logging.getLogger("mobgraph")

# canonical files are already window-filtered; re-reading them must not drop anything
_ANY_YEAR = (-10**6, 10**6)


class UnknownScholar(LookupError):
    exit_code = 5


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _require(*paths) -> None:
    for p in paths:
        if p and not Path(p).is_file():
            raise InputMissing(f"input file not found: {p}")


def _countries(text: str) -> list[str]:
    codes = [c.strip().upper() for c in text.split(",") if c.strip()]
    bad = [c for c in codes if c not in alpha3_codes()]
    if bad:
        raise ConfigError(f"not ISO 3166-1 alpha-3 codes: {', '.join(bad)}")
    return codes


def _say(args, payload) -> None:
    if not args.quiet:
        print(json.dumps(payload, indent=2, sort_keys=True))


# -- subcommands -------------------------------------------------------------


def cmd_ingest(args) -> int:
    _require(args.input, args.country_table)
    config = IngestConfig(parse_window(args.window), RunConfig(args.input, ".", country_table=args.country_table).table())
    try:
        records, stats = read_records(args.input, config)
    except IngestError as exc:
        raise StageFailure("ingest", exc, None) from exc
    write_records(records, args.out)
    if args.stats:
        Path(args.stats).write_text(json.dumps(stats.to_dict(), indent=2) + "\n", encoding="utf-8")
    _say(args, stats.to_dict())
    return 0


def cmd_disambiguate(args) -> int:
    _require(args.input, args.weights, args.precluster)
    records, _ = read_records(args.input, IngestConfig(_ANY_YEAR))
    if args.precluster:
        scholars = scholars_from_mapping(records, read_precluster(args.precluster))
    else:
        weights = RunConfig(args.input, ".", weights_path=args.weights, threshold=args.threshold).weights()
        scholars = disambiguate(records, weights, threads=args.threads)
    n = write_scholars(scholars, args.out)
    _say(args, {"scholars": n, "mode": "precluster" if args.precluster else "scored"})
    return 0


def cmd_timelines(args) -> int:
    _require(args.scholars, args.records)
    scholars = read_scholars(args.scholars)
    records, _ = read_records(args.records, IngestConfig(_ANY_YEAR))
    horizon = args.horizon if args.impute_through == "window-end" else None
    timelines, rejects = timelines_for_corpus(scholars, records, horizon)
    write_timelines(timelines, args.out)
    _say(args, {"timelines": len(timelines), "rejected": dict(rejects)})
    return 0


def cmd_classify(args) -> int:
    _require(args.timelines)
    classes = classify_all(read_timelines(args.timelines))
    write_classifications(classes, args.out)
    counts: dict[str, int] = {}
    for c in classes:
        counts[c.global_type.value] = counts.get(c.global_type.value, 0) + 1
    _say(args, {"classified": len(classes), "types": dict(sorted(counts.items()))})
    return 0


def cmd_profile(args) -> int:
    _require(args.classifications)
    profiles = country_profiles(read_classifications(args.classifications))
    countries = _countries(args.countries) if args.countries else sorted(profiles)
    write_profile_table(profile_report(profiles, countries), args.out)
    return 0


def cmd_flows(args) -> int:
    _require(args.timelines)
    if args.focal not in alpha3_codes():
        raise ConfigError(f"{args.focal!r} is not an ISO 3166-1 alpha-3 code")
    fm = flow_matrix(read_timelines(args.timelines), args.first_year, args.direction, args.focal,
                     args.horizon, args.top, mobile_only=args.mobile_only)
    Path(args.out).write_text(json.dumps(fm.to_json(), indent=1) + "\n", encoding="utf-8")
    if args.svg:
        render_alluvial(fm, args.svg)
    _say(args, {"cohort": fm.n_scholars, "countries": fm.kept})
    return 0


def cmd_trend(args) -> int:
    _require(args.timelines)
    series = affiliation_trend(read_timelines(args.timelines), args.first_year, args.min_pubs,
                               parse_window(args.window))
    Path(args.out).write_text(json.dumps(series.to_json(), indent=1) + "\n", encoding="utf-8")
    _say(args, {"cohort": series.n_scholars, "countries": len(series.series)})
    return 0


def cmd_synth(args) -> int:
    if args.scripts:
        _require(args.scripts)
        scripts = read_scripts(args.scripts)
    elif args.population:
        scripts = make_population(args.population, args.keys or max(1, args.population // 2), seed=args.seed)
    else:
        raise ConfigError("synth needs --scripts or --population")
    lines, truth = generate(scripts, seed=args.seed)
    write_corpus(lines, args.out_corpus)
    if args.out_truth:
        Path(args.out_truth).write_text(json.dumps(truth.to_json(), sort_keys=True) + "\n", encoding="utf-8")
    _say(args, {"publications": len(lines), "truth_ids": len(truth.expected_type)})
    return 0


def cmd_selftest(args) -> int:
    t0 = time.perf_counter()
    total = mismatches = 0
    for length in range(1, args.max_years + 1):
        for seq in enumerate_small_timelines(args.max_countries, length):
            total += 1
            if classify_sets(seq).value != oracle_classify(seq):
                mismatches += 1
                log.error("mismatch: %s", [sorted(s) for s in seq])
    _say(args, {"sequences": total, "mismatches": mismatches, "seconds": round(time.perf_counter() - t0, 3)})
    return 0 if mismatches == 0 else 4


def cmd_explain(args) -> int:
    _require(args.timelines, args.classifications)
    try:
        text = pipeline.explain(args.scholar_id, read_timelines(args.timelines),
                                read_classifications(args.classifications))
    except KeyError:
        raise UnknownScholar(f"unknown scholar id: {args.scholar_id}") from None
    print(text)
    return 0


def cmd_schema(args) -> int:
    print(json.dumps(pipeline.version_and_schema(), indent=2, sort_keys=True))
    return 0


def cmd_run(args) -> int:
    options: dict = {}
    if args.config:
        options.update(pipeline.load_config_file(args.config))
    cli = {
        "input": args.input, "out_dir": args.out_dir, "window": args.window, "horizon": args.horizon,
        "impute_mode": args.impute_through, "weights_path": args.weights, "threshold": args.threshold,
        "precluster": args.precluster, "country_table": args.country_table,
        "countries": _countries(args.countries) if args.countries else None,
    }
    options.update({k: v for k, v in cli.items() if v is not None})
    if args.flow:
        options["flows"] = [_flow_spec(text) for text in args.flow]
    if args.trend_min_pubs is not None:
        options["trend"] = {"min_pubs": args.trend_min_pubs}
    options["threads"] = args.threads
    if "input" not in options or "out_dir" not in options:
        raise ConfigError("run needs --in and --out-dir (or the same keys in --config)")
    try:
        config = RunConfig(**options)
    except TypeError as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
    manifest = pipeline.run_pipeline(config)
    _say(args, {"status": manifest.status, "stages": {s.name: s.status for s in manifest.stages}})
    return 0


def _flow_spec(text: str) -> dict:
    # FOCAL:DIRECTION[:TOP]
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise ConfigError(f"--flow expects FOCAL:DIRECTION[:TOP], got {text!r}")
    spec = {"focal": parts[0].upper(), "direction": parts[1]}
    if len(parts) == 3:
        spec["top_n"] = int(parts[2])
    return spec


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    def global_flags(defaults: bool) -> argparse.ArgumentParser:
        # subcommands repeat the flags with suppressed defaults so they do not clobber top-level values
        flags = argparse.ArgumentParser(add_help=False)
        kw = {} if defaults else {"default": argparse.SUPPRESS}
        flags.add_argument("--config", help="JSON run configuration (used by `run`)", **kw)
        flags.add_argument("--threads", type=int, help="worker processes (env MOBGRAPH_THREADS)", **kw)
        flags.add_argument("--quiet", action="store_true", **kw)
        return flags

    common = global_flags(False)
    parser = _Parser(prog="mobgraph", description=__doc__.splitlines()[0], parents=[global_flags(True)])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")

    p = sub.add_parser("ingest", parents=[common], help="parse and normalize raw records")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--window", default="2008:2015")
    p.add_argument("--country-table")
    p.add_argument("--stats", help="write corpus statistics JSON here")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("disambiguate", parents=[common], help="cluster mentions into scholars")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--weights")
    p.add_argument("--threshold", type=float)
    p.add_argument("--precluster")
    p.set_defaults(func=cmd_disambiguate)

    p = sub.add_parser("timelines", parents=[common], help="build imputed affiliation timelines")
    p.add_argument("--scholars", required=True)
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--horizon", type=int, default=2015)
    p.add_argument("--impute-through", choices=pipeline.IMPUTE_MODES, default="window-end")
    p.set_defaults(func=cmd_timelines)

    p = sub.add_parser("classify", parents=[common], help="assign mobility types and roles")
    p.add_argument("--timelines", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("profile", parents=[common], help="country profile table")
    p.add_argument("--class", dest="classifications", required=True)
    p.add_argument("--countries", help="comma-separated alpha-3 codes (default: all)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("flows", parents=[common], help="cohort flow matrix")
    p.add_argument("--timelines", required=True)
    p.add_argument("--first-year", type=int, default=2008)
    p.add_argument("--direction", choices=("outgoing", "incoming"), default="outgoing")
    p.add_argument("--focal", required=True)
    p.add_argument("--horizon", type=int, default=2015)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--mobile-only", action="store_true")
    p.add_argument("--svg", help="also render an alluvial chart to this file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_flows)

    p = sub.add_parser("trend", parents=[common], help="affiliation counts per country and year")
    p.add_argument("--timelines", required=True)
    p.add_argument("--first-year", type=int, default=2008)
    p.add_argument("--min-pubs", type=int, default=8)
    p.add_argument("--window", default="2008:2015")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_trend)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic corpus with ground truth")
    p.add_argument("--scripts")
    p.add_argument("--population", type=int, help="random population size instead of --scripts")
    p.add_argument("--keys", type=int, help="number of shared name keys for --population")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out-corpus", required=True)
    p.add_argument("--out-truth")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("selftest", parents=[common], help="classifier vs brute-force oracle")
    p.add_argument("--max-countries", type=int, default=3, choices=(1, 2, 3))
    p.add_argument("--max-years", type=int, default=4, choices=(1, 2, 3, 4))
    p.set_defaults(func=cmd_selftest)

    p = sub.add_parser("explain", parents=[common], help="trace one scholar's classification")
    p.add_argument("scholar_id")
    p.add_argument("--timelines", required=True)
    p.add_argument("--class", dest="classifications", required=True)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("run", parents=[common], help="full pipeline")
    p.add_argument("--in", dest="input")
    p.add_argument("--out-dir")
    p.add_argument("--window")
    p.add_argument("--horizon", type=int)
    p.add_argument("--impute-through", choices=pipeline.IMPUTE_MODES)
    p.add_argument("--weights")
    p.add_argument("--threshold", type=float)
    p.add_argument("--precluster")
    p.add_argument("--country-table")
    p.add_argument("--countries")
    p.add_argument("--flow", action="append", help="FOCAL:DIRECTION[:TOP], repeatable")
    p.add_argument("--trend-min-pubs", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("schema", parents=[common], help="print file schemas")
    p.set_defaults(func=cmd_schema)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command is None:
        return cmd_schema(args)
    args.threads = pipeline.threads_from_env(args.threads)
    try:
        return args.func(args)
    except (InputMissing, ConfigError, StageFailure, UnknownScholar, IngestError) as exc:
        print(f"mobgraph: {exc}", file=sys.stderr)
        return getattr(exc, "exit_code", 4)


if __name__ == "__main__":
    sys.exit(main())
