"""End-to-end pipeline runs, run manifests, explanations and file schemas."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Callable, Sequence

from .countries import CountryTable, alpha3_codes, default_table, load_table
from .disambig import (ScoringWeights, disambiguate, read_precluster, scholars_from_mapping,
                       write_scholars)
from .flows import flow_matrix
from .indicators import affiliation_trend, country_profiles, profile_report, write_profile_table
from .ingest import IngestConfig, IngestError, read_records, write_records
from .taxonomy import MobilityClassification, MobilityType, classify_all, write_classifications
from .timeline import AffiliationTimeline, timelines_for_corpus, write_timelines

__all__ = [
    "ConfigError",
    "InputMissing",
    "RunConfig",
    "RunManifest",
    "StageFailure",
    "explain",
    "run_pipeline",
    "version_and_schema",
]

log = logging.getLogger(__name__)

IMPUTE_MODES = ("window-end", "last-observed")


class ConfigError(ValueError):
    exit_code = 3


class InputMissing(FileNotFoundError):
    exit_code = 2


class StageFailure(RuntimeError):
    exit_code = 4

    def __init__(self, stage: str, cause: BaseException, manifest: RunManifest) -> None:
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.manifest = manifest


def tool_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0.1.0"


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def parse_window(text: str) -> tuple[int, int]:
    try:
        start, end = (int(part) for part in str(text).split(":"))
    except ValueError:
        raise ConfigError(f"window must look like 2008:2015, got {text!r}") from None
    if start > end:
        raise ConfigError(f"window start {start} is after end {end}")
    return start, end


@dataclass
class FlowSpec:
    focal: str
    direction: str = "outgoing"
    first_year: int | None = None
    top_n: int = 10
    mobile_only: bool = False


@dataclass
class TrendSpec:
    first_year: int | None = None
    min_pubs: int = 8


@dataclass
class RunConfig:
    input: str
    out_dir: str
    window: tuple[int, int] = (2008, 2015)
    horizon: int | None = None
    impute_mode: str = "window-end"
    weights_path: str | None = None
    threshold: float | None = None
    precluster: str | None = None
    country_table: str | None = None
    countries: list[str] | None = None
    flows: list[FlowSpec] = field(default_factory=list)
    trend: TrendSpec | None = None
    threads: int = 1

    def __post_init__(self) -> None:
        if isinstance(self.window, str):
            self.window = parse_window(self.window)
        self.window = tuple(self.window)
        self.flows = [f if isinstance(f, FlowSpec) else FlowSpec(**f) for f in self.flows]
        if isinstance(self.trend, dict):
            self.trend = TrendSpec(**self.trend)

    @property
    def effective_horizon(self) -> int:
        return self.window[1] if self.horizon is None else self.horizon

    def validate(self) -> None:
        start, end = self.window
        if start > end:
            raise ConfigError(f"window start {start} is after end {end}")
        if self.effective_horizon < start:
            raise ConfigError("horizon must not precede the window start")
        if self.impute_mode not in IMPUTE_MODES:
            raise ConfigError(f"impute_mode must be one of {IMPUTE_MODES}")
        if self.threshold is not None and self.threshold < 0:
            raise ConfigError("threshold must be non-negative")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        codes = alpha3_codes()
        for country in (self.countries or []) + [f.focal for f in self.flows]:
            if country not in codes:
                raise ConfigError(f"{country!r} is not an ISO 3166-1 alpha-3 code")
        for f in self.flows:
            if f.direction not in ("outgoing", "incoming"):
                raise ConfigError(f"flow direction must be outgoing or incoming, got {f.direction!r}")
            if f.top_n < 0:
                raise ConfigError("flow top_n must be non-negative")

    def weights(self) -> ScoringWeights:
        try:
            if self.weights_path:
                return ScoringWeights.from_file(self.weights_path, threshold=self.threshold)
            if self.threshold is not None:
                return ScoringWeights(threshold=self.threshold)
            return ScoringWeights()
        except (OSError, ValueError, TypeError) as exc:
            raise ConfigError(f"invalid scoring weights: {exc}") from exc

    def table(self) -> CountryTable:
        if not self.country_table:
            return default_table()
        try:
            return load_table(self.country_table)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"invalid country table: {exc}") from exc

    def snapshot(self) -> dict:
        data = asdict(self)
        data["window"] = list(self.window)
        return data


@dataclass
class StageRecord:
    name: str
    status: str = "pending"
    rows_in: int | None = None
    rows_out: int | None = None
    seconds: float = 0.0
    outputs: list[str] = field(default_factory=list)
    detail: dict = field(default_factory=dict)


@dataclass
class RunManifest:
    tool_version: str
    config: dict
    input_digests: dict[str, str] = field(default_factory=dict)
    stages: list[StageRecord] = field(default_factory=list)
    status: str = "running"

    def stage(self, name: str) -> StageRecord:
        for s in self.stages:
            if s.name == name:
                return s
        raise KeyError(name)

    def completed(self) -> list[str]:
        return [s.name for s in self.stages if s.status == "completed"]

    def to_json(self) -> dict:
        return {
            "schema": SCHEMAS["manifest"]["id"],
            "tool_version": self.tool_version,
            "status": self.status,
            "config": self.config,
            "input_digests": self.input_digests,
            "stages": [asdict(s) for s in self.stages],
        }

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_config_file(path: str | Path) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputMissing(f"config file not found: {path}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


def run_pipeline(config: RunConfig) -> RunManifest:
    """Run every stage, writing each stage's file into ``config.out_dir``.

    Raises :class:`InputMissing`, :class:`ConfigError` or
    :class:`StageFailure`; in the last case a partial manifest has been
    written.
    """
    for path in filter(None, [config.input, config.precluster, config.weights_path, config.country_table]):
        if not Path(path).is_file():
            raise InputMissing(f"input file not found: {path}")
    config.validate()
    weights = config.weights()
    table = config.table()

    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(tool_version(), config.snapshot())
    manifest.input_digests = {
        str(p): file_digest(p)
        for p in filter(None, [config.input, config.precluster, config.weights_path, config.country_table])
    }
    state: dict = {}

    def run_stage(name: str, fn: Callable[[StageRecord], None]) -> None:
        record = StageRecord(name, status="running")
        manifest.stages.append(record)
        t0 = time.perf_counter()
        try:
            fn(record)
        except Exception as exc:
            record.status = "failed"
            record.detail["error"] = f"{type(exc).__name__}: {exc}"
            record.seconds = round(time.perf_counter() - t0, 3)
            manifest.status = "failed"
            manifest.write(out / "manifest.json")
            raise StageFailure(name, exc, manifest) from exc
        record.status = "completed"
        record.seconds = round(time.perf_counter() - t0, 3)
        log.info("stage %s: %s rows in %.2fs", name, record.rows_out, record.seconds)

    def ingest(rec: StageRecord) -> None:
        records, stats = read_records(config.input, IngestConfig(config.window, table))
        state["records"] = records
        rec.rows_in = stats.n_records + stats.n_rejected
        rec.rows_out = write_records(records, out / "records.jsonl")
        (out / "ingest_stats.json").write_text(json.dumps(stats.to_dict(), indent=2) + "\n", encoding="utf-8")
        rec.outputs = ["records.jsonl", "ingest_stats.json"]
        rec.detail = stats.to_dict()

    def disambig(rec: StageRecord) -> None:
        records = state["records"]
        rec.rows_in = sum(len(r.mentions) for r in records)
        if config.precluster:
            rec.detail["mode"] = "precluster"
            scholars = scholars_from_mapping(records, read_precluster(config.precluster))
        else:
            scholars = disambiguate(records, weights, threads=config.threads)
        state["scholars"] = scholars
        rec.rows_out = write_scholars(scholars, out / "scholars.jsonl")
        rec.outputs = ["scholars.jsonl"]

    def timelines(rec: StageRecord) -> None:
        horizon = config.effective_horizon if config.impute_mode == "window-end" else None
        tls, rejects = timelines_for_corpus(state["scholars"], state["records"], horizon)
        state["timelines"] = tls
        rec.rows_in = len(state["scholars"])
        rec.rows_out = write_timelines(tls, out / "timelines.jsonl")
        rec.detail = {"rejected": dict(sorted(rejects.items()))}
        rec.outputs = ["timelines.jsonl"]

    def classify(rec: StageRecord) -> None:
        classes = classify_all(state["timelines"])
        state["classes"] = classes
        rec.rows_in = len(state["timelines"])
        rec.rows_out = write_classifications(classes, out / "classifications.jsonl")
        rec.outputs = ["classifications.jsonl"]

    def profile(rec: StageRecord) -> None:
        profiles = country_profiles(state["classes"])
        countries = config.countries or sorted(profiles)
        rows = profile_report(profiles, countries)
        write_profile_table(rows, out / "profiles.tsv")
        rec.rows_in = len(state["classes"])
        rec.rows_out = len(rows)
        rec.outputs = ["profiles.tsv"]

    def flows(rec: StageRecord) -> None:
        rec.rows_in = len(state["timelines"])
        rec.rows_out = 0
        for spec in config.flows:
            fm = flow_matrix(state["timelines"], spec.first_year or config.window[0], spec.direction,
                             spec.focal, config.effective_horizon, spec.top_n, spec.mobile_only)
            name = f"flows_{spec.focal}_{spec.direction}.json"
            (out / name).write_text(json.dumps(fm.to_json(), indent=1) + "\n", encoding="utf-8")
            rec.outputs.append(name)
            rec.rows_out += fm.n_scholars

    def trend(rec: StageRecord) -> None:
        spec = config.trend
        series = affiliation_trend(state["timelines"], spec.first_year or config.window[0], spec.min_pubs,
                                   config.window)
        (out / "trend.json").write_text(json.dumps(series.to_json(), indent=1) + "\n", encoding="utf-8")
        rec.rows_in = len(state["timelines"])
        rec.rows_out = series.n_scholars
        rec.outputs = ["trend.json"]

    run_stage("ingest", ingest)
    run_stage("disambiguate", disambig)
    if config.precluster:
        manifest.stage("disambiguate").status = "skipped"
    run_stage("timelines", timelines)
    run_stage("classify", classify)
    run_stage("profile", profile)
    if config.flows:
        run_stage("flows", flows)
    if config.trend:
        run_stage("trend", trend)
    manifest.status = "completed"
    manifest.write(out / "manifest.json")
    return manifest


# -- explain -----------------------------------------------------------------


def _fmt(countries) -> str:
    return "{" + ", ".join(sorted(countries)) + "}"


def explain(scholar_id: str, timelines: Sequence[AffiliationTimeline],
            classifications: Sequence[MobilityClassification]) -> str:
    """Human-readable account of how one scholar was classified.

    Raises ``KeyError`` for an unknown scholar id.
    """
    t = next((x for x in timelines if x.scholar_id == scholar_id), None)
    c = next((x for x in classifications if x.scholar_id == scholar_id), None)
    if t is None or c is None:
        raise KeyError(scholar_id)
    lines = [f"scholar {scholar_id}"]
    years = sorted(t.imputed or t.observed)
    source = t.imputed or t.observed
    for y in years:
        tag = "observed" if y in t.observed else "imputed (carried forward)"
        lines.append(f"  {y}: {_fmt(source[y]):<24} {tag}")
    lines.append(f"origin: {_fmt(t.origin)} (countries of the first publication year {t.first_year})")
    lines.append(f"countries ever: {_fmt(c.countries_ever)}")
    kind = c.global_type
    if kind is MobilityType.NOT_MOBILE:
        (only,) = c.countries_ever
        reason = f"every year lists only {only}"
    elif kind is MobilityType.NON_DIRECTIONAL:
        reason = f"{len(c.origin)} origin countries and the same set {_fmt(c.origin)} in every year"
    elif kind is MobilityType.MIGRANT:
        year = next(y for y in years if c.origin.isdisjoint(source[y]))
        reason = f"{year} is the first year with no origin country ({_fmt(source[year])})"
    else:
        year = next(y for y in years if source[y] - c.origin)
        reason = f"an origin country is kept every year; {_fmt(source[year] - c.origin)} added in {year}"
    lines.append(f"type: {kind.value} ({reason})")
    lines.append("roles:")
    for country, role in sorted(c.country_roles.items()):
        lines.append(f"  {country}: {role.value}")
    return "\n".join(lines)


# -- schemas -----------------------------------------------------------------


SCHEMAS: dict[str, dict] = {
    "records": {
        "id": "mobgraph.records/1",
        "format": "jsonl",
        "fields": {"pub_id": "str", "year": "int", "venue_id": "str|null", "references": "list[str]",
                   "authors": "list[{mention_id, surname, given, email, affiliations[{institution, country}]}]"},
    },
    "ingest_stats": {
        "id": "mobgraph.ingest_stats/1",
        "format": "json",
        "fields": {"n_records": "int", "n_mentions": "int", "n_rejected": "int",
                   "rejection_reasons": "map[str,int]"},
    },
    "scholars": {
        "id": "mobgraph.scholars/1",
        "format": "jsonl",
        "fields": {"scholar_id": "str", "mention_ids": "list[str]", "pubs_by_year": "map[year,list[str]]"},
    },
    "precluster": {
        "id": "mobgraph.precluster/1",
        "format": "jsonl",
        "fields": {"mention_id": "str", "scholar_id": "str"},
    },
    "timelines": {
        "id": "mobgraph.timelines/1",
        "format": "jsonl",
        "fields": {"scholar_id": "str", "first_year": "int", "last_observed_year": "int",
                   "origin": "list[alpha3]", "observed": "map[year,list[alpha3]]",
                   "imputed": "map[year,list[alpha3]]", "pub_counts": "map[year,int]"},
    },
    "classifications": {
        "id": "mobgraph.classifications/1",
        "format": "jsonl",
        "fields": {"scholar_id": "str", "global_type": [t.value for t in MobilityType],
                   "origin": "list[alpha3]", "countries_ever": "list[alpha3]",
                   "country_roles": "map[alpha3,role]"},
    },
    "profiles": {
        "id": "mobgraph.profiles/1",
        "format": "tsv",
        "fields": {"columns": "country,total,mobile,emigrants,immigrants,outgoing_travelers,"
                              "incoming_travelers,non_directionals,mobile_pct,migrant_pct,traveler_pct,"
                              "non_directional_pct,outgoing_pct,incoming_pct"},
    },
    "flows": {
        "id": "mobgraph.flows/1",
        "format": "json",
        "fields": {"cohort": "object", "countries": "list[alpha3]", "per_year_mass": "map[year,map[country,float]]",
                   "transitions": "list[{year, from, to_year, to, mass}]"},
    },
    "trend": {
        "id": "mobgraph.trend/1",
        "format": "json",
        "fields": {"filter": "object", "n_scholars": "int", "series": "map[alpha3,map[year,int]]"},
    },
    "truth": {
        "id": "mobgraph.truth/1",
        "format": "json",
        "fields": {"mention_truth": "map[str,str]", "expected_type": "map[str,str]",
                   "expected_roles": "map[str,map[alpha3,role]]"},
    },
    "manifest": {
        "id": "mobgraph.manifest/1",
        "format": "json",
        "fields": {"tool_version": "str", "status": "str", "config": "object",
                   "input_digests": "map[path,sha256]", "stages": "list[object]"},
    },
}


def version_and_schema() -> dict:
    return {"tool_version": tool_version(), "schemas": SCHEMAS}


def threads_from_env(value: int | None) -> int:
    if value is not None:
        return value
    try:
        return max(1, int(os.environ.get("MOBGRAPH_THREADS", "1")))
    except ValueError:
        return 1
