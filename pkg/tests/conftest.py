from __future__ import annotations

import json
from pathlib import Path

import pytest

from mobgraph.ingest import IngestConfig, parse_publications
from mobgraph.timeline import AffiliationTimeline

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def pub(pub_id, year, authors, venue=None, refs=()):
    """Raw publication line in the interchange format."""
    return json.dumps({"pub_id": pub_id, "year": year, "venue_id": venue,
                       "references": list(refs), "authors": authors})


def author(surname, given, *countries, email=None, institution=None):
    return {
        "surname": surname,
        "given": given,
        "email": email,
        "affiliations": [{"institution": institution, "country": c} for c in countries],
    }


def timeline(sid: str, observed: dict[int, set[str]], **kw) -> AffiliationTimeline:
    return AffiliationTimeline(sid, {y: frozenset(s) for y, s in observed.items()}, **kw)


@pytest.fixture
def parse():
    def _parse(lines, window=(2008, 2015)):
        return parse_publications(lines, IngestConfig(window))
    return _parse


@pytest.fixture
def write_lines(tmp_path):
    def _write(name: str, lines) -> Path:
        path = tmp_path / name
        path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        return path
    return _write


def analyse_scripts(scripts, horizon=2015, seed=1):
    """Generate, ingest, disambiguate, impute and classify scripted scholars."""
    from mobgraph.disambig import disambiguate
    from mobgraph.synth import generate
    from mobgraph.taxonomy import classify_all
    from mobgraph.timeline import timelines_for_corpus

    lines, truth = generate(scripts, seed=seed)
    records, stats = parse_publications([json.dumps(line) for line in lines], IngestConfig())
    assert stats.n_rejected == 0
    scholars = disambiguate(records)
    timelines, rejects = timelines_for_corpus(scholars, records, horizon)
    assert not rejects
    return timelines, classify_all(timelines), truth


def script(tid, surname, years, **kw):
    from mobgraph.synth import ScholarScript

    kw.setdefault("email", f"{tid.lower()}@example.org")
    kw.setdefault("p_email", 1.0)
    return ScholarScript(tid, surname, kw.pop("given", "Alex"), years, **kw)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, label): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, label = marker.args
    if report.when == "call" or (report.when == "setup" and not report.passed):
        status = "PASS" if report.passed else "FAIL"
        ACCEPTANCE_LINES.append(f"criterion {number}: {status}  {label}")
