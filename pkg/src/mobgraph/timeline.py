"""Per-scholar affiliation-country timelines with blank-year carry-forward."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .disambig import Scholar
from .ingest import AuthorMention, PublicationRecord

__all__ = [
    "AffiliationTimeline",
    "TimelineError",
    "build_timeline",
    "impute_gaps",
    "index_mentions",
    "origin_countries",
    "read_timelines",
    "timelines_for_corpus",
    "write_timelines",
]


class TimelineError(ValueError):
    def __init__(self, reason: str, detail: str = "") -> None:
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


@dataclass
class AffiliationTimeline:
    """Observed and imputed country sets by year for one scholar.

    ``observed`` holds only years with at least one known country.
    ``imputed`` is empty until :func:`impute_gaps` runs, after which it is
    dense from ``first_year`` through the horizon. ``pub_counts`` counts
    distinct publications per year, including years with no known country.
    """

    scholar_id: str
    observed: dict[int, frozenset[str]]
    imputed: dict[int, frozenset[str]] = field(default_factory=dict)
    pub_counts: dict[int, int] = field(default_factory=dict)

    @property
    def first_year(self) -> int:
        return min(self.observed)

    @property
    def last_observed_year(self) -> int:
        return max(self.observed)

    @property
    def origin(self) -> frozenset[str]:
        return self.observed[self.first_year]

    @property
    def horizon(self) -> int | None:
        return max(self.imputed) if self.imputed else None

    def sets(self) -> list[frozenset[str]]:
        """Year-ordered country sets (imputed if available, else observed)."""
        source = self.imputed or self.observed
        return [source[y] for y in sorted(source)]

    def countries_ever(self) -> frozenset[str]:
        return frozenset().union(*self.observed.values())

    def n_pubs(self, window: tuple[int, int] | None = None) -> int:
        if window is None:
            return sum(self.pub_counts.values())
        return sum(n for y, n in self.pub_counts.items() if window[0] <= y <= window[1])

    def to_json(self) -> dict:
        return {
            "scholar_id": self.scholar_id,
            "first_year": self.first_year,
            "last_observed_year": self.last_observed_year,
            "origin": sorted(self.origin),
            "observed": {str(y): sorted(s) for y, s in sorted(self.observed.items())},
            "imputed": {str(y): sorted(s) for y, s in sorted(self.imputed.items())},
            "pub_counts": {str(y): n for y, n in sorted(self.pub_counts.items())},
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> AffiliationTimeline:
        return cls(
            scholar_id=obj["scholar_id"],
            observed={int(y): frozenset(s) for y, s in obj["observed"].items()},
            imputed={int(y): frozenset(s) for y, s in obj.get("imputed", {}).items()},
            pub_counts={int(y): int(n) for y, n in obj.get("pub_counts", {}).items()},
        )


def index_mentions(records: Iterable[PublicationRecord]) -> dict[str, tuple[int, AuthorMention]]:
    """mention_id → (publication year, mention)."""
    return {m.mention_id: (r.year, m) for r in records for m in r.mentions}


def build_timeline(scholar: Scholar, mentions: Mapping[str, tuple[int, AuthorMention]]) -> AffiliationTimeline:
    """Observed part of a scholar's timeline: per-year union of known countries."""
    observed: dict[int, set[str]] = {}
    pubs: dict[int, set[str]] = {}
    for mid in scholar.mention_ids:
        try:
            year, mention = mentions[mid]
        except KeyError:
            raise TimelineError("unresolved_mention", mid) from None
        pubs.setdefault(year, set()).add(mention.pub_id)
        if mention.countries:
            observed.setdefault(year, set()).update(mention.countries)
    if not observed:
        raise TimelineError("no_affiliation_signal", scholar.scholar_id)
    return AffiliationTimeline(
        scholar_id=scholar.scholar_id,
        observed={y: frozenset(observed[y]) for y in sorted(observed)},
        pub_counts={y: len(pubs[y]) for y in sorted(pubs)},
    )


def origin_countries(t: AffiliationTimeline) -> frozenset[str]:
    return t.origin


def impute_gaps(t: AffiliationTimeline, horizon: int | None = None) -> AffiliationTimeline:
    """Carry the last observed country set forward through blank years.

    *horizon* defaults to the last observed year. Observed years keep their
    own sets; nothing is imputed before ``first_year``.
    """
    last = t.last_observed_year
    if horizon is None:
        horizon = last
    if horizon < last:
        raise TimelineError("horizon_before_last_observation", f"{horizon} < {last}")
    imputed: dict[int, frozenset[str]] = {}
    current = t.origin
    for year in range(t.first_year, horizon + 1):
        current = t.observed.get(year, current)
        imputed[year] = current
    return replace(t, imputed=imputed)


def timelines_for_corpus(scholars: Sequence[Scholar], records: Sequence[PublicationRecord],
                         horizon: int | None = None) -> tuple[list[AffiliationTimeline], Counter]:
    """Build and impute one timeline per scholar; returns ``(timelines, rejects)``.

    With ``horizon=None`` each timeline is imputed through its own last
    observed year.
    """
    mentions = index_mentions(records)
    timelines = []
    rejects: Counter = Counter()
    for scholar in scholars:
        try:
            t = build_timeline(scholar, mentions)
            timelines.append(impute_gaps(t, max(horizon, t.last_observed_year) if horizon else None))
        except TimelineError as exc:
            rejects[exc.reason] += 1
    return timelines, rejects


def write_timelines(timelines: Iterable[AffiliationTimeline], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as out:
        for t in timelines:
            out.write(json.dumps(t.to_json(), separators=(",", ":")))
            out.write("\n")
            n += 1
    return n


def read_timelines(path: str | Path) -> list[AffiliationTimeline]:
    with open(path, encoding="utf-8") as handle:
        return [AffiliationTimeline.from_json(json.loads(line)) for line in handle if line.strip()]
