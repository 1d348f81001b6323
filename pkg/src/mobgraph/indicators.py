"""Country profiles, shares, fractional counts, trends and linked-country rankings."""

from __future__ import annotations

import csv
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, fields
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .taxonomy import CountryRole, MobilityClassification, MobilityType
from .timeline import AffiliationTimeline

__all__ = [
    "CountryProfile",
    "IndicatorError",
    "ShareReport",
    "TrendSeries",
    "affiliation_trend",
    "country_counts",
    "country_profiles",
    "directional_shares",
    "fractional_counts",
    "linked_tallies",
    "mobility_shares",
    "percent",
    "profile_report",
    "top_linked",
    "type_shares",
    "write_profile_table",
]


class IndicatorError(ValueError):
    def __init__(self, reason: str) -> None:
        super().__init__(reason)
        self.reason = reason


@dataclass
class CountryProfile:
    country: str
    total_scholars: int = 0
    emigrants: int = 0
    immigrants: int = 0
    outgoing_travelers: int = 0
    incoming_travelers: int = 0
    non_directionals: int = 0

    @property
    def mobile(self) -> int:
        return (self.emigrants + self.immigrants + self.outgoing_travelers
                + self.incoming_travelers + self.non_directionals)

    def __add__(self, other: CountryProfile) -> CountryProfile:
        if other.country != self.country:
            raise ValueError(f"cannot merge profiles of {self.country} and {other.country}")
        counts = {f.name: getattr(self, f.name) + getattr(other, f.name)
                  for f in fields(self) if f.name != "country"}
        return CountryProfile(self.country, **counts)


_ROLE_FIELD = {
    CountryRole.EMIGRANT: "emigrants",
    CountryRole.IMMIGRANT: "immigrants",
    CountryRole.OUTGOING_TRAVELER: "outgoing_travelers",
    CountryRole.INCOMING_TRAVELER: "incoming_travelers",
}


@dataclass
class ShareReport:
    """Exact shares as fractions in [0, 1]; ``None`` where the denominator is zero."""

    mobile_share: Fraction | None = None
    migrant_share_of_mobile: Fraction | None = None
    traveler_share_of_mobile: Fraction | None = None
    nondirectional_share_of_mobile: Fraction | None = None
    outgoing_share_of_mobile: Fraction | None = None
    incoming_share_of_mobile: Fraction | None = None

    def percentages(self) -> dict[str, float | None]:
        return {f.name: percent(getattr(self, f.name)) for f in fields(self)}


def percent(share: Fraction | None, digits: int = 1) -> float | None:
    """Share as a percentage rounded half away from zero.

    Rounding is done on the exact fraction, so 0.0125 → 1.3 regardless of
    binary floating point.

    >>> percent(Fraction(246388, 3641450))
    6.8
    """
    if share is None:
        return None
    scale = 10 ** digits
    value = Fraction(share) * 100 * scale
    rounded = math.floor(abs(value) + Fraction(1, 2))
    return math.copysign(rounded, value) / scale


def country_profiles(classifications: Iterable[MobilityClassification]) -> dict[str, CountryProfile]:
    """One pass over the classifications, profiles for every country seen."""
    profiles: dict[str, CountryProfile] = {}
    for c in classifications:
        nondirectional = c.global_type is MobilityType.NON_DIRECTIONAL
        for country in c.countries_ever:
            p = profiles.get(country)
            if p is None:
                p = profiles[country] = CountryProfile(country)
            p.total_scholars += 1
            if nondirectional:
                p.non_directionals += 1
                continue
            name = _ROLE_FIELD.get(c.role(country))
            if name:
                setattr(p, name, getattr(p, name) + 1)
    return profiles


def country_counts(classifications: Iterable[MobilityClassification], country: str) -> CountryProfile:
    relevant = (c for c in classifications if country in c.countries_ever)
    return country_profiles(relevant).get(country, CountryProfile(country))


def mobility_shares(p: CountryProfile) -> ShareReport:
    if p.total_scholars <= 0:
        raise IndicatorError("empty_profile")
    return ShareReport(mobile_share=Fraction(p.mobile, p.total_scholars))


def type_shares(p: CountryProfile) -> ShareReport:
    mobile = p.mobile
    if mobile <= 0:
        raise IndicatorError("no_mobile_scholars")
    return ShareReport(
        migrant_share_of_mobile=Fraction(p.emigrants + p.immigrants, mobile),
        traveler_share_of_mobile=Fraction(p.outgoing_travelers + p.incoming_travelers, mobile),
        nondirectional_share_of_mobile=Fraction(p.non_directionals, mobile),
    )


def directional_shares(p: CountryProfile) -> ShareReport:
    """Outgoing and incoming shares; the denominator still counts non-directionals."""
    mobile = p.mobile
    if mobile <= 0:
        raise IndicatorError("no_mobile_scholars")
    return ShareReport(
        outgoing_share_of_mobile=Fraction(p.emigrants + p.outgoing_travelers, mobile),
        incoming_share_of_mobile=Fraction(p.immigrants + p.incoming_travelers, mobile),
    )


def full_shares(p: CountryProfile) -> ShareReport:
    report = ShareReport()
    if p.total_scholars > 0:
        report.mobile_share = mobility_shares(p).mobile_share
    if p.mobile > 0:
        types, direction = type_shares(p), directional_shares(p)
        report.migrant_share_of_mobile = types.migrant_share_of_mobile
        report.traveler_share_of_mobile = types.traveler_share_of_mobile
        report.nondirectional_share_of_mobile = types.nondirectional_share_of_mobile
        report.outgoing_share_of_mobile = direction.outgoing_share_of_mobile
        report.incoming_share_of_mobile = direction.incoming_share_of_mobile
    return report


def profile_report(classifications: Iterable[MobilityClassification] | dict[str, CountryProfile],
                   countries: Sequence[str]) -> list[tuple[CountryProfile, ShareReport]]:
    """Profiles with shares for *countries*, in the order given (duplicates kept).

    Accepts either classifications or precomputed profiles keyed by country.
    Shares whose denominator is zero are left as ``None`` rather than raising.
    """
    if not countries:
        return []
    profiles = classifications if isinstance(classifications, dict) else country_profiles(classifications)
    rows = []
    for country in countries:
        p = profiles.get(country) or CountryProfile(country)
        rows.append((p, full_shares(p)))
    return rows


PROFILE_COLUMNS = [
    "country", "total", "mobile", "emigrants", "immigrants", "outgoing_travelers",
    "incoming_travelers", "non_directionals", "mobile_pct", "migrant_pct", "traveler_pct",
    "non_directional_pct", "outgoing_pct", "incoming_pct",
]


def write_profile_table(rows: Sequence[tuple[CountryProfile, ShareReport]], path: str | Path,
                        delimiter: str = "\t") -> None:
    def fmt(share):
        value = percent(share)
        return "" if value is None else f"{value:.1f}"

    with open(path, "w", encoding="utf-8", newline="") as out:
        writer = csv.writer(out, delimiter=delimiter, lineterminator="\n")
        writer.writerow(PROFILE_COLUMNS)
        for p, s in rows:
            writer.writerow([
                p.country, p.total_scholars, p.mobile, p.emigrants, p.immigrants,
                p.outgoing_travelers, p.incoming_travelers, p.non_directionals,
                fmt(s.mobile_share), fmt(s.migrant_share_of_mobile), fmt(s.traveler_share_of_mobile),
                fmt(s.nondirectional_share_of_mobile), fmt(s.outgoing_share_of_mobile),
                fmt(s.incoming_share_of_mobile),
            ])


def read_profile_table(path: str | Path, delimiter: str = "\t") -> dict[str, CountryProfile]:
    with open(path, encoding="utf-8", newline="") as handle:
        return {
            row["country"]: CountryProfile(
                row["country"], int(row["total"]), int(row["emigrants"]), int(row["immigrants"]),
                int(row["outgoing_travelers"]), int(row["incoming_travelers"]), int(row["non_directionals"]),
            )
            for row in csv.DictReader(handle, delimiter=delimiter)
        }


# -- counting ----------------------------------------------------------------


def fractional_counts(timelines: Iterable[AffiliationTimeline], year: int,
                      exact: bool = False) -> dict[str, float | Fraction]:
    """Each scholar active in *year* spreads a mass of 1 over that year's countries."""
    counts: dict[str, float | Fraction] = defaultdict(Fraction if exact else float)
    for t in timelines:
        countries = t.imputed.get(year)
        if not countries:
            continue
        share = Fraction(1, len(countries)) if exact else 1.0 / len(countries)
        for country in countries:
            counts[country] += share
    return dict(sorted(counts.items()))


@dataclass
class TrendSeries:
    first_year: int
    min_pubs: int
    window: tuple[int, int]
    n_scholars: int
    series: dict[str, dict[int, int]]

    def to_json(self) -> dict:
        return {
            "filter": {"first_year": self.first_year, "min_pubs": self.min_pubs, "window": list(self.window)},
            "n_scholars": self.n_scholars,
            "series": {c: {str(y): n for y, n in sorted(s.items())} for c, s in sorted(self.series.items())},
        }


def affiliation_trend(timelines: Iterable[AffiliationTimeline], first_year: int, min_pubs: int,
                      window: tuple[int, int]) -> TrendSeries:
    """Whole counts of cohort scholars per country and year.

    The cohort is scholars whose first year is *first_year* with at least
    *min_pubs* publications inside *window*. A co-affiliated scholar counts
    once in each of that year's countries. Every year of the window is
    present in each country's series, zero-filled.
    """
    cohort = [t for t in timelines if t.first_year == first_year and t.n_pubs(window) >= min_pubs]
    years = range(window[0], window[1] + 1)
    counts: dict[str, Counter] = defaultdict(Counter)
    for t in cohort:
        for y in years:
            for country in t.imputed.get(y, ()):
                counts[country][y] += 1
    series = {c: {y: counts[c][y] for y in years} for c in sorted(counts)}
    return TrendSeries(first_year, min_pubs, window, len(cohort), series)


_COUNTERPART_IS_ORIGIN = {
    CountryRole.EMIGRANT: False,
    CountryRole.OUTGOING_TRAVELER: False,
    CountryRole.IMMIGRANT: True,
    CountryRole.INCOMING_TRAVELER: True,
}


def _counterparts(c: MobilityClassification, role: CountryRole) -> frozenset[str]:
    if _COUNTERPART_IS_ORIGIN[role]:
        return c.origin
    return c.countries_ever - c.origin


def linked_tallies(classifications: Iterable[MobilityClassification], role: CountryRole) -> Counter:
    """``(focal, counterpart) → number of scholars`` for every holder of *role*."""
    if role not in _COUNTERPART_IS_ORIGIN:
        raise ValueError(f"no counterpart definition for role {role!r}")
    tallies: Counter = Counter()
    for c in classifications:
        for focal, r in c.country_roles.items():
            if r is role:
                for other in _counterparts(c, role):
                    tallies[focal, other] += 1
    return tallies


def top_linked(classifications: Iterable[MobilityClassification], focal: str, role: CountryRole,
               n: int) -> list[tuple[str, int]]:
    """Top *n* counterpart countries of *focal*'s scholars holding *role*.

    Ties are broken by ascending country code.
    """
    if n <= 0:
        raise IndicatorError("n_must_be_positive")
    if role not in _COUNTERPART_IS_ORIGIN:
        raise ValueError(f"no counterpart definition for role {role!r}")
    tally: Counter = Counter()
    for c in classifications:
        if c.role(focal) is role:
            tally.update(_counterparts(c, role))
    return sorted(tally.items(), key=lambda kv: (-kv[1], kv[0]))[:n]
