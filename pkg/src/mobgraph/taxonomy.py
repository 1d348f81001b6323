"""Global mobility types and per-country directional roles."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .timeline import AffiliationTimeline

__all__ = [
    "CountryRole",
    "MobilityClassification",
    "MobilityType",
    "classify",
    "classify_all",
    "classify_sets",
    "read_classifications",
    "role_for",
    "roles_for_country",
    "write_classifications",
]


class MobilityType(str, Enum):
    NOT_MOBILE = "not_mobile"
    MIGRANT = "migrant"
    TRAVELER = "traveler"
    NON_DIRECTIONAL = "non_directional"


class CountryRole(str, Enum):
    EMIGRANT = "emigrant"
    IMMIGRANT = "immigrant"
    OUTGOING_TRAVELER = "outgoing_traveler"
    INCOMING_TRAVELER = "incoming_traveler"
    NONE = "none"


@dataclass(frozen=True)
class MobilityClassification:
    scholar_id: str
    global_type: MobilityType
    origin: frozenset[str]
    countries_ever: frozenset[str]
    country_roles: Mapping[str, CountryRole]

    def role(self, country: str) -> CountryRole:
        return self.country_roles.get(country, CountryRole.NONE)

    def to_json(self) -> dict:
        return {
            "scholar_id": self.scholar_id,
            "global_type": self.global_type.value,
            "origin": sorted(self.origin),
            "countries_ever": sorted(self.countries_ever),
            "country_roles": {c: r.value for c, r in sorted(self.country_roles.items())},
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> MobilityClassification:
        return cls(
            scholar_id=obj["scholar_id"],
            global_type=MobilityType(obj["global_type"]),
            origin=frozenset(obj["origin"]),
            countries_ever=frozenset(obj["countries_ever"]),
            country_roles={c: CountryRole(r) for c, r in obj["country_roles"].items()},
        )


def classify_sets(sets: Sequence[frozenset[str]]) -> MobilityType:
    """Classify a year-ordered sequence of country sets (first entry = origin year).

    Precedence: single country ever → not mobile; several origin countries
    and every year equal to the origin set → non-directional; a year with no
    origin country → migrant; otherwise traveler.
    """
    origin = sets[0]
    ever = frozenset().union(*sets)
    if len(ever) == 1:
        return MobilityType.NOT_MOBILE
    if len(origin) > 1 and all(s == origin for s in sets):
        return MobilityType.NON_DIRECTIONAL
    if any(origin.isdisjoint(s) for s in sets):
        return MobilityType.MIGRANT
    return MobilityType.TRAVELER


def classify(t: AffiliationTimeline) -> MobilityType:
    return classify_sets(t.sets())


def role_for(global_type: MobilityType, origin: frozenset[str], ever: frozenset[str],
             country: str) -> CountryRole:
    if country not in ever or global_type in (MobilityType.NOT_MOBILE, MobilityType.NON_DIRECTIONAL):
        return CountryRole.NONE
    home = country in origin
    if global_type is MobilityType.MIGRANT:
        return CountryRole.EMIGRANT if home else CountryRole.IMMIGRANT
    return CountryRole.OUTGOING_TRAVELER if home else CountryRole.INCOMING_TRAVELER


def roles_for_country(c: MobilityClassification, t: AffiliationTimeline | None, country: str) -> CountryRole:
    """Role the classified scholar holds with respect to *country*.

    *t* is accepted for symmetry with :func:`classify`; the classification
    already carries origin and the set of countries ever visited.
    """
    return role_for(c.global_type, c.origin, c.countries_ever, country)


def _classification(t: AffiliationTimeline) -> MobilityClassification:
    sets = t.sets()
    kind = classify_sets(sets)
    origin = sets[0]
    ever = frozenset().union(*sets)
    roles = {country: role_for(kind, origin, ever, country) for country in sorted(ever)}
    return MobilityClassification(t.scholar_id, kind, origin, ever, roles)


def classify_all(timelines: Iterable[AffiliationTimeline]) -> list[MobilityClassification]:
    return [_classification(t) for t in timelines]


def write_classifications(classes: Iterable[MobilityClassification], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as out:
        for c in classes:
            out.write(json.dumps(c.to_json(), separators=(",", ":")))
            out.write("\n")
            n += 1
    return n


def read_classifications(path: str | Path) -> list[MobilityClassification]:
    with open(path, encoding="utf-8") as handle:
        return [MobilityClassification.from_json(json.loads(line)) for line in handle if line.strip()]
