"""Synthetic corpora with ground truth, and a brute-force taxonomy oracle.

The oracle functions here are deliberately written without reference to
:mod:`mobgraph.taxonomy`; the two are compared exhaustively in the test
suite and by ``mobgraph selftest``.
"""

from __future__ import annotations

import itertools
import json
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from math import comb
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .timeline import AffiliationTimeline

__all__ = [
    "GroundTruth",
    "ScholarScript",
    "enumerate_small_timelines",
    "generate",
    "make_population",
    "oracle_classify",
    "oracle_roles",
    "pairwise_agreement",
    "random_timelines",
    "read_scripts",
    "write_corpus",
]

NOT_MOBILE = "not_mobile"
MIGRANT = "migrant"
TRAVELER = "traveler"
NON_DIRECTIONAL = "non_directional"

COUNTRY_POOL = (
    "ESP", "USA", "GBR", "FRA", "DEU", "NLD", "CAN", "ZAF", "ITA", "PRT", "CHN", "AUS",
    "CHE", "SWE", "BRA", "MEX", "CHL", "JPN", "IND", "BEL",
)


# -- oracle ------------------------------------------------------------------


def oracle_classify(yearly_sets: Sequence[Iterable[str]]) -> str:
    """Mobility type of a dense, year-ordered list of affiliation-country sets.

    Written as a literal reading of the type definitions:

    * not mobile: every publication lists countries from a single country;
    * non-directional: more than one country in the first year, and the
      same countries in every year;
    * migrant: in at least one year, none of the first-year countries is
      listed;
    * traveler: everything else (the first-year country is kept every year
      while some other country shows up).
    """
    years = [set(s) for s in yearly_sets]
    home = years[0]
    seen: set[str] = set()
    for s in years:
        seen |= s
    if len(seen) == 1:
        return NOT_MOBILE
    if len(home) >= 2 and all(s == home for s in years):
        return NON_DIRECTIONAL
    for s in years:
        if not (home & s):
            return MIGRANT
    return TRAVELER


def oracle_roles(yearly_sets: Sequence[Iterable[str]]) -> dict[str, str]:
    """Per-country role for every country the sequence touches."""
    kind = oracle_classify(yearly_sets)
    home = set(yearly_sets[0])
    seen = set().union(*map(set, yearly_sets))
    roles = {}
    for country in sorted(seen):
        if kind == MIGRANT:
            roles[country] = "emigrant" if country in home else "immigrant"
        elif kind == TRAVELER:
            roles[country] = "outgoing_traveler" if country in home else "incoming_traveler"
        else:
            roles[country] = "none"
    return roles


def enumerate_small_timelines(countries: int | Sequence[str], max_years: int) -> Iterator[tuple[frozenset, ...]]:
    """All length-``max_years`` sequences of non-empty subsets of *countries*.

    An int *countries* means that many placeholder codes ``A``, ``B``, ...
    """
    if isinstance(countries, int):
        countries = [chr(ord("A") + i) for i in range(countries)]
    pool = list(countries)
    subsets = [frozenset(c) for r in range(1, len(pool) + 1) for c in itertools.combinations(pool, r)]
    return itertools.product(subsets, repeat=max_years)


def _carry_forward(years: Mapping[int, frozenset], through: int | None = None) -> list[frozenset]:
    first, last = min(years), max(years)
    dense, current = [], years[first]
    for y in range(first, max(last, through or last) + 1):
        current = years.get(y, current)
        dense.append(current)
    return dense


# -- scripted corpora --------------------------------------------------------


@dataclass
class ScholarScript:
    truth_id: str
    surname: str
    given: str
    years: dict[int, frozenset[str]]
    pubs_per_year: dict[int, int] = field(default_factory=dict)
    email: str | None = None
    venues: list[str] = field(default_factory=list)
    coauthors: list[tuple[str, str]] = field(default_factory=list)
    institutions: dict[str, str] = field(default_factory=dict)
    p_email: float = 0.5
    p_full_given: float = 0.8
    p_self_cite: float = 0.5

    def __post_init__(self) -> None:
        self.years = {int(y): frozenset(s) for y, s in self.years.items()}
        if not self.years or any(not s for s in self.years.values()):
            raise ValueError(f"{self.truth_id}: every scripted year needs a non-empty country set")
        self.pubs_per_year = {int(y): int(n) for y, n in self.pubs_per_year.items()} or {y: 1 for y in self.years}
        for y in self.years:
            if self.pubs_per_year.get(y, 0) < 1:
                raise ValueError(f"{self.truth_id}: year {y} needs at least one publication")
        self.coauthors = [tuple(c) for c in self.coauthors]

    @classmethod
    def from_json(cls, obj: Mapping) -> ScholarScript:
        return cls(**obj)

    def to_json(self) -> dict:
        return {
            "truth_id": self.truth_id, "surname": self.surname, "given": self.given,
            "years": {str(y): sorted(s) for y, s in sorted(self.years.items())},
            "pubs_per_year": {str(y): n for y, n in sorted(self.pubs_per_year.items())},
            "email": self.email, "venues": self.venues, "coauthors": [list(c) for c in self.coauthors],
            "institutions": self.institutions, "p_email": self.p_email,
            "p_full_given": self.p_full_given, "p_self_cite": self.p_self_cite,
        }


@dataclass
class GroundTruth:
    mention_truth: dict[str, str] = field(default_factory=dict)
    expected_type: dict[str, str] = field(default_factory=dict)
    expected_roles: dict[str, dict[str, str]] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "mention_truth": dict(sorted(self.mention_truth.items())),
            "expected_type": dict(sorted(self.expected_type.items())),
            "expected_roles": dict(sorted(self.expected_roles.items())),
        }


def _initials(given: str) -> str:
    return " ".join(part[0].upper() + "." for part in given.split())


def generate(scripts: Sequence[ScholarScript], seed: int = 42) -> tuple[list[dict], GroundTruth]:
    """Publication lines (as dicts in the ingest schema) realizing *scripts*.

    Each scripted year produces ``pubs_per_year`` publications, each listing
    every country of that year's set. Co-authors named in a script are
    ground-truth authors of their own; they take the scripted author's
    alphabetically first country of the year.
    """
    rng = random.Random(seed)
    truth = GroundTruth()
    lines: list[dict] = []
    realized: dict[str, dict[int, set[str]]] = defaultdict(lambda: defaultdict(set))
    counter = itertools.count()
    for script in scripts:
        own_pubs: list[str] = []
        for year in sorted(script.years):
            countries = sorted(script.years[year])
            for _ in range(script.pubs_per_year[year]):
                pub_id = f"P{next(counter):07d}"
                full = rng.random() < script.p_full_given
                authors = [{
                    "mention_id": f"{pub_id}#0",
                    "surname": script.surname,
                    "given": script.given if full else _initials(script.given),
                    "email": script.email if script.email and rng.random() < script.p_email else None,
                    "affiliations": [
                        {"institution": script.institutions.get(c, f"inst {script.truth_id} {c}"), "country": c}
                        for c in countries
                    ],
                }]
                truth.mention_truth[f"{pub_id}#0"] = script.truth_id
                realized[script.truth_id][year].update(countries)
                if script.coauthors:
                    k = min(len(script.coauthors), rng.randint(1, 2))
                    for idx in sorted(rng.sample(range(len(script.coauthors)), k)):
                        surname, given = script.coauthors[idx]
                        co_id = f"{script.truth_id}/co{idx}"
                        mid = f"{pub_id}#{len(authors)}"
                        home = countries[0]
                        authors.append({
                            "mention_id": mid,
                            "surname": surname,
                            "given": given,
                            "email": None,
                            "affiliations": [{"institution": script.institutions.get(home, f"inst {script.truth_id} {home}"),
                                              "country": home}],
                        })
                        truth.mention_truth[mid] = co_id
                        realized[co_id][year].add(home)
                refs = []
                if own_pubs and rng.random() < script.p_self_cite:
                    refs = sorted(rng.sample(own_pubs, min(len(own_pubs), 2)))
                lines.append({
                    "pub_id": pub_id,
                    "year": year,
                    "venue_id": rng.choice(script.venues) if script.venues else None,
                    "references": refs,
                    "authors": authors,
                })
                own_pubs.append(pub_id)
    for tid in sorted(realized):
        dense = _carry_forward({y: frozenset(s) for y, s in realized[tid].items()})
        truth.expected_type[tid] = oracle_classify(dense)
        truth.expected_roles[tid] = oracle_roles(dense)
    return lines, truth


def _word(n: int, rng: random.Random, syllables: int = 3) -> str:
    """Pronounceable token unique per *n*.

    Leading syllables spell *n* in base 75; padding syllables use
    consonants outside that alphabet, so no two values collide.
    """
    consonants, vowels = "bcdfghklmnprstv", "aeiou"
    base = len(consonants) * len(vowels)
    parts = []
    while True:
        n, rem = divmod(n, base)
        parts.append(consonants[rem // len(vowels)] + vowels[rem % len(vowels)])
        if n == 0:
            break
    while len(parts) < syllables:
        parts.append(rng.choice("jwxyz") + rng.choice(vowels))
    return "".join(parts)


def _mobility_years(rng: random.Random, window: tuple[int, int], mean_pubs: float) -> dict[int, frozenset[str]]:
    start = rng.randint(window[0], window[1] - 1)
    span = list(range(start, window[1] + 1))
    n_years = max(1, min(len(span), round(rng.gauss(mean_pubs / 1.4, 1.5))))
    active = sorted({start} | set(rng.sample(span[1:], min(len(span) - 1, n_years - 1))))
    home, other, third = rng.sample(COUNTRY_POOL, 3)
    kind = rng.choices([NOT_MOBILE, MIGRANT, TRAVELER, NON_DIRECTIONAL], weights=[55, 15, 18, 12])[0]
    if len(active) == 1 and kind in (MIGRANT, TRAVELER):
        kind = NOT_MOBILE
    years: dict[int, frozenset[str]] = {}
    switch = active[rng.randint(1, len(active) - 1)] if len(active) > 1 else None
    for y in active:
        if kind == NOT_MOBILE:
            years[y] = frozenset({home})
        elif kind == NON_DIRECTIONAL:
            years[y] = frozenset({home, other})
        elif kind == MIGRANT:
            if y < switch:
                years[y] = frozenset({home})
            elif rng.random() < 0.2 and y != switch:
                years[y] = frozenset({home})  # some return home later
            else:
                years[y] = frozenset({other} if rng.random() < 0.8 else {other, third})
        else:
            years[y] = frozenset({home, other}) if y >= switch else frozenset({home})
    return years


def make_population(n_authors: int, n_keys: int, seed: int = 42, window: tuple[int, int] = (2008, 2015),
                    mean_pubs: float = 10.0, n_coauthors: int = 2, n_venues: int = 5000,
                    p_email: float = 0.5, p_full_given: float = 0.8) -> list[ScholarScript]:
    """Scripts for *n_authors* spread over *n_keys* shared (surname, initial) keys.

    Authors sharing a key get distinct full given names, distinct emails,
    disjoint co-author pools and their own institutions, so they are
    separable in principle.
    """
    if n_keys < 1 or n_authors < n_keys:
        raise ValueError("need 1 <= n_keys <= n_authors")
    rng = random.Random(seed)
    letters = "abcdefghijklmnoprstvw"
    keys = [(_word(i, rng).capitalize(), letters[i % len(letters)]) for i in range(n_keys)]
    scripts = []
    co_serial = itertools.count()
    for i in range(n_authors):
        surname, initial = keys[i % n_keys]
        # rank within the key makes the given name unique inside the block
        given = (initial + _word(i // n_keys, rng, 2)).capitalize()
        years = _mobility_years(rng, window, mean_pubs)
        total = max(len(years), round(rng.gauss(mean_pubs, 2)))
        pubs = {y: 1 for y in years}
        for _ in range(total - len(years)):
            pubs[rng.choice(sorted(years))] += 1
        tid = f"T{i:06d}"
        coauthors = []
        for _ in range(n_coauthors):
            n = next(co_serial)
            coauthors.append((("Zu" + _word(n, rng)).capitalize(), _word(n, rng, 2).capitalize()))
        countries = sorted(set().union(*years.values()))
        scripts.append(ScholarScript(
            truth_id=tid,
            surname=surname,
            given=given,
            years=years,
            pubs_per_year=pubs,
            email=f"{given.lower()}.{surname.lower()}.{i}@example.org",
            venues=[f"V{rng.randrange(n_venues):05d}" for _ in range(2)],
            coauthors=coauthors,
            institutions={c: f"univ {tid.lower()} {c.lower()}" for c in countries},
            p_email=p_email,
            p_full_given=p_full_given,
        ))
    return scripts


def pairwise_agreement(clusters: Iterable[Iterable[str]], mention_truth: Mapping[str, str]) -> tuple[float, float]:
    """Pairwise (precision, recall) of a mention clustering against ground truth."""
    predicted = tp = 0
    for members in clusters:
        members = list(members)
        predicted += comb(len(members), 2)
        for n in Counter(mention_truth[m] for m in members).values():
            tp += comb(n, 2)
    actual = sum(comb(n, 2) for n in Counter(mention_truth.values()).values())
    precision = tp / predicted if predicted else 1.0
    recall = tp / actual if actual else 1.0
    return precision, recall


def random_timelines(n: int, seed: int = 0, k: int = 3, max_len: int = 6, gap_prob: float = 0.3,
                     start: int = 2008) -> list[AffiliationTimeline]:
    """*n* observed-only timelines over *k* countries with random blank years."""
    rng = random.Random(seed)
    pool = list(COUNTRY_POOL[:k])
    out = []
    for i in range(n):
        length = rng.randint(1, max_len)
        observed = {}
        for offset in range(length):
            if offset and offset < length - 1 and rng.random() < gap_prob:
                continue
            observed[start + offset] = frozenset(rng.sample(pool, rng.randint(1, k)))
        out.append(AffiliationTimeline(
            scholar_id=f"R{i:06d}",
            observed=observed,
            pub_counts={y: rng.randint(1, 3) for y in observed},
        ))
    return out


def read_scripts(path: str | Path) -> list[ScholarScript]:
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("["):
        return [ScholarScript.from_json(o) for o in json.loads(text)]
    return [ScholarScript.from_json(json.loads(line)) for line in text.splitlines() if line.strip()]


def write_corpus(lines: Iterable[Mapping], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as out:
        for obj in lines:
            out.write(json.dumps(obj, ensure_ascii=False, separators=(",", ":")))
            out.write("\n")
            n += 1
    return n
