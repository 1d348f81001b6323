"""Parsing and normalization of line-delimited publication records.

One JSON object per line::

    {"pub_id": "W1", "year": 2008, "venue_id": "J7", "references": ["W0"],
     "authors": [{"surname": "Ortega", "given": "Matías", "email": null,
                  "affiliations": [{"institution": "Univ Granada", "country": "Spain"}]}]}

Writing records back out (:func:`record_to_json`) produces the same schema
with every field in normalized form, so a canonical file parses to identical
records.
"""

from __future__ import annotations

import gzip
import io
import json
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import IO, Iterable, Iterator, NamedTuple

from .countries import CountryTable, default_table

__all__ = [
    "AuthorMention",
    "CorpusStats",
    "IngestConfig",
    "IngestError",
    "NameKey",
    "PublicationRecord",
    "derive_coauthor_keys",
    "normalize_country",
    "open_text",
    "parse_line",
    "parse_publications",
    "parse_given",
    "read_records",
    "record_to_json",
    "validate_record",
    "write_records",
]

DEFAULT_WINDOW = (2008, 2015)

_SPACES = re.compile(r"\s+")
_SURNAME_DROP = re.compile(r"[^\w\s'-]")
_GIVEN_SPLIT = re.compile(r"[\s.]+")


class IngestError(Exception):
    """Fatal ingestion failure (unreadable or undecodable stream)."""


class _Rejected(Exception):
    def __init__(self, reason: str) -> None:
        super().__init__(reason)
        self.reason = reason


class NameKey(NamedTuple):
    surname: str
    first_initial: str

    def __str__(self) -> str:
        return f"{self.surname}|{self.first_initial}"


@dataclass
class AuthorMention:
    mention_id: str
    pub_id: str
    surname: str
    given_initials: str
    full_given: str | None = None
    email: str | None = None
    countries: frozenset[str] = frozenset()
    unknown_countries: tuple[str, ...] = ()
    institutions: tuple[str, ...] = ()
    coauthor_keys: frozenset[NameKey] = frozenset()

    @property
    def name_key(self) -> NameKey:
        return NameKey(self.surname, self.given_initials[0])

    @property
    def given(self) -> str:
        return self.full_given or " ".join(self.given_initials)


@dataclass
class PublicationRecord:
    pub_id: str
    year: int
    mentions: list[AuthorMention]
    venue_id: str | None = None
    references: tuple[str, ...] = ()


@dataclass
class CorpusStats:
    n_records: int = 0
    n_mentions: int = 0
    n_rejected: int = 0
    rejection_reasons: Counter = field(default_factory=Counter)

    def reject(self, reason: str) -> None:
        self.n_rejected += 1
        self.rejection_reasons[reason] += 1

    def __add__(self, other: CorpusStats) -> CorpusStats:
        return CorpusStats(
            self.n_records + other.n_records,
            self.n_mentions + other.n_mentions,
            self.n_rejected + other.n_rejected,
            self.rejection_reasons + other.rejection_reasons,
        )

    def to_dict(self) -> dict:
        return {
            "n_records": self.n_records,
            "n_mentions": self.n_mentions,
            "n_rejected": self.n_rejected,
            "rejection_reasons": dict(sorted(self.rejection_reasons.items())),
        }


@dataclass
class IngestConfig:
    window: tuple[int, int] = DEFAULT_WINDOW
    country_table: CountryTable | None = None

    @property
    def table(self) -> CountryTable:
        return self.country_table or default_table()


# -- field normalizers -------------------------------------------------------


def _fold(text: str) -> str:
    if text.isascii():
        return text.lower()
    text = unicodedata.normalize("NFKD", text)
    return "".join(ch for ch in text if not unicodedata.combining(ch)).lower()


@lru_cache(maxsize=1 << 16)
def normalize_surname(raw: str) -> str:
    return _SPACES.sub(" ", _SURNAME_DROP.sub("", _fold(raw))).strip(" -'")


@lru_cache(maxsize=1 << 16)
def parse_given(raw: str | None) -> tuple[str, str | None]:
    """Split a given-name string into ``(initials, full_given)``.

    Single-letter tokens are initials. A lone all-caps token of two or three
    letters ("NJ") is read as packed initials, the way databases print them.

    >>> parse_given("Matías")
    ('m', 'matias')
    >>> parse_given("N. J.")
    ('nj', None)
    >>> parse_given("NJ")
    ('nj', None)
    >>> parse_given("Matias J")
    ('mj', 'matias j')
    """
    if not raw:
        return "", None
    stripped = raw.strip()
    if 2 <= len(stripped) <= 3 and stripped.isalpha() and stripped.isupper():
        return _fold(stripped), None
    tokens = [t.strip("-") for t in _GIVEN_SPLIT.split(_fold(stripped))]
    tokens = [t for t in tokens if t and t[0].isalnum()]
    if not tokens:
        return "", None
    initials = "".join(t[0] for t in tokens)
    if all(len(t) == 1 for t in tokens):
        return initials, None
    return initials, " ".join(tokens)


def normalize_email(raw: str | None) -> str | None:
    if not raw:
        return None
    email = raw.strip().lower()
    return email or None


@lru_cache(maxsize=1 << 16)
def normalize_institution(raw: str) -> str:
    return _SPACES.sub(" ", _fold(raw)).strip()


def normalize_country(raw: str, table: CountryTable | None = None) -> str | None:
    """Map a raw country string to its alpha-3 code; ``None`` means Unknown."""
    return (table or default_table()).normalize(raw)


# -- record construction -----------------------------------------------------


def _as_year(value) -> int:
    if isinstance(value, bool):
        raise _Rejected("malformed")
    if isinstance(value, int):
        return value
    if isinstance(value, str) and value.strip().isdigit():
        return int(value.strip())
    raise _Rejected("malformed")


def _opt_str(value) -> str | None:
    if value is None:
        return None
    if not isinstance(value, (str, int)) or isinstance(value, bool):
        raise _Rejected("malformed")
    return str(value) or None


def _parse_author(obj, pub_id: str, position: int, table: CountryTable) -> AuthorMention:
    if not isinstance(obj, dict):
        raise _Rejected("malformed")
    surname = obj.get("surname")
    given = obj.get("given")
    if not isinstance(surname, str) or (given is not None and not isinstance(given, str)):
        raise _Rejected("malformed")
    initials, full_given = parse_given(given)
    affiliations = obj.get("affiliations")
    if affiliations is None:
        affiliations = []
    elif not isinstance(affiliations, list):
        raise _Rejected("malformed")
    countries: set[str] = set()
    unknown: list[str] = []
    institutions: list[str] = []
    for aff in affiliations:
        if not isinstance(aff, dict):
            raise _Rejected("malformed")
        inst = aff.get("institution")
        if inst:
            normalized = normalize_institution(str(inst))
            if normalized and normalized not in institutions:
                institutions.append(normalized)
        raw_country = aff.get("country")
        if raw_country:
            code = table.normalize(str(raw_country))
            if code is None:
                if str(raw_country) not in unknown:
                    unknown.append(str(raw_country))
            else:
                countries.add(code)
    mention_id = _opt_str(obj.get("mention_id")) or f"{pub_id}#{position}"
    return AuthorMention(
        mention_id=mention_id,
        pub_id=pub_id,
        surname=normalize_surname(surname),
        given_initials=initials,
        full_given=full_given,
        email=normalize_email(obj.get("email") if isinstance(obj.get("email"), str) else None),
        countries=frozenset(countries),
        unknown_countries=tuple(unknown),
        institutions=tuple(institutions),
    )


def parse_line(line: str, table: CountryTable | None = None) -> PublicationRecord:
    """Parse one JSON line. Raises ``ValueError`` with the rejection reason."""
    try:
        return _parse_obj(line, table or default_table())
    except _Rejected as exc:
        raise ValueError(exc.reason) from None


def _parse_obj(line: str, table: CountryTable) -> PublicationRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError:
        raise _Rejected("malformed") from None
    if not isinstance(obj, dict):
        raise _Rejected("malformed")
    pub_id = _opt_str(obj.get("pub_id"))
    if pub_id is None:
        raise _Rejected("malformed")
    year = _as_year(obj.get("year"))
    refs = obj.get("references")
    refs = [] if refs is None else refs
    authors = obj.get("authors")
    if not isinstance(refs, list) or not isinstance(authors, list):
        raise _Rejected("malformed")
    mentions = [_parse_author(a, pub_id, i, table) for i, a in enumerate(authors)]
    return PublicationRecord(
        pub_id=pub_id,
        year=year,
        mentions=mentions,
        venue_id=_opt_str(obj.get("venue_id")),
        references=tuple(str(r) for r in refs),
    )


def validate_record(record: PublicationRecord, window: tuple[int, int] = DEFAULT_WINDOW,
                    table: CountryTable | None = None) -> list[str]:
    """Return the list of invariant violations; empty means the record is valid."""
    table = table or default_table()
    violations = []
    if not record.mentions:
        violations.append("mentions_empty")
    if not window[0] <= record.year <= window[1]:
        violations.append("year_out_of_window")
    seen = set()
    for m in record.mentions:
        if not m.surname or not m.given_initials:
            violations.append("mention_name_empty")
            break
        if m.mention_id in seen:
            violations.append("mention_id_duplicate")
            break
        seen.add(m.mention_id)
    if any(not table.is_valid(c) for m in record.mentions for c in m.countries):
        violations.append("invalid_country")
    return violations


def _sibling_keys(mentions: list[AuthorMention]) -> list[frozenset[NameKey]]:
    keys = [m.name_key for m in mentions]
    if len(set(keys)) == len(keys):
        everything = frozenset(keys)
        return [everything - {k} for k in keys]
    # a namesake co-author contributes the shared key
    return [frozenset(keys[:i] + keys[i + 1:]) for i in range(len(keys))]


def derive_coauthor_keys(record: PublicationRecord) -> PublicationRecord:
    """Copy of *record* whose mentions carry the name keys of their siblings.

    Keys are collected by position, so two namesakes on one paper each list
    the shared key once.
    """
    mentions = [replace(m, coauthor_keys=keys)
                for m, keys in zip(record.mentions, _sibling_keys(record.mentions))]
    return replace(record, mentions=mentions)


def _lines(stream: Iterable) -> Iterator[str]:
    lineno = 0
    try:
        for lineno, line in enumerate(stream, 1):
            if isinstance(line, bytes):
                line = line.decode("utf-8")
            yield line.rstrip("\r\n")
    except UnicodeDecodeError as exc:
        raise IngestError(f"line {lineno + 1}: input is not valid UTF-8") from exc
    except OSError as exc:
        raise IngestError(f"unreadable input stream: {exc}") from exc


def parse_publications(stream: Iterable, config: IngestConfig | None = None
                       ) -> tuple[list[PublicationRecord], CorpusStats]:
    """Parse a line-delimited stream into validated records.

    Every input line either yields a record or is counted as a rejection,
    so ``n_records + n_rejected`` equals the number of lines read.
    """
    config = config or IngestConfig()
    table = config.table
    stats = CorpusStats()
    records: list[PublicationRecord] = []
    seen_ids: set[str] = set()
    for line in _lines(stream):
        try:
            record = _parse_obj(line, table)
        except _Rejected as exc:
            stats.reject(exc.reason)
            continue
        violations = validate_record(record, config.window, table)
        if violations:
            stats.reject(violations[0])
            continue
        if record.pub_id in seen_ids:
            stats.reject("duplicate_id")
            continue
        seen_ids.add(record.pub_id)
        # mentions are freshly built, so fill keys in place
        for m, keys in zip(record.mentions, _sibling_keys(record.mentions)):
            m.coauthor_keys = keys
        records.append(record)
        stats.n_records += 1
        stats.n_mentions += len(record.mentions)
    return records, stats


# -- file I/O ----------------------------------------------------------------


def open_text(path: str | Path, mode: str = "r") -> IO[str]:
    """Open *path* as UTF-8 text, transparently handling ``.gz``."""
    path = Path(path)
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, mode.replace("t", "") + "b"), encoding="utf-8",
                                newline="" if "w" in mode else None)
    return open(path, mode, encoding="utf-8", newline="\n" if "w" in mode else None)


def read_records(path: str | Path, config: IngestConfig | None = None
                 ) -> tuple[list[PublicationRecord], CorpusStats]:
    try:
        handle = open_text(path)
    except OSError as exc:
        raise IngestError(f"cannot open {path}: {exc}") from exc
    with handle:
        return parse_publications(handle, config)


def record_to_json(record: PublicationRecord) -> dict:
    authors = []
    for m in record.mentions:
        affiliations = [{"institution": inst, "country": None} for inst in m.institutions]
        codes = sorted(m.countries) + list(m.unknown_countries)
        # pad so every country survives even when there are more countries than institutions
        while len(affiliations) < len(codes):
            affiliations.append({"institution": None, "country": None})
        for aff, code in zip(affiliations, codes):
            aff["country"] = code
        authors.append({
            "mention_id": m.mention_id,
            "surname": m.surname,
            "given": m.given,
            "email": m.email,
            "affiliations": affiliations,
        })
    return {
        "pub_id": record.pub_id,
        "year": record.year,
        "venue_id": record.venue_id,
        "references": list(record.references),
        "authors": authors,
    }


def write_records(records: Iterable[PublicationRecord], path: str | Path) -> int:
    n = 0
    with open_text(path, "w") as out:
        for record in records:
            out.write(json.dumps(record_to_json(record), ensure_ascii=False, separators=(",", ":")))
            out.write("\n")
            n += 1
    return n
