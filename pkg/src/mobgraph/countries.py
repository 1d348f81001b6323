"""Country-name normalization to ISO 3166-1 alpha-3 codes.

The base table comes from ``pycountry`` (alpha-2, alpha-3, short, common and
official names). A bundled CSV of spelling variants, including the
abbreviated forms bibliographic databases use ("Peoples R China",
"U Arab Emirates"), is layered on top. Callers may supply an extra CSV with
the same ``variant,alpha3`` columns.
"""

from __future__ import annotations

import csv
import io
import re
import unicodedata
from functools import lru_cache
from importlib import resources
from pathlib import Path

import pycountry

__all__ = ["CountryTable", "alpha3_codes", "default_table", "fold_key", "load_table", "normalize_country"]

_NON_ALNUM = re.compile(r"[^a-z0-9]+")


def fold_key(raw: str) -> str:
    """Lookup key: accent-folded, casefolded, punctuation collapsed to spaces."""
    text = unicodedata.normalize("NFKD", raw)
    text = "".join(ch for ch in text if not unicodedata.combining(ch))
    text = text.casefold().replace("&", " and ").replace("'", "")
    text = _NON_ALNUM.sub(" ", text).strip()
    if text.startswith("the "):
        text = text[4:]
    return text


@lru_cache(maxsize=1)
def alpha3_codes() -> frozenset[str]:
    return frozenset(c.alpha_3 for c in pycountry.countries)


def _read_alias_csv(handle) -> dict[str, str]:
    rows = {}
    for row in csv.DictReader(handle):
        variant = (row.get("variant") or "").strip()
        code = (row.get("alpha3") or "").strip().upper()
        if not variant:
            continue
        if code not in alpha3_codes():
            raise ValueError(f"country table maps {variant!r} to non-ISO code {code!r}")
        rows[variant] = code
    return rows


class CountryTable:
    """Variant → alpha-3 lookup.

    >>> table = default_table()
    >>> table.normalize("Netherlands"), table.normalize("ZAF"), table.normalize("Atlantis")
    ('NLD', 'ZAF', None)
    """

    def __init__(self, aliases: dict[str, str] | None = None) -> None:
        self._codes = alpha3_codes()
        self._lookup: dict[str, str] = {}
        self._cache: dict[str, str | None] = {}
        for country in pycountry.countries:
            code = country.alpha_3
            for attr in ("name", "common_name", "official_name", "alpha_2"):
                value = getattr(country, attr, None)
                if value:
                    self._lookup[fold_key(value)] = code
        # alpha-3 identity last so a code never maps elsewhere
        for code in self._codes:
            self._lookup[fold_key(code)] = code
        if aliases:
            self.update(aliases)

    def update(self, aliases: dict[str, str]) -> None:
        for variant, code in aliases.items():
            if code not in self._codes:
                raise ValueError(f"{code!r} is not an ISO 3166-1 alpha-3 code")
            key = fold_key(variant)
            if key in self._lookup and len(key) == 3 and self._lookup[key] == key.upper():
                # never remap a valid alpha-3 code (keeps normalize idempotent)
                continue
            self._lookup[key] = code
        self._cache.clear()

    def load_csv(self, path: str | Path) -> None:
        with open(path, newline="", encoding="utf-8") as handle:
            self.update(_read_alias_csv(handle))

    def normalize(self, raw: str | None) -> str | None:
        """Return the alpha-3 code for *raw*, or ``None`` when unmapped."""
        if not raw:
            return None
        try:
            return self._cache[raw]
        except KeyError:
            pass
        stripped = raw.strip()
        code = stripped.upper() if stripped.upper() in self._codes else self._lookup.get(fold_key(stripped))
        if len(self._cache) < 1 << 16:
            self._cache[raw] = code
        return code

    def is_valid(self, code: str) -> bool:
        return code in self._codes


@lru_cache(maxsize=1)
def _bundled_aliases() -> dict[str, str]:
    text = resources.files("mobgraph").joinpath("data/country_aliases.csv").read_text("utf-8")
    return _read_alias_csv(io.StringIO(text))


@lru_cache(maxsize=1)
def default_table() -> CountryTable:
    return CountryTable(_bundled_aliases())


def load_table(extra_csv: str | Path | None = None) -> CountryTable:
    """Fresh bundled table, optionally extended with a ``variant,alpha3`` CSV."""
    table = CountryTable(_bundled_aliases())
    if extra_csv:
        table.load_csv(extra_csv)
    return table


def normalize_country(raw: str | None) -> str | None:
    return default_table().normalize(raw)
