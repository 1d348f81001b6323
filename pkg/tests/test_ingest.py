import gzip
import json

import pytest
from hypothesis import given, strategies as st

from conftest import author, pub
from mobgraph.ingest import (
    IngestConfig, IngestError, NameKey, derive_coauthor_keys, normalize_surname, parse_given,
    parse_line, parse_publications, read_records, record_to_json, validate_record, write_records,
)


@pytest.mark.parametrize("raw, expected", [
    ("Ortega-Núñez", "ortega-nunez"),
    ("  van  der Berg ", "van der berg"),
    ("O'Neil", "o'neil"),
    ("Müller", "muller"),
])
def test_normalize_surname(raw, expected):
    assert normalize_surname(raw) == expected


@pytest.mark.parametrize("raw, expected", [
    ("Matías", ("m", "matias")),
    ("N.", ("n", None)),
    ("N. J.", ("nj", None)),
    ("NJ", ("nj", None)),
    ("Jean-Pierre", ("j", "jean-pierre")),
    ("", ("", None)),
    (None, ("", None)),
])
def test_parse_given(raw, expected):
    assert parse_given(raw) == expected


def test_parse_line_fields():
    line = pub("P1", 2010, [author("Ortega-Núñez", "Matías", "Spain", "The Netherlands",
                                   email=" M.Ortega@Example.org ", institution="Univ  Granada")],
               venue="V1", refs=["P0"])
    rec = parse_line(line)
    assert rec.pub_id == "P1" and rec.year == 2010 and rec.venue_id == "V1"
    assert rec.references == ("P0",)
    m = rec.mentions[0]
    assert m.mention_id == "P1#0"
    assert m.name_key == NameKey("ortega-nunez", "m")
    assert m.full_given == "matias"
    assert m.email == "m.ortega@example.org"
    assert m.countries == {"ESP", "NLD"}
    assert m.institutions == ("univ granada",)


def test_unmapped_country_is_unknown():
    rec = parse_line(pub("P1", 2010, [author("Smith", "J", "Atlantis", "Spain")]))
    m = rec.mentions[0]
    assert m.countries == {"ESP"}
    assert m.unknown_countries == ("Atlantis",)


def test_string_year_accepted():
    assert parse_line(pub("P1", "2012", [author("Smith", "J")])).year == 2012


@pytest.mark.parametrize("line", [
    "not json",
    "[]",
    json.dumps({"year": 2010, "authors": []}),
    json.dumps({"pub_id": "P1", "year": "twenty", "authors": []}),
    json.dumps({"pub_id": "P1", "year": 2010, "authors": "Smith"}),
    json.dumps({"pub_id": "P1", "year": 2010, "authors": [{"surname": 3}]}),
    json.dumps({"pub_id": "P1", "year": 2010, "authors": [{"surname": "S", "affiliations": {}}]}),
])
def test_malformed(line):
    with pytest.raises(ValueError, match="malformed"):
        parse_line(line)


def test_coauthor_keys():
    line = pub("P1", 2010, [author("Smith", "John"), author("Jones", "Ann"), author("Lee", "Kim")])
    rec = derive_coauthor_keys(parse_line(line))
    smith, jones, lee = NameKey("smith", "j"), NameKey("jones", "a"), NameKey("lee", "k")
    assert [m.coauthor_keys for m in rec.mentions] == [{jones, lee}, {smith, lee}, {smith, jones}]


def test_namesakes_list_the_shared_key_once():
    line = pub("P1", 2010, [author("Smith", "John"), author("Jones", "Ann"), author("Smith", "Jane")])
    rec = derive_coauthor_keys(parse_line(line))
    smith, jones = NameKey("smith", "j"), NameKey("jones", "a")
    assert rec.mentions[0].coauthor_keys == {jones, smith}
    assert rec.mentions[1].coauthor_keys == {smith}
    assert rec.mentions[2].coauthor_keys == {jones, smith}
    records, _ = parse_publications([line], IngestConfig())
    assert [m.coauthor_keys for m in records[0].mentions] == [m.coauthor_keys for m in rec.mentions]


def test_validate_record():
    rec = parse_line(pub("P1", 2020, [author("Smith", "")]))
    assert validate_record(rec) == ["year_out_of_window", "mention_name_empty"]
    rec = parse_line(pub("P1", 2010, []))
    assert validate_record(rec) == ["mentions_empty"]


def test_parse_publications_counts(parse):
    lines = [
        pub("P1", 2010, [author("Smith", "J", "Spain")]),
        pub("P1", 2011, [author("Smith", "J", "Spain")]),
        pub("P2", 2001, [author("Smith", "J", "Spain")]),
        json.dumps({"pub_id": "P3", "year": 2010, "authors": [
            {"mention_id": "m", "surname": "A", "given": "B"},
            {"mention_id": "m", "surname": "C", "given": "D"}]}),
        "{oops",
        pub("P4", 2010, []),
        "",
    ]
    records, stats = parse(lines)
    assert [r.pub_id for r in records] == ["P1"]
    assert stats.n_records + stats.n_rejected == len(lines)
    assert stats.rejection_reasons == {
        "duplicate_id": 1, "year_out_of_window": 1, "mention_id_duplicate": 1,
        "malformed": 2, "mentions_empty": 1,
    }


def test_non_utf8_raises(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_bytes(pub("P1", 2010, [author("Smith", "J")]).encode() + b"\n\xff\xfe\n")
    with pytest.raises(IngestError):
        read_records(path)


def test_missing_file_raises(tmp_path):
    with pytest.raises(IngestError):
        read_records(tmp_path / "nope.jsonl")


def test_canonical_roundtrip(tmp_path, parse):
    lines = [
        pub("P1", 2010, [author("Ortega-Núñez", "Matías", "Spain", institution="U Granada"),
                         author("Lindqvist", "R.", "Netherlands", "Atlantis")], venue="V", refs=["P0"]),
        pub("P2", 2012, [author("Smith", "J", email="J@x.org")]),
    ]
    records, _ = parse(lines)
    for name in ("out.jsonl", "out.jsonl.gz"):
        path = tmp_path / name
        assert write_records(records, path) == 2
        again, stats = read_records(path)
        assert stats.n_rejected == 0
        assert [record_to_json(r) for r in again] == [record_to_json(r) for r in records]
    with gzip.open(tmp_path / "out.jsonl.gz", "rt", encoding="utf-8") as fh:
        assert json.loads(fh.readline())["pub_id"] == "P1"


_names = st.text(alphabet="abcdefgh ÉéÑñ-'", min_size=1, max_size=12)


@given(st.lists(st.tuples(_names, _names), min_size=1, max_size=6), st.integers(2008, 2015))
def test_roundtrip_property(authors, year):
    line = pub("P", year, [author(s, g, "ESP") for s, g in authors])
    try:
        rec = parse_line(line)
    except ValueError:
        return
    # canonical form re-parses to the same record
    again = parse_line(json.dumps(record_to_json(rec)))
    assert record_to_json(again) == record_to_json(rec)


@given(st.lists(st.one_of(st.just("{}"), st.just("x"),
                          st.builds(lambda y: pub(f"P{y}", y, [author("A", "B")]), st.integers(2000, 2020))),
                max_size=20))
def test_every_line_accounted_for(lines):
    records, stats = parse_publications(lines, IngestConfig())
    assert stats.n_records + stats.n_rejected == len(lines)
    assert len({r.pub_id for r in records}) == len(records)
