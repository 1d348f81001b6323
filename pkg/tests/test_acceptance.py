"""End-to-end acceptance checks, one test per criterion.

Each test carries a ``criterion`` marker; conftest prints one PASS/FAIL line
per criterion in the terminal summary.
"""

import filecmp
import json
import string
import time
from collections import Counter
from fractions import Fraction

import pytest

from conftest import analyse_scripts, script
from mobgraph.disambig import ScoringWeights, disambiguate
from mobgraph.flows import OTHER, flow_matrix
from mobgraph.indicators import (
    CountryProfile, directional_shares, fractional_counts, linked_tallies, mobility_shares,
    percent, type_shares,
)
from mobgraph.ingest import parse_publications
from mobgraph.pipeline import FlowSpec, RunConfig, TrendSpec, run_pipeline
from mobgraph.synth import (
    enumerate_small_timelines, generate, make_population, oracle_classify, pairwise_agreement,
    random_timelines,
)
from mobgraph.taxonomy import CountryRole, classify_all, classify_sets
from mobgraph.timeline import impute_gaps

WINDOW = (2008, 2015)
YEARS = range(WINDOW[0], WINDOW[1] + 1)


# -- 1 -----------------------------------------------------------------------

# (total, emigrants, immigrants, outgoing travelers, incoming travelers, non-directionals)
PUBLISHED = {
    "CAN": (430448, 8743, 9668, 8375, 11126, 16137),
    "ESP": (414999, 6162, 4925, 8428, 6863, 9040),
    "NLD": (185948, 4635, 4656, 6117, 6343, 9233),
    "USA": (3641450, 31395, 36467, 37542, 50979, 90005),
    "ZAF": (56360, 830, 1366, 1268, 2328, 2641),
}

QUOTED = [
    ("USA", mobility_shares, "mobile_share", 6.8),
    ("NLD", mobility_shares, "mobile_share", 16.7),
    ("ZAF", mobility_shares, "mobile_share", 15.0),
    ("ESP", directional_shares, "outgoing_share_of_mobile", 41.2),
    ("ESP", directional_shares, "incoming_share_of_mobile", 33.3),
    ("ZAF", directional_shares, "outgoing_share_of_mobile", 24.9),
    ("ZAF", directional_shares, "incoming_share_of_mobile", 43.8),
    ("CAN", type_shares, "migrant_share_of_mobile", 34.1),
    ("ZAF", type_shares, "migrant_share_of_mobile", 26.0),
    ("ESP", type_shares, "traveler_share_of_mobile", 43.2),
    ("USA", type_shares, "traveler_share_of_mobile", 35.9),
    ("USA", type_shares, "nondirectional_share_of_mobile", 36.5),
    ("ESP", type_shares, "nondirectional_share_of_mobile", 25.5),
]


@pytest.mark.criterion(1, "published profile counts reproduce every quoted share")
def test_published_shares():
    t0 = time.perf_counter()
    profiles = {c: CountryProfile(c, *row) for c, row in PUBLISHED.items()}
    misses = []
    for country, op, field, quoted in QUOTED:
        got = percent(getattr(op(profiles[country]), field))
        if abs(got - quoted) > 0.05:
            misses.append((country, field, got, quoted))
    elapsed = time.perf_counter() - t0
    assert not misses
    assert elapsed < 1.0


# -- 2 -----------------------------------------------------------------------


@pytest.mark.criterion(2, "classifier equals the brute-force oracle on all k=3, L<=4 sequences")
def test_oracle_equivalence():
    t0 = time.perf_counter()
    total = mismatches = 0
    for length in range(1, 5):
        for seq in enumerate_small_timelines(3, length):
            total += 1
            mismatches += classify_sets(seq).value != oracle_classify(seq)
    elapsed = time.perf_counter() - t0
    assert total == 7 + 7**2 + 7**3 + 7**4 == 2800
    assert mismatches == 0
    assert elapsed < 5.0


# -- 3, 4, 5 -----------------------------------------------------------------


@pytest.fixture(scope="module")
def random_population():
    raw = random_timelines(10_000, seed=2024, k=3, max_len=6, gap_prob=0.3)
    return raw, [impute_gaps(t, WINDOW[1]) for t in raw]


@pytest.mark.criterion(3, "classification unchanged by gap imputation on 10k random timelines")
def test_imputation_invariance(random_population):
    raw, imputed = random_population
    assert any(len(t.observed) < len(t.imputed) for t in imputed)
    changed = [r.scholar_id for r, i in zip(raw, imputed) if classify_sets(r.sets()) != classify_sets(i.sets())]
    assert changed == []


@pytest.mark.criterion(4, "fractional counts conserve one unit of mass per active scholar")
def test_mass_conservation(random_population):
    _, imputed = random_population
    for year in YEARS:
        active = sum(1 for t in imputed if year in t.imputed)
        total = sum(fractional_counts(imputed, year).values())
        assert abs(total - active) <= 1e-9, year


@pytest.mark.criterion(5, "emigrant/immigrant and outgoing/incoming traveler tallies are symmetric")
def test_role_symmetry(random_population):
    _, imputed = random_population
    classes = classify_all(imputed)
    mismatches = 0
    for out_role, in_role in [(CountryRole.EMIGRANT, CountryRole.IMMIGRANT),
                              (CountryRole.OUTGOING_TRAVELER, CountryRole.INCOMING_TRAVELER)]:
        outgoing, incoming = linked_tallies(classes, out_role), linked_tallies(classes, in_role)
        assert outgoing, out_role
        mirrored = Counter({(b, a): n for (a, b), n in incoming.items()})
        mismatches += sum(1 for k in set(outgoing) | set(mirrored) if outgoing[k] != mirrored[k])
    assert mismatches == 0


# -- 6 -----------------------------------------------------------------------


@pytest.mark.criterion(6, "disambiguation precision 1.0, recall >= 0.9, monotone in the threshold")
def test_disambiguation_quality():
    scripts = make_population(600, 60, seed=17)
    lines, truth = generate(scripts, seed=17)
    records, stats = parse_publications([json.dumps(line) for line in lines])
    assert stats.n_rejected == 0
    n_keys = len({m.name_key for r in records for m in r.mentions if not m.surname.startswith("zu")})
    assert len(scripts) >= 500 and n_keys >= 50

    base = ScoringWeights()
    scholars = disambiguate(records, base)
    precision, recall = pairwise_agreement([s.mention_ids for s in scholars], truth.mention_truth)
    assert precision == 1.0
    assert recall >= 0.9

    strict = disambiguate(records, ScoringWeights(threshold=base.threshold * 2))
    size = {m: len(s.mention_ids) for s in scholars for m in s.mention_ids}
    grown = [m for s in strict for m in s.mention_ids if len(s.mention_ids) > size[m]]
    assert grown == []


# -- 7 -----------------------------------------------------------------------

F = Fraction
HALF = F(5, 2)  # ten non-directional or split scholars over two-by-two pairs
ND = {("ESP", "DEU"): HALF, ("DEU", "ESP"): HALF, ("DEU", "DEU"): HALF}


def _name(i: int) -> str:
    letters = string.ascii_lowercase
    return "Flow" + letters[i // 26] + letters[i % 26]


def _cohort_scripts():
    groups = {
        # 40 stay in Spain
        "S": (40, lambda y: {"ESP"}),
        # 20 move to the UK in 2011
        "M": (20, lambda y: {"ESP"} if y < 2011 else {"GBR"}),
        # 10 keep Spain and add the US from 2012
        "T": (10, lambda y: {"ESP"} if y < 2012 else {"ESP", "USA"}),
        # 15 leave for France in 2010 and return in 2014
        "R": (15, lambda y: {"FRA"} if 2010 <= y <= 2013 else {"ESP"}),
        # 10 co-affiliated with Spain and Germany throughout
        "N": (10, lambda y: {"ESP", "DEU"}),
        # 5 start in the US and arrive in Spain in 2013
        "I": (5, lambda y: {"USA"} if y < 2013 else {"ESP"}),
    }
    scripts, serial = [], 0
    for tag, (n, years) in groups.items():
        for k in range(n):
            scripts.append(script(f"{tag}{k:02d}", _name(serial), {y: years(y) for y in YEARS}))
            serial += 1
    return scripts


def _tr(year, pairs, nondirectional=True):
    out = {(year, a, year + 1, b): F(m) for (a, b), m in pairs.items()}
    if nondirectional:
        for (a, b), m in ND.items():
            out[year, a, year + 1, b] = m
    return out


OUT_MASS = {
    2008: {"ESP": 90, "DEU": 5},
    2009: {"ESP": 90, "DEU": 5},
    2010: {"ESP": 75, "FRA": 15, "DEU": 5},
    2011: {"ESP": 55, "GBR": 20, "FRA": 15, "DEU": 5},
    2012: {"ESP": 50, "USA": 5, "GBR": 20, "FRA": 15, "DEU": 5},
    2013: {"ESP": 50, "USA": 5, "GBR": 20, "FRA": 15, "DEU": 5},
    2014: {"ESP": 65, "USA": 5, "GBR": 20, "DEU": 5},
    2015: {"ESP": 65, "USA": 5, "GBR": 20, "DEU": 5},
}
OUT_TRANSITIONS = {
    **_tr(2008, {("ESP", "ESP"): F(175, 2)}),
    **_tr(2009, {("ESP", "ESP"): F(145, 2), ("ESP", "FRA"): 15}),
    **_tr(2010, {("ESP", "ESP"): F(105, 2), ("ESP", "GBR"): 20, ("FRA", "FRA"): 15}),
    **_tr(2011, {("ESP", "ESP"): F(95, 2), ("ESP", "USA"): 5, ("GBR", "GBR"): 20, ("FRA", "FRA"): 15}),
    **_tr(2012, {("ESP", "ESP"): 45, ("ESP", "USA"): HALF, ("USA", "ESP"): HALF, ("USA", "USA"): HALF,
                 ("GBR", "GBR"): 20, ("FRA", "FRA"): 15}),
    **_tr(2013, {("ESP", "ESP"): 45, ("ESP", "USA"): HALF, ("USA", "ESP"): HALF, ("USA", "USA"): HALF,
                 ("GBR", "GBR"): 20, ("FRA", "ESP"): 15}),
    **_tr(2014, {("ESP", "ESP"): 60, ("ESP", "USA"): HALF, ("USA", "ESP"): HALF, ("USA", "USA"): HALF,
                 ("GBR", "GBR"): 20}),
}
IN_MASS = {
    2008: {"ESP": 70, "DEU": 5, "USA": 5},
    2009: {"ESP": 70, "DEU": 5, "USA": 5},
    2010: {"ESP": 55, "FRA": 15, "DEU": 5, "USA": 5},
    2011: {"ESP": 55, "FRA": 15, "DEU": 5, "USA": 5},
    2012: {"ESP": 50, "USA": 10, "FRA": 15, "DEU": 5},
    2013: {"ESP": 55, "USA": 5, "FRA": 15, "DEU": 5},
    2014: {"ESP": 70, "USA": 5, "DEU": 5},
    2015: {"ESP": 70, "USA": 5, "DEU": 5},
}
IN_TRANSITIONS = {
    **_tr(2008, {("ESP", "ESP"): F(135, 2), ("USA", "USA"): 5}),
    **_tr(2009, {("ESP", "ESP"): F(105, 2), ("ESP", "FRA"): 15, ("USA", "USA"): 5}),
    **_tr(2010, {("ESP", "ESP"): F(105, 2), ("FRA", "FRA"): 15, ("USA", "USA"): 5}),
    **_tr(2011, {("ESP", "ESP"): F(95, 2), ("ESP", "USA"): 5, ("FRA", "FRA"): 15, ("USA", "USA"): 5}),
    **_tr(2012, {("ESP", "ESP"): 45, ("ESP", "USA"): HALF, ("USA", "ESP"): F(15, 2), ("USA", "USA"): HALF,
                 ("FRA", "FRA"): 15}),
    **_tr(2013, {("ESP", "ESP"): 50, ("ESP", "USA"): HALF, ("USA", "ESP"): HALF, ("USA", "USA"): HALF,
                 ("FRA", "ESP"): 15}),
    **_tr(2014, {("ESP", "ESP"): 65, ("ESP", "USA"): HALF, ("USA", "ESP"): HALF, ("USA", "USA"): HALF}),
}


@pytest.mark.criterion(7, "scripted 100-scholar cohort yields the hand-computed flows, returnees included")
def test_flow_consistency():
    timelines, classes, truth = analyse_scripts(_cohort_scripts(), horizon=WINDOW[1])
    assert len(timelines) == 100
    # the pipeline recovers every scripted scholar intact
    assert Counter(c.global_type.value for c in classes) == Counter(truth.expected_type.values())

    out = flow_matrix(timelines, 2008, "outgoing", "ESP", 2015, top_n=10)
    assert out.n_scholars == 95
    assert out.per_year_mass == {y: {c: F(m) for c, m in row.items()} for y, row in OUT_MASS.items()}
    assert out.transitions == OUT_TRANSITIONS

    inc = flow_matrix(timelines, 2008, "incoming", "ESP", 2015, top_n=10)
    assert inc.n_scholars == 80
    assert inc.per_year_mass == {y: {c: F(m) for c, m in row.items()} for y, row in IN_MASS.items()}
    assert inc.transitions == IN_TRANSITIONS

    # returnees: arrivals in Spain whose origin was Spain outnumber first-time arrivals
    arrivals = [t for t in timelines if "ESP" in t.imputed[2015] and any("ESP" not in s for s in t.sets())]
    returned = sum(1 for t in arrivals if "ESP" in t.origin)
    assert (returned, len(arrivals) - returned) == (15, 5)
    assert inc.transitions[2013, "FRA", 2014, "ESP"] == 15

    # pooling: with two destinations kept, DEU and USA fall into OTHER
    pooled = flow_matrix(timelines, 2008, "outgoing", "ESP", 2015, top_n=2)
    assert pooled.kept == ["ESP", "FRA", "GBR"]
    assert pooled.per_year_mass[2012] == {"ESP": 50, "GBR": 20, "FRA": 15, OTHER: 10}


# -- 8 -----------------------------------------------------------------------


@pytest.mark.slow
@pytest.mark.criterion(8, "100k-publication corpus: two runs byte-identical, under 60 s")
def test_end_to_end_determinism(tmp_path):
    scripts = make_population(10_050, 2_500, seed=7)
    lines, truth = generate(scripts, seed=7)
    corpus = tmp_path / "corpus.jsonl"
    with open(corpus, "w", encoding="utf-8") as out:
        for line in lines:
            out.write(json.dumps(line) + "\n")
    assert len(lines) >= 100_000
    assert 28_000 <= len(truth.expected_type) <= 32_000

    seconds = []
    for name in ("a", "b"):
        config = RunConfig(
            input=str(corpus), out_dir=str(tmp_path / name),
            countries=["CAN", "ESP", "NLD", "USA", "ZAF"],
            flows=[FlowSpec("ESP", "outgoing"), FlowSpec("ESP", "incoming")],
            trend=TrendSpec(min_pubs=8),
        )
        t0 = time.perf_counter()
        manifest = run_pipeline(config)
        seconds.append(time.perf_counter() - t0)
        assert manifest.status == "completed"

    produced = sorted(p.name for p in (tmp_path / "a").iterdir() if p.name != "manifest.json")
    assert len(produced) >= 9
    match, mismatch, errors = filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", produced, shallow=False)
    assert mismatch == [] and errors == []
    print(f"pipeline seconds per run: {seconds[0]:.1f}, {seconds[1]:.1f}")
    assert sum(seconds) < 60.0
