"""Author name disambiguation by blocking and rule-based pairwise scoring.

Mentions are blocked on (surname, first initial). Within a block every pair
of mentions from different publications is scored with four families of
rules: author (email, full given name), article (co-authors, institutions,
countries), publication (venue) and citation (direct citation, shared
references). Pairs at or above the threshold are linked by single linkage,
subject to two merge vetoes that keep clusters conservative:

* a cluster never holds two different full given names ("matias" and
  "marta" stay apart even if an initials-only mention bridges them);
* a cluster never holds two mentions from the same publication.

Edges are applied strongest first, so the clusters obtained at a higher
threshold are always the intermediate state of the lower-threshold run.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .ingest import AuthorMention, NameKey, PublicationRecord

__all__ = [
    "MentionContext",
    "Scholar",
    "ScoringWeights",
    "block_mentions",
    "cluster_block",
    "disambiguate",
    "mention_contexts",
    "read_scholars",
    "scholar_id_for",
    "scholars_from_mapping",
    "score_pair",
    "write_scholars",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScoringWeights:
    w_email: float = 100.0
    w_full_given_match: float = 10.0
    w_shared_coauthor: float = 3.0
    shared_coauthor_cap: float = 9.0
    w_shared_institution: float = 4.0
    w_shared_country: float = 1.0
    w_same_venue: float = 2.0
    w_citation_link: float = 8.0
    w_shared_reference: float = 2.0
    shared_reference_cap: float = 8.0
    threshold: float = 10.0
    block_cap: int = 5000
    neighborhood_window: int = 50

    def __post_init__(self) -> None:
        for name, value in asdict(self).items():
            if name in ("block_cap", "neighborhood_window"):
                if value < 1:
                    raise ValueError(f"{name} must be >= 1")
                continue
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {value}")
        if self.threshold <= 0:
            raise ValueError(f"threshold must be > 0, got {self.threshold}")

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> ScoringWeights:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown weight fields: {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)


@dataclass(slots=True)
class MentionContext:
    """A mention together with the publication-level fields scoring needs."""

    mention_id: str
    pub_id: str
    year: int
    key: NameKey
    full_given: str | None
    given_head: str | None
    email: str | None
    coauthors: frozenset
    institutions: frozenset
    countries: frozenset
    venue_id: str | None
    references: frozenset

    @classmethod
    def build(cls, mention: AuthorMention, record: PublicationRecord) -> MentionContext:
        full = mention.full_given
        return cls(
            mention_id=mention.mention_id,
            pub_id=record.pub_id,
            year=record.year,
            key=mention.name_key,
            full_given=full,
            given_head=full.split(" ", 1)[0] if full else None,
            email=mention.email,
            coauthors=mention.coauthor_keys,
            institutions=frozenset(mention.institutions),
            countries=mention.countries,
            venue_id=record.venue_id,
            references=frozenset(record.references),
        )


@dataclass
class Scholar:
    scholar_id: str
    mention_ids: list[str]
    pubs_by_year: dict[int, list[str]] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "scholar_id": self.scholar_id,
            "mention_ids": self.mention_ids,
            "pubs_by_year": {str(y): p for y, p in sorted(self.pubs_by_year.items())},
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> Scholar:
        return cls(
            scholar_id=obj["scholar_id"],
            mention_ids=list(obj["mention_ids"]),
            pubs_by_year={int(y): list(p) for y, p in obj.get("pubs_by_year", {}).items()},
        )


def mention_contexts(records: Iterable[PublicationRecord]) -> list[MentionContext]:
    return [MentionContext.build(m, r) for r in records for m in r.mentions]


def block_mentions(mentions: Iterable[AuthorMention | MentionContext]) -> dict[NameKey, list[str]]:
    """Group mention ids by (surname, first initial), preserving input order."""
    blocks: dict[NameKey, list[str]] = {}
    for m in mentions:
        key = m.key if isinstance(m, MentionContext) else m.name_key
        blocks.setdefault(key, []).append(m.mention_id)
    return blocks


def _contradictory(a: MentionContext, b: MentionContext) -> bool:
    return a.given_head is not None and b.given_head is not None and a.given_head != b.given_head


def score_pair(a: MentionContext, b: MentionContext, w: ScoringWeights = ScoringWeights()) -> float:
    """Sum of fired rules; 0 when the full given names contradict."""
    if _contradictory(a, b):
        return 0.0
    score = 0.0
    # author level
    if a.email and a.email == b.email:
        score += w.w_email
    if a.full_given and a.full_given == b.full_given:
        score += w.w_full_given_match
    # article level
    if a.coauthors and b.coauthors:
        shared = len(a.coauthors & b.coauthors)
        if shared:
            score += min(shared * w.w_shared_coauthor, w.shared_coauthor_cap)
    if a.institutions and not a.institutions.isdisjoint(b.institutions):
        score += w.w_shared_institution
    if a.countries and not a.countries.isdisjoint(b.countries):
        score += w.w_shared_country
    # publication level
    if a.venue_id and a.venue_id == b.venue_id:
        score += w.w_same_venue
    # citation level
    if a.pub_id in b.references or b.pub_id in a.references:
        score += w.w_citation_link
    if a.references and b.references:
        shared = len(a.references & b.references)
        if shared:
            score += min(shared * w.w_shared_reference, w.shared_reference_cap)
    return score


def scholar_id_for(mention_ids: Iterable[str]) -> str:
    digest = hashlib.sha1("\n".join(sorted(mention_ids)).encode("utf-8")).hexdigest()
    return "S" + digest[:16]


def _candidate_pairs(block: Sequence[MentionContext], w: ScoringWeights):
    n = len(block)
    if n <= w.block_cap:
        for i in range(n):
            for j in range(i + 1, n):
                yield i, j
        return
    # sorted-neighborhood pass for oversized blocks
    log.info("block %s has %d mentions; using sorted-neighborhood window %d",
             block[0].key, n, w.neighborhood_window)
    order = sorted(range(n), key=lambda i: (block[i].full_given or "", block[i].email or "",
                                            block[i].venue_id or "", block[i].mention_id))
    seen = set()
    for pos, i in enumerate(order):
        for j in order[pos + 1: pos + 1 + w.neighborhood_window]:
            pair = (i, j) if i < j else (j, i)
            if pair not in seen:
                seen.add(pair)
                yield pair


class _Components:
    """Union-find that carries the state needed for the merge vetoes."""

    def __init__(self, block: Sequence[MentionContext]) -> None:
        self.parent = list(range(len(block)))
        self.heads = [{m.given_head} if m.given_head else set() for m in block]
        self.pubs = [{m.pub_id} for m in block]

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int) -> bool:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return True
        if len(self.heads[rx] | self.heads[ry]) > 1 or not self.pubs[rx].isdisjoint(self.pubs[ry]):
            return False
        if rx > ry:
            rx, ry = ry, rx
        self.parent[ry] = rx
        self.heads[rx] |= self.heads[ry]
        self.pubs[rx] |= self.pubs[ry]
        self.heads[ry] = self.pubs[ry] = set()
        return True


def _make_scholar(members: list[MentionContext]) -> Scholar:
    ids = sorted(m.mention_id for m in members)
    by_year: dict[int, set[str]] = defaultdict(set)
    for m in members:
        by_year[m.year].add(m.pub_id)
    return Scholar(scholar_id_for(ids), ids, {y: sorted(p) for y, p in sorted(by_year.items())})


def cluster_block(block: Sequence[MentionContext], w: ScoringWeights = ScoringWeights()) -> list[Scholar]:
    """Cluster one block; scholars come out ordered by their smallest mention id."""
    edges = []
    threshold = w.threshold
    for i, j in _candidate_pairs(block, w):
        a, b = block[i], block[j]
        if a.pub_id == b.pub_id:
            continue
        s = score_pair(a, b, w)
        if s >= threshold and not _contradictory(a, b):
            edges.append((-s, i, j))
    edges.sort()
    comps = _Components(block)
    for _, i, j in edges:
        comps.union(i, j)
    groups: dict[int, list[MentionContext]] = defaultdict(list)
    for i, m in enumerate(block):
        groups[comps.find(i)].append(m)
    scholars = [_make_scholar(g) for g in groups.values()]
    scholars.sort(key=lambda s: s.mention_ids[0])
    return scholars


def _cluster_many(args) -> list[list[Scholar]]:
    blocks, w = args
    return [cluster_block(b, w) for b in blocks]


def disambiguate(records: Sequence[PublicationRecord], w: ScoringWeights = ScoringWeights(),
                 threads: int = 1) -> list[Scholar]:
    """Partition every mention in *records* into scholars.

    Blocks are processed in sorted key order and, with ``threads > 1``,
    farmed out to worker processes; the result does not depend on the
    number of workers.
    """
    grouped: dict[NameKey, list[MentionContext]] = defaultdict(list)
    for ctx in mention_contexts(records):
        grouped[ctx.key].append(ctx)
    blocks = [grouped[k] for k in sorted(grouped)]
    if threads <= 1 or len(blocks) < 2 * threads:
        return [s for b in blocks for s in cluster_block(b, w)]
    # contiguous chunks so concatenation preserves key order
    size = math.ceil(len(blocks) / (threads * 4))
    chunks = [(blocks[i:i + size], w) for i in range(0, len(blocks), size)]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return [s for part in pool.map(_cluster_many, chunks) for b in part for s in b]


def scholars_from_mapping(records: Sequence[PublicationRecord], mapping: Mapping[str, str]) -> list[Scholar]:
    """Build scholars from a precomputed mention → scholar id mapping.

    Mentions missing from the mapping become singleton scholars.
    """
    members: dict[str, list[MentionContext]] = defaultdict(list)
    singletons: list[MentionContext] = []
    for ctx in mention_contexts(records):
        sid = mapping.get(ctx.mention_id)
        if sid is None:
            singletons.append(ctx)
        else:
            members[sid].append(ctx)
    scholars = []
    for sid, group in members.items():
        scholar = _make_scholar(group)
        scholar.scholar_id = sid
        scholars.append(scholar)
    scholars.extend(_make_scholar([ctx]) for ctx in singletons)
    scholars.sort(key=lambda s: s.mention_ids[0])
    return scholars


def read_precluster(path: str | Path) -> dict[str, str]:
    mapping = {}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                obj = json.loads(line)
                mapping[str(obj["mention_id"])] = str(obj["scholar_id"])
    return mapping


def write_scholars(scholars: Iterable[Scholar], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as out:
        for s in scholars:
            out.write(json.dumps(s.to_json(), separators=(",", ":")))
            out.write("\n")
            n += 1
    return n


def read_scholars(path: str | Path) -> list[Scholar]:
    with open(path, encoding="utf-8") as handle:
        return [Scholar.from_json(json.loads(line)) for line in handle if line.strip()]
