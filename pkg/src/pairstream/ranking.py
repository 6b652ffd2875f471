"""Similarity ranking by node co-occurrence, and pairing policies.

A query series is ranked against every other series by counting the tree
nodes they share. Because node membership is nested along the query's
root-to-leaf path, the count for any candidate equals the length of the
common path prefix, which this module exploits: walking the path from the
leaf upward and emitting each sibling subtree yields the ranked list
already in descending-counter order without a sort.

Ties in counter value are listed in ascending symbol order. That replaces
an arbitrary pick with a deterministic one so results are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

from .dtree import DecisionTree
from .errors import ConfigError
from .feedgen import SeriesMeta

PAIR_MODES = ("best", "mutual")


@dataclass(frozen=True)
class PairPolicy:
    """How per-series rankings become pairs.

    ``best`` pairs every series with its top entry (dedup across the two
    directions); ``mutual`` keeps only reciprocal top picks. ``min_counter``
    is the minimum co-occurrence count: 2 is the floor because a count of
    1 means root-only co-membership, which every pair of series has.
    """

    mode: str = "best"
    min_counter: int = 2

    def validate(self) -> None:
        if self.mode not in PAIR_MODES:
            raise ConfigError("mode", f"must be one of {PAIR_MODES}")
        if self.min_counter < 2:
            raise ConfigError("min_counter", "must be >= 2 (1 is vacuous: the root holds everyone)")

    def to_dict(self) -> dict:
        return {"mode": self.mode, "min_counter": self.min_counter}

    @classmethod
    def from_dict(cls, d: dict) -> "PairPolicy":
        return cls(mode=str(d.get("mode", "best")), min_counter=int(d.get("min_counter", 2)))


@dataclass
class RankedList:
    """Candidates for one query, ordered by descending shared-node count,
    ties ascending lexicographic. The query itself is excluded."""

    query: str
    entries: list[tuple[str, int]]

    def top(self) -> tuple[str, int] | None:
        return self.entries[0] if self.entries else None


@dataclass(frozen=True)
class Pair:
    pair_id: int
    a: str
    b: str
    counter: int
    sector_a: str
    sector_b: str

    @property
    def same_sector(self) -> bool:
        return self.sector_a == self.sector_b

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "a": self.a,
            "b": self.b,
            "counter": self.counter,
            "sector_a": self.sector_a,
            "sector_b": self.sector_b,
            "same_sector": self.same_sector,
        }


@dataclass
class PairSet:
    pairs: list[Pair]

    def __iter__(self) -> Iterator[Pair]:
        return iter(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def keys(self) -> set[tuple[str, str]]:
        return {(p.a, p.b) for p in self.pairs}


def rank_similar(tree: DecisionTree, query: str) -> RankedList:
    """Rank all other series by the number of nodes shared with ``query``.

    Walks the query's path leaf-to-root; members first seen at depth d
    share exactly d+1 nodes with the query. Raises NotFoundError for a
    symbol outside the tree.
    """
    path = tree.node_membership(query)
    entries: list[tuple[str, int]] = []
    leaf = tree.nodes[path[-1]]
    counter = len(path)
    entries.extend((s, counter) for s in leaf.members if s != query)
    for depth_idx in range(len(path) - 2, -1, -1):
        node = tree.nodes[path[depth_idx]]
        on_path = path[depth_idx + 1]
        left, right = node.children  # type: ignore[misc]
        sibling = tree.nodes[right if on_path == left else left]
        counter = depth_idx + 1
        entries.extend((s, counter) for s in sibling.members)
    return RankedList(query, entries)


def rank_all(tree: DecisionTree) -> Iterator[RankedList]:
    """One RankedList per series in the tree, built lazily."""
    return (rank_similar(tree, s) for s in tree.root.members)


def _top_entries_from_leaves(tree: DecisionTree) -> dict[str, tuple[str, int]]:
    """Top-ranked partner per series without building full rankings.

    A series' maximum counter is its path length, achieved exactly by its
    leaf co-members, so the top entry is the lexicographically smallest
    other member of its leaf. Equivalent to rank_similar(s).top() for
    every s; the equivalence is covered by tests.
    """
    tops: dict[str, tuple[str, int]] = {}
    for leaf in tree.leaves():
        counter = leaf.depth + 1
        members = leaf.members
        for s in members:
            partner = members[1] if s == members[0] else members[0]
            tops[s] = (partner, counter)
    return tops


def _sector_map(metadata: Mapping[str, str] | Sequence[SeriesMeta]) -> Mapping[str, str]:
    if isinstance(metadata, Mapping):
        return metadata
    return {m.symbol: m.sector for m in metadata}


def _pairs_from_tops(tops: Mapping[str, tuple[str, int]], policy: PairPolicy,
                     sectors: Mapping[str, str], same_sector_only: bool) -> PairSet:
    chosen: dict[tuple[str, str], int] = {}
    if policy.mode == "best":
        for s, (partner, counter) in tops.items():
            if counter >= policy.min_counter:
                key = (s, partner) if s < partner else (partner, s)
                chosen.setdefault(key, counter)
    else:
        for s, (partner, counter) in tops.items():
            if counter < policy.min_counter or not s < partner:
                continue
            back = tops.get(partner)
            if back is not None and back[0] == s:
                chosen[(s, partner)] = counter
    pairs: list[Pair] = []
    for a, b in sorted(chosen):
        sector_a, sector_b = sectors[a], sectors[b]
        if same_sector_only and sector_a != sector_b:
            continue
        pairs.append(Pair(
            pair_id=len(pairs) + 1,
            a=a, b=b,
            counter=chosen[(a, b)],
            sector_a=sector_a, sector_b=sector_b,
        ))
    return PairSet(pairs)


def form_pairs(rankings: Iterable[RankedList], policy: PairPolicy,
               metadata: Mapping[str, str] | Sequence[SeriesMeta],
               same_sector_only: bool = False) -> PairSet:
    """Turn per-series rankings into an unordered pair set.

    Consumes only each ranking's top entry, so ``rankings`` may be a lazy
    iterable. The result is sorted by (a, b) and independent of input
    order; pair ids are assigned after sorting.
    """
    policy.validate()
    tops: dict[str, tuple[str, int]] = {}
    for ranked in rankings:
        top = ranked.top()
        if top is not None:
            tops[ranked.query] = top
    return _pairs_from_tops(tops, policy, _sector_map(metadata), same_sector_only)


def discover_pairs(tree: DecisionTree, metadata: Mapping[str, str] | Sequence[SeriesMeta],
                   policy: PairPolicy, same_sector_only: bool = False) -> PairSet:
    """form_pairs over every series' ranking, computed the fast way
    (straight from leaf membership instead of full path walks)."""
    policy.validate()
    tops = _top_entries_from_leaves(tree)
    return _pairs_from_tops(tops, policy, _sector_map(metadata), same_sector_only)
