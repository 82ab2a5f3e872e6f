"""Brute-force descriptor index, ranking, score-level late fusion, and the
search metrics (average precision, mean AP, N-S score).

Similarity is the inner product of unit-normalized descriptors, i.e.
cosine.  Ties in any ranking are broken by ascending id so results are
reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidInputError
from .tensor import DescriptorVector


@dataclass(frozen=True)
class DescriptorIndex:
    """n x dim matrix of unit-norm rows plus their image ids."""

    matrix: np.ndarray
    ids: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(self.ids))

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class RankedList:
    """Descending-score (id, score) pairs for one query."""

    query_id: str
    entries: tuple[tuple[str, float], ...]

    def __post_init__(self):
        entries = tuple((str(i), float(s)) for i, s in self.entries)
        scores = [s for _, s in entries]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise InvalidInputError(f"ranked list for '{self.query_id}' has increasing scores")
        ids = [i for i, _ in entries]
        if len(set(ids)) != len(ids):
            raise InvalidInputError(f"ranked list for '{self.query_id}' repeats ids")
        object.__setattr__(self, "entries", entries)

    def ranked_ids(self) -> list[str]:
        return [i for i, _ in self.entries]


@dataclass(frozen=True)
class RelevanceManifest:
    """Ground truth for search: explicit per-query relevant sets and/or a
    partition into equal-relevance groups (groups of 4 for the N-S score).

    self_match: "exclude" drops the query from its own ranking before
    scoring (Holidays style); "include" keeps it (Ukbench style, where the
    query counts toward its own top-4).
    """

    queries: tuple[tuple[str, frozenset[str]], ...] = ()
    groups: tuple[tuple[str, ...], ...] = ()
    self_match: str = "exclude"

    def __post_init__(self):
        if self.self_match not in ("exclude", "include"):
            raise InvalidInputError("self_match must be 'exclude' or 'include'")
        queries = tuple((str(q), frozenset(map(str, rel))) for q, rel in self.queries)
        for q, rel in queries:
            if not rel:
                raise InvalidInputError(f"query '{q}' has an empty relevant set")
        groups = tuple(tuple(map(str, g)) for g in self.groups)
        seen: set[str] = set()
        for g in groups:
            if seen.intersection(g):
                raise InvalidInputError("groups must partition the ids (an id repeats)")
            seen.update(g)
        object.__setattr__(self, "queries", queries)
        object.__setattr__(self, "groups", groups)
        if not queries and not groups:
            raise InvalidInputError("manifest needs queries or groups")

    def query_ids(self) -> list[str]:
        if self.queries:
            return [q for q, _ in self.queries]
        return [i for g in self.groups for i in g]

    def relevant_for(self, query_id: str) -> frozenset[str]:
        """Relevant set for one query, honoring the self-match policy."""
        if self.queries:
            rel = dict(self.queries).get(query_id)
            if rel is None:
                raise InvalidInputError(f"unknown query '{query_id}'")
        else:
            rel = next((frozenset(g) for g in self.groups if query_id in g), None)
            if rel is None:
                raise InvalidInputError(f"id '{query_id}' is in no group")
        if self.self_match == "exclude":
            rel = rel - {query_id}
            if not rel:
                raise InvalidInputError(f"query '{query_id}' has no relevant items besides itself")
        else:
            rel = rel | {query_id}
        return rel

    @classmethod
    def from_json(cls, doc: dict | str | Path) -> "RelevanceManifest":
        if isinstance(doc, (str, Path)):
            doc = json.loads(Path(doc).read_text())
        queries = tuple(
            (entry["query"], frozenset(entry["relevant"])) for entry in doc.get("queries", [])
        )
        groups = tuple(tuple(g) for g in doc.get("groups", []))
        default_policy = "include" if (groups and not queries) else "exclude"
        return cls(queries=queries, groups=groups, self_match=doc.get("self_match", default_policy))

    def to_json(self, path: str | Path | None = None) -> dict:
        doc = {
            "self_match": self.self_match,
            "queries": [{"query": q, "relevant": sorted(rel)} for q, rel in self.queries],
            "groups": [list(g) for g in self.groups],
        }
        if path is not None:
            Path(path).write_text(json.dumps(doc))
        return doc


def build_index(descs: Sequence[DescriptorVector] | np.ndarray, ids: Sequence[str]) -> DescriptorIndex:
    """Stack descriptors into an index; rows are re-normalized to unit norm
    (all-zero rows stay zero).  Duplicate ids are an error."""
    ids = [str(i) for i in ids]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise InvalidInputError(f"duplicate ids in index: {dupes}")
    if isinstance(descs, np.ndarray):
        matrix = np.array(descs, dtype=np.float64)
        if matrix.ndim != 2:
            raise InvalidInputError(f"descriptor matrix must be 2-D, got shape {matrix.shape}")
    else:
        dims = {d.dim for d in descs}
        if len(dims) > 1:
            raise InvalidInputError(f"descriptors disagree on dim: {sorted(dims)}")
        matrix = np.stack([d.values for d in descs]) if descs else np.zeros((0, 0))
    if matrix.shape[0] != len(ids):
        raise InvalidInputError(f"{matrix.shape[0]} descriptors but {len(ids)} ids")
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    matrix = matrix / np.where(norms == 0.0, 1.0, norms)
    matrix.flags.writeable = False
    return DescriptorIndex(matrix=matrix, ids=tuple(ids))


def search(query: DescriptorVector, index: DescriptorIndex, k: int,
           query_id: str = "", exclude_self: bool = False) -> RankedList:
    """Top-k database entries by descending inner product.

    Ties break by ascending id; when exclude_self is set, the entry whose id
    equals query_id is dropped before ranking.
    """
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    if query.dim != index.dim:
        raise InvalidInputError(f"query dim {query.dim} != index dim {index.dim}")
    scores = index.matrix @ query.values
    ids = np.array(index.ids)
    if exclude_self and query_id:
        keep = ids != query_id
        scores, ids = scores[keep], ids[keep]
    order = np.lexsort((ids, -scores))[:k]
    entries = tuple((str(ids[i]), float(scores[i])) for i in order)
    return RankedList(query_id=query_id, entries=entries)


def _minmax(scores: Mapping[str, float]) -> dict[str, float]:
    values = list(scores.values())
    lo, hi = min(values), max(values)
    if hi == lo:
        # Constant lists carry no order information; they contribute nothing.
        return {i: 0.0 for i in scores}
    return {i: (s - lo) / (hi - lo) for i, s in scores.items()}


def late_fuse(lists: Sequence[RankedList], weights: Sequence[float]) -> RankedList:
    """Weighted sum of per-list min-max normalized scores, re-ranked.

    Ids missing from a list score 0 in it.  Weights must be non-negative
    with positive sum; ties in the fused score break by ascending id.
    """
    if len(lists) != len(weights):
        raise InvalidInputError(f"{len(lists)} lists but {len(weights)} weights")
    if not lists:
        raise InvalidInputError("nothing to fuse")
    if any(w < 0 for w in weights):
        raise InvalidInputError("fusion weights must be non-negative")
    if not sum(weights) > 0:
        raise InvalidInputError("fusion weights must not all be zero")
    query_ids = {lst.query_id for lst in lists}
    if len(query_ids) > 1:
        raise InvalidInputError(f"lists fuse across different queries: {sorted(query_ids)}")

    fused: dict[str, float] = {}
    for lst, w in zip(lists, weights):
        if not lst.entries:
            continue
        for i, s in _minmax(dict(lst.entries)).items():
            fused[i] = fused.get(i, 0.0) + w * s
    ranked = sorted(fused.items(), key=lambda pair: (-pair[1], pair[0]))
    return RankedList(query_id=lists[0].query_id, entries=tuple(ranked))


def average_precision(ranked: RankedList, relevant: Iterable[str]) -> float:
    """AP over the full ranked list: mean over relevant items of
    precision-at-their-rank; relevant items absent from the list add 0."""
    relevant = frozenset(map(str, relevant))
    if not relevant:
        raise InvalidInputError("relevant set is empty")
    hits = 0
    total = 0.0
    for rank, (item, _) in enumerate(ranked.entries, start=1):
        if item in relevant:
            hits += 1
            total += hits / rank
    return total / len(relevant)


def mean_ap(manifest: RelevanceManifest, ranked_lists: Mapping[str, RankedList]) -> float:
    """Arithmetic mean of per-query APs (relevant sets from the manifest)."""
    aps = [
        average_precision(ranked_lists[q], manifest.relevant_for(q))
        for q in manifest.query_ids()
    ]
    if not aps:
        raise InvalidInputError("no queries to evaluate")
    return float(np.mean(aps))


def ns_score(manifest: RelevanceManifest, ranked_lists: Mapping[str, RankedList]) -> float:
    """Mean number of same-group images among each query's top 4 (max 4).

    Requires groups of exactly 4; the query counts toward its own group, so
    rankings must retain the query (self_match "include")."""
    if not manifest.groups:
        raise InvalidInputError("N-S score needs a group manifest")
    for g in manifest.groups:
        if len(g) != 4:
            raise InvalidInputError(f"N-S groups must have exactly 4 members, got {len(g)}")
    counts = []
    for g in manifest.groups:
        members = frozenset(g)
        for q in g:
            top4 = ranked_lists[q].ranked_ids()[:4]
            counts.append(len(members.intersection(top4)))
    return float(np.mean(counts))


def per_query_ap(manifest: RelevanceManifest, ranked_lists: Mapping[str, RankedList]) -> dict[str, float]:
    """AP per query id, for reports."""
    return {
        q: average_precision(ranked_lists[q], manifest.relevant_for(q))
        for q in manifest.query_ids()
    }
