"""Query execution: candidate generation, one-pass accumulation, top-k.

Accumulation is term-at-a-time over the query's posting lists into a
dict keyed by doc_id, followed by per-candidate norm adjustments for the
distance methods, then a bounded top-k selection. Scores are compared
exactly and ties broken by ascending doc_id, so identical index and query
always produce identical hit lists.

Two candidate modes:

* ``exhaustive`` (default) scores every document, the moral equivalent of
  a match-all query with a scripted score.
* ``posting`` scores only documents sharing at least one query feature.
  For dot and cos this changes nothing among documents with nonzero
  score; for l1 and l2 it silently skips documents whose distance is
  still well defined, so forcing it there emits a RuntimeWarning.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from heapq import nsmallest

from .errors import EmptyIndexError, UnknownDocumentError, ZeroVectorError
from .index import InvertedIndex
from .scoring import (
    MANHATTAN_SCORE_BASE,
    ScoringMethod,
    distance_to_score,
    euclid_rank_score,
    rerank_by_exact_cosine,
)
from .vectors import SparseVector, compute_norms, truncate_top_m

CANDIDATE_MODES = ("exhaustive", "posting")


@dataclass(frozen=True)
class QuerySpec:
    """One search request.

    ``feature_number`` truncates the query to its strongest components
    before anything else happens, trading recall for fewer posting-list
    traversals.
    """

    vector: SparseVector
    method: ScoringMethod
    top_k: int = 100
    feature_number: int | None = None
    candidate_mode: str = "exhaustive"

    def __post_init__(self) -> None:
        if self.top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {self.top_k}")
        if self.feature_number is not None and self.feature_number < 1:
            raise ValueError(f"feature_number must be >= 1, got {self.feature_number}")
        if self.candidate_mode not in CANDIDATE_MODES:
            raise ValueError(
                f"candidate_mode must be one of {CANDIDATE_MODES}, got {self.candidate_mode!r}"
            )


@dataclass(frozen=True)
class SearchHit:
    doc_id: int
    file_name: str
    score: float


@dataclass
class SearchStats:
    """Instrumentation for one search call.

    ``accumulator_updates`` counts posting entries folded into the score
    accumulator; in posting mode it equals the summed length of the
    traversed posting lists, which is the mechanism behind latency growing
    with query feature count.
    """

    accumulator_updates: int = 0
    candidates_scored: int = 0
    reranked: int = 0


@dataclass(frozen=True)
class ScoreBreakdown:
    """Additive explanation of one document's score.

    ``score == sum(feature_terms.values()) + sum(base_terms.values())``
    within float tolerance.
    """

    method: str
    doc_id: int
    file_name: str
    feature_terms: dict[str, float] = field(default_factory=dict)
    base_terms: dict[str, float] = field(default_factory=dict)
    score: float = 0.0


def _effective_query(q: QuerySpec) -> SparseVector:
    vector = q.vector
    if q.feature_number is not None:
        vector = truncate_top_m(vector, q.feature_number)
    if not vector.has_positive_weight():
        raise ZeroVectorError("query has no positive weight after truncation")
    return vector


def _accumulate(
    idx: InvertedIndex, query: SparseVector, method_name: str, stats: SearchStats
) -> dict[int, float]:
    """Term-at-a-time pass over the query's posting lists."""
    acc: dict[int, float] = {}
    get = acc.get
    for fid, x_w in query:
        plist = idx.postings.get(fid)
        if not plist:
            continue
        if method_name == "cos":
            for p in plist:
                acc[p.doc_id] = get(p.doc_id, 0.0) + x_w * p.c
        elif method_name == "l1":
            for p in plist:
                acc[p.doc_id] = get(p.doc_id, 0.0) + (abs(x_w - p.s) - x_w - p.s)
        else:  # dot, l2, cos-exact all accumulate the raw inner product
            for p in plist:
                acc[p.doc_id] = get(p.doc_id, 0.0) + x_w * p.s
        stats.accumulator_updates += len(plist)
    return acc


def _finalize(
    idx: InvertedIndex,
    acc: dict[int, float],
    method_name: str,
    x_l1: float,
    x_l2: float,
    exhaustive: bool,
) -> list[tuple[int, float]]:
    """Apply per-candidate norm adjustments and produce (doc_id, score) pairs."""
    doc_ids = range(idx.doc_count) if exhaustive else acc.keys()
    scored: list[tuple[int, float]] = []
    if method_name in ("dot", "cos"):
        for doc_id in doc_ids:
            scored.append((doc_id, acc.get(doc_id, 0.0)))
    elif method_name == "cos-exact":
        for doc_id in doc_ids:
            denom = x_l2 * idx.documents[doc_id].norms.l2
            scored.append((doc_id, acc.get(doc_id, 0.0) / denom))
    elif method_name == "l1":
        for doc_id in doc_ids:
            d = x_l1 + idx.documents[doc_id].norms.l1 + acc.get(doc_id, 0.0)
            scored.append((doc_id, distance_to_score(d)))
    elif method_name == "l2":
        for doc_id in doc_ids:
            scored.append(
                (doc_id, euclid_rank_score(acc.get(doc_id, 0.0), idx.documents[doc_id].norms.l2_squared))
            )
    else:
        raise ValueError(f"no finalizer for method {method_name!r}")
    return scored


def _select_top_k(idx: InvertedIndex, scored: list[tuple[int, float]], k: int) -> list[SearchHit]:
    best = nsmallest(k, scored, key=lambda item: (-item[1], item[0]))
    return [SearchHit(doc_id=d, file_name=idx.documents[d].file_name, score=s) for d, s in best]


def search_with_stats(idx: InvertedIndex, q: QuerySpec) -> tuple[list[SearchHit], SearchStats]:
    """Run a search and report instrumentation alongside the hits."""
    if idx.doc_count == 0:
        raise EmptyIndexError("cannot search an empty index")
    query = _effective_query(q)
    stats = SearchStats()

    if q.method.is_rerank:
        dot_spec = replace(q, method=ScoringMethod("dot"), top_k=q.method.k_rerank)
        dot_hits, stats = search_with_stats(idx, dot_spec)
        candidates = [(h.doc_id, idx.documents[h.doc_id].features) for h in dot_hits]
        rescored = rerank_by_exact_cosine(query, candidates, q.method.k_rerank)
        stats.reranked = len(rescored)
        hits = [
            SearchHit(doc_id=d, file_name=idx.documents[d].file_name, score=s)
            for d, s in rescored[: q.top_k]
        ]
        return hits, stats

    exhaustive = q.candidate_mode == "exhaustive"
    if not exhaustive and q.method.name in ("l1", "l2"):
        warnings.warn(
            f"posting mode with method {q.method.name!r} skips documents that share no "
            "feature with the query even though their distances are well defined",
            RuntimeWarning,
            stacklevel=2,
        )

    norms = compute_norms(query)
    acc = _accumulate(idx, query, q.method.name, stats)
    scored = _finalize(idx, acc, q.method.name, norms.l1, norms.l2, exhaustive)
    stats.candidates_scored = len(scored)
    return _select_top_k(idx, scored, q.top_k), stats


def search(idx: InvertedIndex, q: QuerySpec) -> list[SearchHit]:
    """Top-k hits sorted by score descending, doc_id ascending."""
    hits, _ = search_with_stats(idx, q)
    return hits


def explain(idx: InvertedIndex, q: QuerySpec, doc_id: int) -> ScoreBreakdown:
    """Break one document's score into additive per-feature and norm terms.

    A dot+cos query is explained through exact cosine, the function that
    produced its final score.
    """
    if idx.doc_count == 0:
        raise EmptyIndexError("cannot explain against an empty index")
    if not 0 <= doc_id < idx.doc_count:
        raise UnknownDocumentError(f"doc_id {doc_id} not in index of {idx.doc_count} documents")
    query = _effective_query(q)
    doc = idx.documents[doc_id]
    method_name = "cos-exact" if q.method.is_rerank else q.method.name
    q_norms = compute_norms(query)

    feature_terms: dict[str, float] = {}
    base_terms: dict[str, float] = {}

    if method_name == "dot":
        for fid, x_w in query:
            y_w = doc.features.get(fid)
            if y_w > 0.0:
                feature_terms[fid] = x_w * y_w
    elif method_name == "cos":
        for fid, x_w in query:
            y_w = doc.features.get(fid)
            if y_w > 0.0:
                feature_terms[fid] = x_w * (y_w / doc.norms.l2)
    elif method_name == "cos-exact":
        denom = q_norms.l2 * doc.norms.l2
        for fid, x_w in query:
            y_w = doc.features.get(fid)
            if y_w > 0.0:
                feature_terms[fid] = x_w * y_w / denom
    elif method_name == "l1":
        base_terms["complement_base"] = MANHATTAN_SCORE_BASE
        base_terms["query_l1"] = -q_norms.l1
        base_terms["doc_l1"] = -doc.norms.l1
        for fid, x_w in query:
            y_w = doc.features.get(fid)
            if y_w > 0.0:
                feature_terms[fid] = x_w + y_w - abs(x_w - y_w)
        total = sum(base_terms.values()) + sum(feature_terms.values())
        if total < 0.0:
            base_terms["clamp"] = -total
    elif method_name == "l2":
        base_terms["doc_l2_squared"] = -doc.norms.l2_squared
        for fid, x_w in query:
            y_w = doc.features.get(fid)
            if y_w > 0.0:
                feature_terms[fid] = 2.0 * x_w * y_w
    else:
        raise ValueError(f"cannot explain method {method_name!r}")

    score = sum(base_terms.values()) + sum(feature_terms.values())
    return ScoreBreakdown(
        method=method_name,
        doc_id=doc_id,
        file_name=doc.file_name,
        feature_terms=feature_terms,
        base_terms=base_terms,
        score=score,
    )
