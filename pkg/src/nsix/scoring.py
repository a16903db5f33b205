"""Scoring kernels: every method reduces to shared-feature accumulation.

Inner product is what an inverted index computes natively. The other
methods become a single posting-list pass by leaning on statistics stored
at index time:

* cosine: the stored ``c = s / ||y||`` values make ``sum(x_i * c_i)``
  proportional to exact cosine for a fixed query, so rankings agree.
* Manhattan: ``||x - y||_1 = ||x||_1 + ||y||_1 + sum_shared(|x_i - y_i|
  - x_i - y_i)``; only shared features contribute correction terms.
* Euclidean: ``||x - y||^2 = ||x||^2 - 2*dot(x, y) + ||y||^2``; dropping
  the query-constant ``||x||^2`` and negating yields a higher-is-better
  value that ranks identically to ascending exact distance.

Distances are converted to higher-is-better scores so that every method
shares one orientation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import ZeroVectorError
from .vectors import SparseVector, l2_norm

# Row order used in reports; extra methods are appended after these.
METHOD_ORDER = ("dot", "l1", "l2", "cos", "dot+cos")

_KNOWN_METHODS = ("dot", "l1", "l2", "cos", "cos-exact", "dot+cos")

# Tight upper bound on the Manhattan distance of two nonnegative vectors
# whose weights each sum to at most 1 (softmax mass).
MANHATTAN_SCORE_BASE = 2.0


@dataclass(frozen=True)
class ScoringMethod:
    """A method selector: one of dot, l1, l2, cos, cos-exact, dot+cos.

    ``cos`` scores against the indexed unit-vector weights; ``cos-exact``
    recomputes cosine from raw weights and both norms. ``dot+cos``
    retrieves a dot-product window of ``k_rerank`` candidates and re-sorts
    it by exact cosine.
    """

    name: str
    k_rerank: int = 100

    def __post_init__(self) -> None:
        if self.name not in _KNOWN_METHODS:
            raise ValueError(f"unknown scoring method {self.name!r}, expected one of {_KNOWN_METHODS}")
        if self.k_rerank < 1:
            raise ValueError(f"k_rerank must be >= 1, got {self.k_rerank}")

    @classmethod
    def parse(cls, token: str, k_rerank: int = 100) -> "ScoringMethod":
        return cls(name=token.strip().lower(), k_rerank=k_rerank)

    @property
    def is_rerank(self) -> bool:
        return self.name == "dot+cos"

    @property
    def needs_doc_norms(self) -> bool:
        return self.name in ("l1", "l2", "cos-exact")

    def label(self) -> str:
        return self.name


DOT = ScoringMethod("dot")
MANHATTAN = ScoringMethod("l1")
EUCLID = ScoringMethod("l2")
COSINE_INDEXED = ScoringMethod("cos")
COSINE_EXACT = ScoringMethod("cos-exact")


def dot_then_cos(k_rerank: int = 100) -> ScoringMethod:
    return ScoringMethod("dot+cos", k_rerank=k_rerank)


def score_dot(x: SparseVector, y: SparseVector) -> float:
    """Inner product over shared features; 0.0 for disjoint supports."""
    if len(x) > len(y):
        x, y = y, x
    return sum(w * y.get(fid) for fid, w in x)


def score_cosine_exact(x: SparseVector, y: SparseVector) -> float:
    """dot(x, y) / (||x|| * ||y||); in [0, 1] for nonnegative vectors."""
    nx = l2_norm(x)
    ny = l2_norm(y)
    if nx <= 0.0 or ny <= 0.0:
        raise ZeroVectorError("cosine is undefined for a zero vector")
    return score_dot(x, y) / (nx * ny)


def score_cosine_indexed(x: SparseVector, posting_c: Mapping[str, float]) -> float:
    """sum(x_i * c_i) over shared features.

    With ``c`` the indexed unit-vector weights this equals
    ``cos(x, y) * ||x||``, so for a fixed query it ranks documents exactly
    like exact cosine.
    """
    return sum(w * posting_c[fid] for fid, w in x if fid in posting_c)


def manhattan_distance(
    x: SparseVector,
    y_shared: Mapping[str, float],
    y_l1: float,
    x_l1: float,
) -> float:
    """||x - y||_1 from shared-feature weights and the two L1 norms.

    ``y_shared`` maps each shared feature to the document's raw weight;
    ``y_l1`` must be the L1 norm of the full document vector.
    """
    correction = sum(
        abs(w - y_shared[fid]) - w - y_shared[fid] for fid, w in x if fid in y_shared
    )
    return x_l1 + y_l1 + correction


def euclid_rank_score(dot_xy: float, y_l2_squared: float) -> float:
    """Higher-is-better Euclidean surrogate: ``2*dot(x, y) - ||y||^2``.

    Equals ``-(||x - y||^2 - ||x||^2)``; since ``||x||^2`` is constant for
    a fixed query, sorting by this value descending matches sorting by
    exact Euclidean distance ascending.
    """
    return 2.0 * dot_xy - y_l2_squared


def distance_to_score(d: float) -> float:
    """Complement of a Manhattan distance: ``2 - d``.

    Strictly decreasing on [0, 2], the full range for vectors whose masses
    respect the softmax bound; the floor at 0 can only engage when an
    input's mass exceeds 1.
    """
    return max(0.0, MANHATTAN_SCORE_BASE - d)


def rerank_by_exact_cosine(
    query: SparseVector,
    candidates: Sequence[tuple[int, SparseVector]],
    k_rerank: int,
) -> list[tuple[int, float]]:
    """Re-score the top ``k_rerank`` dot-product candidates with exact cosine.

    ``candidates`` must already be ranked by dot product descending; the
    returned list contains only the reranked window, so a correct answer
    that fell outside the window stays lost.
    """
    if k_rerank < 1:
        raise ValueError(f"k_rerank must be >= 1, got {k_rerank}")
    window = candidates[: min(k_rerank, len(candidates))]
    rescored = [(doc_id, score_cosine_exact(query, vec)) for doc_id, vec in window]
    rescored.sort(key=lambda item: (-item[1], item[0]))
    return rescored


def exact_euclid_distance(rank_score: float, x_l2_squared: float) -> float:
    """Recover the metric distance from a rank score for display."""
    return math.sqrt(max(0.0, x_l2_squared - rank_score))
