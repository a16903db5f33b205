"""Sparse feature vectors and the norm arithmetic the index relies on.

A vector is an ordered list of ``(feature_id, weight)`` pairs. Feature ids
are short string tokens (WordNet synset ids such as ``"n02123045"`` in the
image-retrieval setting) compared by exact byte equality and ordered
lexicographically. Weights are nonnegative finite floats, typically the
strongest components of a classifier's softmax output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

from .errors import ZeroVectorError


@dataclass(frozen=True)
class SparseVector:
    """Immutable sparse vector with entries sorted by feature id.

    Canonical id order (rather than weight order) keeps set-union and
    shared-feature traversals linear merges.
    """

    entries: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        prev = None
        for fid, weight in self.entries:
            if not fid:
                raise ValueError("feature id must be a non-empty string")
            if prev is not None and fid <= prev:
                raise ValueError(
                    f"entries must be strictly sorted by feature id, got {fid!r} after {prev!r}"
                )
            if not math.isfinite(weight):
                raise ValueError(f"weight for {fid!r} is not finite: {weight!r}")
            if weight < 0:
                raise ValueError(f"weight for {fid!r} is negative: {weight!r}")
            prev = fid

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, float]]) -> "SparseVector":
        """Build from (id, weight) pairs in any order. Duplicate ids are rejected."""
        items = sorted((str(fid), float(w)) for fid, w in pairs)
        for (a, _), (b, _) in zip(items, items[1:]):
            if a == b:
                raise ValueError(f"duplicate feature id {a!r}")
        return cls(tuple(items))

    @classmethod
    def from_dict(cls, mapping: Mapping[str, float]) -> "SparseVector":
        return cls(tuple(sorted((str(k), float(v)) for k, v in mapping.items())))

    def to_dict(self) -> dict[str, float]:
        return dict(self.entries)

    def _find(self, fid: str) -> int:
        lo, hi = 0, len(self.entries)
        while lo < hi:
            mid = (lo + hi) // 2
            if self.entries[mid][0] < fid:
                lo = mid + 1
            else:
                hi = mid
        return lo

    def get(self, fid: str, default: float = 0.0) -> float:
        pos = self._find(fid)
        if pos < len(self.entries) and self.entries[pos][0] == fid:
            return self.entries[pos][1]
        return default

    def ids(self) -> tuple[str, ...]:
        return tuple(fid for fid, _ in self.entries)

    def has_positive_weight(self) -> bool:
        return any(w > 0 for _, w in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[tuple[str, float]]:
        return iter(self.entries)

    def __contains__(self, fid: object) -> bool:
        if not isinstance(fid, str):
            return False
        pos = self._find(fid)
        return pos < len(self.entries) and self.entries[pos][0] == fid


EMPTY_VECTOR = SparseVector(())


@dataclass(frozen=True)
class VectorNorms:
    """Per-vector norm statistics cached at index time.

    ``l2_squared`` is stored alongside ``l2`` because the Euclidean rank
    score consumes the square directly; ``l1`` feeds the Manhattan
    shared-feature decomposition.
    """

    l1: float
    l2: float
    l2_squared: float


def l2_norm(v: SparseVector) -> float:
    """Euclidean norm; 0.0 for the empty vector."""
    return math.sqrt(sum(w * w for _, w in v.entries))


def l1_norm(v: SparseVector) -> float:
    """Sum of weights (all weights are nonnegative); 0.0 for the empty vector."""
    return sum(w for _, w in v.entries)


def compute_norms(v: SparseVector) -> VectorNorms:
    sq = sum(w * w for _, w in v.entries)
    return VectorNorms(l1=sum(w for _, w in v.entries), l2=math.sqrt(sq), l2_squared=sq)


def normalize_l2(v: SparseVector) -> SparseVector:
    """Scale to unit Euclidean length.

    Raises ZeroVectorError when the vector has no positive weight, which
    marks a document as unindexable.
    """
    norm = l2_norm(v)
    if norm <= 0.0:
        raise ZeroVectorError("cannot normalize a vector with no positive weight")
    return SparseVector(tuple((fid, w / norm) for fid, w in v.entries))


def truncate_top_m(v: SparseVector, m: int) -> SparseVector:
    """Keep the m largest-weight entries, re-sorted by feature id.

    Ties on weight keep the lexicographically smaller id, so truncation is
    deterministic and evaluation runs are reproducible.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if m >= len(v.entries):
        return v
    strongest = sorted(v.entries, key=lambda e: (-e[1], e[0]))[:m]
    return SparseVector(tuple(sorted(strongest)))
