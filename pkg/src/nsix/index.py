"""Inverted index and document store with per-feature norm statistics.

Each indexed document keeps its raw sparse vector and cached L1/L2 norms.
Each posting carries three statistics per feature: the raw weight ``s``,
the L2-normalized weight ``c = s / ||y||``, and the square ``ss = s**2``.
Precomputing them at index time lets every scoring method run as a single
inner-product-style pass over posting lists at search time.

Ingestion format (JSON Lines), one document per line::

    {"f": "<file name>", "s": {"<feature id>": {"w": "<word>", "s": <score>}, ...}}

``w`` is an optional human-readable label. ``c`` and ``ss`` are always
computed at ingestion, never read from input. Weights of an ingested
vector must be nonnegative and sum to at most 1 + 1e-6 (softmax mass).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, NamedTuple, TextIO

from .errors import DuplicateFileError, FormatError, ZeroVectorError
from .vectors import SparseVector, VectorNorms, compute_norms, truncate_top_m

INGEST_MASS_TOLERANCE = 1e-6


class Posting(NamedTuple):
    doc_id: int
    s: float
    c: float
    ss: float


@dataclass(frozen=True)
class DocumentRecord:
    doc_id: int
    file_name: str
    features: SparseVector
    norms: VectorNorms
    labels: dict[str, str] | None = None


@dataclass(frozen=True)
class IndexStats:
    doc_count: int
    feature_count: int
    posting_count: int
    mean_postings_per_doc: float

    def to_dict(self) -> dict[str, float | int]:
        return {
            "doc_count": self.doc_count,
            "feature_count": self.feature_count,
            "posting_count": self.posting_count,
            "mean_postings_per_doc": self.mean_postings_per_doc,
        }


@dataclass
class InvertedIndex:
    """Append-only inverted index: build once, then search concurrently.

    Posting lists stay strictly sorted by doc_id because doc_ids are
    assigned in insertion order; every tie-break downstream refers to
    doc_id, which makes runs reproducible for a fixed ingestion order.
    """

    documents: list[DocumentRecord] = field(default_factory=list)
    postings: dict[str, list[Posting]] = field(default_factory=dict)
    _file_names: dict[str, int] = field(default_factory=dict)

    @property
    def doc_count(self) -> int:
        return len(self.documents)

    def add_document(
        self,
        file_name: str,
        features: SparseVector,
        labels: Mapping[str, str] | None = None,
    ) -> int:
        """Store a document and append one posting per nonzero feature.

        Zero-weight entries are dropped so posting lists and the stored
        vector describe exactly the same support.
        """
        if file_name in self._file_names:
            raise DuplicateFileError(f"file name already indexed: {file_name!r}")
        positive = SparseVector(tuple((f, w) for f, w in features if w > 0.0))
        if len(positive) == 0:
            raise ZeroVectorError(f"document {file_name!r} has no positive feature weight")

        doc_id = len(self.documents)
        norms = compute_norms(positive)
        record = DocumentRecord(
            doc_id=doc_id,
            file_name=file_name,
            features=positive,
            norms=norms,
            labels=dict(labels) if labels else None,
        )
        self.documents.append(record)
        self._file_names[file_name] = doc_id
        for fid, s in positive:
            self.postings.setdefault(fid, []).append(
                Posting(doc_id=doc_id, s=s, c=s / norms.l2, ss=s * s)
            )
        return doc_id

    def document(self, doc_id: int) -> DocumentRecord:
        if not 0 <= doc_id < len(self.documents):
            raise IndexError(f"doc_id out of range: {doc_id}")
        return self.documents[doc_id]

    def doc_id_for_file(self, file_name: str) -> int | None:
        return self._file_names.get(file_name)

    def vocabulary(self) -> list[str]:
        return sorted(self.postings)

    def stats(self) -> IndexStats:
        n_postings = sum(len(pl) for pl in self.postings.values())
        return IndexStats(
            doc_count=len(self.documents),
            feature_count=len(self.postings),
            posting_count=n_postings,
            mean_postings_per_doc=(n_postings / len(self.documents)) if self.documents else 0.0,
        )


def build_index(
    docs: Iterator[tuple[str, SparseVector, dict[str, str] | None]] | list,
    max_features: int | None = None,
) -> InvertedIndex:
    """Index a stream of (file_name, vector, labels) triples.

    ``max_features`` truncates each document to its strongest components
    before indexing, mirroring query-side truncation on the index side.
    """
    idx = InvertedIndex()
    for file_name, vector, labels in docs:
        if max_features is not None:
            vector = truncate_top_m(vector, max_features)
        idx.add_document(file_name, vector, labels)
    return idx


def parse_document_json(line: str) -> tuple[str, SparseVector, dict[str, str] | None]:
    """Parse one ingestion line into (file_name, vector, labels).

    Raises FormatError on anything malformed; the caller decorates the
    message with a line number.
    """
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise FormatError("document must be a JSON object")
    file_name = obj.get("f")
    if not isinstance(file_name, str) or not file_name:
        raise FormatError('field "f" must be a non-empty string')
    scores = obj.get("s")
    if not isinstance(scores, dict):
        raise FormatError('field "s" must be an object of feature entries')

    pairs: list[tuple[str, float]] = []
    labels: dict[str, str] = {}
    for fid, entry in scores.items():
        if not fid:
            raise FormatError("feature id must be a non-empty string")
        if not isinstance(entry, dict) or "s" not in entry:
            raise FormatError(f'feature {fid!r} must be an object with a numeric "s" field')
        value = entry["s"]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise FormatError(f"feature {fid!r} has a non-numeric score")
        weight = float(value)
        if not math.isfinite(weight):
            raise FormatError(f"feature {fid!r} has a non-finite score")
        if weight < 0:
            raise FormatError(f"feature {fid!r} has a negative score: {weight}")
        word = entry.get("w")
        if word is not None:
            if not isinstance(word, str):
                raise FormatError(f'feature {fid!r} has a non-string "w" field')
            labels[fid] = word
        pairs.append((fid, weight))

    total = sum(w for _, w in pairs)
    if total > 1.0 + INGEST_MASS_TOLERANCE:
        raise FormatError(f"feature weights sum to {total:.9f}, above the softmax mass bound")
    try:
        vector = SparseVector.from_pairs(pairs)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc
    return file_name, vector, (labels or None)


def read_documents_jsonl(
    fp: TextIO,
) -> Iterator[tuple[int, str, SparseVector, dict[str, str] | None]]:
    """Yield (line_number, file_name, vector, labels) for every non-blank line.

    FormatError messages are prefixed with the 1-based line number.
    """
    for lineno, line in enumerate(fp, start=1):
        if not line.strip():
            continue
        try:
            file_name, vector, labels = parse_document_json(line)
        except FormatError as exc:
            raise FormatError(f"line {lineno}: {exc}") from exc
        yield lineno, file_name, vector, labels
