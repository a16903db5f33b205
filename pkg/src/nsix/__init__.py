"""nsix: sparse-vector search on an inverted index with norm statistics.

Documents are sparse softmax-style feature vectors. Norms and normalized
weights are precomputed at index time so that inner product, cosine,
Manhattan, and Euclidean rankings all reduce to one pass over the
query's posting lists at search time.
"""

from .engine import QuerySpec, ScoreBreakdown, SearchHit, SearchStats, explain, search, search_with_stats
from .errors import (
    DuplicateFileError,
    EmptyIndexError,
    FormatError,
    InvalidParamsError,
    NsixError,
    UnknownDocumentError,
    ZeroVectorError,
)
from .index import DocumentRecord, IndexStats, InvertedIndex, Posting, build_index
from .scoring import (
    COSINE_EXACT,
    COSINE_INDEXED,
    DOT,
    EUCLID,
    MANHATTAN,
    ScoringMethod,
    dot_then_cos,
)
from .storage import load_index, save_index
from .vectors import (
    SparseVector,
    VectorNorms,
    compute_norms,
    l1_norm,
    l2_norm,
    normalize_l2,
    truncate_top_m,
)

__version__ = "0.1.0"

__all__ = [
    "COSINE_EXACT",
    "COSINE_INDEXED",
    "DOT",
    "DocumentRecord",
    "DuplicateFileError",
    "EUCLID",
    "EmptyIndexError",
    "FormatError",
    "IndexStats",
    "InvalidParamsError",
    "InvertedIndex",
    "MANHATTAN",
    "NsixError",
    "Posting",
    "QuerySpec",
    "ScoreBreakdown",
    "ScoringMethod",
    "SearchHit",
    "SearchStats",
    "SparseVector",
    "UnknownDocumentError",
    "VectorNorms",
    "ZeroVectorError",
    "build_index",
    "compute_norms",
    "dot_then_cos",
    "explain",
    "l1_norm",
    "l2_norm",
    "load_index",
    "normalize_l2",
    "save_index",
    "search",
    "search_with_stats",
    "truncate_top_m",
    "__version__",
]
