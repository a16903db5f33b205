"""Desk-scale retrieval benchmark: corpora, perturbations, MAP, latency.

The benchmark follows a self-retrieval protocol: each query is the feature
vector of one indexed document and that document is its only relevant
answer, so any true distance metric should rank it first. Degraded
queries (lower resolution, partial crops) are simulated as seeded vector
perturbations, since regenerating features from degraded images requires
the original classifier. Externally produced query files in the normal
ingestion format are accepted wherever queries are taken, for anyone who
wants to rerun the protocol on real extracted features.
"""

from __future__ import annotations

import json
import math
import time
import zlib
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .engine import QuerySpec, search
from .errors import FormatError, InvalidParamsError, ZeroVectorError
from .index import InvertedIndex
from .scoring import ScoringMethod
from .vectors import SparseVector, truncate_top_m

RESOLUTION_LEVELS = (1.0, 0.8, 0.6, 0.4, 0.2)

# Symmetric Dirichlet concentration producing peaked, softmax-looking
# vectors: at 1000 dimensions the strongest component carries ~0.4 of the
# mass on average and the strongest ten nearly all of it.
DEFAULT_ALPHA = 0.003

_GEN_BATCH = 2048


# ---------------------------------------------------------------------------
# Metrics


def average_precision(ranked: Sequence[str], relevant: Iterable[str]) -> float:
    """Mean of precision at each relevant hit's rank.

    Relevant items missing from the ranking contribute zero, so the value
    is pessimistic for truncated rankings.
    """
    relevant_set = set(relevant)
    if not relevant_set:
        raise ValueError("relevant set must be non-empty")
    if len(set(ranked)) != len(ranked):
        raise ValueError("ranking contains duplicate items")
    hits = 0
    precision_sum = 0.0
    for rank, name in enumerate(ranked, start=1):
        if name in relevant_set:
            hits += 1
            precision_sum += hits / rank
    return precision_sum / len(relevant_set)


def mean_average_precision(per_query_ap: Sequence[float]) -> float:
    if not per_query_ap:
        raise ValueError("cannot average an empty AP list")
    return sum(per_query_ap) / len(per_query_ap)


@dataclass(frozen=True)
class LatencyReport:
    mean: float
    p50: float
    p95: float

    def to_dict(self) -> dict[str, float]:
        return {"mean": self.mean, "p50": self.p50, "p95": self.p95}


def _nearest_rank(sorted_samples: Sequence[float], q: float) -> float:
    pos = max(0, math.ceil(q * len(sorted_samples)) - 1)
    return sorted_samples[pos]


def latency_report(samples: Sequence[float]) -> LatencyReport:
    """Mean and nearest-rank percentiles of wall-clock samples, in seconds."""
    if not samples:
        raise ValueError("cannot summarize an empty sample list")
    ordered = sorted(samples)
    return LatencyReport(
        mean=sum(samples) / len(samples),
        p50=_nearest_rank(ordered, 0.50),
        p95=_nearest_rank(ordered, 0.95),
    )


# ---------------------------------------------------------------------------
# Synthetic corpora


def generate_synthetic_corpus(
    n_docs: int,
    n_features: int = 1000,
    sparsity: int = 10,
    seed: int = 0,
    alpha: float = DEFAULT_ALPHA,
) -> list[tuple[str, SparseVector]]:
    """Random softmax-like corpus: Dirichlet draws truncated to their
    strongest ``sparsity`` components.

    Deterministic for a fixed seed. Pre-truncation mass is exactly 1 per
    document, so every truncated vector respects the ingestion mass bound.
    """
    if n_docs < 0:
        raise InvalidParamsError(f"n_docs must be >= 0, got {n_docs}")
    if n_features < 1:
        raise InvalidParamsError(f"n_features must be >= 1, got {n_features}")
    if not 1 <= sparsity <= n_features:
        raise InvalidParamsError(
            f"sparsity must be in [1, n_features], got sparsity={sparsity} n_features={n_features}"
        )
    if alpha <= 0:
        raise InvalidParamsError(f"alpha must be positive, got {alpha}")

    ids = [f"n{j:08d}" for j in range(n_features)]
    rng = np.random.default_rng(seed)
    alphas = np.full(n_features, alpha)
    corpus: list[tuple[str, SparseVector]] = []
    produced = 0
    while produced < n_docs:
        batch = min(_GEN_BATCH, n_docs - produced)
        weights = rng.dirichlet(alphas, size=batch)
        # Stable sort on descending weight resolves ties by index, which is
        # ascending feature id for zero-padded ids.
        strongest = np.argsort(-weights, axis=1, kind="stable")[:, :sparsity]
        for row in range(batch):
            keep = np.sort(strongest[row])
            entries = tuple((ids[j], float(weights[row, j])) for j in keep)
            corpus.append((f"img{produced:06d}.jpg", SparseVector(entries)))
            produced += 1
    return corpus


def generate_norm_heterogeneous_corpus(
    n_targets: int = 20,
) -> tuple[
    list[tuple[str, SparseVector]],
    list[tuple[str, SparseVector]],
    dict[str, set[str]],
]:
    """Fixture where inner product fails self-retrieval but cosine does not.

    Every target shares a common feature with two heavy distractors whose
    inner product against any target query beats the target's own squared
    norm; cosine still puts the identical vector first.
    """
    if n_targets < 1:
        raise InvalidParamsError(f"n_targets must be >= 1, got {n_targets}")
    common = "n00000000"
    docs: list[tuple[str, SparseVector]] = []
    for i in range(n_targets):
        vec = SparseVector.from_dict({common: 0.2, f"n{i + 1:08d}": 0.2})
        docs.append((f"target{i:03d}.jpg", vec))
    docs.append(("distractor_a.jpg", SparseVector.from_dict({common: 0.9})))
    docs.append(("distractor_b.jpg", SparseVector.from_dict({common: 0.8})))
    queries = [(name, vec) for name, vec in docs[:n_targets]]
    qrels = {name: {name} for name, _ in queries}
    return docs, queries, qrels


# ---------------------------------------------------------------------------
# Query perturbations


@dataclass(frozen=True)
class PerturbationSpec:
    """Seeded query degradation.

    ``res`` mixes the query with a peaked noise vector, modeling feature
    drift at reduced image resolution; ``partial`` keeps a random subset
    holding about a quarter of the query's mass and renormalizes it,
    modeling a quadrant crop. ``none`` is the identity.
    """

    kind: str = "none"
    rate: float = 1.0
    quadrant: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("none", "res", "partial"):
            raise InvalidParamsError(f"unknown perturbation kind {self.kind!r}")
        if self.seed < 0:
            raise InvalidParamsError(f"seed must be >= 0, got {self.seed}")
        if self.kind == "res" and not any(
            math.isclose(self.rate, level) for level in RESOLUTION_LEVELS
        ):
            raise InvalidParamsError(
                f"resolution rate must be one of {RESOLUTION_LEVELS}, got {self.rate}"
            )
        if self.kind == "partial" and not 1 <= self.quadrant <= 4:
            raise InvalidParamsError(f"quadrant must be in 1..4, got {self.quadrant}")

    @classmethod
    def parse(cls, token: str, seed: int = 0) -> "PerturbationSpec":
        token = token.strip().lower()
        if token == "none":
            return cls(kind="none", seed=seed)
        if token.startswith("res:"):
            try:
                rate = float(token.split(":", 1)[1])
            except ValueError as exc:
                raise InvalidParamsError(f"bad resolution rate in {token!r}") from exc
            return cls(kind="res", rate=rate, seed=seed)
        if token.startswith("partial:"):
            try:
                quadrant = int(token.split(":", 1)[1])
            except ValueError as exc:
                raise InvalidParamsError(f"bad quadrant in {token!r}") from exc
            return cls(kind="partial", quadrant=quadrant, seed=seed)
        raise InvalidParamsError(f"unknown perturbation {token!r}")

    def label(self) -> str:
        if self.kind == "none":
            return "none"
        if self.kind == "res":
            return f"res:{self.rate:g}"
        return f"partial:{self.quadrant}"

    def sort_key(self) -> tuple:
        if self.kind == "none":
            return (0, 0.0)
        if self.kind == "res":
            return (1, self.rate)
        return (2, float(self.quadrant))


def _vector_salt(v: SparseVector) -> int:
    payload = "|".join(f"{fid}:{w!r}" for fid, w in v)
    return zlib.crc32(payload.encode("utf-8"))


def perturb_query(
    v: SparseVector,
    p: PerturbationSpec,
    universe: Sequence[str] | None = None,
    alpha: float = DEFAULT_ALPHA,
) -> SparseVector:
    """Apply a perturbation; the result is deterministic in (v, p).

    The RNG is salted with a digest of the vector so distinct queries
    under one spec seed drift independently, and the noise draw does not
    depend on the rate: lowering the rate moves a query further along a
    fixed line toward its noise target, which gives the degradation its
    monotone character.

    ``universe`` lists the feature ids noise may fall on (typically the
    index vocabulary); it defaults to the query's own support.
    """
    if len(v) == 0:
        raise ZeroVectorError("cannot perturb an empty vector")
    if p.kind == "none":
        return v

    salt = _vector_salt(v)
    if p.kind == "res":
        if p.rate == 1.0:
            return v
        noise_ids = sorted(universe) if universe else list(v.ids())
        rng = np.random.default_rng([p.seed, salt, 1])
        noise = rng.dirichlet(np.full(len(noise_ids), alpha))
        mixed: dict[str, float] = {fid: p.rate * w for fid, w in v}
        scale = 1.0 - p.rate
        for fid, z in zip(noise_ids, noise):
            if z > 0.0:
                mixed[fid] = mixed.get(fid, 0.0) + scale * float(z)
        result = truncate_top_m(SparseVector.from_dict(mixed), len(v))
    else:  # partial
        rng = np.random.default_rng([p.seed, salt, 2, p.quadrant])
        order = rng.permutation(len(v))
        total = sum(w for _, w in v)
        target = total / 4.0
        kept: list[tuple[str, float]] = []
        mass = 0.0
        for pos in order:
            fid, w = v.entries[pos]
            kept.append((fid, w))
            mass += w
            if mass >= target:
                break
        if mass <= 0.0:
            raise ZeroVectorError("perturbation kept no positive mass")
        result = SparseVector.from_pairs((fid, w / mass) for fid, w in kept)

    if not result.has_positive_weight():
        raise ZeroVectorError("perturbation produced a zero vector")
    return result


# ---------------------------------------------------------------------------
# Relevance judgments


def read_qrels_jsonl(fp) -> dict[str, set[str]]:
    """Load qrels lines ``{"query": name, "relevant": [name, ...]}``.

    Query ids must be unique and relevant sets non-empty.
    """
    qrels: dict[str, set[str]] = {}
    for lineno, line in enumerate(fp, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"line {lineno}: invalid JSON: {exc}") from exc
        if not isinstance(obj, dict) or "query" not in obj or "relevant" not in obj:
            raise FormatError(f'line {lineno}: expected an object with "query" and "relevant"')
        query = obj["query"]
        relevant = obj["relevant"]
        if not isinstance(query, str) or not query:
            raise FormatError(f'line {lineno}: "query" must be a non-empty string')
        if query in qrels:
            raise FormatError(f"line {lineno}: duplicate query {query!r}")
        if (
            not isinstance(relevant, list)
            or not relevant
            or not all(isinstance(r, str) and r for r in relevant)
        ):
            raise FormatError(
                f'line {lineno}: "relevant" must be a non-empty list of file names'
            )
        qrels[query] = set(relevant)
    return qrels


# ---------------------------------------------------------------------------
# Experiment grid


@dataclass
class EvalRun:
    """One grid cell: a method evaluated at one feature number and
    perturbation."""

    method: ScoringMethod
    feature_number: int | None
    top_k: int
    perturbation: PerturbationSpec
    per_query_ap: list[float]
    map_score: float
    latency_mean_s: float
    latency_samples: list[float]

    def latency(self) -> LatencyReport:
        return latency_report(self.latency_samples)

    def to_dict(self) -> dict:
        return {
            "method": self.method.label(),
            "k_rerank": self.method.k_rerank if self.method.is_rerank else None,
            "feature_number": self.feature_number,
            "top_k": self.top_k,
            "perturbation": self.perturbation.label(),
            "seed": self.perturbation.seed,
            "n_queries": len(self.per_query_ap),
            "map": self.map_score,
            "per_query_ap": self.per_query_ap,
            "latency": self.latency().to_dict(),
            "latency_samples": self.latency_samples,
        }


def run_experiment(
    idx: InvertedIndex,
    queries: Sequence[tuple[str, SparseVector]],
    qrels: Mapping[str, set[str]],
    methods: Sequence[ScoringMethod],
    feature_numbers: Sequence[int | None],
    perturbations: Sequence[PerturbationSpec] = (PerturbationSpec(),),
    top_k: int = 100,
    candidate_mode: str = "exhaustive",
    warmup_iterations: int = 3,
    min_timing_samples: int = 10,
) -> list[EvalRun]:
    """Evaluate every (perturbation, method, feature_number) grid cell.

    Per cell: perturb each query, truncate it to the cell's feature
    number, search, and score AP against the qrels. Searches are timed
    individually (search call only) after a few discarded warmup calls;
    queries are cycled until at least ``min_timing_samples`` timings
    exist. A failure in any cell aborts the whole run with cell context.
    """
    if not queries:
        raise InvalidParamsError("no queries given")
    if not methods:
        raise InvalidParamsError("no methods given")
    if not feature_numbers:
        raise InvalidParamsError("no feature numbers given")
    for qid, _ in queries:
        if qid not in qrels:
            raise InvalidParamsError(f"query {qid!r} has no qrels entry")
        if not qrels[qid]:
            raise InvalidParamsError(f"query {qid!r} has an empty relevant set")

    universe = idx.vocabulary()
    runs: list[EvalRun] = []
    for pert in perturbations:
        perturbed = [(qid, perturb_query(vec, pert, universe)) for qid, vec in queries]
        for method in methods:
            for m in feature_numbers:
                try:
                    runs.append(
                        _run_cell(
                            idx,
                            perturbed,
                            qrels,
                            method,
                            m,
                            pert,
                            top_k,
                            candidate_mode,
                            warmup_iterations,
                            min_timing_samples,
                        )
                    )
                except Exception as exc:
                    raise RuntimeError(
                        f"evaluation cell failed (method={method.label()}, "
                        f"feature_number={m}, perturbation={pert.label()}): {exc}"
                    ) from exc
    return runs


def _run_cell(
    idx: InvertedIndex,
    perturbed: Sequence[tuple[str, SparseVector]],
    qrels: Mapping[str, set[str]],
    method: ScoringMethod,
    feature_number: int | None,
    pert: PerturbationSpec,
    top_k: int,
    candidate_mode: str,
    warmup_iterations: int,
    min_timing_samples: int,
) -> EvalRun:
    specs = [
        (
            qid,
            QuerySpec(
                vector=vec,
                method=method,
                top_k=top_k,
                feature_number=feature_number,
                candidate_mode=candidate_mode,
            ),
        )
        for qid, vec in perturbed
    ]
    for i in range(warmup_iterations):
        search(idx, specs[i % len(specs)][1])

    reps = max(1, math.ceil(min_timing_samples / len(specs)))
    per_query_ap: list[float] = []
    samples: list[float] = []
    for rep in range(reps):
        for qid, spec in specs:
            start = time.perf_counter()
            hits = search(idx, spec)
            samples.append(time.perf_counter() - start)
            if rep == 0:
                ranked = [h.file_name for h in hits]
                per_query_ap.append(average_precision(ranked, qrels[qid]))
    return EvalRun(
        method=method,
        feature_number=feature_number,
        top_k=top_k,
        perturbation=pert,
        per_query_ap=per_query_ap,
        map_score=mean_average_precision(per_query_ap),
        latency_mean_s=sum(samples) / len(samples),
        latency_samples=samples,
    )
