"""Command-line surface: index, search, eval, gen, stats.

Exit codes: 0 success, 1 usage error, 2 data or format error, 3 runtime
error. All JSON printed by subcommands uses sorted keys so identical
inputs give byte-identical output (timing fields excepted).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import evaluation, reporting, storage
from .engine import QuerySpec, search
from .errors import (
    DuplicateFileError,
    EmptyIndexError,
    FormatError,
    InvalidParamsError,
    NsixError,
    UnknownDocumentError,
    ZeroVectorError,
)
from .index import InvertedIndex, parse_document_json, read_documents_jsonl
from .scoring import ScoringMethod
from .vectors import SparseVector, truncate_top_m

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3

METHOD_CHOICES = ("dot", "l1", "l2", "cos", "cos-exact", "dot+cos")


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; we reserve 2 for
    data errors and use 1 for usage."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nsix", description="Sparse-vector inverted-index search")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", parents=[], help="build an index from a JSONL corpus")
    p.add_argument("--input", required=True, help="corpus JSONL file")
    p.add_argument("--out", required=True, help="index file to write")
    p.add_argument("--max-features", type=int, default=None,
                   help="truncate each document to its strongest N features")
    p.add_argument("--force", action="store_true", help="overwrite an existing index file")

    p = sub.add_parser("search", help="run one query against an index")
    p.add_argument("--index", required=True)
    p.add_argument("--query", required=True, help="JSONL file holding one query document")
    p.add_argument("--method", required=True, choices=METHOD_CHOICES)
    p.add_argument("--top-k", type=int, default=100)
    p.add_argument("--feature-number", type=int, default=None,
                   help="truncate the query to its strongest M features")
    p.add_argument("--mode", choices=("exhaustive", "posting"), default="exhaustive")
    p.add_argument("--rerank-k", type=int, default=100, help="window size for dot+cos")

    p = sub.add_parser("eval", help="run a MAP/latency experiment grid")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True, help="queries JSONL (ingestion schema)")
    p.add_argument("--qrels", required=True, help="qrels JSONL")
    p.add_argument("--methods", required=True,
                   help="comma-separated methods, e.g. dot,l1,l2,cos,dot+cos")
    p.add_argument("--feature-numbers", required=True,
                   help="comma-separated feature numbers; 'full' disables truncation")
    p.add_argument("--perturb", default="none",
                   help="comma-separated perturbations: none, res:R, partial:Q")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--top-k", type=int, default=100)
    p.add_argument("--mode", choices=("exhaustive", "posting"), default="exhaustive")
    p.add_argument("--rerank-k", type=int, default=100)
    p.add_argument("--out", required=True, help="report output directory")

    p = sub.add_parser("gen", help="generate a synthetic softmax-like corpus")
    p.add_argument("--docs", type=int, required=True)
    p.add_argument("--features", type=int, default=1000)
    p.add_argument("--sparsity", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("stats", help="print index statistics")
    p.add_argument("--index", required=True)

    return parser


def _load_index(path: str) -> InvertedIndex:
    if not Path(path).exists():
        raise FormatError(f"index file not found: {path}")
    return storage.load_index(path)


def _read_query_file(path: str) -> tuple[str, SparseVector]:
    with open(path, encoding="utf-8") as fp:
        lines = [(n, line) for n, line in enumerate(fp, start=1) if line.strip()]
    if not lines:
        raise FormatError(f"query file is empty: {path}")
    if len(lines) > 1:
        raise FormatError(f"query file must hold exactly one document, found {len(lines)}")
    lineno, line = lines[0]
    try:
        file_name, vector, _ = parse_document_json(line)
    except FormatError as exc:
        raise FormatError(f"line {lineno}: {exc}") from exc
    return file_name, vector


def _read_corpus_file(path: str) -> list[tuple[str, SparseVector]]:
    with open(path, encoding="utf-8") as fp:
        return [(name, vector) for _, name, vector, _ in read_documents_jsonl(fp)]


def cmd_index(args) -> int:
    out_path = Path(args.out)
    if out_path.exists() and not args.force:
        print(f"nsix index: refusing to overwrite {out_path} (use --force)", file=sys.stderr)
        return EXIT_USAGE
    if args.max_features is not None and args.max_features < 1:
        raise InvalidParamsError(f"--max-features must be >= 1, got {args.max_features}")

    idx = InvertedIndex()
    with open(args.input, encoding="utf-8") as fp:
        for lineno, line in enumerate(fp, start=1):
            if not line.strip():
                continue
            try:
                file_name, vector, labels = parse_document_json(line)
                if args.max_features is not None:
                    vector = truncate_top_m(vector, args.max_features)
                idx.add_document(file_name, vector, labels)
            except (FormatError, ZeroVectorError, DuplicateFileError) as exc:
                message = str(exc)
                if not message.startswith("line "):
                    message = f"line {lineno}: {message}"
                raise type(exc)(message) from exc
    storage.save_index(idx, out_path)
    print(json.dumps(idx.stats().to_dict(), sort_keys=True))
    return EXIT_OK


def cmd_search(args) -> int:
    idx = _load_index(args.index)
    _, vector = _read_query_file(args.query)
    spec = QuerySpec(
        vector=vector,
        method=ScoringMethod.parse(args.method, k_rerank=args.rerank_k),
        top_k=args.top_k,
        feature_number=args.feature_number,
        candidate_mode=args.mode,
    )
    for rank, hit in enumerate(search(idx, spec), start=1):
        print(json.dumps({"rank": rank, "file": hit.file_name, "score": hit.score},
                         sort_keys=True))
    return EXIT_OK


def _parse_feature_numbers(text: str) -> list[int | None]:
    values: list[int | None] = []
    for token in text.split(","):
        token = token.strip().lower()
        if not token:
            continue
        if token in ("full", "none", "0"):
            values.append(None)
            continue
        try:
            value = int(token)
        except ValueError as exc:
            raise InvalidParamsError(f"bad feature number {token!r}") from exc
        if value < 1:
            raise InvalidParamsError(f"feature numbers must be >= 1, got {value}")
        values.append(value)
    if not values:
        raise InvalidParamsError("no feature numbers given")
    return values


def cmd_eval(args) -> int:
    idx = _load_index(args.index)
    queries = _read_corpus_file(args.queries)
    with open(args.qrels, encoding="utf-8") as fp:
        qrels = evaluation.read_qrels_jsonl(fp)
    methods = [
        ScoringMethod.parse(token, k_rerank=args.rerank_k)
        for token in args.methods.split(",")
        if token.strip()
    ]
    feature_numbers = _parse_feature_numbers(args.feature_numbers)
    perturbations = [
        evaluation.PerturbationSpec.parse(token, seed=args.seed)
        for token in args.perturb.split(",")
        if token.strip()
    ]
    runs = evaluation.run_experiment(
        idx,
        queries,
        qrels,
        methods=methods,
        feature_numbers=feature_numbers,
        perturbations=perturbations,
        top_k=args.top_k,
        candidate_mode=args.mode,
    )
    config = {
        "index": args.index,
        "queries": args.queries,
        "qrels": args.qrels,
        "top_k": args.top_k,
        "candidate_mode": args.mode,
    }
    written = reporting.write_report(runs, args.out, seed=args.seed, extra_config=config)
    for path in written:
        print(path)
    return EXIT_OK


def cmd_gen(args) -> int:
    corpus = evaluation.generate_synthetic_corpus(
        n_docs=args.docs,
        n_features=args.features,
        sparsity=args.sparsity,
        seed=args.seed,
    )
    with open(args.out, "w", encoding="utf-8") as fp:
        for file_name, vector in corpus:
            record = {"f": file_name, "s": {fid: {"s": w} for fid, w in vector}}
            fp.write(json.dumps(record, sort_keys=True) + "\n")
    print(f"wrote {len(corpus)} documents to {args.out}")
    return EXIT_OK


def cmd_stats(args) -> int:
    idx = _load_index(args.index)
    print(json.dumps(idx.stats().to_dict(), sort_keys=True))
    return EXIT_OK


_COMMANDS = {
    "index": cmd_index,
    "search": cmd_search,
    "eval": cmd_eval,
    "gen": cmd_gen,
    "stats": cmd_stats,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except InvalidParamsError as exc:
        print(f"nsix {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, ZeroVectorError, DuplicateFileError,
            UnknownDocumentError, EmptyIndexError) as exc:
        print(f"nsix {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NsixError as exc:
        print(f"nsix {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"nsix {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (RuntimeError, ValueError) as exc:
        print(f"nsix {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
