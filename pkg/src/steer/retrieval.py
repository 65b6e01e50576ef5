"""Exact top-k search over a server-space corpus and Recall@k evaluation.

Search is brute force on purpose: the quantities under study are
embedding-quality effects, and an approximate index would confound the
recall numbers. Scores accumulate in float64 and ties break on the
lexicographically smaller doc id, so runs are bitwise reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import EmbeddingSet
from .errors import DegenerateVectorError, DimensionMismatchError, IdMismatchError, InputError

METRICS = ("cosine", "dot", "euclidean")


@dataclass(frozen=True)
class Qrels:
    """Relevance judgments: query id -> set of relevant doc ids."""

    judgments: dict[str, frozenset[str]]

    def __post_init__(self):
        clean = {}
        for qid, docs in self.judgments.items():
            if not str(qid):
                raise InputError("empty query id in qrels")
            docs = frozenset(str(d) for d in docs)
            if not docs:
                raise InputError(f"query {qid!r} has an empty relevance set")
            clean[str(qid)] = docs
        object.__setattr__(self, "judgments", clean)

    def __contains__(self, qid: str) -> bool:
        return qid in self.judgments

    def __getitem__(self, qid: str) -> frozenset[str]:
        return self.judgments[qid]

    def __len__(self) -> int:
        return len(self.judgments)


@dataclass(frozen=True)
class RetrievalRun:
    """Per-query ranked (doc id, score) lists of length k."""

    results: dict[str, list[tuple[str, float]]]
    metric: str
    k: int

    def __post_init__(self):
        if self.metric not in METRICS:
            raise InputError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if self.k < 1:
            raise InputError(f"k must be >= 1, got {self.k}")
        ascending = self.metric == "euclidean"
        for qid, ranked in self.results.items():
            if len(ranked) > self.k:
                raise InputError(f"query {qid!r} has {len(ranked)} results for k={self.k}")
            docs = [d for d, _ in ranked]
            if len(set(docs)) != len(docs):
                raise InputError(f"duplicate doc ids in results for query {qid!r}")
            scores = [s for _, s in ranked]
            ordered = all(a <= b for a, b in zip(scores, scores[1:])) if ascending else all(
                a >= b for a, b in zip(scores, scores[1:])
            )
            if not ordered:
                raise InputError(f"scores out of order for query {qid!r}")

    @property
    def query_ids(self) -> tuple[str, ...]:
        return tuple(self.results)

    def top(self, qid: str, k: int) -> list[str]:
        return [doc for doc, _ in self.results[qid][:k]]


@dataclass(frozen=True)
class RecallReport:
    """Recall@k aggregate plus the per-query breakdown."""

    k: int
    mean: float
    per_query: dict[str, float]
    missing_queries: tuple[str, ...] = ()

    @property
    def evaluated(self) -> int:
        return len(self.per_query)


@dataclass(frozen=True)
class RunComparison:
    """Paired Recall@k for two runs plus per-query top-k Jaccard overlap."""

    k_list: tuple[int, ...]
    recall_a: dict[int, float]
    recall_b: dict[int, float]
    delta: dict[int, float]
    mean_overlap: dict[int, float]
    per_query_overlap: dict[int, dict[str, float]] = field(repr=False, default_factory=dict)


def search_topk(
    corpus: EmbeddingSet, queries: EmbeddingSet, k: int, metric: str = "cosine"
) -> RetrievalRun:
    """Exact top-k over the corpus for every query under the given metric.

    Ties break toward the lexicographically smaller doc id. Euclidean
    results are ranked ascending by distance; cosine/dot descending by
    similarity.
    """
    if metric not in METRICS:
        raise InputError(f"metric must be one of {METRICS}, got {metric!r}")
    if corpus.dim != queries.dim:
        raise DimensionMismatchError(
            f"corpus dim {corpus.dim} != query dim {queries.dim}"
        )
    if not 1 <= k <= corpus.count:
        raise InputError(f"k={k} out of range for corpus of {corpus.count} docs")

    c = corpus.vectors.astype(np.float64)
    q = queries.vectors.astype(np.float64)

    if metric == "cosine":
        cn = np.linalg.norm(c, axis=1)
        qn = np.linalg.norm(q, axis=1)
        for norms, emb_set, side in ((cn, corpus, "corpus"), (qn, queries, "query")):
            zero = np.where(norms == 0.0)[0]
            if zero.size:
                raise DegenerateVectorError(
                    f"zero-norm {side} vector (id {emb_set.ids[int(zero[0])]})"
                )
        scores = (q / qn[:, None]) @ (c / cn[:, None]).T
        sort_key = -scores
    elif metric == "dot":
        scores = q @ c.T
        sort_key = -scores
    else:
        sq_c = np.sum(c * c, axis=1)
        sq_q = np.sum(q * q, axis=1)
        scores = np.sqrt(np.maximum(sq_q[:, None] + sq_c[None, :] - 2.0 * (q @ c.T), 0.0))
        sort_key = scores

    # Rank of each corpus row's id in lexicographic order, for tie-breaking.
    id_rank = np.empty(corpus.count, dtype=np.int64)
    id_rank[np.argsort(np.asarray(corpus.ids))] = np.arange(corpus.count)

    results: dict[str, list[tuple[str, float]]] = {}
    for qi, qid in enumerate(queries.ids):
        order = np.lexsort((id_rank, sort_key[qi]))[:k]
        results[qid] = [(corpus.ids[j], float(scores[qi, j])) for j in order]
    return RetrievalRun(results=results, metric=metric, k=k)


def recall_at_k(run: RetrievalRun, qrels: Qrels, k: int) -> RecallReport:
    """Mean fraction of each query's relevant docs found in its top k.

    Queries absent from the qrels are excluded from the mean and reported
    in ``missing_queries`` rather than scored as zero.
    """
    if k < 1 or k > run.k:
        raise InputError(f"k={k} must be in [1, {run.k}] for this run")
    per_query: dict[str, float] = {}
    missing: list[str] = []
    for qid in run.results:
        if qid not in qrels:
            missing.append(qid)
            continue
        relevant = qrels[qid]
        hits = sum(1 for doc in run.top(qid, k) if doc in relevant)
        per_query[qid] = hits / len(relevant)
    mean = float(np.mean(list(per_query.values()))) if per_query else 0.0
    return RecallReport(k=k, mean=mean, per_query=per_query, missing_queries=tuple(missing))


def compare_runs(
    run_a: RetrievalRun, run_b: RetrievalRun, qrels: Qrels, k_list
) -> RunComparison:
    """Paired Recall@k table (delta = run_b - run_a) plus top-k Jaccard overlap."""
    ids_a, ids_b = set(run_a.results), set(run_b.results)
    if ids_a != ids_b:
        extra = sorted(ids_a ^ ids_b)[:5]
        raise IdMismatchError(f"runs cover different query ids, e.g. {extra}")
    k_list = tuple(int(k) for k in k_list)
    max_k = min(run_a.k, run_b.k)
    for k in k_list:
        if k < 1 or k > max_k:
            raise InputError(f"k={k} exceeds the runs' depth {max_k}")

    recall_a: dict[int, float] = {}
    recall_b: dict[int, float] = {}
    delta: dict[int, float] = {}
    mean_overlap: dict[int, float] = {}
    per_query_overlap: dict[int, dict[str, float]] = {}
    for k in k_list:
        recall_a[k] = recall_at_k(run_a, qrels, k).mean
        recall_b[k] = recall_at_k(run_b, qrels, k).mean
        delta[k] = recall_b[k] - recall_a[k]
        overlaps = {}
        for qid in run_a.results:
            sa, sb = set(run_a.top(qid, k)), set(run_b.top(qid, k))
            overlaps[qid] = len(sa & sb) / len(sa | sb) if (sa | sb) else 1.0
        per_query_overlap[k] = overlaps
        mean_overlap[k] = float(np.mean(list(overlaps.values())))
    return RunComparison(
        k_list=k_list,
        recall_a=recall_a,
        recall_b=recall_b,
        delta=delta,
        mean_overlap=mean_overlap,
        per_query_overlap=per_query_overlap,
    )
