"""Privacy deviation metrics and the matched-exposure noise baseline.

Deviation between an approximate embedding and the true server embedding
is summarized by cosine similarity. It is a privacy-exposure proxy, not
an inversion attack: higher cosine means the approximate vector carries
more recoverable structure. The matched-exposure comparison calibrates
unstructured Gaussian noise to the same mean cosine and asks whether the
structured transform retrieves better at equal exposure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import EmbeddingSet, row_cosines
from .errors import DimensionMismatchError, IdMismatchError, InputError, TargetUnreachableError
from .retrieval import Qrels, RunComparison, compare_runs, search_topk

PROXY_NOTE = "cosine deviation is a privacy-exposure proxy, not an inversion attack"
QUANTILE_LEVELS = (5, 25, 50, 75, 95)
MATCH_TOLERANCE = 0.01
BISECTION_STEPS = 40


@dataclass(frozen=True)
class DeviationReport:
    """Per-id cosine(approx, true) with distribution summary."""

    tau: float
    mean: float
    std: float
    minimum: float
    maximum: float
    quantiles: dict[int, float]
    fraction_above_tau: float
    per_id: dict[str, float]

    @property
    def count(self) -> int:
        return len(self.per_id)

    def to_json_dict(self) -> dict:
        return {
            "per_id": dict(self.per_id),
            "summary": {
                "count": self.count,
                "mean": self.mean,
                "std": self.std,
                "min": self.minimum,
                "max": self.maximum,
                "quantiles": {str(level): v for level, v in self.quantiles.items()},
                "fraction_above_tau": self.fraction_above_tau,
            },
            "config": {"tau": self.tau, "note": PROXY_NOTE},
        }

    def to_tsv(self) -> str:
        lines = [f"# deviation report ({PROXY_NOTE})", f"# tau\t{self.tau}"]
        lines.append(
            "# mean\tstd\tmin\tmax\t"
            + "\t".join(f"q{level}" for level in QUANTILE_LEVELS)
            + "\tfraction_above_tau"
        )
        summary = [self.mean, self.std, self.minimum, self.maximum]
        summary += [self.quantiles[level] for level in QUANTILE_LEVELS]
        summary.append(self.fraction_above_tau)
        lines.append("# " + "\t".join(f"{v:.6f}" for v in summary))
        lines.append("# id\tcosine")
        lines += [f"{qid}\t{c:.6f}" for qid, c in self.per_id.items()]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class MatchedExposureReport:
    """Structured transform vs noise baseline at equal mean cosine exposure."""

    sigma: float
    target_cosine: float
    achieved_cosine: float
    seed: int
    metric: str
    comparison: RunComparison
    noisy_queries: EmbeddingSet | None = field(repr=False, compare=False, default=None)

    def to_json_dict(self) -> dict:
        rows = {
            str(k): {
                "recall_noise": self.comparison.recall_a[k],
                "recall_aligned": self.comparison.recall_b[k],
                "delta": self.comparison.delta[k],
                "overlap": self.comparison.mean_overlap[k],
            }
            for k in self.comparison.k_list
        }
        return {
            "per_k": rows,
            "summary": {
                "sigma": self.sigma,
                "target_cosine": self.target_cosine,
                "achieved_cosine": self.achieved_cosine,
            },
            "config": {"seed": self.seed, "metric": self.metric, "note": PROXY_NOTE},
        }

    def to_tsv(self) -> str:
        lines = [
            f"# matched exposure ({PROXY_NOTE})",
            f"# sigma\t{self.sigma:.6g}",
            f"# target_cosine\t{self.target_cosine:.6f}",
            f"# achieved_cosine\t{self.achieved_cosine:.6f}",
            "# k\trecall_noise\trecall_aligned\tdelta\toverlap",
        ]
        for k in self.comparison.k_list:
            lines.append(
                f"{k}\t{self.comparison.recall_a[k]:.6f}\t{self.comparison.recall_b[k]:.6f}"
                f"\t{self.comparison.delta[k]:+.6f}\t{self.comparison.mean_overlap[k]:.6f}"
            )
        return "\n".join(lines) + "\n"


def deviation_report(approx: EmbeddingSet, truth: EmbeddingSet, tau: float = 0.9) -> DeviationReport:
    """Per-id cosine similarity between approximate and true embeddings."""
    if not -1.0 <= tau <= 1.0:
        raise InputError(f"tau must be in [-1, 1], got {tau}")
    _check_aligned(approx, truth)
    cos = row_cosines(
        approx.vectors.astype(np.float64), truth.vectors.astype(np.float64), what="embedding"
    )
    # Summaries reduce over value-sorted cosines so that permuting the
    # (matched) input rows reproduces them bitwise.
    ordered = np.sort(cos)
    quantiles = {
        level: float(v)
        for level, v in zip(
            QUANTILE_LEVELS, np.quantile(ordered, [q / 100 for q in QUANTILE_LEVELS])
        )
    }
    return DeviationReport(
        tau=float(tau),
        mean=float(ordered.mean()),
        std=float(ordered.std()),
        minimum=float(ordered[0]),
        maximum=float(ordered[-1]),
        quantiles=quantiles,
        fraction_above_tau=float(np.mean(ordered > tau)),
        per_id={qid: float(c) for qid, c in zip(approx.ids, cos)},
    )


def add_gaussian_noise(emb_set: EmbeddingSet, sigma: float, seed: int) -> EmbeddingSet:
    """Add iid N(0, sigma^2) noise per coordinate, seeded for exact replay.

    Noise is applied in raw coordinate units (pre-normalization), so sigma
    is an absolute scale relative to the stored vectors.
    """
    if sigma < 0:
        raise InputError(f"sigma must be >= 0, got {sigma}")
    rng = np.random.default_rng(seed)
    noise = sigma * rng.standard_normal(emb_set.vectors.shape)
    vectors = (emb_set.vectors.astype(np.float64) + noise).astype(np.float32)
    return EmbeddingSet(ids=emb_set.ids, vectors=vectors, space_label="approx")


def matched_exposure_comparison(
    truth_corpus: EmbeddingSet,
    truth_queries: EmbeddingSet,
    aligned_queries: EmbeddingSet,
    qrels: Qrels,
    k_list,
    seed: int,
    metric: str = "cosine",
    tolerance: float = MATCH_TOLERANCE,
) -> MatchedExposureReport:
    """Compare structured alignment against noise at matched mean cosine.

    Bisects sigma over [0, 10 * max true-query norm] (at most 40 steps)
    until noise-perturbed true queries reach the aligned queries' mean
    cosine to the truth within ``tolerance``, then evaluates Recall@k of
    both query variants against the same corpus and qrels. The noise
    directions are drawn once from ``seed`` and rescaled between
    iterations, so the calibration is deterministic and monotone.
    """
    _check_aligned(aligned_queries, truth_queries)
    target = deviation_report(aligned_queries, truth_queries).mean

    base = truth_queries.vectors.astype(np.float64)
    rng = np.random.default_rng(seed)
    unit_noise = rng.standard_normal(base.shape)

    def mean_cos(sigma: float) -> float:
        return float(row_cosines(base, base + sigma * unit_noise, what="query").mean())

    lo, hi = 0.0, 10.0 * float(np.max(np.linalg.norm(base, axis=1)))
    floor = mean_cos(hi)
    if floor > target + tolerance:
        raise TargetUnreachableError(
            f"mean cosine stays above {floor:.4f} for sigma up to {hi:.3g}; "
            f"cannot reach target {target:.4f}"
        )
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if mean_cos(mid) > target:
            lo = mid
        else:
            hi = mid
    sigma = 0.5 * (lo + hi)
    achieved = mean_cos(sigma)
    if abs(achieved - target) > tolerance:
        raise TargetUnreachableError(
            f"achieved mean cosine {achieved:.4f} vs target {target:.4f} "
            f"(tolerance {tolerance}, sigma {sigma:.3g})"
        )

    noisy = EmbeddingSet(
        ids=truth_queries.ids,
        vectors=(base + sigma * unit_noise).astype(np.float32),
        space_label="approx",
    )
    k_list = tuple(int(k) for k in k_list)
    depth = max(k_list)
    run_noise = search_topk(truth_corpus, noisy, k=depth, metric=metric)
    run_aligned = search_topk(truth_corpus, aligned_queries, k=depth, metric=metric)
    comparison = compare_runs(run_noise, run_aligned, qrels, k_list)
    return MatchedExposureReport(
        sigma=float(sigma),
        target_cosine=target,
        achieved_cosine=achieved,
        seed=seed,
        metric=metric,
        comparison=comparison,
        noisy_queries=noisy,
    )


def _check_aligned(approx: EmbeddingSet, truth: EmbeddingSet) -> None:
    if approx.ids != truth.ids:
        raise IdMismatchError("approximate and true sets disagree on ids or order")
    if approx.dim != truth.dim:
        raise DimensionMismatchError(
            f"approx dim {approx.dim} != truth dim {truth.dim}; "
            "deviation is only defined within one space"
        )
