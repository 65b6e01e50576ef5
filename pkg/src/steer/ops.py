"""One handler per command, shared by the CLI and the HTTP service.

Each handler takes a pydantic request, does the file IO and math, and
returns a pydantic response. Errors surface as SteerError subclasses;
the CLI maps them to exit codes and the service to HTTP status codes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .config import resolve_config
from .core import AlignmentPairs, l2_normalize
from .errors import ConfigError, InputError
from .formats import (
    read_emb,
    read_model,
    read_qrels,
    read_run,
    write_emb,
    write_model,
    write_qrels,
    write_run,
    write_train_log,
)
from .linear import LinearMap, apply_linear, fit_linear
from .mlp import LossBreakdown, composite_loss, apply_mlp, train_mlp
from .privacy import deviation_report, matched_exposure_comparison
from .retrieval import compare_runs, recall_at_k, search_topk
from .service.schemas import (
    METHODS,
    AlignRequest,
    AlignResponse,
    MatchedEvalRequest,
    MatchedEvalResponse,
    PrivacyEvalRequest,
    PrivacyEvalResponse,
    RecallEvalRequest,
    RecallEvalResponse,
    SearchRequest,
    SearchResponse,
    SynthRequest,
    SynthResponse,
    TransformRequest,
    TransformResponse,
)
from .synth import SynthSpec, generate_retrieval_task, write_ground_truth


def align(req: AlignRequest) -> AlignResponse:
    cfg = resolve_config(req.config_path, **req.config)
    local = read_emb(req.pairs_local, "local")
    server = read_emb(req.pairs_server, "server")
    if cfg.normalize:
        local, server = l2_normalize(local), l2_normalize(server)
    pairs = AlignmentPairs(local=local, server=server)
    log_out = req.log_out or str(req.out) + ".log.tsv"

    if req.method == "linear":
        model = fit_linear(pairs, cfg.ridge_lambda)
        pred = local.vectors.astype(np.float64) @ model.matrix.astype(np.float64)
        final = composite_loss(pred, server.vectors.astype(np.float64), cfg.train_config())
        history = [final]
        write_model(req.out, model)
    elif req.method in METHODS:
        preset = req.method.removeprefix("mlp-")
        if preset == "custom":
            if not req.hidden_dims:
                raise InputError("method mlp-custom requires hidden_dims")
            layer_spec = [local.dim, *req.hidden_dims, server.dim]
        else:
            layer_spec = preset
        model, history = train_mlp(pairs, layer_spec, cfg.train_config())
        final = history[-1]
        write_model(req.out, model, cfg.train_config())
    else:
        raise InputError(f"unknown method {req.method!r}, choose from {METHODS}")

    write_train_log(
        log_out, history, header_extra={"method": req.method, "config": cfg.to_json()}
    )
    return AlignResponse(
        out=str(req.out),
        log_out=str(log_out),
        method=req.method,
        source_dim=model.source_dim,
        target_dim=model.target_dim,
        param_count=model.param_count,
        final_loss=_loss_dict(final),
        effective_config=cfg.to_dict(),
    )


def transform(req: TransformRequest) -> TransformResponse:
    cfg = resolve_config(req.config_path, **req.config)
    model = read_model(req.model)
    emb_set = read_emb(req.input, "local")
    if cfg.normalize:
        emb_set = l2_normalize(emb_set)
    if isinstance(model, LinearMap):
        out_set = apply_linear(model, emb_set)
    else:
        out_set = apply_mlp(model, emb_set)
    write_emb(req.out, out_set)
    return TransformResponse(
        out=str(req.out), count=out_set.count, dim=out_set.dim, effective_config=cfg.to_dict()
    )


def search(req: SearchRequest) -> SearchResponse:
    cfg = resolve_config(req.config_path, **req.config)
    corpus = read_emb(req.corpus, "server")
    queries = read_emb(req.queries, "approx")
    if cfg.normalize:
        corpus, queries = l2_normalize(corpus), l2_normalize(queries)
    run = search_topk(corpus, queries, req.k, cfg.metric)
    write_run(req.out, run, header_extra={"config": cfg.to_json()})
    return SearchResponse(
        out=str(req.out),
        query_count=len(run.results),
        k=run.k,
        metric=run.metric,
        effective_config=cfg.to_dict(),
    )


def eval_recall(req: RecallEvalRequest) -> RecallEvalResponse:
    cfg = resolve_config(req.config_path, **req.config)
    run = read_run(req.run)
    qrels = read_qrels(req.qrels)
    k_list = list(req.k_list)
    if not k_list:
        raise InputError("k_list must not be empty")

    if req.compare:
        other = read_run(req.compare)
        comp = compare_runs(run, other, qrels, k_list)
        rows = [
            {
                "k": k,
                "recall_a": comp.recall_a[k],
                "recall_b": comp.recall_b[k],
                "delta": comp.delta[k],
                "overlap": comp.mean_overlap[k],
            }
            for k in comp.k_list
        ]
        missing = sorted(set(run.results) - set(qrels.judgments))
        lines = [f"# config\t{cfg.to_json()}", "# k\trecall_a\trecall_b\tdelta\toverlap"]
        for row in rows:
            lines.append(
                f"{row['k']}\t{row['recall_a']:.6f}\t{row['recall_b']:.6f}"
                f"\t{row['delta']:+.6f}\t{row['overlap']:.6f}"
            )
    else:
        reports = [recall_at_k(run, qrels, k) for k in k_list]
        missing = sorted(reports[0].missing_queries)
        rows = [
            {"k": rep.k, "recall": rep.mean, "evaluated": rep.evaluated} for rep in reports
        ]
        lines = [f"# config\t{cfg.to_json()}"]
        if missing:
            lines.append(f"# missing_queries\t{len(missing)}")
        lines.append("# k\trecall\tevaluated")
        for row in rows:
            lines.append(f"{row['k']}\t{row['recall']:.6f}\t{row['evaluated']}")
    return RecallEvalResponse(
        rows=rows,
        missing_queries=missing,
        tsv="\n".join(lines) + "\n",
        effective_config=cfg.to_dict(),
    )


def eval_privacy(req: PrivacyEvalRequest) -> PrivacyEvalResponse:
    cfg = resolve_config(req.config_path, **req.config)
    approx = read_emb(req.approx, "approx")
    truth = read_emb(req.truth, "server")
    report = deviation_report(approx, truth, tau=req.tau)
    return PrivacyEvalResponse(
        report=report.to_json_dict(), tsv=report.to_tsv(), effective_config=cfg.to_dict()
    )


def eval_matched(req: MatchedEvalRequest) -> MatchedEvalResponse:
    cfg = resolve_config(req.config_path, **req.config)
    corpus = read_emb(req.corpus, "server")
    queries_true = read_emb(req.queries_true, "server")
    queries_aligned = read_emb(req.queries_aligned, "approx")
    qrels = read_qrels(req.qrels)
    report = matched_exposure_comparison(
        corpus, queries_true, queries_aligned, qrels, req.k_list, req.seed, metric=cfg.metric
    )
    return MatchedEvalResponse(
        report=report.to_json_dict(), tsv=report.to_tsv(), effective_config=cfg.to_dict()
    )


def synth(req: SynthRequest) -> SynthResponse:
    if (req.spec is None) == (req.spec_path is None):
        raise ConfigError("provide exactly one of spec or spec_path")
    if req.spec_path:
        try:
            data = json.loads(Path(req.spec_path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{req.spec_path}: spec is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{req.spec_path}: spec must be a JSON object")
    else:
        data = req.spec
    spec = SynthSpec.from_dict(data)

    task = generate_retrieval_task(spec)
    out_dir = Path(req.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {
        "pairs_local": out_dir / "pairs_local.emb",
        "pairs_server": out_dir / "pairs_server.emb",
        "corpus": out_dir / "corpus.emb",
        "queries_local": out_dir / "queries_local.emb",
        "queries_true": out_dir / "queries_true.emb",
        "qrels": out_dir / "qrels.tsv",
        "ground_truth": out_dir / "groundtruth.map",
        "spec": out_dir / "spec.json",
    }
    write_emb(files["pairs_local"], task.pairs.local)
    write_emb(files["pairs_server"], task.pairs.server)
    write_emb(files["corpus"], task.corpus)
    write_emb(files["queries_local"], task.queries_local)
    write_emb(files["queries_true"], task.queries_true)
    write_qrels(files["qrels"], task.qrels)
    write_ground_truth(files["ground_truth"], task.ground_truth)
    files["spec"].write_text(json.dumps(spec.to_dict(), indent=2) + "\n", encoding="utf-8")
    return SynthResponse(
        files={name: str(path) for name, path in files.items()}, spec=spec.to_dict()
    )


def _loss_dict(breakdown: LossBreakdown) -> dict:
    return {
        "mse": breakdown.mse,
        "cos_dist": breakdown.cos_dist,
        "huber": breakdown.huber,
        "sim_penalty": breakdown.sim_penalty,
        "total": breakdown.total,
    }
