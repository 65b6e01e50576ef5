"""Command-line surface: one subcommand per workflow step.

Each command builds the same request model the HTTP service accepts and
runs it in-process by default, so one command is one process and results
are deterministic given identical files, config, and seed. Pass
``--server URL`` (or set ``STEER_SERVER``) to send the request to a
running service instead; files are then read and written on the server's
filesystem.

Exit codes: 0 success, 2 input/validation error, 3 numerical/training
failure.
"""

from __future__ import annotations

import json
import os
import sys

import click

from . import __version__, ops
from .errors import NumericalError, SteerError
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

DEFAULT_K_GRID = "5,20,50,100,200,300"

_ROUTES = {
    "/align": (ops.align, AlignResponse),
    "/transform": (ops.transform, TransformResponse),
    "/search": (ops.search, SearchResponse),
    "/eval/recall": (ops.eval_recall, RecallEvalResponse),
    "/eval/privacy": (ops.eval_privacy, PrivacyEvalResponse),
    "/eval/matched": (ops.eval_matched, MatchedEvalResponse),
    "/synth": (ops.synth, SynthResponse),
}

_CONFIG_FLAGS = (
    ("--alpha", "alpha", float, "cosine-distance weight"),
    ("--beta", "beta", float, "huber weight"),
    ("--gamma", "gamma", float, "similarity-penalty weight"),
    ("--tau", "tau", float, "similarity-penalty threshold"),
    ("--huber-delta", "huber_delta", float, "huber transition point"),
    ("--learning-rate", "learning_rate", float, "Adam learning rate"),
    ("--epochs", "epochs", int, "training epochs"),
    ("--batch-size", "batch_size", int, "training batch size"),
    ("--seed", "seed", int, "init/shuffle seed"),
    ("--ridge-lambda", "ridge_lambda", float, "linear-fit ridge strength"),
)


def _config_options(exclude=()):
    def wrap(fn):
        fn = click.option(
            "--config",
            "config_path",
            type=click.Path(dir_okay=False),
            default=None,
            help="JSON config file; flags override its values.",
        )(fn)
        for flag, name, ftype, help_text in _CONFIG_FLAGS:
            if name in exclude:
                continue
            fn = click.option(flag, name, type=ftype, default=None, help=help_text)(fn)
        if "metric" not in exclude:
            fn = click.option(
                "--metric",
                type=click.Choice(["cosine", "dot", "euclidean"]),
                default=None,
                help="similarity metric",
            )(fn)
        if "shuffle" not in exclude:
            fn = click.option("--shuffle/--no-shuffle", "shuffle", default=None)(fn)
        if "normalize" not in exclude:
            fn = click.option("--normalize/--no-normalize", "normalize", default=None)(fn)
        return fn

    return wrap


def _overrides(kwargs: dict) -> dict:
    keys = {name for _, name, _, _ in _CONFIG_FLAGS} | {"metric", "shuffle", "normalize"}
    return {k: v for k, v in kwargs.items() if k in keys and v is not None}


def _parse_k_list(text: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise click.BadParameter("k list must not be empty")
    return values


def _dispatch(ctx: click.Context, route: str, request, response_cls):
    server = (ctx.obj or {}).get("server") or os.environ.get("STEER_SERVER", "").strip()
    if not server:
        handler, _ = _ROUTES[route]
        return handler(request)

    import httpx

    url = server.rstrip("/") + route
    try:
        resp = httpx.post(url, json=request.model_dump(), timeout=600.0)
    except (httpx.HTTPError, httpx.InvalidURL) as exc:
        click.echo(f"error (connection): {server}: {exc}", err=True)
        sys.exit(2)
    if resp.status_code >= 400:
        try:
            body = resp.json()
        except ValueError:
            body = {}
        code = body.get("code", "http")
        message = body.get("message", resp.text.strip())
        category = body.get("category", "input" if resp.status_code < 500 else "error")
        click.echo(f"error ({code}): {message}", err=True)
        sys.exit(3 if category == "numerical" else 2)
    return response_cls.model_validate(resp.json())


def _emit_json(payload) -> None:
    click.echo(json.dumps(payload, indent=2, sort_keys=True))


@click.group()
@click.version_option(version=__version__, prog_name="steer")
@click.option(
    "--server",
    default=None,
    envvar="STEER_SERVER",
    help="Send commands to a running steer service instead of executing in-process.",
)
@click.pass_context
def cli(ctx: click.Context, server: str | None) -> None:
    """Privacy-preserving vector retrieval via embedding-space alignment."""
    ctx.obj = {"server": server}


@cli.command()
@click.option("--pairs-local", required=True, type=click.Path(), help="local-space pair EmbFile")
@click.option("--pairs-server", required=True, type=click.Path(), help="server-space pair EmbFile")
@click.option("--method", type=click.Choice(METHODS), default="linear", show_default=True)
@click.option("--out", required=True, type=click.Path(), help="output ModelFile")
@click.option("--log-out", type=click.Path(), default=None, help="training-log TSV (default <out>.log.tsv)")
@click.option("--hidden-dims", default=None, help="comma-separated hidden sizes for mlp-custom")
@_config_options()
@click.pass_context
def align(ctx, pairs_local, pairs_server, method, out, log_out, hidden_dims, config_path, **kwargs):
    """Fit an alignment model from paired embeddings."""
    dims = _parse_k_list(hidden_dims) if hidden_dims else None
    request = AlignRequest(
        pairs_local=pairs_local,
        pairs_server=pairs_server,
        method=method,
        out=out,
        log_out=log_out,
        config_path=config_path,
        config=_overrides(kwargs),
        hidden_dims=dims,
    )
    response = _dispatch(ctx, "/align", request, AlignResponse)
    _emit_json(response.model_dump())


@cli.command()
@click.option("--model", required=True, type=click.Path(), help="ModelFile to apply")
@click.option("--in", "input_path", required=True, type=click.Path(), help="input EmbFile")
@click.option("--out", required=True, type=click.Path(), help="output EmbFile")
@_config_options(exclude=("metric",))
@click.pass_context
def transform(ctx, model, input_path, out, config_path, **kwargs):
    """Apply a stored alignment model to an embedding file."""
    request = TransformRequest(
        model=model,
        input=input_path,
        out=out,
        config_path=config_path,
        config=_overrides(kwargs),
    )
    response = _dispatch(ctx, "/transform", request, TransformResponse)
    _emit_json(response.model_dump())


@cli.command()
@click.option("--corpus", required=True, type=click.Path(), help="corpus EmbFile")
@click.option("--queries", required=True, type=click.Path(), help="query EmbFile")
@click.option("--k", required=True, type=int)
@click.option("--out", required=True, type=click.Path(), help="output run TSV")
@_config_options()
@click.pass_context
def search(ctx, corpus, queries, k, out, config_path, **kwargs):
    """Exact top-k retrieval of corpus docs for every query."""
    request = SearchRequest(
        corpus=corpus,
        queries=queries,
        k=k,
        out=out,
        config_path=config_path,
        config=_overrides(kwargs),
    )
    response = _dispatch(ctx, "/search", request, SearchResponse)
    _emit_json(response.model_dump())


@cli.group(name="eval")
def eval_group() -> None:
    """Evaluation commands: recall, privacy, matched."""


@eval_group.command(name="recall")
@click.option("--run", required=True, type=click.Path(), help="run TSV")
@click.option("--qrels", required=True, type=click.Path(), help="qrels TSV")
@click.option("--k", "k_text", default=DEFAULT_K_GRID, show_default=True, help="comma-separated k values")
@click.option("--compare", type=click.Path(), default=None, help="second run TSV for paired deltas")
@click.option("--out", type=click.Path(), default=None, help="also write the table here")
@click.option("--json", "as_json", is_flag=True, help="print JSON instead of TSV")
@_config_options()
@click.pass_context
def eval_recall(ctx, run, qrels, k_text, compare, out, as_json, config_path, **kwargs):
    """Recall@k table for a run, optionally compared with a second run."""
    request = RecallEvalRequest(
        run=run,
        qrels=qrels,
        k_list=_parse_k_list(k_text),
        compare=compare,
        config_path=config_path,
        config=_overrides(kwargs),
    )
    response = _dispatch(ctx, "/eval/recall", request, RecallEvalResponse)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(response.tsv)
    if as_json:
        _emit_json(response.model_dump(exclude={"tsv"}))
    else:
        click.echo(response.tsv, nl=False)


@eval_group.command(name="privacy")
@click.option("--approx", required=True, type=click.Path(), help="approximate EmbFile")
@click.option("--truth", required=True, type=click.Path(), help="true EmbFile")
@click.option("--tau", type=float, default=0.9, show_default=True, help="exposure threshold")
@click.option("--json-out", type=click.Path(), default=None, help="write the JSON report here")
@click.option("--json", "as_json", is_flag=True, help="print JSON instead of TSV")
@click.pass_context
def eval_privacy(ctx, approx, truth, tau, json_out, as_json):
    """Cosine deviation report between approximate and true embeddings."""
    request = PrivacyEvalRequest(approx=approx, truth=truth, tau=tau)
    response = _dispatch(ctx, "/eval/privacy", request, PrivacyEvalResponse)
    if json_out:
        with open(json_out, "w", encoding="utf-8") as fh:
            json.dump(response.report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if as_json:
        _emit_json(response.report)
    else:
        click.echo(response.tsv, nl=False)


@eval_group.command(name="matched")
@click.option("--corpus", required=True, type=click.Path(), help="true-server corpus EmbFile")
@click.option("--queries-true", required=True, type=click.Path(), help="true-server query EmbFile")
@click.option("--queries-aligned", required=True, type=click.Path(), help="aligned query EmbFile")
@click.option("--qrels", required=True, type=click.Path(), help="qrels TSV")
@click.option("--k", "k_text", default=DEFAULT_K_GRID, show_default=True, help="comma-separated k values")
@click.option("--seed", "noise_seed", type=int, default=0, show_default=True, help="noise seed")
@click.option("--json-out", type=click.Path(), default=None, help="write the JSON report here")
@click.option("--json", "as_json", is_flag=True, help="print JSON instead of TSV")
@_config_options(exclude=("seed",))
@click.pass_context
def eval_matched(
    ctx, corpus, queries_true, queries_aligned, qrels, k_text, noise_seed, json_out, as_json,
    config_path, **kwargs,
):
    """Structured alignment vs noise calibrated to equal mean cosine."""
    request = MatchedEvalRequest(
        corpus=corpus,
        queries_true=queries_true,
        queries_aligned=queries_aligned,
        qrels=qrels,
        k_list=_parse_k_list(k_text),
        seed=noise_seed,
        config_path=config_path,
        config=_overrides(kwargs),
    )
    response = _dispatch(ctx, "/eval/matched", request, MatchedEvalResponse)
    if json_out:
        with open(json_out, "w", encoding="utf-8") as fh:
            json.dump(response.report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if as_json:
        _emit_json(response.report)
    else:
        click.echo(response.tsv, nl=False)


@cli.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(), help="SynthSpec JSON file")
@click.option("--out-dir", required=True, type=click.Path(), help="directory for the artifacts")
@click.pass_context
def synth(ctx, spec_path, out_dir):
    """Generate a synthetic alignment + retrieval scenario from a spec."""
    request = SynthRequest(spec_path=spec_path, out_dir=out_dir)
    response = _dispatch(ctx, "/synth", request, SynthResponse)
    _emit_json(response.model_dump())


def main(argv=None) -> None:
    try:
        cli.main(args=argv, prog_name="steer", standalone_mode=True)
    except NumericalError as exc:
        click.echo(f"error ({exc.code}): {exc}", err=True)
        sys.exit(3)
    except SteerError as exc:
        click.echo(f"error ({exc.code}): {exc}", err=True)
        sys.exit(2)
    except OSError as exc:
        click.echo(f"error (io): {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    main()
