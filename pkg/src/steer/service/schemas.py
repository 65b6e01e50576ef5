"""Request/response models shared by the service routes and the CLI.

The service is stateless: requests reference artifact paths on the
machine it runs on, responses report what was written or computed. The
CLI builds the same models, so one handler per operation serves both the
in-process and the HTTP path.
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field

METHODS = ("linear", "mlp-small", "mlp-medium", "mlp-base", "mlp-custom")


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ErrorBody(StrictModel):
    """Uniform error shape: stable code plus coarse category for exit codes."""

    code: str
    category: str
    message: str


class AlignRequest(StrictModel):
    pairs_local: str
    pairs_server: str
    method: str = "linear"
    out: str
    log_out: str | None = None
    config_path: str | None = None
    config: dict = Field(default_factory=dict)
    hidden_dims: list[int] | None = None


class AlignResponse(StrictModel):
    out: str
    log_out: str
    method: str
    source_dim: int
    target_dim: int
    param_count: int
    final_loss: dict
    effective_config: dict


class TransformRequest(StrictModel):
    model: str
    input: str
    out: str
    config_path: str | None = None
    config: dict = Field(default_factory=dict)


class TransformResponse(StrictModel):
    out: str
    count: int
    dim: int
    effective_config: dict


class SearchRequest(StrictModel):
    corpus: str
    queries: str
    k: int
    out: str
    config_path: str | None = None
    config: dict = Field(default_factory=dict)


class SearchResponse(StrictModel):
    out: str
    query_count: int
    k: int
    metric: str
    effective_config: dict


class RecallEvalRequest(StrictModel):
    run: str
    qrels: str
    k_list: list[int] = Field(default_factory=lambda: [5, 20, 50, 100, 200, 300])
    compare: str | None = None
    config_path: str | None = None
    config: dict = Field(default_factory=dict)


class RecallEvalResponse(StrictModel):
    rows: list[dict]
    missing_queries: list[str]
    tsv: str
    effective_config: dict


class PrivacyEvalRequest(StrictModel):
    approx: str
    truth: str
    tau: float = 0.9
    config_path: str | None = None
    config: dict = Field(default_factory=dict)


class PrivacyEvalResponse(StrictModel):
    report: dict
    tsv: str
    effective_config: dict


class MatchedEvalRequest(StrictModel):
    corpus: str
    queries_true: str
    queries_aligned: str
    qrels: str
    k_list: list[int] = Field(default_factory=lambda: [5, 20, 50, 100, 200, 300])
    seed: int = 0
    config_path: str | None = None
    config: dict = Field(default_factory=dict)


class MatchedEvalResponse(StrictModel):
    report: dict
    tsv: str
    effective_config: dict


class SynthRequest(StrictModel):
    spec: dict | None = None
    spec_path: str | None = None
    out_dir: str


class SynthResponse(StrictModel):
    files: dict[str, str]
    spec: dict


class HealthResponse(StrictModel):
    status: str
    version: str
