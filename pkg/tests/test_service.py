"""Tests for the HTTP service: routes, payloads, and error mapping."""

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient
from steer import __version__, read_emb
from steer.service.app import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


# p = q = 32 keeps corpus cosines concentrated, so ground-truth retrieval
# (and exact linear recovery) yields recall 1.0 with wide margin.
SPEC = {
    "m": 60,
    "p": 32,
    "q": 32,
    "map_kind": "linear-orthogonal",
    "seed": 3,
    "corpus_size": 250,
    "query_count": 15,
    "relevant_per_query": 4,
}


@pytest.fixture(scope="module")
def artifacts(client, tmp_path_factory):
    """Drive the full pipeline over HTTP once; return every path."""
    root = tmp_path_factory.mktemp("service")
    resp = client.post("/synth", json={"spec": SPEC, "out_dir": str(root / "data")})
    assert resp.status_code == 200, resp.text
    files = resp.json()["files"]

    model = str(root / "linear.model")
    resp = client.post(
        "/align",
        json={
            "pairs_local": files["pairs_local"],
            "pairs_server": files["pairs_server"],
            "method": "linear",
            "out": model,
        },
    )
    assert resp.status_code == 200, resp.text
    align_body = resp.json()

    aligned = str(root / "aligned.emb")
    resp = client.post(
        "/transform", json={"model": model, "input": files["queries_local"], "out": aligned}
    )
    assert resp.status_code == 200, resp.text

    run_path = str(root / "run.tsv")
    resp = client.post(
        "/search",
        json={"corpus": files["corpus"], "queries": aligned, "k": 4, "out": run_path},
    )
    assert resp.status_code == 200, resp.text

    return {
        "root": root,
        "files": files,
        "model": model,
        "aligned": aligned,
        "run": run_path,
        "align_body": align_body,
    }


class TestRoutes:
    def test_health(self, client):
        resp = client.get("/health")
        assert resp.status_code == 200
        assert resp.json() == {"status": "ok", "version": __version__}

    def test_align_response_shape(self, artifacts):
        body = artifacts["align_body"]
        assert body["method"] == "linear"
        assert body["source_dim"] == SPEC["p"]
        assert body["target_dim"] == SPEC["q"]
        assert body["final_loss"]["mse"] < 1e-8
        assert body["effective_config"]["metric"] == "cosine"

    def test_transform_wrote_readable_embeddings(self, artifacts):
        aligned = read_emb(artifacts["aligned"], "approx")
        truth = read_emb(artifacts["files"]["queries_true"], "server")
        assert aligned.ids == truth.ids
        assert np.allclose(aligned.vectors, truth.vectors, atol=1e-4)

    def test_eval_recall(self, client, artifacts):
        resp = client.post(
            "/eval/recall",
            json={
                "run": artifacts["run"],
                "qrels": artifacts["files"]["qrels"],
                "k_list": [1, 4],
            },
        )
        assert resp.status_code == 200
        body = resp.json()
        assert [row["k"] for row in body["rows"]] == [1, 4]
        assert body["rows"][1]["recall"] == 1.0
        assert body["missing_queries"] == []
        assert body["tsv"].startswith("#")

    def test_eval_recall_compare(self, client, artifacts):
        resp = client.post(
            "/eval/recall",
            json={
                "run": artifacts["run"],
                "qrels": artifacts["files"]["qrels"],
                "k_list": [4],
                "compare": artifacts["run"],
            },
        )
        assert resp.status_code == 200
        row = resp.json()["rows"][0]
        assert row["delta"] == 0.0
        assert row["overlap"] == 1.0

    def test_eval_privacy(self, client, artifacts):
        resp = client.post(
            "/eval/privacy",
            json={
                "approx": artifacts["aligned"],
                "truth": artifacts["files"]["queries_true"],
                "tau": 0.5,
            },
        )
        assert resp.status_code == 200
        report = resp.json()["report"]
        assert report["config"]["tau"] == 0.5
        assert report["summary"]["count"] == SPEC["query_count"]
        assert report["summary"]["mean"] > 0.999

    def test_eval_matched(self, client, artifacts):
        resp = client.post(
            "/eval/matched",
            json={
                "corpus": artifacts["files"]["corpus"],
                "queries_true": artifacts["files"]["queries_true"],
                "queries_aligned": artifacts["aligned"],
                "qrels": artifacts["files"]["qrels"],
                "k_list": [1, 4],
                "seed": 0,
            },
        )
        assert resp.status_code == 200
        report = resp.json()["report"]
        assert report["summary"]["sigma"] < 1e-3
        assert set(report["per_k"]) == {"1", "4"}

    def test_synth_rejects_spec_and_path_together(self, client, artifacts):
        resp = client.post(
            "/synth",
            json={"spec": SPEC, "spec_path": "x.json", "out_dir": str(artifacts["root"])},
        )
        assert resp.status_code == 400
        body = resp.json()
        assert body["code"] == "config"
        assert body["category"] == "input"

    def test_align_mlp_small_over_http(self, client, artifacts, tmp_path):
        out = str(tmp_path / "mlp.model")
        resp = client.post(
            "/align",
            json={
                "pairs_local": artifacts["files"]["pairs_local"],
                "pairs_server": artifacts["files"]["pairs_server"],
                "method": "mlp-small",
                "out": out,
                "config": {"epochs": 2, "batch_size": 32},
            },
        )
        assert resp.status_code == 200
        body = resp.json()
        p, q = SPEC["p"], SPEC["q"]
        assert body["param_count"] == p * 1024 + 1024 + 1024 * q + q
        assert body["effective_config"]["epochs"] == 2


class TestErrorMapping:
    def test_missing_file_is_400_io(self, client, tmp_path):
        resp = client.post(
            "/transform",
            json={
                "model": str(tmp_path / "none.model"),
                "input": str(tmp_path / "none.emb"),
                "out": str(tmp_path / "o.emb"),
            },
        )
        assert resp.status_code == 400
        body = resp.json()
        assert set(body) == {"code", "category", "message"}
        assert body["code"] == "io"
        assert body["category"] == "input"

    def test_bad_magic_is_400_with_specific_code(self, client, tmp_path, artifacts):
        bad = tmp_path / "bad.emb"
        bad.write_bytes(b"XXXXXXXX" + b"\x00" * 40)
        (tmp_path / "bad.emb.ids").write_text("a\n")
        resp = client.post(
            "/transform",
            json={
                "model": artifacts["model"],
                "input": str(bad),
                "out": str(tmp_path / "o.emb"),
            },
        )
        assert resp.status_code == 400
        assert resp.json()["code"] == "bad-magic"

    def test_divergence_is_422_numerical(self, client, artifacts, tmp_path):
        resp = client.post(
            "/align",
            json={
                "pairs_local": artifacts["files"]["pairs_local"],
                "pairs_server": artifacts["files"]["pairs_server"],
                "method": "mlp-small",
                "out": str(tmp_path / "m.model"),
                "config": {"epochs": 2, "batch_size": 32, "learning_rate": 1e25},
            },
        )
        assert resp.status_code == 422
        body = resp.json()
        assert body["category"] == "numerical"
        assert body["code"] == "training-diverged"
        assert "non-finite" in body["message"]

    def test_unknown_method_is_400(self, client, artifacts, tmp_path):
        resp = client.post(
            "/align",
            json={
                "pairs_local": artifacts["files"]["pairs_local"],
                "pairs_server": artifacts["files"]["pairs_server"],
                "method": "forest",
                "out": str(tmp_path / "m.model"),
            },
        )
        assert resp.status_code == 400
        assert resp.json()["category"] == "input"

    def test_schema_violation_is_422_validation(self, client):
        resp = client.post("/search", json={"corpus": "a.emb"})
        assert resp.status_code == 422  # pydantic validation, not our taxonomy

    def test_extra_fields_rejected(self, client, tmp_path):
        resp = client.post(
            "/synth",
            json={"spec": SPEC, "out_dir": str(tmp_path), "mystery": 1},
        )
        assert resp.status_code == 422

    def test_dim_mismatch_code(self, client, artifacts, tmp_path):
        from conftest import make_set

        from steer import write_emb

        narrow = tmp_path / "narrow.emb"
        write_emb(narrow, make_set(0, 4, 5))  # 5 dims vs the model's p
        resp = client.post(
            "/transform",
            json={
                "model": artifacts["model"],
                "input": str(narrow),
                "out": str(tmp_path / "o.emb"),
            },
        )
        assert resp.status_code == 400
        assert resp.json()["code"] == "dimension-mismatch"
