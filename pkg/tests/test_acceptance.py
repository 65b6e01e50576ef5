"""Acceptance suite: every release criterion at its stated tolerance.

Each criterion is one test that prints a single ``ACCEPTANCE <n> PASS``
or ``FAIL`` line (run with ``pytest -s`` to see them live; pytest shows
captured output for failures either way). Tolerances are pinned here,
not tuned at runtime.
"""

import math
import time

import numpy as np
import pytest
from conftest import make_pairs
from test_mlp import (
    GRADCHECK_CFG,
    fd_gradients,
    gradcheck_case,
    kink_safe,
    max_rel_err,
)
from test_retrieval import oracle_topk

from steer import (
    BadMagicError,
    EmbeddingSet,
    FileFormatError,
    HeaderError,
    IdCountMismatchError,
    MlpModel,
    ParamCountMismatchError,
    Qrels,
    QrelsParseError,
    RetrievalRun,
    SynthSpec,
    TrainConfig,
    TruncatedPayloadError,
    UnknownKindError,
    VersionMismatchError,
    apply_linear,
    apply_mlp,
    composite_loss,
    fit_linear,
    init_mlp,
    loss_gradient,
    matched_exposure_comparison,
    read_emb,
    read_model,
    read_qrels,
    read_run,
    recall_at_k,
    search_topk,
    train_mlp,
    write_emb,
    write_model,
    write_qrels,
    write_run,
)
from steer.synth import generate_retrieval_task


def report(n: int, desc: str, ok: bool, detail: str = "") -> None:
    line = f"ACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {desc}"
    if detail:
        line += f" [{detail}]"
    print(line)
    assert ok, line


# ------------------------------------------------- 1: exact linear recovery

def test_criterion_1_exact_linear_recovery():
    t0 = time.time()
    spec = SynthSpec(
        m=500,
        p=64,
        q=96,
        map_kind="linear-random",
        seed=0,
        corpus_size=2000,
        query_count=50,
        relevant_per_query=5,
    )
    task = generate_retrieval_task(spec)
    model = fit_linear(task.pairs)
    frob = float(
        np.linalg.norm(model.matrix.astype(np.float64) - task.ground_truth.matrix)
    )
    aligned = apply_linear(model, task.queries_local)
    lists_identical = True
    for k in (1, 5, 20):
        truth_run = search_topk(task.corpus, task.queries_true, k=k)
        aligned_run = search_topk(task.corpus, aligned, k=k)
        for qid in task.queries_true.ids:
            if truth_run.top(qid, k) != aligned_run.top(qid, k):
                lists_identical = False
    elapsed = time.time() - t0
    ok = lists_identical and frob < 1e-5 and elapsed < 60.0
    report(
        1,
        "noise-free linear alignment recovers the map and the exact top-k lists",
        ok,
        f"frobenius {frob:.2e}, identical {lists_identical}, {elapsed:.1f}s",
    )


# -------------------------------------------- 2: residual orthogonality

def test_criterion_2_residual_orthogonality():
    worst_ratio = 0.0
    for seed in range(20):
        pairs = make_pairs(seed, m=120, p=10, q=14, noise=0.3)
        model = fit_linear(pairs)
        e_l = pairs.local.vectors.astype(np.float64)
        e_s = pairs.server.vectors.astype(np.float64)
        resid = e_l @ model.matrix.astype(np.float64) - e_s
        lhs = float(np.max(np.abs(e_l.T @ resid)))
        bound = 1e-4 * max(1.0, float(np.max(np.abs(e_l.T @ e_s))))
        worst_ratio = max(worst_ratio, lhs / bound)
    ok = worst_ratio <= 1.0
    report(
        2,
        "least-squares residuals are orthogonal to the design on 20 seeds",
        ok,
        f"worst lhs/bound {worst_ratio:.3f}",
    )


# -------------------------------------------- 3: gradients vs central FD

def test_criterion_3_gradients_match_central_differences():
    dim_families = ([4, 5, 3], [6, 8, 4], [3, 10, 2], [5, 4, 4, 3], [8, 6, 5])
    checked = 0
    worst = 0.0
    for fi, dims in enumerate(dim_families):
        hits = 0
        for seed in range(60):
            model, x, y = gradcheck_case(dims, seed=seed + 100 * fi)
            assert sum(w.size + b.size for w, b in zip(model.weights, model.biases)) <= 1000
            if not kink_safe(model, x, y, GRADCHECK_CFG):
                continue
            analytic = [g for pair in loss_gradient(model, x, y, GRADCHECK_CFG) for g in pair]
            fd = fd_gradients(model, x, y, GRADCHECK_CFG, h=1e-3)
            worst = max(worst, max_rel_err(analytic, fd))
            checked += 1
            hits += 1
            if hits >= 4:
                break
    ok = checked >= 20 and worst < 1e-3
    report(
        3,
        "analytic gradients match central differences on 20 small models",
        ok,
        f"{checked} models, worst rel err {worst:.2e}",
    )


# -------------------------------------------- 4: closed-form loss values

def test_criterion_4_closed_form_loss_components():
    checks = []

    # similarity penalty vanishes when the threshold sits at 1
    rng = np.random.default_rng(0)
    pred = rng.standard_normal((6, 5))
    target = rng.standard_normal((6, 5))
    at_one = composite_loss(pred, target, TrainConfig(tau=1.0)).sim_penalty
    checks.append(abs(at_one - 0.0) <= 1e-9)

    # cosine 0.9 against threshold 0.8 leaves exactly 0.1
    pred = np.array([[1.0, 0.0], [2.0, 0.0]])
    target = np.array(
        [[0.9, math.sqrt(1.0 - 0.81)], [1.8, 2.0 * math.sqrt(1.0 - 0.81)]]
    )
    at_nine = composite_loss(pred, target, TrainConfig(tau=0.8)).sim_penalty
    checks.append(abs(at_nine - 0.1) <= 1e-9)

    # huber of a uniform 0.5 residual at delta 1 is 0.5 * 0.5^2
    target = np.ones((3, 4))
    pred = target + 0.5
    hub = composite_loss(pred, target, TrainConfig(huber_delta=1.0)).huber
    checks.append(abs(hub - 0.125) <= 1e-9)

    ok = all(checks)
    report(
        4,
        "similarity penalty and huber hit their closed-form values within 1e-9",
        ok,
        f"checks {checks}",
    )


# ------------------------------- 5 and 6: nonlinear-family training runs

# One family serves both nonlinear criteria. The privacy comparison uses
# the similarity-capped training recipe; the capacity comparison trains
# with default weights on a target geometry (p < q) whose tanh blend a
# linear map provably truncates.
PRIVACY_SPEC = dict(
    m=600,
    p=8,
    q=8,
    map_kind="nonlinear",
    nonlinearity_strength=0.7,
    corpus_size=5000,
    query_count=100,
    relevant_per_query=5,
)
PRIVACY_TRAIN = dict(epochs=60, batch_size=64, learning_rate=1e-3, tau=0.9, gamma=50.0)

CAPACITY_SPEC = dict(
    m=300,
    p=4,
    q=24,
    map_kind="nonlinear",
    nonlinearity_strength=0.7,
    corpus_size=2000,
    query_count=50,
    relevant_per_query=5,
)
CAPACITY_TRAIN = dict(epochs=80, batch_size=64, learning_rate=1e-3)

SEEDS = tuple(range(10))


def test_criterion_5_alignment_beats_matched_noise():
    deltas = []
    matched = []
    for seed in SEEDS:
        task = generate_retrieval_task(SynthSpec(seed=seed, **PRIVACY_SPEC))
        model, _ = train_mlp(task.pairs, "base", TrainConfig(seed=seed, **PRIVACY_TRAIN))
        aligned = apply_mlp(model, task.queries_local)
        rep = matched_exposure_comparison(
            task.corpus, task.queries_true, aligned, task.qrels, [20], seed=seed
        )
        deltas.append(rep.comparison.recall_b[20] - rep.comparison.recall_a[20])
        matched.append(abs(rep.achieved_cosine - rep.target_cosine) <= 0.01)
    strict_wins = all(d > 0 for d in deltas)
    median = float(np.median(deltas))
    ok = all(matched) and strict_wins and median >= 0.10
    report(
        5,
        "mlp-base beats exposure-matched noise on every nonlinear seed",
        ok,
        f"median advantage {median:+.3f}, wins {sum(d > 0 for d in deltas)}/10",
    )


def test_criterion_6_mlp_base_matches_linear_on_nonlinear_data():
    lin_means = []
    mlp_means = []
    for seed in SEEDS:
        task = generate_retrieval_task(SynthSpec(seed=seed, **CAPACITY_SPEC))
        lin = apply_linear(fit_linear(task.pairs), task.queries_local)
        lin_means.append(
            recall_at_k(search_topk(task.corpus, lin, k=20), task.qrels, 20).mean
        )
        model, _ = train_mlp(task.pairs, "base", TrainConfig(seed=seed, **CAPACITY_TRAIN))
        mlp = apply_mlp(model, task.queries_local)
        mlp_means.append(
            recall_at_k(search_topk(task.corpus, mlp, k=20), task.qrels, 20).mean
        )
    lin_mean = float(np.mean(lin_means))
    mlp_mean = float(np.mean(mlp_means))
    ok = mlp_mean >= lin_mean
    report(
        6,
        "mean Recall@20 of mlp-base is at least linear's on nonlinear data",
        ok,
        f"mlp {mlp_mean:.3f} vs linear {lin_mean:.3f} over 10 seeds",
    )


# -------------------------------------------- 7: retrieval oracle

def test_criterion_7_retrieval_matches_brute_force_oracle():
    rng = np.random.default_rng(2024)
    metrics = ("cosine", "dot", "euclidean")
    mismatches = 0
    monotone = True
    for case in range(50):
        n_docs = int(rng.integers(20, 1001))
        dim = int(rng.integers(3, 17))
        n_queries = int(rng.integers(3, 9))
        metric = metrics[case % 3]
        corpus = EmbeddingSet(
            [f"d{i:04d}" for i in range(n_docs)],
            rng.standard_normal((n_docs, dim)).astype(np.float32),
            "server",
        )
        queries = EmbeddingSet(
            [f"q{i}" for i in range(n_queries)],
            rng.standard_normal((n_queries, dim)).astype(np.float32),
            "approx",
        )
        k = int(rng.integers(1, min(20, n_docs) + 1))
        run = search_topk(corpus, queries, k=k, metric=metric)
        expected = oracle_topk(corpus, queries, k, metric)
        for qid in queries.ids:
            if run.top(qid, k) != expected[qid]:
                mismatches += 1

        # recall from a deep run must be non-decreasing in k
        deep = search_topk(corpus, queries, k=min(50, n_docs), metric=metric)
        qrels = Qrels(
            {
                qid: frozenset(
                    str(corpus.ids[j])
                    for j in rng.choice(n_docs, size=int(rng.integers(1, 6)), replace=False)
                )
                for qid in queries.ids
            }
        )
        grid = [k for k in (1, 2, 5, 10, 20, 50) if k <= deep.k]
        recalls = [recall_at_k(deep, qrels, k).mean for k in grid]
        if any(b < a - 1e-12 for a, b in zip(recalls, recalls[1:])):
            monotone = False
    ok = mismatches == 0 and monotone
    report(
        7,
        "top-k search matches the exhaustive oracle on 50 corpora",
        ok,
        f"{mismatches} mismatching queries, recall monotone {monotone}",
    )


# -------------------------------------------- 8: file format round-trips

def _random_ids(rng, n):
    pool = ["doc", "věc", "query", "émb", "x"]
    return [f"{pool[int(rng.integers(len(pool)))]}-{i:05d}" for i in range(n)]


def test_criterion_8_formats_round_trip_and_fail_typed(tmp_path):
    rng = np.random.default_rng(99)
    failures = []

    instances = 0
    # 40 embedding files
    for i in range(40):
        n, d = int(rng.integers(1, 40)), int(rng.integers(1, 24))
        original = EmbeddingSet(
            _random_ids(rng, n), rng.standard_normal((n, d)).astype(np.float32), "local"
        )
        path = tmp_path / f"emb{i}.emb"
        write_emb(path, original)
        back = read_emb(path, "local")
        if back.ids != original.ids or not np.array_equal(back.vectors, original.vectors):
            failures.append(f"emb {i}")
        instances += 1

    # 15 linear + 15 mlp model files
    for i in range(15):
        p, q = int(rng.integers(1, 12)), int(rng.integers(1, 12))
        pairs = make_pairs(i, m=max(p, q) + 8, p=p, q=q, noise=0.1)
        model = fit_linear(pairs)
        path = tmp_path / f"lin{i}.model"
        write_model(path, model)
        back = read_model(path)
        if not np.array_equal(back.matrix, model.matrix):
            failures.append(f"linear model {i}")
        instances += 1
    for i in range(15):
        dims = [int(rng.integers(2, 8)) for _ in range(int(rng.integers(2, 5)))]
        model = init_mlp(dims, seed=i)
        path = tmp_path / f"mlp{i}.model"
        write_model(path, model, TrainConfig(seed=i))
        back = read_model(path)
        same = isinstance(back, MlpModel) and all(
            np.array_equal(a, b) for a, b in zip(back.weights, model.weights)
        ) and all(np.array_equal(a, b) for a, b in zip(back.biases, model.biases))
        if not same:
            failures.append(f"mlp model {i}")
        instances += 1

    # 15 qrels files
    for i in range(15):
        n_q = int(rng.integers(1, 10))
        judgments = {
            f"q{j}": frozenset(f"d{int(x)}" for x in rng.integers(0, 50, size=int(rng.integers(1, 6))))
            for j in range(n_q)
        }
        qrels = Qrels(judgments)
        path = tmp_path / f"qrels{i}.tsv"
        write_qrels(path, qrels)
        if read_qrels(path).judgments != qrels.judgments:
            failures.append(f"qrels {i}")
        instances += 1

    # 15 run files
    for i in range(15):
        n_docs, n_q = int(rng.integers(5, 30)), int(rng.integers(1, 6))
        k = int(rng.integers(1, min(6, n_docs) + 1))
        corpus = EmbeddingSet(
            [f"d{j}" for j in range(n_docs)],
            rng.standard_normal((n_docs, 6)).astype(np.float32),
            "server",
        )
        queries = EmbeddingSet(
            [f"q{j}" for j in range(n_q)],
            rng.standard_normal((n_q, 6)).astype(np.float32),
            "approx",
        )
        run = search_topk(corpus, queries, k=k, metric=("cosine", "dot", "euclidean")[i % 3])
        path = tmp_path / f"run{i}.tsv"
        write_run(path, run)
        back = read_run(path)
        if back.results != run.results or back.metric != run.metric or back.k != run.k:
            failures.append(f"run {i}")
        instances += 1

    # corruption taxonomy: every damage class raises its typed error
    emb_path = tmp_path / "victim.emb"
    victim = EmbeddingSet(["a", "b"], np.ones((2, 3), np.float32), "local")
    write_emb(emb_path, victim)
    raw = emb_path.read_bytes()

    def expect(exc_type, label, mutate):
        bad = tmp_path / "bad.emb"
        bad.write_bytes(mutate(raw))
        ids_src = emb_path.parent / (emb_path.name + ".ids")
        (tmp_path / "bad.emb.ids").write_text(ids_src.read_text())
        try:
            read_emb(bad, "local")
        except exc_type:
            return
        except Exception as exc:  # wrong type is a taxonomy failure
            failures.append(f"{label}: raised {type(exc).__name__}")
            return
        failures.append(f"{label}: no error raised")

    expect(BadMagicError, "bad magic", lambda b: b"XXXXXXXX" + b[8:])
    expect(VersionMismatchError, "bad version", lambda b: b[:8] + b"\x09\x00\x00\x00" + b[12:])
    expect(TruncatedPayloadError, "truncated payload", lambda b: b[:-4])

    # id sidecar mismatches
    short_ids = tmp_path / "short.emb"
    short_ids.write_bytes(raw)
    (tmp_path / "short.emb.ids").write_text("a\n")
    try:
        read_emb(short_ids, "local")
        failures.append("id count: no error raised")
    except IdCountMismatchError:
        pass
    except Exception as exc:
        failures.append(f"id count: raised {type(exc).__name__}")

    orphan = tmp_path / "orphan.emb"
    orphan.write_bytes(raw)
    try:
        read_emb(orphan, "local")
        failures.append("missing sidecar: no error raised")
    except FileFormatError:
        pass
    except Exception as exc:
        failures.append(f"missing sidecar: raised {type(exc).__name__}")

    # model header taxonomy
    model_path = tmp_path / "victim.model"
    write_model(model_path, fit_linear(make_pairs(0, m=10, p=3, q=4)))
    mraw = model_path.read_bytes()

    def expect_model(exc_type, label, data):
        bad = tmp_path / "bad.model"
        bad.write_bytes(data)
        try:
            read_model(bad)
        except exc_type:
            return
        except Exception as exc:
            failures.append(f"{label}: raised {type(exc).__name__}")
            return
        failures.append(f"{label}: no error raised")

    import json as _json
    import struct

    header_len = struct.unpack("<I", mraw[8:12])[0]
    header = _json.loads(mraw[12 : 12 + header_len].decode("utf-8"))
    payload = mraw[12 + header_len :]

    def with_header(h):
        blob = _json.dumps(h).encode("utf-8")
        return mraw[:8] + struct.pack("<I", len(blob)) + blob + payload

    expect_model(HeaderError, "bad header json", mraw[:12] + b"{broken" + payload)
    expect_model(UnknownKindError, "unknown kind", with_header({**header, "kind": "forest"}))
    expect_model(
        ParamCountMismatchError, "param count", with_header({**header, "target_dim": 9})
    )

    # qrels parse taxonomy
    bad_qrels = tmp_path / "bad_qrels.tsv"
    bad_qrels.write_text("q1\td1\n")  # two fields, not three
    try:
        read_qrels(bad_qrels)
        failures.append("qrels fields: no error raised")
    except QrelsParseError:
        pass
    except Exception as exc:
        failures.append(f"qrels fields: raised {type(exc).__name__}")

    ok = instances == 100 and not failures
    report(
        8,
        "all four formats round-trip bitwise and corruption raises typed errors",
        ok,
        f"{instances} instances, failures {failures or 'none'}",
    )
