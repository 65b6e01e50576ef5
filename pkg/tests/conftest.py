"""Shared fixtures and factories for the test suite."""

import numpy as np
import pytest

from steer import AlignmentPairs, EmbeddingSet


def make_set(seed: int, m: int, d: int, label: str = "local", prefix: str = "v") -> EmbeddingSet:
    """Seeded random embedding set with ids prefix0, prefix1, ..."""
    rng = np.random.default_rng(seed)
    vecs = rng.standard_normal((m, d)).astype(np.float32)
    return EmbeddingSet([f"{prefix}{i}" for i in range(m)], vecs, label)


def make_pairs(seed: int, m: int, p: int, q: int, noise: float = 0.0) -> AlignmentPairs:
    """Pairs with server = local @ A_true (+ optional Gaussian noise)."""
    rng = np.random.default_rng(seed)
    local = rng.standard_normal((m, p))
    a_true = rng.standard_normal((p, q))
    server = local @ a_true
    if noise:
        server = server + noise * rng.standard_normal(server.shape)
    ids = [f"t{i}" for i in range(m)]
    return AlignmentPairs(
        EmbeddingSet(ids, local.astype(np.float32), "local"),
        EmbeddingSet(ids, server.astype(np.float32), "server"),
    )


@pytest.fixture
def tmp_file(tmp_path):
    def _make(name: str):
        return tmp_path / name

    return _make
