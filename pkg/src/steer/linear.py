"""Linear alignment between embedding spaces via least squares.

Fits the matrix A minimizing ``||E_L A - E_S||_F^2 + lambda * ||A||_F^2``
in the row-vector convention (local row vectors are multiplied on the
right by A to land in the server space).

The closed-form normal-equation inverse is treated as the definition
only; the solve goes through an SVD-based least-squares factorization of
the (optionally ridge-augmented) design matrix, which stays stable when
``E_L^T E_L`` is ill-conditioned.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import AlignmentPairs, EmbeddingSet, ensure_valid_pairs
from .errors import DimensionMismatchError, InputError, RankDeficiencyError, UnderdeterminedWarning


@dataclass(frozen=True)
class LinearMap:
    """A fitted p x q alignment matrix (float32 at rest)."""

    matrix: np.ndarray
    source_dim: int
    target_dim: int
    ridge_lambda: float = 0.0

    def __post_init__(self):
        mat = np.ascontiguousarray(self.matrix, dtype=np.float32)
        if mat.shape != (self.source_dim, self.target_dim):
            raise InputError(
                f"matrix shape {mat.shape} != ({self.source_dim}, {self.target_dim})"
            )
        if not np.all(np.isfinite(mat)):
            raise InputError("linear map contains non-finite entries")
        mat.flags.writeable = False
        object.__setattr__(self, "matrix", mat)

    @property
    def param_count(self) -> int:
        return self.source_dim * self.target_dim


def fit_linear(pairs: AlignmentPairs, ridge_lambda: float = 0.0) -> LinearMap:
    """Least-squares fit of the local-to-server alignment matrix.

    With ``ridge_lambda == 0`` this is the plain least-squares solution;
    a rank-deficient design raises :class:`RankDeficiencyError` with a
    hint to use a small ridge. ``ridge_lambda > 0`` solves the augmented
    system ``[E_L; sqrt(lambda) I] A = [E_S; 0]``, which always has full
    rank. Deterministic: identical inputs produce bitwise-identical maps.
    """
    if ridge_lambda < 0:
        raise InputError(f"ridge_lambda must be >= 0, got {ridge_lambda}")
    ensure_valid_pairs(pairs)

    el = pairs.local.vectors.astype(np.float64)
    es = pairs.server.vectors.astype(np.float64)
    m, p = el.shape
    q = es.shape[1]

    if m < p:
        warnings.warn(
            f"only {m} pairs for {p} source dimensions; fit is underdetermined",
            UnderdeterminedWarning,
            stacklevel=2,
        )

    if ridge_lambda > 0:
        design = np.vstack([el, np.sqrt(ridge_lambda) * np.eye(p)])
        target = np.vstack([es, np.zeros((p, q))])
    else:
        design, target = el, es

    solution, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if ridge_lambda == 0 and rank < p:
        raise RankDeficiencyError(
            f"design matrix has rank {rank} < {p}; the normal matrix is singular. "
            "Pass a small ridge_lambda (e.g. 1e-6) to regularize."
        )
    return LinearMap(
        matrix=solution.astype(np.float32),
        source_dim=p,
        target_dim=q,
        ridge_lambda=float(ridge_lambda),
    )


def apply_linear(linear_map: LinearMap, emb_set: EmbeddingSet) -> EmbeddingSet:
    """Map every row through the alignment matrix; output is labeled "approx"."""
    if emb_set.dim != linear_map.source_dim:
        raise DimensionMismatchError(
            f"set dim {emb_set.dim} != map source dim {linear_map.source_dim}"
        )
    out = emb_set.vectors.astype(np.float64) @ linear_map.matrix.astype(np.float64)
    return EmbeddingSet(emb_set.ids, out.astype(np.float32), "approx", validate=False)
