"""Core embedding containers and vector math.

An :class:`EmbeddingSet` holds an ordered list of text ids and the
matching row-major matrix of float32 vectors from one embedding space.
:class:`AlignmentPairs` pairs up two such sets over the same texts and is
the training substrate for every alignment method.

All reductions (dot products, norms) are accumulated in float64 even
though vectors are stored as float32.
"""

from __future__ import annotations

from dataclasses import dataclass, InitVar
from typing import Sequence

import numpy as np

from .errors import DegenerateVectorError, DimensionMismatchError, InputError, PairValidationError


def _as_matrix(vectors) -> np.ndarray:
    arr = np.ascontiguousarray(vectors, dtype=np.float32)
    if arr.ndim != 2:
        raise InputError(f"vectors must be a 2-D matrix, got ndim={arr.ndim}")
    return arr


@dataclass(frozen=True)
class EmbeddingSet:
    """Ordered ids plus their float32 vectors in a single embedding space.

    Immutable after construction; the vector matrix is marked read-only so
    instances can be shared freely across threads.
    """

    ids: tuple[str, ...]
    vectors: np.ndarray
    space_label: str = "local"
    validate: InitVar[bool] = True

    def __post_init__(self, validate: bool):
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
        mat = _as_matrix(self.vectors)
        mat.flags.writeable = False
        object.__setattr__(self, "vectors", mat)
        if mat.shape[0] < 1 or mat.shape[1] < 1:
            raise InputError(f"embedding matrix must be at least 1x1, got {mat.shape}")
        if len(self.ids) != mat.shape[0]:
            raise InputError(
                f"id count ({len(self.ids)}) does not match row count ({mat.shape[0]})"
            )
        if validate:
            if len(set(self.ids)) != len(self.ids):
                dupes = _duplicates(self.ids)
                raise InputError(f"duplicate ids: {', '.join(sorted(dupes)[:5])}")
            if not np.all(np.isfinite(mat)):
                bad = np.where(~np.isfinite(mat).all(axis=1))[0]
                names = ", ".join(self.ids[i] for i in bad[:5])
                raise InputError(f"non-finite vectors for ids: {names}")

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def row(self, text_id: str) -> np.ndarray:
        return self.vectors[self.ids.index(text_id)]

    def with_label(self, space_label: str) -> "EmbeddingSet":
        return EmbeddingSet(self.ids, self.vectors, space_label, validate=False)


@dataclass(frozen=True)
class AlignmentPairs:
    """Two embedding sets over the same texts, in the same order.

    Construction does not enforce the pairing invariants; run
    :func:`validate_pairs` (or :func:`ensure_valid_pairs`) on freshly
    loaded data before fitting anything.
    """

    local: EmbeddingSet
    server: EmbeddingSet

    @property
    def count(self) -> int:
        return self.local.count


@dataclass(frozen=True)
class Diagnostic:
    """One validation finding: a stable code, a message, and the subject."""

    code: str
    message: str
    subject: str = ""

    def __str__(self) -> str:
        if self.subject:
            return f"[{self.code}] {self.message} ({self.subject})"
        return f"[{self.code}] {self.message}"


def _duplicates(ids: Sequence[str]) -> set[str]:
    seen: set[str] = set()
    dupes: set[str] = set()
    for i in ids:
        if i in seen:
            dupes.add(i)
        seen.add(i)
    return dupes


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two vectors, in [-1, 1].

    Accumulates in float64. Zero-norm inputs raise
    :class:`DegenerateVectorError` rather than silently returning 0 or NaN.
    """
    va = np.asarray(a, dtype=np.float64).ravel()
    vb = np.asarray(b, dtype=np.float64).ravel()
    if va.shape != vb.shape:
        raise DimensionMismatchError(f"vector dims differ: {va.shape[0]} vs {vb.shape[0]}")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise DegenerateVectorError("cosine undefined for zero-norm vector")
    cos = float(np.dot(va, vb) / (na * nb))
    return min(1.0, max(-1.0, cos))


def row_cosines(a: np.ndarray, b: np.ndarray, what: str = "row") -> np.ndarray:
    """Cosine between corresponding rows of two equal-shape matrices.

    Returns a float64 vector of length m. Raises on any zero-norm row,
    naming the first offending row.
    """
    am = np.asarray(a, dtype=np.float64)
    bm = np.asarray(b, dtype=np.float64)
    if am.shape != bm.shape:
        raise DimensionMismatchError(f"matrix shapes differ: {am.shape} vs {bm.shape}")
    na = np.linalg.norm(am, axis=1)
    nb = np.linalg.norm(bm, axis=1)
    for norms, side in ((na, "left"), (nb, "right")):
        zero = np.where(norms == 0.0)[0]
        if zero.size:
            raise DegenerateVectorError(f"zero-norm {side} {what} at index {int(zero[0])}")
    cos = np.einsum("ij,ij->i", am, bm) / (na * nb)
    return np.clip(cos, -1.0, 1.0)


def l2_normalize(emb_set: EmbeddingSet) -> EmbeddingSet:
    """Scale every row to unit Euclidean norm; ids and order preserved."""
    norms = np.linalg.norm(emb_set.vectors.astype(np.float64), axis=1)
    zero = np.where(norms == 0.0)[0]
    if zero.size:
        raise DegenerateVectorError(
            f"cannot normalize zero-norm row (id {emb_set.ids[int(zero[0])]})"
        )
    out = (emb_set.vectors.astype(np.float64) / norms[:, None]).astype(np.float32)
    return EmbeddingSet(emb_set.ids, out, emb_set.space_label, validate=False)


def validate_pairs(pairs: AlignmentPairs) -> list[Diagnostic]:
    """Check pairing invariants; an empty list means the pairs are usable.

    Reports id-order mismatches, duplicate ids, and non-finite rows as
    structured diagnostics instead of raising.
    """
    out: list[Diagnostic] = []
    local, server = pairs.local, pairs.server

    if local.count != server.count:
        out.append(
            Diagnostic(
                "count-mismatch",
                f"local has {local.count} rows, server has {server.count}",
            )
        )
    else:
        mismatched = [i for i, (a, b) in enumerate(zip(local.ids, server.ids)) if a != b]
        if mismatched:
            i = mismatched[0]
            out.append(
                Diagnostic(
                    "id-order-mismatch",
                    f"{len(mismatched)} positions differ; first at row {i}: "
                    f"local={local.ids[i]!r} server={server.ids[i]!r}",
                )
            )

    for name, emb_set in (("local", local), ("server", server)):
        dupes = _duplicates(emb_set.ids)
        if dupes:
            out.append(
                Diagnostic(
                    "duplicate-ids",
                    f"{len(dupes)} duplicated in {name} set",
                    subject=sorted(dupes)[0],
                )
            )
        finite = np.isfinite(emb_set.vectors).all(axis=1)
        if not finite.all():
            bad = np.where(~finite)[0]
            out.append(
                Diagnostic(
                    "non-finite",
                    f"{bad.size} non-finite rows in {name} set",
                    subject=emb_set.ids[int(bad[0])],
                )
            )
    return out


def ensure_valid_pairs(pairs: AlignmentPairs) -> None:
    """Raise :class:`PairValidationError` when :func:`validate_pairs` finds anything."""
    diagnostics = validate_pairs(pairs)
    if diagnostics:
        raise PairValidationError(diagnostics)
