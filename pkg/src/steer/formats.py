"""Bit-exact file formats for embeddings, models, qrels, and runs.

The binary layouts are deliberately minimal (fixed little-endian fields,
no padding, no platform-sized integers) so any language can produce or
consume them without a serialization dependency.

EmbFile layout:
    magic   8 bytes ASCII "STEERV1\\0"
    version unsigned 32-bit LE, currently 1
    dim     unsigned 32-bit LE
    count   unsigned 64-bit LE
    payload count*dim IEEE-754 32-bit LE floats, row-major
Ids live in a UTF-8 text sidecar at ``<path>.ids``, one id per line in
row order, which keeps the binary payload memory-mappable.

ModelFile layout:
    magic      8 bytes ASCII "STEERM1\\0"
    header_len unsigned 32-bit LE
    header     UTF-8 JSON (kind, dims, hyperparameters, creation seed)
    payload    32-bit LE floats in declared layer order (per layer:
               weight matrix row-major, then bias vector)

All writes go to a temp file in the destination directory and are
renamed into place, so readers never observe partial files.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
import warnings
from pathlib import Path

import numpy as np

from .core import EmbeddingSet
from .errors import (
    BadMagicError,
    FileFormatError,
    HeaderError,
    IdCountMismatchError,
    InputError,
    ParamCountMismatchError,
    QrelsParseError,
    TruncatedPayloadError,
    UnknownKindError,
    VersionMismatchError,
)
from .linear import LinearMap
from .mlp import LossBreakdown, MlpModel, TrainConfig
from .retrieval import Qrels, RetrievalRun

EMB_MAGIC = b"STEERV1\0"
EMB_VERSION = 1
MODEL_MAGIC = b"STEERM1\0"
_EMB_HEADER = struct.Struct("<8sIIQ")


def ids_path(path) -> Path:
    """Sidecar path convention: the id file sits at ``<path>.ids``."""
    return Path(str(path) + ".ids")


def write_emb(path, emb_set: EmbeddingSet) -> None:
    """Write an embedding set as EmbFile + id sidecar, atomically."""
    path = Path(path)
    for doc_id in emb_set.ids:
        if "\n" in doc_id or "\r" in doc_id:
            raise InputError(f"id {doc_id!r} contains a line break")
    header = _EMB_HEADER.pack(EMB_MAGIC, EMB_VERSION, emb_set.dim, emb_set.count)
    payload = np.ascontiguousarray(emb_set.vectors, dtype="<f4").tobytes()
    _atomic_write(path, header + payload)
    _atomic_write(ids_path(path), ("\n".join(emb_set.ids) + "\n").encode("utf-8"))


def read_emb(path, space_label: str = "local") -> EmbeddingSet:
    """Read an EmbFile + id sidecar back into an embedding set."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _EMB_HEADER.size:
        raise TruncatedPayloadError(
            f"{path}: {len(data)} bytes is shorter than the {_EMB_HEADER.size}-byte header"
        )
    magic, version, dim, count = _EMB_HEADER.unpack_from(data)
    if magic != EMB_MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}, expected {EMB_MAGIC!r}")
    if version != EMB_VERSION:
        raise VersionMismatchError(f"{path}: version {version}, expected {EMB_VERSION}")
    expected = count * dim * 4
    actual = len(data) - _EMB_HEADER.size
    if actual != expected:
        raise TruncatedPayloadError(
            f"{path}: payload holds {actual} bytes, header declares {expected}"
        )
    vectors = np.frombuffer(data, dtype="<f4", offset=_EMB_HEADER.size).reshape(count, dim)

    sidecar = ids_path(path)
    if not sidecar.exists():
        raise FileFormatError(f"{path}: ids sidecar {sidecar} is missing")
    ids = sidecar.read_text(encoding="utf-8").splitlines()
    if len(ids) != count:
        raise IdCountMismatchError(
            f"{sidecar}: {len(ids)} ids for {count} vectors"
        )
    if any(not doc_id for doc_id in ids):
        raise FileFormatError(f"{sidecar}: contains an empty id line")
    return EmbeddingSet(ids=tuple(ids), vectors=vectors, space_label=space_label)


def write_model(path, model, train_config: TrainConfig | None = None) -> None:
    """Write a linear or MLP alignment model, atomically.

    For MLP models pass the TrainConfig that produced them so the header
    records the full training provenance; an untrained or hand-built
    model may omit it.
    """
    if isinstance(model, LinearMap):
        header = {
            "kind": "linear",
            "source_dim": model.source_dim,
            "target_dim": model.target_dim,
            "ridge_lambda": model.ridge_lambda,
            "seed": None,
        }
        arrays = [model.matrix]
    elif isinstance(model, MlpModel):
        header = {
            "kind": "mlp",
            "layer_dims": list(model.layer_dims),
            "preset": model.preset_name,
            "activation": model.activation,
            "train_config": train_config.to_dict() if train_config else None,
            "seed": train_config.seed if train_config else None,
        }
        arrays = []
        for w, b in zip(model.weights, model.biases):
            arrays.append(w)
            arrays.append(b)
    else:
        raise InputError(f"cannot serialize model of type {type(model).__name__}")
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = b"".join(np.ascontiguousarray(a, dtype="<f4").tobytes() for a in arrays)
    blob = MODEL_MAGIC + struct.pack("<I", len(header_bytes)) + header_bytes + payload
    _atomic_write(Path(path), blob)


def read_model(path):
    """Read a ModelFile back into a LinearMap or MlpModel."""
    header, payload = _read_model_parts(Path(path))
    kind = header.get("kind")
    if kind == "linear":
        try:
            p, q = int(header["source_dim"]), int(header["target_dim"])
            ridge = float(header["ridge_lambda"])
        except (KeyError, TypeError, ValueError) as exc:
            raise HeaderError(f"{path}: bad linear header: {exc}") from exc
        matrix = _take_params(path, payload, p * q, expected_total=p * q).reshape(p, q)
        return LinearMap(matrix=matrix, source_dim=p, target_dim=q, ridge_lambda=ridge)
    if kind == "mlp":
        try:
            dims = [int(d) for d in header["layer_dims"]]
            preset = str(header.get("preset", "custom"))
            activation = str(header.get("activation", "relu"))
        except (KeyError, TypeError, ValueError) as exc:
            raise HeaderError(f"{path}: bad mlp header: {exc}") from exc
        if len(dims) < 2:
            raise HeaderError(f"{path}: layer_dims {dims} too short")
        total = sum(a * b + b for a, b in zip(dims[:-1], dims[1:]))
        if payload.size != total:
            raise ParamCountMismatchError(
                f"{path}: payload holds {payload.size} params, header declares {total}"
            )
        weights, biases, offset = [], [], 0
        for a, b in zip(dims[:-1], dims[1:]):
            weights.append(payload[offset : offset + a * b].reshape(a, b))
            offset += a * b
            biases.append(payload[offset : offset + b])
            offset += b
        return MlpModel(
            layer_dims=tuple(dims),
            weights=tuple(weights),
            biases=tuple(biases),
            activation=activation,
            preset_name=preset,
        )
    raise UnknownKindError(f"{path}: unknown model kind {kind!r}")


def read_model_header(path) -> dict:
    """Return the ModelFile JSON header verbatim (provenance inspection)."""
    header, _ = _read_model_parts(Path(path))
    return header


def write_qrels(path, qrels: Qrels) -> None:
    """Write judgments as `query_id<TAB>doc_id<TAB>relevance` lines."""
    lines = [
        f"{qid}\t{doc}\t1"
        for qid in sorted(qrels.judgments)
        for doc in sorted(qrels.judgments[qid])
    ]
    _atomic_write(Path(path), ("\n".join(lines) + "\n").encode("utf-8"))


def read_qrels(path) -> Qrels:
    """Parse TREC-style qrels TSV.

    Lines with relevance <= 0 are dropped (one counted warning),
    duplicate judgments are deduplicated, and a malformed line raises
    with its line number. Blank and `#` comment lines are ignored.
    """
    judgments: dict[str, set[str]] = {}
    dropped = 0
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise QrelsParseError(
                    line_no, f"expected 3 tab-separated fields, got {len(fields)} ({path})"
                )
            qid, doc_id, rel_text = fields
            try:
                relevance = float(rel_text)
            except ValueError:
                raise QrelsParseError(
                    line_no, f"relevance {rel_text!r} is not a number ({path})"
                ) from None
            if not qid or not doc_id:
                raise QrelsParseError(line_no, f"empty query or doc id ({path})")
            if relevance <= 0:
                dropped += 1
                continue
            judgments.setdefault(qid, set()).add(doc_id)
    if dropped:
        warnings.warn(
            f"{path}: dropped {dropped} line(s) with relevance <= 0", UserWarning
        )
    if not judgments:
        raise FileFormatError(f"{path}: no positive-relevance judgments found")
    return Qrels({qid: frozenset(docs) for qid, docs in judgments.items()})


def write_run(path, run: RetrievalRun, header_extra: dict | None = None) -> None:
    """Write a run as `query_id<TAB>rank<TAB>doc_id<TAB>score` TSV."""
    lines = [f"# metric\t{run.metric}", f"# k\t{run.k}"]
    for key, value in (header_extra or {}).items():
        lines.append(f"# {key}\t{value}")
    lines.append("# query_id\trank\tdoc_id\tscore")
    for qid, ranked in run.results.items():
        for rank, (doc_id, score) in enumerate(ranked, start=1):
            lines.append(f"{qid}\t{rank}\t{doc_id}\t{score!r}")
    _atomic_write(Path(path), ("\n".join(lines) + "\n").encode("utf-8"))


def read_run(path) -> RetrievalRun:
    """Read a run TSV back; metric and k come from the `#` header lines."""
    metric = None
    k = None
    results: dict[str, list[tuple[str, float]]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            if line.startswith("#"):
                fields = line[1:].strip().split("\t")
                if len(fields) == 2 and fields[0] == "metric":
                    metric = fields[1]
                elif len(fields) == 2 and fields[0] == "k":
                    k = int(fields[1])
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise FileFormatError(
                    f"{path}:{line_no}: expected 4 tab-separated fields, got {len(fields)}"
                )
            qid, rank_text, doc_id, score_text = fields
            ranked = results.setdefault(qid, [])
            try:
                rank, score = int(rank_text), float(score_text)
            except ValueError as exc:
                raise FileFormatError(f"{path}:{line_no}: {exc}") from None
            if rank != len(ranked) + 1:
                raise FileFormatError(
                    f"{path}:{line_no}: rank {rank} out of sequence for query {qid!r}"
                )
            ranked.append((doc_id, score))
    if metric is None or k is None:
        raise FileFormatError(f"{path}: missing `# metric` or `# k` header line")
    return RetrievalRun(results=results, metric=metric, k=k)


def write_train_log(path, history: list[LossBreakdown], header_extra: dict | None = None) -> None:
    """Write per-epoch loss components as TSV."""
    lines = []
    for key, value in (header_extra or {}).items():
        lines.append(f"# {key}\t{value}")
    lines.append("# epoch\tmse\tcos_dist\thuber\tsim_penalty\ttotal")
    for epoch, entry in enumerate(history, start=1):
        row = "\t".join(f"{v!r}" for v in entry.as_row())
        lines.append(f"{epoch}\t{row}")
    _atomic_write(Path(path), ("\n".join(lines) + "\n").encode("utf-8"))


def convert_text_matrix(src, dest, ids=None) -> EmbeddingSet:
    """Convert a whitespace-separated text matrix into an EmbFile.

    ``ids`` defaults to row numbers ("row000000", ...). Returns the set
    that was written, for convenience.
    """
    matrix = np.loadtxt(src, dtype=np.float64, ndmin=2)
    if ids is None:
        ids = tuple(f"row{i:06d}" for i in range(matrix.shape[0]))
    emb_set = EmbeddingSet(ids=tuple(ids), vectors=matrix.astype(np.float32))
    write_emb(dest, emb_set)
    return emb_set


def _read_model_parts(path: Path) -> tuple[dict, np.ndarray]:
    data = path.read_bytes()
    prefix = len(MODEL_MAGIC) + 4
    if len(data) < prefix:
        raise TruncatedPayloadError(
            f"{path}: {len(data)} bytes is shorter than the {prefix}-byte prefix"
        )
    if data[: len(MODEL_MAGIC)] != MODEL_MAGIC:
        raise BadMagicError(
            f"{path}: bad magic {data[:len(MODEL_MAGIC)]!r}, expected {MODEL_MAGIC!r}"
        )
    (header_len,) = struct.unpack_from("<I", data, len(MODEL_MAGIC))
    if prefix + header_len > len(data):
        raise HeaderError(f"{path}: header length {header_len} extends past end of file")
    try:
        header = json.loads(data[prefix : prefix + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise HeaderError(f"{path}: header is not valid JSON: {exc}") from exc
    if not isinstance(header, dict):
        raise HeaderError(f"{path}: header must be a JSON object")
    payload_bytes = data[prefix + header_len :]
    if len(payload_bytes) % 4:
        raise ParamCountMismatchError(
            f"{path}: payload length {len(payload_bytes)} is not a multiple of 4"
        )
    return header, np.frombuffer(payload_bytes, dtype="<f4")


def _take_params(path, payload: np.ndarray, n: int, expected_total: int) -> np.ndarray:
    if payload.size != expected_total:
        raise ParamCountMismatchError(
            f"{path}: payload holds {payload.size} params, header declares {expected_total}"
        )
    return payload[:n]


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise
