"""Synthetic paired embedding spaces with a known ground-truth mapping.

Real embedding models make exact verification impossible; this module
replaces them with seeded Gaussian "local" vectors pushed through a known
transform into a "server" space. The transform is either a linear map
(random or orthogonal-row) or that map blended with an elementwise tanh,
so alignment quality can be checked against ground truth instead of
eyeballed.

Reproducibility contract: one generator stream per seed, consumed in a
fixed order (training locals, map parameters, training noise, query
locals, distractor locals, plant perturbations). A "nonlinear" spec with
strength 0 therefore consumes the stream exactly like "linear-random"
and produces the same vectors.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .core import AlignmentPairs, EmbeddingSet
from .errors import ConfigError, DimensionMismatchError, InputError
from .linear import LinearMap
from .retrieval import Qrels

MAP_KINDS = ("linear-orthogonal", "linear-random", "nonlinear")

# Per-coordinate sigma of the planted-relevant perturbation, as a fraction
# of the mean corpus norm. Small enough that ground-truth retrieval ranks
# every plant above every distractor with wide margin.
PLANT_SIGMA_FACTOR = 0.05


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of one synthetic alignment + retrieval scenario."""

    m: int
    p: int
    q: int
    map_kind: str = "linear-random"
    noise_sigma: float = 0.0
    nonlinearity_strength: float = 0.0
    seed: int = 0
    corpus_size: int = 1000
    query_count: int = 50
    relevant_per_query: int = 5

    def __post_init__(self):
        for name in ("m", "p", "q", "corpus_size", "query_count"):
            if int(getattr(self, name)) < 1:
                raise InputError(f"{name} must be positive, got {getattr(self, name)}")
        if self.relevant_per_query < 1:
            raise InputError(
                f"relevant_per_query must be >= 1, got {self.relevant_per_query}"
            )
        if self.map_kind not in MAP_KINDS:
            raise InputError(f"map_kind must be one of {MAP_KINDS}, got {self.map_kind!r}")
        if self.noise_sigma < 0:
            raise InputError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not 0.0 <= self.nonlinearity_strength <= 1.0:
            raise InputError(
                f"nonlinearity_strength must be in [0, 1], got {self.nonlinearity_strength}"
            )
        if self.map_kind == "linear-orthogonal" and self.p > self.q:
            raise InputError(
                "linear-orthogonal needs p <= q (rows cannot be orthonormal otherwise)"
            )
        planted = self.query_count * self.relevant_per_query
        if self.corpus_size < planted:
            raise InputError(
                f"corpus_size {self.corpus_size} cannot hold {planted} planted docs"
            )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SynthSpec":
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown synth spec keys: {sorted(unknown)}")
        missing = {"m", "p", "q"} - set(data)
        if missing:
            raise ConfigError(f"synth spec missing required keys: {sorted(missing)}")
        return cls(**data)


@dataclass(frozen=True)
class GroundTruthMap:
    """The generator's transform, kept around as the verification oracle."""

    kind: str
    strength: float
    noise_sigma: float
    seed: int
    matrix: np.ndarray

    def __post_init__(self):
        if self.kind not in MAP_KINDS:
            raise InputError(f"kind must be one of {MAP_KINDS}, got {self.kind!r}")
        matrix = np.ascontiguousarray(self.matrix, dtype=np.float64)
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @property
    def source_dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def target_dim(self) -> int:
        return self.matrix.shape[1]

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Transform local-space rows (float64 in, float64 out)."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.source_dim:
            raise DimensionMismatchError(
                f"input dim {x.shape[-1]} != map source dim {self.source_dim}"
            )
        z = x @ self.matrix
        if self.kind == "nonlinear":
            s = self.strength
            return (1.0 - s) * z + s * np.tanh(z)
        return z

    def transform_set(self, emb_set: EmbeddingSet, space_label: str = "server") -> EmbeddingSet:
        vectors = self.apply(emb_set.vectors.astype(np.float64)).astype(np.float32)
        return EmbeddingSet(ids=emb_set.ids, vectors=vectors, space_label=space_label)

    def to_linear_map(self) -> LinearMap:
        return LinearMap(
            matrix=self.matrix.astype(np.float32),
            source_dim=self.source_dim,
            target_dim=self.target_dim,
        )


@dataclass(frozen=True)
class RetrievalTask:
    """Everything one synthetic scenario produces, ready for the pipeline."""

    spec: SynthSpec
    pairs: AlignmentPairs
    ground_truth: GroundTruthMap
    corpus: EmbeddingSet
    queries_local: EmbeddingSet
    queries_true: EmbeddingSet
    qrels: Qrels


def generate_pairs(spec: SynthSpec) -> tuple[AlignmentPairs, GroundTruthMap]:
    """Draw seeded training pairs plus the transform that produced them."""
    rng = np.random.default_rng(spec.seed)
    return _generate_pairs_stream(spec, rng)


def generate_retrieval_task(spec: SynthSpec) -> RetrievalTask:
    """Build the corpus, queries, and qrels on top of the pair generator.

    Relevant docs are planted as small Gaussian perturbations of each
    query's true-server vector, so ground-truth retrieval is perfect and
    any recall loss is attributable to alignment. Corpus and true-query
    vectors are noise-free transform images; noise_sigma only perturbs
    the training pairs.
    """
    rng = np.random.default_rng(spec.seed)
    pairs, gt = _generate_pairs_stream(spec, rng)

    q_local = rng.standard_normal((spec.query_count, spec.p))
    n_distractors = spec.corpus_size - spec.query_count * spec.relevant_per_query
    d_local = rng.standard_normal((n_distractors, spec.p))

    q_true = gt.apply(q_local)
    d_server = gt.apply(d_local)

    # The corpus does not exist yet when the plant scale is needed, so the
    # mean norm is taken over its ingredients (distractors + true queries).
    norms = np.linalg.norm(np.vstack([d_server, q_true]), axis=1)
    plant_sigma = PLANT_SIGMA_FACTOR * float(norms.mean())
    plants = q_true[:, None, :] + plant_sigma * rng.standard_normal(
        (spec.query_count, spec.relevant_per_query, spec.q)
    )

    width = len(str(spec.corpus_size))
    d_ids = [f"d{i:0{width}d}" for i in range(n_distractors)]
    r_ids = [
        f"r{qi:0{width}d}x{j:03d}"
        for qi in range(spec.query_count)
        for j in range(spec.relevant_per_query)
    ]
    q_ids = [f"q{qi:0{width}d}" for qi in range(spec.query_count)]

    corpus_vectors = np.vstack([d_server, plants.reshape(-1, spec.q)]).astype(np.float32)
    corpus = EmbeddingSet(
        ids=tuple(d_ids + r_ids), vectors=corpus_vectors, space_label="server"
    )
    queries_local = EmbeddingSet(
        ids=tuple(q_ids), vectors=q_local.astype(np.float32), space_label="local"
    )
    queries_true = EmbeddingSet(
        ids=tuple(q_ids), vectors=q_true.astype(np.float32), space_label="server"
    )
    qrels = Qrels(
        {
            q_ids[qi]: frozenset(
                r_ids[qi * spec.relevant_per_query + j]
                for j in range(spec.relevant_per_query)
            )
            for qi in range(spec.query_count)
        }
    )
    return RetrievalTask(
        spec=spec,
        pairs=pairs,
        ground_truth=gt,
        corpus=corpus,
        queries_local=queries_local,
        queries_true=queries_true,
        qrels=qrels,
    )


def write_ground_truth(path, gt: GroundTruthMap) -> None:
    """Persist the oracle map: linear part as a model file, rest as JSON."""
    from .formats import write_model

    write_model(path, gt.to_linear_map())
    meta = {
        "kind": gt.kind,
        "strength": gt.strength,
        "noise_sigma": gt.noise_sigma,
        "seed": gt.seed,
    }
    sidecar = Path(str(path) + ".json")
    sidecar.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def read_ground_truth(path) -> GroundTruthMap:
    """Reload a persisted oracle map (parameters are 32-bit on disk)."""
    from .formats import read_model

    model = read_model(path)
    if not isinstance(model, LinearMap):
        raise InputError(f"ground-truth file {path} does not hold a linear map")
    sidecar = Path(str(path) + ".json")
    if not sidecar.exists():
        raise InputError(f"ground-truth sidecar missing: {sidecar}")
    meta = json.loads(sidecar.read_text(encoding="utf-8"))
    return GroundTruthMap(
        kind=meta["kind"],
        strength=float(meta["strength"]),
        noise_sigma=float(meta["noise_sigma"]),
        seed=int(meta["seed"]),
        matrix=model.matrix.astype(np.float64),
    )


def _generate_pairs_stream(
    spec: SynthSpec, rng: np.random.Generator
) -> tuple[AlignmentPairs, GroundTruthMap]:
    x = rng.standard_normal((spec.m, spec.p))

    if spec.map_kind == "linear-orthogonal":
        gaussian = rng.standard_normal((spec.q, spec.p))
        q_factor, _ = np.linalg.qr(gaussian)
        matrix = q_factor.T
    else:
        matrix = rng.standard_normal((spec.p, spec.q))

    gt = GroundTruthMap(
        kind=spec.map_kind,
        strength=spec.nonlinearity_strength if spec.map_kind == "nonlinear" else 0.0,
        noise_sigma=spec.noise_sigma,
        seed=spec.seed,
        matrix=matrix,
    )

    noise = rng.standard_normal((spec.m, spec.q))
    y = gt.apply(x) + spec.noise_sigma * noise

    ids = tuple(f"t{i:06d}" for i in range(spec.m))
    local = EmbeddingSet(ids=ids, vectors=x.astype(np.float32), space_label="local")
    server = EmbeddingSet(ids=ids, vectors=y.astype(np.float32), space_label="server")
    return AlignmentPairs(local=local, server=server), gt
