"""Exact cosine-similarity retrieval within one encoder namespace.

Scoring is the normalized dot product ``a.b / (|a| |b|)``, computed in
float64 over the snapshot's contiguous per-encoder matrix and clamped
into [-1, 1] so floating-point drift can never leak out of the
documented range. Retrieval is a full scan: at the corpus scales this
engine targets, exactness and reproducibility beat index structures,
and the matrix-vector product is the vectorization-friendly hot path
(see benchmarks/bench_retrieval.py).

Results are deterministic: scores sort descending with ties broken by
ascending case id, and identical (snapshot, query, k, filter) inputs
always produce identical lists.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import DimensionMismatchError, NonFiniteVectorError, ZeroNormVectorError
from .records import CaseRecord, Embedding
from .store import StoreSnapshot

# Guard band for raw cosine values before clamping; anything further out
# of range than this indicates a computation bug, not rounding.
_RANGE_EPS = 1e-9


class ExclusionMode(Enum):
    NONE = "none"
    SAME_CASE = "same_case"
    SAME_PATIENT = "same_patient"


@dataclass(frozen=True)
class ExclusionFilter:
    """Removes leakage-prone candidates from the retrieval pool.

    ``SAME_PATIENT`` subsumes ``SAME_CASE``: a query's own case is never
    a legal neighbor once any exclusion beyond NONE is active.
    """

    mode: ExclusionMode = ExclusionMode.NONE
    excluded_case_ids: frozenset[str] = frozenset()
    query_case_id: str | None = None
    query_patient_id: str | None = None

    @classmethod
    def for_case(
        cls,
        record: CaseRecord,
        mode: ExclusionMode = ExclusionMode.SAME_CASE,
        excluded_case_ids: frozenset[str] = frozenset(),
    ) -> ExclusionFilter:
        return cls(
            mode=mode,
            excluded_case_ids=frozenset(excluded_case_ids),
            query_case_id=record.case_id,
            query_patient_id=record.patient_id,
        )

    def excludes(self, case_id: str, patient_id: str) -> bool:
        if case_id in self.excluded_case_ids:
            return True
        if self.mode is ExclusionMode.NONE:
            return False
        if self.query_case_id is not None and case_id == self.query_case_id:
            return True
        if (
            self.mode is ExclusionMode.SAME_PATIENT
            and self.query_patient_id is not None
            and patient_id == self.query_patient_id
        ):
            return True
        return False


NO_EXCLUSION = ExclusionFilter()


@dataclass(frozen=True)
class Neighbor:
    """A retrieved case: rank 1 is the best match."""

    case_id: str
    encoder: str
    score: float
    rank: int


def _as_vector(x: Sequence[float] | np.ndarray, name: str) -> np.ndarray:
    vec = np.asarray(x, dtype=np.float64)
    if vec.ndim != 1:
        raise DimensionMismatchError(f"{name} must be 1-D, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise NonFiniteVectorError(f"{name} contains non-finite components")
    return vec


def cosine_similarity(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray) -> float:
    """Cosine similarity of two equal-length vectors, clamped to [-1, 1].

    1 means identical direction, 0 orthogonal, -1 opposite. Symmetric in
    its arguments and invariant under positive scaling of either one.
    """
    va = _as_vector(a, "a")
    vb = _as_vector(b, "b")
    if va.shape[0] != vb.shape[0]:
        raise DimensionMismatchError(
            f"vector lengths differ: {va.shape[0]} vs {vb.shape[0]}"
        )
    norm_a = float(np.linalg.norm(va))
    norm_b = float(np.linalg.norm(vb))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroNormVectorError("cosine similarity is undefined for zero-norm vectors")
    raw = float(np.dot(va, vb)) / (norm_a * norm_b)
    if abs(raw) > 1.0 + _RANGE_EPS:
        raise NonFiniteVectorError(f"cosine computation out of range: {raw!r}")
    return min(1.0, max(-1.0, raw))


def top_k(
    query: Embedding,
    k: int,
    snapshot: StoreSnapshot,
    exclusion: ExclusionFilter = NO_EXCLUSION,
) -> list[Neighbor]:
    """The ``min(k, eligible)`` highest-cosine cases for ``query``.

    Cases without an embedding under the query's encoder are silently
    ineligible. Sorted by score descending, case id ascending on ties.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    expected_dim = snapshot.encoder_dim(query.encoder)
    if query.dim != expected_dim:
        raise DimensionMismatchError(
            f"query vector has {query.dim} components, encoder "
            f"{query.encoder!r} is registered with {expected_dim}"
        )
    block = snapshot.encoder_block(query.encoder)
    if not block.case_ids:
        return []

    q = np.asarray(query.vector, dtype=np.float64)
    q_norm = float(np.linalg.norm(q))
    if q_norm == 0.0:
        raise ZeroNormVectorError("query vector has zero norm")

    scores = block.matrix @ q
    scores /= block.norms * q_norm
    np.clip(scores, -1.0, 1.0, out=scores)

    eligible = np.ones(len(block.case_ids), dtype=bool)
    if exclusion is not NO_EXCLUSION:
        for i, (cid, pid) in enumerate(zip(block.case_ids, block.patient_ids)):
            if exclusion.excludes(cid, pid):
                eligible[i] = False
    n_eligible = int(eligible.sum())
    if n_eligible == 0:
        return []

    # Rows are pre-sorted by case id, so a stable sort on descending
    # score realizes the documented tie-break for free.
    order = np.argsort(np.where(eligible, -scores, np.inf), kind="stable")
    m = min(k, n_eligible)
    return [
        Neighbor(
            case_id=block.case_ids[idx],
            encoder=query.encoder,
            score=float(scores[idx]),
            rank=rank,
        )
        for rank, idx in enumerate(order[:m], start=1)
    ]
