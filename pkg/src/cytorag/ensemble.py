"""Cross-encoder rank fusion.

Each encoder retrieves its own candidate list; fusion pools the lists,
deduplicates by case id, and rescores. ``RAW_SCORE_POOL`` keeps the
maximum raw cosine across contributing encoders (comparing raw scores
across embedding spaces, scale differences and all). RECIPROCAL_RANK
fusion replaces scores with ``sum(1 / (60 + rank))`` and is robust to
score-scale differences between encoders.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

from .errors import EmptyQueryError
from .records import Embedding
from .retrieval import NO_EXCLUSION, ExclusionFilter, Neighbor, top_k
from .store import StoreSnapshot

RRF_OFFSET = 60


class FusionMode(Enum):
    RAW_SCORE_POOL = "raw"
    RECIPROCAL_RANK = "rrf"

    @classmethod
    def parse(cls, value: str | FusionMode) -> FusionMode:
        if isinstance(value, cls):
            return value
        for mode in cls:
            if mode.value == str(value).strip().lower():
                return mode
        raise ValueError(f"unknown fusion mode {value!r}; expected raw|rrf")


@dataclass(frozen=True)
class ContributingHit:
    encoder: str
    score: float
    rank: int


@dataclass(frozen=True)
class FusedNeighbor:
    """A deduplicated candidate with its per-encoder provenance."""

    case_id: str
    fused_score: float
    contributing: tuple[ContributingHit, ...]


def fuse_neighbor_lists(
    per_encoder: Mapping[str, Sequence[Neighbor]],
    k: int,
    mode: FusionMode = FusionMode.RAW_SCORE_POOL,
) -> list[FusedNeighbor]:
    """Pool per-encoder result lists into one ranked list of length <= k.

    Output is sorted by fused score descending, case id ascending on
    ties; every case id appears exactly once.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    hits_by_case: dict[str, list[ContributingHit]] = {}
    for encoder in sorted(per_encoder):
        for neighbor in per_encoder[encoder]:
            hits_by_case.setdefault(neighbor.case_id, []).append(
                ContributingHit(encoder=encoder, score=neighbor.score, rank=neighbor.rank)
            )
    fused: list[FusedNeighbor] = []
    for case_id, hits in hits_by_case.items():
        if mode is FusionMode.RAW_SCORE_POOL:
            score = max(hit.score for hit in hits)
        else:
            score = sum(1.0 / (RRF_OFFSET + hit.rank) for hit in hits)
        fused.append(FusedNeighbor(case_id=case_id, fused_score=score, contributing=tuple(hits)))
    fused.sort(key=lambda f: (-f.fused_score, f.case_id))
    return fused[:k]


def ensemble_top_k(
    query_embeddings: Mapping[str, Embedding],
    k: int,
    snapshot: StoreSnapshot,
    mode: FusionMode = FusionMode.RAW_SCORE_POOL,
    exclusion: ExclusionFilter = NO_EXCLUSION,
    pool_k: int | None = None,
) -> list[FusedNeighbor]:
    """Fused top-k across every supplied encoder namespace.

    Per-encoder pools default to the same k as the final output;
    ``pool_k`` widens them (values below k are raised to k).
    """
    if not query_embeddings:
        raise EmptyQueryError("ensemble query carries no embeddings")
    per_pool = max(k, pool_k or k)
    per_encoder = {
        encoder: top_k(emb, per_pool, snapshot, exclusion)
        for encoder, emb in query_embeddings.items()
    }
    return fuse_neighbor_lists(per_encoder, k, mode)
