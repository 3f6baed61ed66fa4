"""Case store: registry, serialized writer, immutable snapshots.

Writes go through a single :class:`CaseStore` whose internal lock
serializes mutations; every committed write bumps a monotonic version.
Readers take :class:`StoreSnapshot` objects, which never change after
creation and are safe to share across threads. Snapshots lazily build
one contiguous float64 matrix per encoder (rows sorted by case id) so
that scoring a query is a single matrix-vector product.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    DimensionMismatchError,
    DuplicateEncoderError,
    InvalidDimensionError,
    InvalidMetadataError,
    UnknownCaseError,
    UnknownEncoderError,
)
from .records import CaseRecord, Embedding, normalize_encoder_id


@dataclass(frozen=True)
class EncoderBlock:
    """Dense view of every embedding under one encoder.

    ``case_ids`` is sorted ascending and indexes the matrix rows;
    ``norms`` are Euclidean norms of the rows (always > 0 by the ingest
    invariant).
    """

    encoder: str
    case_ids: tuple[str, ...]
    patient_ids: tuple[str, ...]
    matrix: np.ndarray  # float64, shape (n, dim), C-contiguous
    norms: np.ndarray  # float64, shape (n,)


class StoreSnapshot:
    """Immutable point-in-time view of the registry and all cases."""

    def __init__(self, version: int, encoders: Mapping[str, int], cases: Mapping[str, CaseRecord]):
        self._version = version
        self._encoders = MappingProxyType(dict(encoders))
        self._cases = MappingProxyType(dict(cases))
        self._blocks: dict[str, EncoderBlock] = {}
        self._block_lock = threading.Lock()

    @property
    def version(self) -> int:
        return self._version

    @property
    def encoders(self) -> Mapping[str, int]:
        return self._encoders

    @property
    def cases(self) -> Mapping[str, CaseRecord]:
        return self._cases

    def __len__(self) -> int:
        return len(self._cases)

    def __contains__(self, case_id: str) -> bool:
        return case_id in self._cases

    def case(self, case_id: str) -> CaseRecord:
        try:
            return self._cases[case_id]
        except KeyError:
            raise UnknownCaseError(f"no case with id {case_id!r}") from None

    def case_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self._cases))

    def encoder_dim(self, encoder: str) -> int:
        encoder = normalize_encoder_id(encoder)
        try:
            return self._encoders[encoder]
        except KeyError:
            raise UnknownEncoderError(f"encoder {encoder!r} is not registered") from None

    def encoder_block(self, encoder: str) -> EncoderBlock:
        """Dense block for ``encoder``, built on first use and cached.

        Building twice under a racing reader would be wasteful but
        harmless; the lock keeps it single-build.
        """
        encoder = normalize_encoder_id(encoder)
        if encoder not in self._encoders:
            raise UnknownEncoderError(f"encoder {encoder!r} is not registered")
        with self._block_lock:
            block = self._blocks.get(encoder)
            if block is None:
                block = self._build_block(encoder)
                self._blocks[encoder] = block
            return block

    def _build_block(self, encoder: str) -> EncoderBlock:
        rows = [
            (cid, rec)
            for cid, rec in sorted(self._cases.items())
            if encoder in rec.embeddings
        ]
        dim = self._encoders[encoder]
        if not rows:
            matrix = np.empty((0, dim), dtype=np.float64)
            return EncoderBlock(encoder, (), (), matrix, np.empty(0, dtype=np.float64))
        matrix = np.ascontiguousarray(
            np.stack([rec.embeddings[encoder].vector for _, rec in rows]).astype(np.float64)
        )
        norms = np.linalg.norm(matrix, axis=1)
        matrix.flags.writeable = False
        norms.flags.writeable = False
        return EncoderBlock(
            encoder=encoder,
            case_ids=tuple(cid for cid, _ in rows),
            patient_ids=tuple(rec.patient_id for _, rec in rows),
            matrix=matrix,
            norms=norms,
        )


class CaseStore:
    """Single-writer store of case records and the encoder registry."""

    def __init__(self) -> None:
        self._lock = threading.RLock()
        self._version = 0
        self._encoders: dict[str, int] = {}
        self._cases: dict[str, CaseRecord] = {}

    @property
    def version(self) -> int:
        with self._lock:
            return self._version

    def register_encoder(self, name: str, dim: int) -> str:
        """Register an encoder namespace with a fixed dimensionality."""
        name = normalize_encoder_id(name)
        if int(dim) < 1:
            raise InvalidDimensionError(f"encoder dimension must be >= 1, got {dim}")
        with self._lock:
            if name in self._encoders:
                raise DuplicateEncoderError(f"encoder {name!r} is already registered")
            self._encoders[name] = int(dim)
            self._version += 1
        return name

    def encoders(self) -> dict[str, int]:
        with self._lock:
            return dict(self._encoders)

    def _validate_embeddings(self, record: CaseRecord) -> None:
        for encoder, emb in record.embeddings.items():
            expected = self._encoders.get(encoder)
            if expected is None:
                raise UnknownEncoderError(
                    f"case {record.case_id!r} carries an embedding for unregistered encoder {encoder!r}"
                )
            if emb.dim != expected:
                raise DimensionMismatchError(
                    f"embedding for encoder {encoder!r} has {emb.dim} components, "
                    f"registry says {expected}",
                    encoder=encoder,
                    expected=expected,
                    actual=emb.dim,
                )

    def upsert_case(self, record: CaseRecord) -> str:
        """Insert or atomically replace the record with this case id."""
        with self._lock:
            self._validate_embeddings(record)
            triple = (record.patient_id, record.slide_id, record.roi_id)
            for other in self._cases.values():
                if other.case_id == record.case_id:
                    continue
                if (other.patient_id, other.slide_id, other.roi_id) == triple:
                    raise InvalidMetadataError(
                        f"(patient_id, slide_id, roi_id) of case {record.case_id!r} "
                        f"collides with case {other.case_id!r}"
                    )
            self._cases[record.case_id] = record
            self._version += 1
            return record.case_id

    def attach_embedding(self, case_id: str, embedding: Embedding) -> str:
        """Set one encoder's vector on an existing case."""
        with self._lock:
            record = self._cases.get(case_id)
            if record is None:
                raise UnknownCaseError(f"no case with id {case_id!r}")
            updated = record.with_embedding(embedding)
            self._validate_embeddings(updated)
            self._cases[case_id] = updated
            self._version += 1
            return case_id

    def get_case(self, case_id: str) -> CaseRecord:
        with self._lock:
            record = self._cases.get(case_id)
        if record is None:
            raise UnknownCaseError(f"no case with id {case_id!r}")
        return record

    def __len__(self) -> int:
        with self._lock:
            return len(self._cases)

    def snapshot(self) -> StoreSnapshot:
        """Publish the current state as an immutable snapshot."""
        with self._lock:
            return StoreSnapshot(self._version, dict(self._encoders), dict(self._cases))

    @classmethod
    def _restore(
        cls, version: int, encoders: Mapping[str, int], records: Iterable[CaseRecord]
    ) -> CaseStore:
        """Rebuild a store from persisted state without version churn."""
        store = cls()
        store._encoders = dict(encoders)
        for record in records:
            store._validate_embeddings(record)
            store._cases[record.case_id] = record
        store._version = version
        return store
