"""Domain types: encoders, embeddings, diagnostic metadata, case records.

A case is one region of interest from one slide, carrying one embedding
vector per encoder namespace plus its diagnostic metadata. Records are
immutable; the store replaces whole records on update.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Any, Mapping

import numpy as np

from .errors import InvalidMetadataError, NonFiniteVectorError, ZeroNormVectorError

VECTOR_DTYPE = np.float32


def normalize_encoder_id(name: str) -> str:
    """Canonical encoder id: trimmed, lowercase, nonempty."""
    if not isinstance(name, str):
        raise InvalidMetadataError(f"encoder id must be a string, got {type(name).__name__}")
    norm = name.strip().lower()
    if not norm:
        raise InvalidMetadataError("encoder id must be a nonempty string")
    return norm


def normalize_label(label: str) -> str:
    """Canonical form used for ground-truth comparison: trimmed, lowercase."""
    return label.strip().lower()


class BethesdaCategory(Enum):
    """The six TBSRTC reporting categories."""

    I = "I"
    II = "II"
    III = "III"
    IV = "IV"
    V = "V"
    VI = "VI"

    @classmethod
    def parse(cls, value: str | BethesdaCategory) -> BethesdaCategory:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise InvalidMetadataError(
                f"invalid Bethesda category {value!r}; expected one of I..VI"
            ) from None


class MalignancyLabel(Enum):
    BENIGN = "benign"
    MALIGNANT = "malignant"
    UNKNOWN = "unknown"

    @classmethod
    def parse(cls, value: str | MalignancyLabel) -> MalignancyLabel:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise InvalidMetadataError(
                f"invalid malignancy label {value!r}; expected benign|malignant|unknown"
            ) from None


@dataclass(frozen=True)
class Embedding:
    """One encoder's vector for one case.

    The vector is held as a read-only float32 array: 32-bit components are
    the persistence granularity, so everything downstream sees exactly the
    values that survive a save/open round trip. Components must be finite
    and the vector must have a positive norm (cosine is undefined at zero).
    """

    encoder: str
    vector: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "encoder", normalize_encoder_id(self.encoder))
        vec = np.asarray(self.vector, dtype=VECTOR_DTYPE)
        if vec.ndim != 1 or vec.size == 0:
            raise InvalidMetadataError(
                f"embedding vector must be a nonempty 1-D sequence, got shape {vec.shape}"
            )
        if not np.all(np.isfinite(vec)):
            raise NonFiniteVectorError(
                f"embedding under encoder {self.encoder!r} contains non-finite components"
            )
        if not np.any(vec):
            raise ZeroNormVectorError(
                f"embedding under encoder {self.encoder!r} has zero norm"
            )
        vec = vec.copy()
        vec.flags.writeable = False
        object.__setattr__(self, "vector", vec)

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Embedding):
            return NotImplemented
        return self.encoder == other.encoder and np.array_equal(self.vector, other.vector)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class CaseMetadata:
    """Diagnostic metadata attached to a case.

    ``surgical_diagnosis`` is the ground-truth label string for the
    diagnosis prediction task and may be empty only for query-only cases
    that never enter evaluation.
    """

    cytology_diagnosis: str
    surgical_diagnosis: str
    bethesda: BethesdaCategory
    malignancy: MalignancyLabel
    interpretation: str = ""
    stain: str = ""
    magnification: int = 40

    def __post_init__(self) -> None:
        object.__setattr__(self, "bethesda", BethesdaCategory.parse(self.bethesda))
        object.__setattr__(self, "malignancy", MalignancyLabel.parse(self.malignancy))
        if int(self.magnification) <= 0:
            raise InvalidMetadataError(
                f"magnification must be positive, got {self.magnification}"
            )
        object.__setattr__(self, "magnification", int(self.magnification))

    def to_dict(self) -> dict[str, Any]:
        return {
            "cytology_diagnosis": self.cytology_diagnosis,
            "surgical_diagnosis": self.surgical_diagnosis,
            "bethesda": self.bethesda.value,
            "malignancy": self.malignancy.value,
            "interpretation": self.interpretation,
            "stain": self.stain,
            "magnification": self.magnification,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> CaseMetadata:
        try:
            return cls(
                cytology_diagnosis=str(data["cytology_diagnosis"]),
                surgical_diagnosis=str(data["surgical_diagnosis"]),
                bethesda=BethesdaCategory.parse(data["bethesda"]),
                malignancy=MalignancyLabel.parse(data["malignancy"]),
                interpretation=str(data.get("interpretation", "")),
                stain=str(data.get("stain", "")),
                magnification=int(data.get("magnification", 40)),
            )
        except KeyError as exc:
            raise InvalidMetadataError(f"metadata missing required field {exc.args[0]!r}") from None


@dataclass(frozen=True)
class CaseRecord:
    """One ROI with its per-encoder embeddings and metadata.

    Each encoder appears at most once; the embeddings mapping is exposed
    read-only. Equality is field-for-field including vector contents.
    """

    case_id: str
    patient_id: str
    slide_id: str
    roi_id: str
    metadata: CaseMetadata
    embeddings: Mapping[str, Embedding] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name, value in (
            ("case_id", self.case_id),
            ("patient_id", self.patient_id),
            ("slide_id", self.slide_id),
            ("roi_id", self.roi_id),
        ):
            if not isinstance(value, str) or not value.strip():
                raise InvalidMetadataError(f"{name} must be a nonempty string")
        normalized: dict[str, Embedding] = {}
        for key, emb in self.embeddings.items():
            key = normalize_encoder_id(key)
            if key != emb.encoder:
                raise InvalidMetadataError(
                    f"embedding key {key!r} does not match embedding encoder {emb.encoder!r}"
                )
            if key in normalized:
                raise InvalidMetadataError(f"duplicate embedding for encoder {key!r}")
            normalized[key] = emb
        object.__setattr__(self, "embeddings", MappingProxyType(normalized))

    def with_embedding(self, embedding: Embedding) -> CaseRecord:
        """New record with ``embedding`` set (replacing any under that encoder)."""
        merged = dict(self.embeddings)
        merged[embedding.encoder] = embedding
        return CaseRecord(
            case_id=self.case_id,
            patient_id=self.patient_id,
            slide_id=self.slide_id,
            roi_id=self.roi_id,
            metadata=self.metadata,
            embeddings=merged,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CaseRecord):
            return NotImplemented
        return (
            self.case_id == other.case_id
            and self.patient_id == other.patient_id
            and self.slide_id == other.slide_id
            and self.roi_id == other.roi_id
            and self.metadata == other.metadata
            and dict(self.embeddings) == dict(other.embeddings)
        )

    __hash__ = None  # type: ignore[assignment]
