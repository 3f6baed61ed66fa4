"""Seeded synthetic corpus: isotropic Gaussian clusters with class labels.

Stands in for a real slide corpus at desk scale. Cases split as evenly
as possible across classes; each class gets a distinct diagnosis string,
a Bethesda category, and a malignancy label (odd class indices are
malignant), and its cases are spread over a fixed number of patients so
same-patient exclusion has something to bite on.

Geometry: class centroids are unit vectors along the first
``n_classes`` coordinate axes, so every centroid pair is sqrt(2) apart.
``separation`` is that distance divided by the expected radial
deviation of a cluster point (per-coordinate sigma times sqrt(dim)).
Separation 6 leaves no angular overlap between clusters, which is what
makes the leave-one-out benchmark saturate.

Randomness comes from numpy's PCG64 generator seeded explicitly; one
stream, consumed in a fixed order (per-encoder noise, then the optional
label shuffle), so equal seeds reproduce the corpus byte for byte.
``shuffle_labels`` permutes the per-case label assignments while leaving
the geometry alone, which decouples labels from clusters and drives
accuracies to chance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .records import BethesdaCategory, CaseMetadata, CaseRecord, Embedding, MalignancyLabel
from .store import CaseStore

DEFAULT_ENCODERS = ("alpha", "beta", "gamma", "delta")

_BETHESDA_CYCLE = (
    BethesdaCategory.II,
    BethesdaCategory.VI,
    BethesdaCategory.III,
    BethesdaCategory.V,
    BethesdaCategory.IV,
    BethesdaCategory.I,
)


@dataclass(frozen=True)
class SynthConfig:
    n_cases: int
    n_classes: int
    dim: int
    separation: float
    seed: int
    patients_per_class: int = 2
    encoders: tuple[str, ...] = DEFAULT_ENCODERS
    shuffle_labels: bool = False

    def __post_init__(self) -> None:
        if self.n_classes < 2:
            raise ValueError(f"need at least 2 classes, got {self.n_classes}")
        if self.n_cases < self.n_classes:
            raise ValueError(
                f"need at least one case per class: {self.n_cases} cases, {self.n_classes} classes"
            )
        if self.dim < 2:
            raise ValueError(f"dim must be >= 2, got {self.dim}")
        if self.n_classes > self.dim:
            raise ValueError(
                f"axis-aligned centroids need n_classes <= dim ({self.n_classes} > {self.dim})"
            )
        if self.separation <= 0:
            raise ValueError(f"separation must be positive, got {self.separation}")
        if self.patients_per_class < 1:
            raise ValueError("patients_per_class must be >= 1")
        if not self.encoders:
            raise ValueError("need at least one encoder namespace")
        object.__setattr__(self, "encoders", tuple(self.encoders))


def class_profile(class_idx: int) -> CaseMetadata:
    """Label triple and prose fields assigned to one class."""
    malignancy = MalignancyLabel.MALIGNANT if class_idx % 2 == 1 else MalignancyLabel.BENIGN
    return CaseMetadata(
        cytology_diagnosis=f"cytology-pattern-{class_idx}",
        surgical_diagnosis=f"diagnosis-{class_idx}",
        bethesda=_BETHESDA_CYCLE[class_idx % len(_BETHESDA_CYCLE)],
        malignancy=malignancy,
        interpretation=f"Synthetic cluster {class_idx} sample.",
        stain="synthetic",
        magnification=40,
    )


def generate_corpus(config: SynthConfig) -> CaseStore:
    """Build a fully populated store from a synthetic configuration."""
    rng = np.random.Generator(np.random.PCG64(config.seed))
    n = config.n_cases
    geometry_class = np.arange(n) % config.n_classes

    # Inter-centroid distance is sqrt(2) for unit axis centroids.
    sigma_coord = float(np.sqrt(2.0)) / config.separation / float(np.sqrt(config.dim))
    centroids = np.zeros((config.n_classes, config.dim), dtype=np.float64)
    for c in range(config.n_classes):
        centroids[c, c] = 1.0

    vectors: dict[str, np.ndarray] = {}
    for encoder in config.encoders:
        noise = rng.standard_normal((n, config.dim))
        vectors[encoder] = (centroids[geometry_class] + sigma_coord * noise).astype(np.float32)

    label_class = geometry_class.copy()
    if config.shuffle_labels:
        label_class = label_class[rng.permutation(n)]

    store = CaseStore()
    for encoder in config.encoders:
        store.register_encoder(encoder, config.dim)

    profiles = [class_profile(c) for c in range(config.n_classes)]
    seen_in_class = [0] * config.n_classes
    for i in range(n):
        geom = int(geometry_class[i])
        patient = seen_in_class[geom] % config.patients_per_class
        seen_in_class[geom] += 1
        record = CaseRecord(
            case_id=f"c{i:04d}",
            patient_id=f"p{geom}_{patient}",
            slide_id=f"s{i:04d}",
            roi_id="r1",
            metadata=profiles[int(label_class[i])],
            embeddings={
                encoder: Embedding(encoder=encoder, vector=vectors[encoder][i])
                for encoder in config.encoders
            },
        )
        store.upsert_case(record)
    return store
