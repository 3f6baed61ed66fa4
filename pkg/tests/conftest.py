"""Shared fixtures: tiny stores and a corpus-scale JSONL fixture.

The JSONL fixture mirrors the shape of a small clinical corpus: 13
patients holding 36 cases (2 to 5 slides each), 21 benign / 15
malignant, with one Bethesda VI patient, nine III, two IV, and one II.
Content is synthetic; only the shape matters.
"""

from __future__ import annotations

import json

import numpy as np
import pytest

from cytorag import CaseMetadata, CaseRecord, CaseStore, Embedding

# (cases, bethesda, malignancy, surgical diagnosis) per patient; 36 cases total.
PATIENT_PLAN = [
    (5, "VI", "malignant", "papillary thyroid carcinoma"),
    (4, "III", "malignant", "papillary thyroid carcinoma"),
    (3, "III", "malignant", "follicular carcinoma"),
    (3, "III", "malignant", "papillary thyroid carcinoma"),
    (2, "III", "benign", "benign follicular nodule"),
    (2, "III", "benign", "benign follicular nodule"),
    (3, "III", "benign", "adenomatoid nodule"),
    (3, "III", "benign", "benign follicular nodule"),
    (2, "III", "benign", "adenomatoid nodule"),
    (2, "III", "benign", "benign follicular nodule"),
    (3, "IV", "benign", "follicular adenoma"),
    (2, "IV", "benign", "follicular adenoma"),
    (2, "II", "benign", "graves disease"),
]

CORPUS_ENCODERS = {"uni": 8, "vit32": 6}


def corpus_case_rows() -> list[dict]:
    rows = []
    case_idx = 0
    for p_idx, (n_slides, bethesda, malignancy, diagnosis) in enumerate(PATIENT_PLAN):
        for s_idx in range(n_slides):
            rows.append(
                {
                    "case_id": f"case{case_idx:03d}",
                    "patient_id": f"patient{p_idx:02d}",
                    "slide_id": f"slide{p_idx:02d}_{s_idx}",
                    "roi_id": "roi1",
                    "cytology_diagnosis": f"smear consistent with {diagnosis}",
                    "surgical_diagnosis": diagnosis,
                    "bethesda": bethesda,
                    "malignancy": malignancy,
                    "interpretation": f"synthetic interpretation for patient {p_idx}",
                    "stain": "diff-quik",
                    "magnification": 40,
                }
            )
            case_idx += 1
    return rows


def corpus_embedding_rows(seed: int = 11) -> list[dict]:
    """One vector per (case, encoder); malignant cases cluster away from benign."""
    rng = np.random.default_rng(seed)
    rows = []
    for case in corpus_case_rows():
        malignant = case["malignancy"] == "malignant"
        for encoder, dim in CORPUS_ENCODERS.items():
            center = np.zeros(dim)
            center[1 if malignant else 0] = 1.0
            vec = center + 0.08 * rng.standard_normal(dim)
            rows.append(
                {
                    "case_id": case["case_id"],
                    "encoder": encoder,
                    "dim": dim,
                    "vector": [float(np.float32(x)) for x in vec],
                }
            )
    return rows


@pytest.fixture
def corpus_paths(tmp_path):
    """Write the 36-case fixture as (embeddings_path, metadata_path)."""
    meta_path = tmp_path / "metadata.jsonl"
    emb_path = tmp_path / "embeddings.jsonl"
    with open(meta_path, "w", encoding="utf-8") as fh:
        for row in corpus_case_rows():
            fh.write(json.dumps(row) + "\n")
    with open(emb_path, "w", encoding="utf-8") as fh:
        for row in corpus_embedding_rows():
            fh.write(json.dumps(row) + "\n")
    return emb_path, meta_path


def make_case(
    case_id: str,
    vectors: dict[str, list[float]],
    patient_id: str | None = None,
    diagnosis: str = "benign follicular nodule",
    bethesda: str = "III",
    malignancy: str = "benign",
) -> CaseRecord:
    return CaseRecord(
        case_id=case_id,
        patient_id=patient_id or f"pat-{case_id}",
        slide_id=f"sl-{case_id}",
        roi_id="r1",
        metadata=CaseMetadata(
            cytology_diagnosis=f"cytology of {case_id}",
            surgical_diagnosis=diagnosis,
            bethesda=bethesda,
            malignancy=malignancy,
            interpretation=f"interpretation of {case_id}",
            stain="diff-quik",
            magnification=40,
        ),
        embeddings={enc: Embedding(enc, vec) for enc, vec in vectors.items()},
    )


@pytest.fixture
def small_store() -> CaseStore:
    """Three cases under one 4-d encoder, axis-separated."""
    store = CaseStore()
    store.register_encoder("uni", 4)
    store.upsert_case(make_case("a", {"uni": [1.0, 0.0, 0.0, 0.0]}))
    store.upsert_case(make_case("b", {"uni": [0.9, 0.1, 0.0, 0.0]}))
    store.upsert_case(make_case("c", {"uni": [0.0, 0.0, 1.0, 0.0]}))
    return store


def random_store(
    rng: np.random.Generator,
    n_cases: int,
    dim: int,
    encoders: tuple[str, ...] = ("enc",),
    duplicate_fraction: float = 0.1,
    missing_fraction: float = 0.0,
) -> CaseStore:
    """Random store; a slice of cases reuse earlier vectors to force ties."""
    store = CaseStore()
    for encoder in encoders:
        store.register_encoder(encoder, dim)
    vectors: dict[str, list[np.ndarray]] = {enc: [] for enc in encoders}
    n_patients = max(1, n_cases // 3)
    for i in range(n_cases):
        embs = {}
        for encoder in encoders:
            if missing_fraction and rng.random() < missing_fraction and i > 0:
                continue
            if vectors[encoder] and rng.random() < duplicate_fraction:
                vec = vectors[encoder][int(rng.integers(len(vectors[encoder])))]
            else:
                vec = rng.standard_normal(dim)
            vectors[encoder].append(vec)
            embs[encoder] = Embedding(encoder, vec)
        record = CaseRecord(
            case_id=f"c{i:04d}",
            patient_id=f"p{int(rng.integers(n_patients)):04d}",
            slide_id=f"s{i:04d}",
            roi_id="r1",
            metadata=CaseMetadata(
                cytology_diagnosis="cyt",
                surgical_diagnosis=f"diag-{int(rng.integers(4))}",
                bethesda=["II", "III", "IV", "V", "VI"][int(rng.integers(5))],
                malignancy=["benign", "malignant"][int(rng.integers(2))],
            ),
            embeddings=embs,
        )
        store.upsert_case(record)
    return store
