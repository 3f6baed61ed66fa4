"""Domain type validation and normalization."""

import numpy as np
import pytest

from cytorag import BethesdaCategory, CaseMetadata, Embedding, MalignancyLabel
from cytorag.errors import InvalidMetadataError, NonFiniteVectorError, ZeroNormVectorError
from cytorag.records import normalize_encoder_id, normalize_label

from conftest import make_case


class TestEncoderIds:
    def test_normalized_to_lowercase(self):
        assert normalize_encoder_id(" GigaPath ") == "gigapath"

    def test_empty_rejected(self):
        with pytest.raises(InvalidMetadataError):
            normalize_encoder_id("   ")


class TestBethesda:
    def test_parse_all_six(self):
        assert [BethesdaCategory.parse(v).value for v in ("I", "ii", " III", "IV", "v", "VI")] == [
            "I", "II", "III", "IV", "V", "VI",
        ]

    def test_invalid(self):
        with pytest.raises(InvalidMetadataError):
            BethesdaCategory.parse("VII")


class TestMalignancy:
    def test_parse(self):
        assert MalignancyLabel.parse("Malignant") is MalignancyLabel.MALIGNANT
        assert MalignancyLabel.parse("unknown") is MalignancyLabel.UNKNOWN

    def test_invalid(self):
        with pytest.raises(InvalidMetadataError):
            MalignancyLabel.parse("maybe")


class TestEmbedding:
    def test_stored_as_float32_readonly(self):
        emb = Embedding("uni", [0.1, 0.2, 0.3])
        assert emb.vector.dtype == np.float32
        with pytest.raises(ValueError):
            emb.vector[0] = 9.0

    def test_rejects_inf(self):
        with pytest.raises(NonFiniteVectorError):
            Embedding("uni", [1.0, float("inf")])

    def test_rejects_zero_norm(self):
        with pytest.raises(ZeroNormVectorError):
            Embedding("uni", [0.0, 0.0, 0.0])

    def test_rejects_empty_and_2d(self):
        with pytest.raises(InvalidMetadataError):
            Embedding("uni", [])
        with pytest.raises(InvalidMetadataError):
            Embedding("uni", [[1.0, 2.0]])

    def test_equality_by_contents(self):
        assert Embedding("uni", [1, 2]) == Embedding("UNI ", [1.0, 2.0])
        assert Embedding("uni", [1, 2]) != Embedding("uni", [1, 3])


class TestMetadata:
    def test_magnification_positive(self):
        with pytest.raises(InvalidMetadataError):
            CaseMetadata("c", "d", "III", "benign", magnification=0)

    def test_dict_round_trip(self):
        meta = CaseMetadata("cyt", "dx", "IV", "malignant", "note", "diff-quik", 40)
        assert CaseMetadata.from_dict(meta.to_dict()) == meta

    def test_missing_field(self):
        with pytest.raises(InvalidMetadataError):
            CaseMetadata.from_dict({"cytology_diagnosis": "x"})


class TestCaseRecord:
    def test_encoder_key_must_match(self):
        record = make_case("a", {})
        with pytest.raises(InvalidMetadataError):
            type(record)(
                case_id="a",
                patient_id="p",
                slide_id="s",
                roi_id="r",
                metadata=record.metadata,
                embeddings={"uni": Embedding("vit", [1.0, 0.0])},
            )

    def test_with_embedding_replaces(self):
        record = make_case("a", {"uni": [1.0, 0.0]})
        updated = record.with_embedding(Embedding("uni", [0.0, 1.0]))
        assert record.embeddings["uni"] != updated.embeddings["uni"]
        assert record != updated


class TestLabelNormalization:
    def test_trim_and_case(self):
        assert normalize_label("  Papillary Thyroid Carcinoma ") == "papillary thyroid carcinoma"
