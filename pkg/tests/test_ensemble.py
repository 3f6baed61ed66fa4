"""Fusion semantics: pooling, dedup, both scoring modes."""

import numpy as np
import pytest

from cytorag import CaseStore, Embedding, ensemble_top_k, top_k
from cytorag.ensemble import RRF_OFFSET, FusionMode, fuse_neighbor_lists
from cytorag.errors import EmptyQueryError, UnknownEncoderError
from cytorag.retrieval import ExclusionFilter, ExclusionMode, Neighbor

from conftest import make_case, random_store


def neighbors(encoder, *pairs):
    return [
        Neighbor(case_id=cid, encoder=encoder, score=score, rank=i + 1)
        for i, (cid, score) in enumerate(pairs)
    ]


class TestFuseNeighborLists:
    def test_two_encoder_hand_example(self):
        # Pool {e1: A=0.9, B=0.8} with {e2: B=0.95, C=0.7}; max-score dedup
        # gives B(0.95), A(0.9), C(0.7).
        lists = {
            "e1": neighbors("e1", ("A", 0.9), ("B", 0.8)),
            "e2": neighbors("e2", ("B", 0.95), ("C", 0.7)),
        }
        fused = fuse_neighbor_lists(lists, 3, FusionMode.RAW_SCORE_POOL)
        assert [(f.case_id, f.fused_score) for f in fused] == [
            ("B", 0.95),
            ("A", 0.9),
            ("C", 0.7),
        ]

    def test_dedup_keeps_both_contributions(self):
        lists = {
            "e1": neighbors("e1", ("A", 0.9)),
            "e2": neighbors("e2", ("A", 0.9)),
        }
        fused = fuse_neighbor_lists(lists, 5, FusionMode.RAW_SCORE_POOL)
        assert len(fused) == 1
        assert len(fused[0].contributing) == 2
        assert {hit.encoder for hit in fused[0].contributing} == {"e1", "e2"}

    def test_raw_fused_score_is_max_of_contributions(self):
        rng = np.random.default_rng(21)
        lists = {}
        for e in ("e1", "e2", "e3"):
            scores = sorted(rng.uniform(-1, 1, size=6), reverse=True)
            lists[e] = neighbors(e, *[(f"c{int(rng.integers(8))}", s) for s in scores])
        for fused in fuse_neighbor_lists(lists, 10, FusionMode.RAW_SCORE_POOL):
            assert fused.fused_score == max(h.score for h in fused.contributing)

    def test_rrf_scoring(self):
        lists = {
            "e1": neighbors("e1", ("A", 0.9), ("B", 0.8)),
            "e2": neighbors("e2", ("B", 0.95), ("C", 0.7)),
        }
        fused = fuse_neighbor_lists(lists, 3, FusionMode.RECIPROCAL_RANK)
        by_case = {f.case_id: f.fused_score for f in fused}
        assert by_case["B"] == pytest.approx(1 / (RRF_OFFSET + 2) + 1 / (RRF_OFFSET + 1))
        assert by_case["A"] == pytest.approx(1 / (RRF_OFFSET + 1))
        assert by_case["C"] == pytest.approx(1 / (RRF_OFFSET + 2))
        assert fused[0].case_id == "B"

    def test_identical_lists_keep_order(self):
        base = [("X", 0.8), ("Y", 0.6), ("Z", 0.4)]
        lists = {e: neighbors(e, *base) for e in ("e1", "e2", "e3")}
        for mode in FusionMode:
            fused = fuse_neighbor_lists(lists, 3, mode)
            assert [f.case_id for f in fused] == ["X", "Y", "Z"]

    def test_tie_breaks_by_case_id(self):
        lists = {"e1": neighbors("e1", ("b", 0.5), ("a", 0.5))}
        fused = fuse_neighbor_lists(lists, 2, FusionMode.RAW_SCORE_POOL)
        assert [f.case_id for f in fused] == ["a", "b"]

    def test_raw_monotonicity(self):
        # Raising one contributing score never lowers that candidate's rank.
        rng = np.random.default_rng(31)
        for _ in range(50):
            scores = {f"c{i}": float(rng.uniform(0, 1)) for i in range(6)}
            ranked = sorted(scores.items(), key=lambda kv: -kv[1])
            lists = {"e1": neighbors("e1", *ranked)}
            target = f"c{int(rng.integers(6))}"
            fused = fuse_neighbor_lists(lists, 6, FusionMode.RAW_SCORE_POOL)
            rank_before = [f.case_id for f in fused].index(target)
            scores[target] = min(1.0, scores[target] + float(rng.uniform(0, 0.5)))
            ranked = sorted(scores.items(), key=lambda kv: -kv[1])
            fused = fuse_neighbor_lists({"e1": neighbors("e1", *ranked)}, 6, FusionMode.RAW_SCORE_POOL)
            rank_after = [f.case_id for f in fused].index(target)
            assert rank_after <= rank_before


class TestEnsembleTopK:
    def test_single_encoder_equals_top_k(self, small_store):
        snapshot = small_store.snapshot()
        query = {"uni": snapshot.case("a").embeddings["uni"]}
        direct = top_k(query["uni"], 3, snapshot)
        for mode in FusionMode:
            fused = ensemble_top_k(query, 3, snapshot, mode)
            assert [f.case_id for f in fused] == [n.case_id for n in direct]
        raw = ensemble_top_k(query, 3, snapshot, FusionMode.RAW_SCORE_POOL)
        assert [f.fused_score for f in raw] == [n.score for n in direct]

    def test_empty_query(self, small_store):
        with pytest.raises(EmptyQueryError):
            ensemble_top_k({}, 3, small_store.snapshot())

    def test_unknown_encoder(self, small_store):
        with pytest.raises(UnknownEncoderError):
            ensemble_top_k({"ghost": Embedding("ghost", [1.0, 0.0])}, 1, small_store.snapshot())

    def test_no_duplicate_case_ids(self):
        rng = np.random.default_rng(13)
        store = random_store(rng, 60, 6, encoders=("e1", "e2", "e3"), missing_fraction=0.2)
        snapshot = store.snapshot()
        for qid in ("c0000", "c0005", "c0010"):
            record = snapshot.case(qid)
            if not record.embeddings:
                continue
            exclusion = ExclusionFilter.for_case(record, ExclusionMode.SAME_CASE)
            for mode in FusionMode:
                fused = ensemble_top_k(record.embeddings, 10, snapshot, mode, exclusion)
                ids = [f.case_id for f in fused]
                assert len(ids) == len(set(ids))
                assert all(f.contributing for f in fused)

    def test_pool_widening(self):
        store = CaseStore()
        store.register_encoder("e1", 2)
        store.register_encoder("e2", 2)
        for i, vec in enumerate([[1.0, 0.0], [0.9, 0.1], [0.8, 0.2], [0.0, 1.0]]):
            store.upsert_case(make_case(f"c{i}", {"e1": vec, "e2": list(reversed(vec))}))
        snapshot = store.snapshot()
        query = {"e1": Embedding("e1", [1.0, 0.0])}
        narrow = ensemble_top_k(query, 2, snapshot)
        wide = ensemble_top_k(query, 2, snapshot, pool_k=4)
        assert [f.case_id for f in narrow] == [f.case_id for f in wide]
        assert len(wide) == 2
