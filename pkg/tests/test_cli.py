"""CLI behavior: seeds, exit codes, re-parseable numeric output."""

import json

import pytest

from cytorag import open_store
from cytorag.cli import main
from cytorag.evaluation import PredictionTask, topk_accuracy
from cytorag.retrieval import ExclusionFilter, ExclusionMode, top_k


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


SYNTH_ARGS = [
    "synth", "--cases", "40", "--classes", "2", "--dim", "8",
    "--separation", "6", "--seed", "7", "--encoders", "enc",
]


class TestSynth:
    def test_equal_seeds_byte_identical(self, tmp_path, capsys):
        a = tmp_path / "a.bin"
        b = tmp_path / "b.bin"
        assert run(capsys, *SYNTH_ARGS, "--out", str(a))[0] == 0
        assert run(capsys, *SYNTH_ARGS, "--out", str(b))[0] == 0
        assert a.read_bytes() == b.read_bytes()

    def test_different_seed_differs(self, tmp_path, capsys):
        a = tmp_path / "a.bin"
        b = tmp_path / "b.bin"
        run(capsys, *SYNTH_ARGS, "--out", str(a))
        argv = list(SYNTH_ARGS)
        argv[argv.index("--seed") + 1] = "8"
        run(capsys, *argv, "--out", str(b))
        assert a.read_bytes() != b.read_bytes()

    def test_seed_is_required(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["synth", "--cases", "10", "--classes", "2", "--dim", "4",
                  "--separation", "6", "--out", str(tmp_path / "x.bin")])
        assert exc.value.code == 2

    def test_export_jsonl_reingests(self, tmp_path, capsys):
        store_path = tmp_path / "s.bin"
        jsonl_dir = tmp_path / "jsonl"
        run(capsys, *SYNTH_ARGS, "--out", str(store_path), "--export-jsonl", str(jsonl_dir))
        new_store = tmp_path / "reingested.bin"
        code, out, _ = run(
            capsys, "ingest", "--store", str(new_store),
            "--embeddings", str(jsonl_dir / "embeddings.jsonl"),
            "--metadata", str(jsonl_dir / "metadata.jsonl"),
        )
        assert code == 0
        assert "ingested cases=40" in out
        original = open_store(store_path)
        reingested = open_store(new_store)
        for case_id, record in original.snapshot().cases.items():
            assert reingested.get_case(case_id) == record


@pytest.fixture
def store_path(tmp_path, capsys):
    path = tmp_path / "store.bin"
    run(capsys, *SYNTH_ARGS, "--out", str(path))
    return path


class TestQuery:
    def test_table_matches_library(self, store_path, capsys):
        code, out, _ = run(
            capsys, "query", "--store", str(store_path),
            "--case", "c0001", "--encoder", "enc", "--k", "5",
        )
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0].split("\t") == ["rank", "case_id", "score", "diagnosis", "bethesda"]
        assert len(lines) == 6
        snapshot = open_store(store_path).snapshot()
        record = snapshot.case("c0001")
        expected = top_k(
            record.embeddings["enc"], 5, snapshot,
            ExclusionFilter.for_case(record, ExclusionMode.SAME_CASE),
        )
        for line, neighbor in zip(lines[1:], expected):
            rank, case_id, score, _, _ = line.split("\t")
            assert (int(rank), case_id, float(score)) == (
                neighbor.rank, neighbor.case_id, neighbor.score,
            )

    def test_unknown_case_exits_1(self, store_path, capsys):
        code, _, err = run(
            capsys, "query", "--store", str(store_path),
            "--case", "ghost", "--encoder", "enc",
        )
        assert code == 1
        assert json.loads(err)["error"]["code"] == "unknown_case"


class TestEvaluate:
    def test_stdout_matches_report_json(self, store_path, tmp_path, capsys):
        out_dir = tmp_path / "rpt"
        code, out, _ = run(
            capsys, "evaluate", "--store", str(store_path),
            "--task", "diagnosis", "--k", "1,3,5", "--out-dir", str(out_dir),
        )
        assert code == 0
        report = json.loads((out_dir / "report.json").read_text())
        table_lines = [
            line for line in out.splitlines()
            if line and "," in line and not line.startswith(("model", "auc", "content_hash", "task"))
        ]
        acc_rows = [l for l in table_lines if len(l.split(",")) == 4]
        for row in acc_rows:
            model, top1, top3, top5 = row.split(",")
            stored = report["accuracy"]["surgical_diagnosis"][model]
            assert [float(top1), float(top3), float(top5)] == [
                stored["1"], stored["3"], stored["5"],
            ]
        hash_line = [l for l in out.splitlines() if l.startswith("content_hash,")][0]
        assert hash_line.split(",")[1] == report["content_hash"]

    def test_accuracy_equals_library(self, store_path, capsys):
        code, out, _ = run(
            capsys, "evaluate", "--store", str(store_path), "--task", "diagnosis", "--k", "1",
        )
        assert code == 0
        snapshot = open_store(store_path).snapshot()
        expected = topk_accuracy(snapshot, "enc", PredictionTask.SURGICAL_DIAGNOSIS, 1)
        row = [l for l in out.splitlines() if l.startswith("enc,")][0]
        assert float(row.split(",")[1]) == expected


class TestRoc:
    def test_csv_auc_matches_report(self, store_path, tmp_path, capsys):
        out_dir = tmp_path / "rpt"
        run(capsys, "evaluate", "--store", str(store_path), "--k", "1,3,5",
            "--out-dir", str(out_dir))
        report = json.loads((out_dir / "report.json").read_text())
        roc_path = tmp_path / "roc.csv"
        code, out, _ = run(
            capsys, "roc", "--store", str(store_path),
            "--model", "enc", "--k", "5", "--out", str(roc_path),
        )
        assert code == 0
        rows = [
            tuple(float(x) for x in line.split(","))
            for line in roc_path.read_text().strip().splitlines()[1:]
        ]
        auc = 0.0
        for (f0, t0, _), (f1, t1, _) in zip(rows, rows[1:]):
            auc += (f1 - f0) * (t1 + t0) / 2.0
        assert auc == report["roc"]["enc"]["5"]["auc"]


class TestRegisterEncoder:
    def test_register_then_reopen(self, tmp_path, capsys):
        path = tmp_path / "fresh.bin"
        code, out, _ = run(
            capsys, "register-encoder", "--store", str(path), "--name", "UNI", "--dim", "16",
        )
        assert code == 0
        assert open_store(path).encoders() == {"uni": 16}

    def test_duplicate_exits_1(self, tmp_path, capsys):
        path = tmp_path / "fresh.bin"
        run(capsys, "register-encoder", "--store", str(path), "--name", "uni", "--dim", "16")
        code, _, err = run(
            capsys, "register-encoder", "--store", str(path), "--name", "uni", "--dim", "16",
        )
        assert code == 1
        assert json.loads(err)["error"]["code"] == "duplicate_encoder"


class TestPrompt:
    def test_prompt_with_stub_interpretation(self, store_path, capsys):
        code, out, _ = run(
            capsys, "prompt", "--store", str(store_path),
            "--case", "c0002", "--encoder", "enc", "--k", "5",
            "--interpret", "--stub",
        )
        assert code == 0
        assert out.count("Example ") == 5
        assert "[stub interpretation]" in out
