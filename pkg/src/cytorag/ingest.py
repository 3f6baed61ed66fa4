"""JSONL corpus ingestion.

Two files describe a corpus: a metadata file (one case object per line)
and an embeddings file (one ``{case_id, encoder, dim, vector}`` object
per line). Vectors arrive as decimal text and are converted to float32,
the store's persistence granularity.

Encoders seen for the first time are registered with the line's declared
``dim``; later lines for the same encoder must agree. In lenient mode
bad lines are reported and skipped; in strict mode the first bad line
aborts the ingest and nothing is committed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import CytoragError, FormatError, StoreIoError
from .records import CaseMetadata, CaseRecord, Embedding, normalize_encoder_id
from .store import CaseStore


@dataclass(frozen=True)
class LineReject:
    """One rejected input line."""

    path: str
    line_no: int
    code: str
    message: str


@dataclass
class IngestReport:
    """Counts and per-line rejects for one ingest run."""

    cases_ingested: int = 0
    embeddings_attached: int = 0
    rejects: list[LineReject] = field(default_factory=list)


def _iter_jsonl(path: Path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if line.strip():
                    yield line_no, line
    except OSError as exc:
        raise StoreIoError(f"cannot read {path}: {exc}") from exc


def _parse_metadata_line(obj: dict[str, Any]) -> CaseRecord:
    missing = [k for k in ("case_id", "patient_id", "slide_id", "roi_id") if k not in obj]
    if missing:
        raise FormatError(f"missing fields {missing}")
    return CaseRecord(
        case_id=str(obj["case_id"]),
        patient_id=str(obj["patient_id"]),
        slide_id=str(obj["slide_id"]),
        roi_id=str(obj["roi_id"]),
        metadata=CaseMetadata.from_dict(obj),
    )


def load_corpus(
    store: CaseStore,
    embeddings_path: str | Path,
    metadata_path: str | Path,
    strict: bool = False,
) -> IngestReport:
    """Ingest a JSONL corpus into ``store``.

    Returns the ingest report; ``cases_ingested`` counts metadata lines
    that became records. Embeddings referencing a case absent from both
    the metadata file and the existing store are rejected.
    """
    embeddings_path = Path(embeddings_path)
    metadata_path = Path(metadata_path)
    report = IngestReport()

    def reject(path: Path, line_no: int, code: str, message: str) -> None:
        if strict:
            raise FormatError(
                f"{path}:{line_no}: {message}", line=line_no, cause=code, file=str(path)
            )
        report.rejects.append(LineReject(str(path), line_no, code, message))

    # Stage everything first so a strict-mode abort commits nothing.
    staged: dict[str, CaseRecord] = {}
    for line_no, line in _iter_jsonl(metadata_path):
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise FormatError("line is not a JSON object")
            record = _parse_metadata_line(obj)
            if record.case_id in staged:
                raise FormatError(f"duplicate case_id {record.case_id!r} in metadata file")
            staged[record.case_id] = record
        except json.JSONDecodeError as exc:
            reject(metadata_path, line_no, "format_error", f"malformed JSON: {exc}")
        except CytoragError as exc:
            reject(metadata_path, line_no, exc.code, exc.message)

    new_encoders: dict[str, int] = {}
    known_encoders = store.encoders()
    attach_count = 0
    for line_no, line in _iter_jsonl(embeddings_path):
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise FormatError("line is not a JSON object")
            for key in ("case_id", "encoder", "dim", "vector"):
                if key not in obj:
                    raise FormatError(f"missing field {key!r}")
            case_id = str(obj["case_id"])
            encoder = normalize_encoder_id(obj["encoder"])
            declared = int(obj["dim"])
            vector = obj["vector"]
            if not isinstance(vector, list) or len(vector) != declared:
                raise FormatError(
                    f"declared dim {declared} does not match vector length "
                    f"{len(vector) if isinstance(vector, list) else '<not a list>'}"
                )
            emb = Embedding(encoder=encoder, vector=vector)
            registered = new_encoders.get(encoder, known_encoders.get(encoder))
            if registered is None:
                new_encoders[encoder] = declared
            elif registered != declared:
                raise FormatError(
                    f"encoder {encoder!r} has dim {registered}, line declares {declared}"
                )
            base = staged.get(case_id)
            if base is None:
                try:
                    base = store.get_case(case_id)
                except CytoragError:
                    raise FormatError(f"embedding references unknown case {case_id!r}") from None
                staged[case_id] = base
            staged[case_id] = base.with_embedding(emb)
            attach_count += 1
        except json.JSONDecodeError as exc:
            reject(embeddings_path, line_no, "format_error", f"malformed JSON: {exc}")
        except CytoragError as exc:
            reject(embeddings_path, line_no, exc.code, exc.message)

    for encoder, dim in new_encoders.items():
        store.register_encoder(encoder, dim)
    for case_id in staged:
        store.upsert_case(staged[case_id])
    report.cases_ingested = len(staged)
    report.embeddings_attached = attach_count
    return report
