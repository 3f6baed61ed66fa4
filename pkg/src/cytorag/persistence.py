"""Binary store file: versioned header, registry, records, raw vectors.

Layout (all integers little-endian):

    bytes 0..7    magic ``CYRAGDB\\x00``
    bytes 8..11   u32 format version (currently 1)
    bytes 12..19  u64 store version counter
    bytes 20..23  u32 length of the JSON header in bytes
    bytes 24..31  u64 length of the vector payload in bytes
    ...           JSON header (utf-8)
    ...           payload: concatenated float32 little-endian vectors

The JSON header holds the registry and, per case, ids, metadata, and per
embedding ``{encoder, dim, offset}`` where ``offset`` is the byte offset
of the vector inside the payload. Vectors round-trip bit-exactly because
they are stored as raw float32, which is also the in-memory dtype.
Files with a different magic or a newer format version are rejected.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any

import numpy as np

from .errors import FormatError, StoreIoError, VersionError
from .records import CaseMetadata, CaseRecord, Embedding
from .store import CaseStore, StoreSnapshot

MAGIC = b"CYRAGDB\x00"
FORMAT_VERSION = 1
_FIXED_HEADER = struct.Struct("<8sIQIQ")


def save_store(store: CaseStore | StoreSnapshot, path: str | Path) -> Path:
    """Write the store (or a snapshot of it) to ``path``."""
    snapshot = store.snapshot() if isinstance(store, CaseStore) else store
    payload_parts: list[bytes] = []
    offset = 0
    cases_meta: list[dict[str, Any]] = []
    for case_id in sorted(snapshot.cases):
        record = snapshot.cases[case_id]
        embeddings_meta = []
        for encoder in sorted(record.embeddings):
            emb = record.embeddings[encoder]
            raw = np.asarray(emb.vector, dtype="<f4").tobytes()
            embeddings_meta.append({"encoder": encoder, "dim": emb.dim, "offset": offset})
            payload_parts.append(raw)
            offset += len(raw)
        cases_meta.append(
            {
                "case_id": record.case_id,
                "patient_id": record.patient_id,
                "slide_id": record.slide_id,
                "roi_id": record.roi_id,
                "metadata": record.metadata.to_dict(),
                "embeddings": embeddings_meta,
            }
        )
    header = json.dumps(
        {"encoders": dict(snapshot.encoders), "cases": cases_meta},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    payload = b"".join(payload_parts)
    path = Path(path)
    try:
        with open(path, "wb") as fh:
            fh.write(
                _FIXED_HEADER.pack(MAGIC, FORMAT_VERSION, snapshot.version, len(header), len(payload))
            )
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise StoreIoError(f"cannot write store file {path}: {exc}") from exc
    return path


def open_store(path: str | Path) -> CaseStore:
    """Load a store file written by :func:`save_store`."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise StoreIoError(f"cannot read store file {path}: {exc}") from exc
    if len(raw) < _FIXED_HEADER.size:
        raise FormatError(f"store file {path} is truncated ({len(raw)} bytes)")
    magic, fmt_version, store_version, header_len, payload_len = _FIXED_HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise VersionError(f"{path} is not a store file (bad magic {magic!r})")
    if fmt_version != FORMAT_VERSION:
        raise VersionError(
            f"store file {path} has format version {fmt_version}; this build reads {FORMAT_VERSION}"
        )
    body = raw[_FIXED_HEADER.size:]
    if len(body) != header_len + payload_len:
        raise FormatError(
            f"store file {path} has {len(body)} body bytes, header declares {header_len + payload_len}"
        )
    try:
        header = json.loads(body[:header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"store file {path} has a corrupt JSON header: {exc}") from exc
    payload = body[header_len:]

    try:
        encoders = {str(k): int(v) for k, v in header["encoders"].items()}
        records = []
        for case in header["cases"]:
            embeddings = {}
            for emb in case["embeddings"]:
                start = int(emb["offset"])
                dim = int(emb["dim"])
                end = start + 4 * dim
                if end > len(payload):
                    raise FormatError(f"store file {path}: vector extends past payload end")
                vector = np.frombuffer(payload[start:end], dtype="<f4")
                embeddings[emb["encoder"]] = Embedding(encoder=emb["encoder"], vector=vector)
            records.append(
                CaseRecord(
                    case_id=case["case_id"],
                    patient_id=case["patient_id"],
                    slide_id=case["slide_id"],
                    roi_id=case["roi_id"],
                    metadata=CaseMetadata.from_dict(case["metadata"]),
                    embeddings=embeddings,
                )
            )
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"store file {path} has a malformed header: {exc}") from exc
    return CaseStore._restore(int(store_version), encoders, records)
