"""HTTP service over the store, retrieval, prompting, and evaluation.

Handlers are thin mappings onto the library operations: each request
validates its body, calls the one matching operation on the current
snapshot, and serializes the result. Reads never block writes (they run
against immutable snapshots); writes are serialized by the store's own
lock. Reviewer decisions go to an append-only JSONL journal that
survives store rebuilds.

Error mapping (stable machine codes in every error body):

    400  schema_violation (malformed request body)
    401  unauthorized (when an API token is configured)
    404  unknown_case, unknown_encoder, unknown_template, unknown_report
    409  duplicate_encoder
    422  dimension_mismatch, zero_norm_vector, non_finite_vector,
         invalid_dimension, invalid_metadata, empty_context, empty_query,
         missing_embedding, no_eligible_neighbors, empty_evaluation_set,
         degenerate_labels, format_error, template_error
    502  endpoint_error, endpoint_unreachable, timeout
    503  store_unavailable (snapshot reload in progress)
"""

from __future__ import annotations

import errno
import json
import logging
import os
import threading
import uuid
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from fastapi import Depends, FastAPI, Query, Request
from fastapi.encoders import jsonable_encoder
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field

from . import evaluation as ev
from .ensemble import FusedNeighbor, FusionMode, ensemble_top_k
from .errors import (
    CytoragError,
    DegenerateLabelsError,
    DimensionMismatchError,
    DuplicateEncoderError,
    EmptyContextError,
    EmptyEvaluationSetError,
    EmptyQueryError,
    EndpointError,
    EndpointUnreachableError,
    FormatError,
    InvalidDimensionError,
    InvalidMetadataError,
    LlmTimeoutError,
    MissingEmbeddingError,
    NoEligibleNeighborsError,
    NonFiniteVectorError,
    PortInUseError,
    StoreLoadError,
    TemplateError,
    UnknownCaseError,
    UnknownEncoderError,
    UnknownReportError,
    UnknownTemplateError,
    ZeroNormVectorError,
)
from .llm import LlmClientConfig, make_client
from .persistence import open_store, save_store
from .prompting import (
    PromptBundle,
    assemble_prompt,
    examples_from_neighbors,
    load_template_dir,
    resolve_template,
)
from .records import BethesdaCategory, CaseMetadata, CaseRecord, Embedding, MalignancyLabel
from .reporting import combined_roc_csv, report_to_dict
from .retrieval import ExclusionFilter, ExclusionMode, Neighbor, top_k
from .store import CaseStore, StoreSnapshot

logger = logging.getLogger(__name__)

_STATUS_BY_ERROR: dict[type[CytoragError], int] = {
    UnknownCaseError: 404,
    UnknownEncoderError: 404,
    UnknownTemplateError: 404,
    UnknownReportError: 404,
    DuplicateEncoderError: 409,
    DimensionMismatchError: 422,
    ZeroNormVectorError: 422,
    NonFiniteVectorError: 422,
    InvalidDimensionError: 422,
    InvalidMetadataError: 422,
    EmptyContextError: 422,
    EmptyQueryError: 422,
    MissingEmbeddingError: 422,
    NoEligibleNeighborsError: 422,
    EmptyEvaluationSetError: 422,
    DegenerateLabelsError: 422,
    FormatError: 422,
    TemplateError: 422,
    EndpointError: 502,
    EndpointUnreachableError: 502,
    LlmTimeoutError: 502,
}


@dataclass
class ServiceConfig:
    """Runtime configuration; file values < environment < explicit args."""

    host: str = "127.0.0.1"
    port: int = 8000
    store_path: str | None = None
    journal_path: str | None = None
    templates_dir: str | None = None
    cors_origins: list[str] = field(default_factory=list)
    api_token: str | None = None
    llm: LlmClientConfig = field(default_factory=LlmClientConfig)

    @classmethod
    def load(cls, config_path: str | Path | None = None, **overrides: Any) -> ServiceConfig:
        data: dict[str, Any] = {}
        if config_path is not None:
            try:
                data = json.loads(Path(config_path).read_text(encoding="utf-8"))
            except OSError as exc:
                raise StoreLoadError(f"cannot read config file {config_path}: {exc}") from exc
            except json.JSONDecodeError as exc:
                raise FormatError(f"config file {config_path} is not valid JSON: {exc}") from exc
        llm_data = dict(data.pop("llm", {}))
        config = cls(**{k: v for k, v in data.items() if v is not None})

        env = os.environ
        if env.get("CYTORAG_HOST"):
            config.host = env["CYTORAG_HOST"]
        if env.get("CYTORAG_PORT"):
            config.port = int(env["CYTORAG_PORT"])
        if env.get("CYTORAG_STORE_PATH"):
            config.store_path = env["CYTORAG_STORE_PATH"]
        if env.get("CYTORAG_JOURNAL_PATH"):
            config.journal_path = env["CYTORAG_JOURNAL_PATH"]
        if env.get("CYTORAG_API_TOKEN"):
            config.api_token = env["CYTORAG_API_TOKEN"]
        if env.get("CYTORAG_LLM_ENDPOINT"):
            llm_data["endpoint"] = env["CYTORAG_LLM_ENDPOINT"]
        if env.get("CYTORAG_LLM_MODEL"):
            llm_data["model"] = env["CYTORAG_LLM_MODEL"]
        if env.get("CYTORAG_LLM_STUB"):
            llm_data["stub"] = env["CYTORAG_LLM_STUB"].strip().lower() in ("1", "true", "yes")
        config.llm = LlmClientConfig(**llm_data)

        for key, value in overrides.items():
            if value is not None:
                setattr(config, key, value)
        return config


class DecisionJournal:
    """Append-only JSONL journal of reviewer decisions."""

    def __init__(self, path: str | Path | None):
        self._path = Path(path) if path else None
        self._lock = threading.Lock()
        self._records: list[dict[str, Any]] = []
        if self._path and self._path.exists():
            with open(self._path, "r", encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        self._records.append(json.loads(line))

    def append(self, record: dict[str, Any]) -> dict[str, Any]:
        entry = dict(record)
        entry["decision_id"] = uuid.uuid4().hex
        entry["timestamp"] = datetime.now(timezone.utc).isoformat()
        with self._lock:
            self._records.append(entry)
            if self._path:
                self._path.parent.mkdir(parents=True, exist_ok=True)
                with open(self._path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry, sort_keys=True) + "\n")
                    fh.flush()
        return entry

    def list(self, case_id: str | None = None) -> list[dict[str, Any]]:
        with self._lock:
            records = list(self._records)
        if case_id is not None:
            records = [r for r in records if r.get("case_id") == case_id]
        return records


# --- request bodies ---------------------------------------------------------

class EncoderIn(BaseModel):
    name: str
    dim: int


class MetadataIn(BaseModel):
    cytology_diagnosis: str
    surgical_diagnosis: str
    bethesda: str
    malignancy: str
    interpretation: str = ""
    stain: str = ""
    magnification: int = 40


class CaseIn(BaseModel):
    case_id: str
    patient_id: str
    slide_id: str
    roi_id: str
    metadata: MetadataIn


class EmbeddingIn(BaseModel):
    case_id: str
    encoder: str
    dim: int
    vector: list[float]


class PromptIn(BaseModel):
    case_id: str
    k: int = 5
    model: str = Field(description="encoder id or 'ensemble'")
    fusion: str = "raw"
    exclude: str = "same_case"
    template_id: str | None = None


class BundleIn(BaseModel):
    rendered_text: str
    template_hash: str
    example_count: int
    query_case_id: str


class InterpretIn(BaseModel):
    bundle: BundleIn | None = None
    prompt: PromptIn | None = None


class DecisionIn(BaseModel):
    case_id: str
    reviewer_id: str
    chosen_diagnosis: str
    chosen_bethesda: str
    neighbors_shown: list[str] = Field(default_factory=list)
    llm_response_digest: str = ""


class EvalRunIn(BaseModel):
    ks: list[int] = Field(default_factory=lambda: [1, 3, 5])
    tasks: list[str] = Field(default_factory=lambda: ["surgical_diagnosis", "bethesda"])
    exclude: str = "same_case"
    pool_k: int | None = None
    seed: int | None = None


# --- serialization ----------------------------------------------------------

def _case_summary(record: CaseRecord) -> dict[str, Any]:
    return {
        "case_id": record.case_id,
        "patient_id": record.patient_id,
        "slide_id": record.slide_id,
        "roi_id": record.roi_id,
        "metadata": record.metadata.to_dict(),
        "encoders": sorted(record.embeddings),
    }


def _neighbor_payload(neighbor: Neighbor | FusedNeighbor, rank: int, snapshot: StoreSnapshot) -> dict:
    record = snapshot.case(neighbor.case_id)
    payload: dict[str, Any] = {
        "case_id": neighbor.case_id,
        "rank": rank,
        "metadata": record.metadata.to_dict(),
    }
    if isinstance(neighbor, FusedNeighbor):
        payload["score"] = neighbor.fused_score
        payload["contributing"] = [
            {"encoder": hit.encoder, "score": hit.score, "rank": hit.rank}
            for hit in neighbor.contributing
        ]
    else:
        payload["score"] = neighbor.score
        payload["encoder"] = neighbor.encoder
    return payload


def _parse_exclusion(value: str) -> ExclusionMode:
    try:
        return ExclusionMode(value.strip().lower())
    except ValueError:
        raise InvalidMetadataError(
            f"unknown exclusion mode {value!r}; expected none|same_case|same_patient"
        ) from None


def _bundle_payload(bundle: PromptBundle) -> dict[str, Any]:
    return {
        "rendered_text": bundle.rendered_text,
        "template_hash": bundle.template_hash,
        "example_count": bundle.example_count,
        "query_case_id": bundle.query_case_id,
    }


# --- app --------------------------------------------------------------------

def create_app(
    config: ServiceConfig | None = None,
    store: CaseStore | None = None,
) -> FastAPI:
    """Build the service; ``store`` short-circuits loading from disk."""
    config = config or ServiceConfig()

    if store is None:
        if config.store_path and Path(config.store_path).exists():
            try:
                store = open_store(config.store_path)
            except CytoragError as exc:
                raise StoreLoadError(
                    f"cannot load store from {config.store_path}: {exc.message}"
                ) from exc
            logger.info(
                "loaded store %s (version %d, %d cases)",
                config.store_path, store.version, len(store),
            )
        else:
            store = CaseStore()

    journal = DecisionJournal(config.journal_path)
    templates = load_template_dir(config.templates_dir)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        # Graceful shutdown: persist pending writes.
        if config.store_path:
            save_store(app.state.store, config.store_path)

    app = FastAPI(title="cytorag", version="0.1.0", lifespan=lifespan)
    app.state.store = store
    app.state.config = config
    app.state.journal = journal
    app.state.templates = templates
    app.state.reports = {}
    app.state.reports_lock = threading.Lock()

    if config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=config.cors_origins,
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(CytoragError)
    async def domain_error_handler(_request: Request, exc: CytoragError):
        status = _STATUS_BY_ERROR.get(type(exc), 500)
        return JSONResponse(status_code=status, content={"error": exc.to_dict()})

    @app.exception_handler(RequestValidationError)
    async def validation_error_handler(_request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={
                "error": {
                    "code": "schema_violation",
                    "message": "request body failed validation",
                    "details": {"errors": jsonable_encoder(exc.errors())},
                }
            },
        )

    async def require_token(request: Request) -> None:
        if config.api_token is None:
            return
        supplied = request.headers.get("authorization", "")
        if supplied != f"Bearer {config.api_token}":
            raise _Unauthorized()

    class _Unauthorized(Exception):
        pass

    @app.exception_handler(_Unauthorized)
    async def unauthorized_handler(_request: Request, _exc: _Unauthorized):
        return JSONResponse(
            status_code=401,
            content={"error": {"code": "unauthorized", "message": "missing or bad API token"}},
        )

    def current_snapshot() -> StoreSnapshot:
        current: CaseStore | None = app.state.store
        if current is None:
            raise _Reloading()
        return current.snapshot()

    class _Reloading(Exception):
        pass

    @app.exception_handler(_Reloading)
    async def reloading_handler(_request: Request, _exc: _Reloading):
        return JSONResponse(
            status_code=503,
            content={"error": {"code": "store_unavailable", "message": "snapshot reload in progress"}},
        )

    auth = Depends(require_token)

    @app.get("/v1/health", dependencies=[auth])
    def health():
        snapshot = current_snapshot()
        return {"status": "ok", "store_version": snapshot.version, "n_cases": len(snapshot)}

    @app.post("/v1/encoders", status_code=201, dependencies=[auth])
    def post_encoder(body: EncoderIn):
        name = app.state.store.register_encoder(body.name, body.dim)
        return {"name": name, "dim": body.dim}

    @app.get("/v1/encoders", dependencies=[auth])
    def get_encoders():
        return {"encoders": app.state.store.encoders()}

    @app.post("/v1/cases", status_code=201, dependencies=[auth])
    def post_case(body: CaseIn):
        record = CaseRecord(
            case_id=body.case_id,
            patient_id=body.patient_id,
            slide_id=body.slide_id,
            roi_id=body.roi_id,
            metadata=CaseMetadata.from_dict(body.metadata.model_dump()),
        )
        case_id = app.state.store.upsert_case(record)
        return {"case_id": case_id}

    @app.post("/v1/embeddings", status_code=201, dependencies=[auth])
    def post_embedding(body: EmbeddingIn):
        if body.dim != len(body.vector):
            raise DimensionMismatchError(
                f"declared dim {body.dim} does not match vector length {len(body.vector)}"
            )
        embedding = Embedding(encoder=body.encoder, vector=body.vector)
        case_id = app.state.store.attach_embedding(body.case_id, embedding)
        return {"case_id": case_id, "encoder": embedding.encoder}

    @app.get("/v1/cases", dependencies=[auth])
    def list_cases(
        patient_id: str | None = None,
        bethesda: str | None = None,
        malignancy: str | None = None,
        encoder: str | None = None,
        limit: int = Query(default=100, ge=1, le=10_000),
        offset: int = Query(default=0, ge=0),
    ):
        snapshot = current_snapshot()
        want_bethesda = BethesdaCategory.parse(bethesda) if bethesda else None
        want_malignancy = MalignancyLabel.parse(malignancy) if malignancy else None
        matches = []
        for case_id in snapshot.case_ids():
            record = snapshot.case(case_id)
            if patient_id is not None and record.patient_id != patient_id:
                continue
            if want_bethesda is not None and record.metadata.bethesda is not want_bethesda:
                continue
            if want_malignancy is not None and record.metadata.malignancy is not want_malignancy:
                continue
            if encoder is not None and encoder.strip().lower() not in record.embeddings:
                continue
            matches.append(record)
        page = matches[offset : offset + limit]
        return {
            "total": len(matches),
            "offset": offset,
            "cases": [_case_summary(r) for r in page],
        }

    @app.get("/v1/cases/{case_id}", dependencies=[auth])
    def get_case(case_id: str, include_vectors: bool = False):
        snapshot = current_snapshot()
        record = snapshot.case(case_id)
        payload = _case_summary(record)
        if include_vectors:
            payload["embeddings"] = {
                enc: {"dim": emb.dim, "vector": [float(x) for x in emb.vector]}
                for enc, emb in sorted(record.embeddings.items())
            }
        return payload

    def _similar(snapshot: StoreSnapshot, case_id: str, encoder: str, k: int,
                 exclude: str, fusion: str) -> list[dict]:
        record = snapshot.case(case_id)
        exclusion = ExclusionFilter.for_case(record, _parse_exclusion(exclude))
        if encoder == "ensemble":
            if not record.embeddings:
                raise MissingEmbeddingError(f"case {case_id!r} has no embeddings")
            fused = ensemble_top_k(
                record.embeddings, k, snapshot, FusionMode.parse(fusion), exclusion
            )
            return [_neighbor_payload(f, i + 1, snapshot) for i, f in enumerate(fused)]
        embedding = record.embeddings.get(encoder.strip().lower())
        if embedding is None:
            raise MissingEmbeddingError(
                f"case {case_id!r} has no embedding under encoder {encoder!r}"
            )
        neighbors = top_k(embedding, k, snapshot, exclusion)
        return [_neighbor_payload(n, n.rank, snapshot) for n in neighbors]

    @app.get("/v1/cases/{case_id}/similar", dependencies=[auth])
    def get_similar(
        case_id: str,
        encoder: str,
        k: int = Query(default=5, ge=1),
        exclude: str = "same_case",
        fusion: str = "raw",
    ):
        snapshot = current_snapshot()
        return {
            "case_id": case_id,
            "encoder": encoder,
            "k": k,
            "exclude": exclude,
            "fusion": fusion if encoder == "ensemble" else None,
            "neighbors": _similar(snapshot, case_id, encoder, k, exclude, fusion),
        }

    def _assemble(snapshot: StoreSnapshot, body: PromptIn) -> PromptBundle:
        record = snapshot.case(body.case_id)
        exclusion = ExclusionFilter.for_case(record, _parse_exclusion(body.exclude))
        if body.model == "ensemble":
            if not record.embeddings:
                raise MissingEmbeddingError(f"case {body.case_id!r} has no embeddings")
            raw = ensemble_top_k(
                record.embeddings, body.k, snapshot, FusionMode.parse(body.fusion), exclusion
            )
        else:
            embedding = record.embeddings.get(body.model.strip().lower())
            if embedding is None:
                raise MissingEmbeddingError(
                    f"case {body.case_id!r} has no embedding under encoder {body.model!r}"
                )
            raw = top_k(embedding, body.k, snapshot, exclusion)
        examples = examples_from_neighbors(raw, snapshot)
        template = resolve_template(app.state.templates, body.template_id)
        return assemble_prompt(body.case_id, record.metadata, examples, template)

    @app.post("/v1/prompt", dependencies=[auth])
    def post_prompt(body: PromptIn):
        snapshot = current_snapshot()
        return _bundle_payload(_assemble(snapshot, body))

    @app.post("/v1/interpret", dependencies=[auth])
    def post_interpret(body: InterpretIn):
        snapshot = current_snapshot()
        if body.bundle is not None:
            bundle = PromptBundle(
                rendered_text=body.bundle.rendered_text,
                template_hash=body.bundle.template_hash,
                example_count=body.bundle.example_count,
                query_case_id=body.bundle.query_case_id,
            )
        elif body.prompt is not None:
            bundle = _assemble(snapshot, body.prompt)
        else:
            raise InvalidMetadataError("interpret needs either a bundle or prompt parameters")
        client = make_client(config.llm)
        try:
            response = client.interpret(bundle)
        finally:
            client.close()
        return {
            "text": response.text,
            "latency_s": response.latency_s,
            "status": response.status,
            "attempts": response.attempts,
            "bundle": _bundle_payload(bundle),
        }

    @app.post("/v1/decisions", status_code=201, dependencies=[auth])
    def post_decision(body: DecisionIn):
        snapshot = current_snapshot()
        snapshot.case(body.case_id)  # 404 when absent
        chosen = BethesdaCategory.parse(body.chosen_bethesda)
        entry = app.state.journal.append(
            {
                "case_id": body.case_id,
                "reviewer_id": body.reviewer_id,
                "chosen_diagnosis": body.chosen_diagnosis,
                "chosen_bethesda": chosen.value,
                "neighbors_shown": list(body.neighbors_shown),
                "llm_response_digest": body.llm_response_digest,
            }
        )
        return entry

    @app.get("/v1/decisions", dependencies=[auth])
    def get_decisions(case_id: str | None = None):
        return {"decisions": app.state.journal.list(case_id)}

    @app.post("/v1/eval/run", status_code=201, dependencies=[auth])
    def post_eval_run(body: EvalRunIn):
        snapshot = current_snapshot()
        config_ = ev.EvalConfig(
            ks=tuple(body.ks),
            tasks=tuple(ev.PredictionTask.parse(t) for t in body.tasks),
            exclusion_mode=_parse_exclusion(body.exclude),
            pool_k=body.pool_k,
            seed=body.seed,
        )
        report = ev.evaluate_all(snapshot, config_)
        report_id = report.content_hash[:16]
        with app.state.reports_lock:
            app.state.reports[report_id] = report
        return {"report_id": report_id, "content_hash": report.content_hash}

    def _get_report(report_id: str) -> ev.EvalReport:
        with app.state.reports_lock:
            report = app.state.reports.get(report_id)
        if report is None:
            raise UnknownReportError(f"no report with id {report_id!r}")
        return report

    @app.get("/v1/eval/reports/{report_id}", dependencies=[auth])
    def get_eval_report(report_id: str):
        return report_to_dict(_get_report(report_id))

    @app.get("/v1/eval/reports/{report_id}/roc.csv", dependencies=[auth])
    def get_eval_roc(report_id: str):
        return PlainTextResponse(
            combined_roc_csv(_get_report(report_id)), media_type="text/csv"
        )

    return app


def serve(config: ServiceConfig, store: CaseStore | None = None) -> None:
    """Run the service until interrupted; fails fast on a bad store or port."""
    import uvicorn

    app = create_app(config, store=store)
    try:
        uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    except OSError as exc:
        if exc.errno in (errno.EADDRINUSE, errno.EACCES):
            raise PortInUseError(
                f"cannot bind {config.host}:{config.port}: {exc}"
            ) from exc
        raise
