"""Retrieval-augmented cytology case engine.

Stores multi-encoder case embeddings with diagnostic metadata, retrieves
nearest cases by exact cosine similarity, fuses rankings across
encoders, assembles evidence prompts for an external LLM endpoint, and
evaluates retrieval-as-classification (top-k accuracy, ROC/AUC).
"""

from .ensemble import FusedNeighbor, FusionMode, ensemble_top_k, fuse_neighbor_lists
from .errors import CytoragError
from .evaluation import (
    EvalConfig,
    EvalReport,
    PredictionTask,
    RocCurve,
    evaluate_all,
    malignancy_score,
    predict_labels,
    roc_and_auc,
    topk_accuracy,
)
from .ingest import IngestReport, load_corpus
from .llm import LlmClientConfig, LlmResponse, llm_interpret, make_client
from .persistence import open_store, save_store
from .prompting import (
    DEFAULT_TEMPLATE,
    PromptBundle,
    PromptTemplate,
    RetrievedExample,
    assemble_prompt,
    examples_from_neighbors,
)
from .records import (
    BethesdaCategory,
    CaseMetadata,
    CaseRecord,
    Embedding,
    MalignancyLabel,
)
from .retrieval import (
    ExclusionFilter,
    ExclusionMode,
    Neighbor,
    cosine_similarity,
    top_k,
)
from .store import CaseStore, StoreSnapshot
from .synth import SynthConfig, generate_corpus

__version__ = "0.1.0"

__all__ = [
    "BethesdaCategory",
    "CaseMetadata",
    "CaseRecord",
    "CaseStore",
    "CytoragError",
    "DEFAULT_TEMPLATE",
    "Embedding",
    "EvalConfig",
    "EvalReport",
    "ExclusionFilter",
    "ExclusionMode",
    "FusedNeighbor",
    "FusionMode",
    "IngestReport",
    "LlmClientConfig",
    "LlmResponse",
    "MalignancyLabel",
    "Neighbor",
    "PredictionTask",
    "PromptBundle",
    "PromptTemplate",
    "RetrievedExample",
    "RocCurve",
    "StoreSnapshot",
    "SynthConfig",
    "assemble_prompt",
    "cosine_similarity",
    "ensemble_top_k",
    "evaluate_all",
    "examples_from_neighbors",
    "fuse_neighbor_lists",
    "generate_corpus",
    "llm_interpret",
    "load_corpus",
    "make_client",
    "malignancy_score",
    "open_store",
    "predict_labels",
    "roc_and_auc",
    "save_store",
    "top_k",
    "topk_accuracy",
]
