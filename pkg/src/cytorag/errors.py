"""Exception hierarchy shared across the package.

Every error carries a stable machine code (``code``) so the CLI and the
HTTP service can map failures to exit codes and status codes without
string matching. Details beyond the message go into ``details``.
"""

from __future__ import annotations

from typing import Any


class CytoragError(Exception):
    """Base class for all domain errors."""

    code: str = "internal_error"

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"code": self.code, "message": self.message}
        if self.details:
            out["details"] = self.details
        return out


# --- store ---------------------------------------------------------------

class DuplicateEncoderError(CytoragError):
    code = "duplicate_encoder"


class InvalidDimensionError(CytoragError):
    code = "invalid_dimension"


class DimensionMismatchError(CytoragError):
    code = "dimension_mismatch"


class UnknownEncoderError(CytoragError):
    code = "unknown_encoder"


class UnknownCaseError(CytoragError):
    code = "unknown_case"


class InvalidMetadataError(CytoragError):
    code = "invalid_metadata"


class NonFiniteVectorError(CytoragError):
    code = "non_finite_vector"


class ZeroNormVectorError(CytoragError):
    code = "zero_norm_vector"


class FormatError(CytoragError):
    code = "format_error"


class StoreIoError(CytoragError):
    code = "io_error"


class VersionError(CytoragError):
    code = "version_error"


class StoreLoadError(CytoragError):
    code = "store_load_error"


# --- retrieval / ensemble ------------------------------------------------

class EmptyQueryError(CytoragError):
    code = "empty_query"


# --- prompting / llm -----------------------------------------------------

class EmptyContextError(CytoragError):
    code = "empty_context"


class TemplateError(CytoragError):
    code = "template_error"


class UnknownTemplateError(CytoragError):
    code = "unknown_template"


class EndpointUnreachableError(CytoragError):
    code = "endpoint_unreachable"


class EndpointError(CytoragError):
    code = "endpoint_error"


class LlmTimeoutError(CytoragError):
    code = "timeout"


# --- evaluation ----------------------------------------------------------

class MissingEmbeddingError(CytoragError):
    code = "missing_embedding"


class NoEligibleNeighborsError(CytoragError):
    code = "no_eligible_neighbors"


class EmptyEvaluationSetError(CytoragError):
    code = "empty_evaluation_set"


class DegenerateLabelsError(CytoragError):
    code = "degenerate_labels"


class UnknownReportError(CytoragError):
    code = "unknown_report"


# --- service -------------------------------------------------------------

class PortInUseError(CytoragError):
    code = "port_in_use"
