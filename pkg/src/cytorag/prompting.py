"""Deterministic prompt assembly from retrieved examples.

A template has four plain-text sections: a preamble, a per-example
block, a query section, and a task instruction. Rendering is a pure
function of (query info, neighbors, template); identical inputs yield
byte-identical text. Templates are versioned by a content hash so runs
can be tied to the exact wording they used.

Template files use the same four sections introduced by marker lines::

    [preamble]
    ...
    [example]
    ...
    [query]
    ...
    [instruction]
    ...
"""

from __future__ import annotations

import hashlib
import string
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .ensemble import FusedNeighbor
from .errors import (
    EmptyContextError,
    InvalidMetadataError,
    TemplateError,
    UnknownTemplateError,
)
from .records import BethesdaCategory, CaseMetadata
from .retrieval import Neighbor
from .store import StoreSnapshot

_SECTIONS = ("preamble", "example", "query", "instruction")
_ALLOWED_FIELDS = {
    "preamble": set(),
    "example": {"rank", "similarity", "diagnosis", "bethesda", "interpretation"},
    "query": {"case_id", "stain", "magnification", "cytology_diagnosis"},
    "instruction": set(),
}


@dataclass(frozen=True)
class RetrievedExample:
    """One neighbor as it appears in the prompt context."""

    rank: int
    similarity: float
    cytology_diagnosis: str
    bethesda: BethesdaCategory
    interpretation: str = ""

    def __post_init__(self) -> None:
        if self.rank < 1:
            raise InvalidMetadataError(f"example rank must be >= 1, got {self.rank}")
        if not self.cytology_diagnosis.strip():
            raise InvalidMetadataError("retrieved example must carry a diagnosis")
        object.__setattr__(self, "bethesda", BethesdaCategory.parse(self.bethesda))


def _check_placeholders(section: str, text: str) -> None:
    allowed = _ALLOWED_FIELDS[section]
    for _, name, _, _ in string.Formatter().parse(text):
        if name is None:
            continue
        if name == "" or name not in allowed:
            raise TemplateError(
                f"section {section!r} uses placeholder {{{name}}}; allowed: "
                f"{sorted(allowed) or 'none'}"
            )


@dataclass(frozen=True)
class PromptTemplate:
    preamble: str
    example_block: str
    query_block: str
    instruction: str

    def __post_init__(self) -> None:
        _check_placeholders("preamble", self.preamble)
        _check_placeholders("example", self.example_block)
        _check_placeholders("query", self.query_block)
        _check_placeholders("instruction", self.instruction)

    @property
    def content_hash(self) -> str:
        digest = hashlib.sha256()
        for section in (self.preamble, self.example_block, self.query_block, self.instruction):
            digest.update(section.encode("utf-8"))
            digest.update(b"\x00")
        return digest.hexdigest()


DEFAULT_TEMPLATE = PromptTemplate(
    preamble=(
        "You are assisting a cytopathologist reviewing a thyroid fine-needle "
        "aspiration case. The most similar previously reviewed cases are listed "
        "below, closest first, each with its recorded diagnosis, Bethesda "
        "category, and reviewer interpretation.\n"
    ),
    example_block=(
        "Example {rank} (similarity {similarity}):\n"
        "  Diagnosis: {diagnosis}\n"
        "  Bethesda category: {bethesda}\n"
        "  Interpretation: {interpretation}\n"
    ),
    query_block=(
        "Query case {case_id}: {stain} stain at {magnification}x magnification.\n"
    ),
    instruction=(
        "Using the retrieved examples as context, state the most likely "
        "diagnosis for the query case and its Bethesda category, and explain "
        "which examples support your reading.\n"
    ),
)


@dataclass(frozen=True)
class PromptBundle:
    rendered_text: str
    template_hash: str
    example_count: int
    query_case_id: str


def assemble_prompt(
    case_id: str,
    metadata: CaseMetadata,
    neighbors: Sequence[RetrievedExample],
    template: PromptTemplate = DEFAULT_TEMPLATE,
) -> PromptBundle:
    """Render the prompt: one block per neighbor, in rank order.

    Similarity is formatted to 4 decimal places. Raises
    ``EmptyContextError`` when no neighbors are supplied.
    """
    if not neighbors:
        raise EmptyContextError("cannot assemble a prompt with zero retrieved examples")
    parts = [template.preamble]
    try:
        for example in neighbors:
            parts.append(
                template.example_block.format(
                    rank=example.rank,
                    similarity=f"{example.similarity:.4f}",
                    diagnosis=example.cytology_diagnosis,
                    bethesda=example.bethesda.value,
                    interpretation=example.interpretation,
                )
            )
        parts.append(
            template.query_block.format(
                case_id=case_id,
                stain=metadata.stain,
                magnification=metadata.magnification,
                cytology_diagnosis=metadata.cytology_diagnosis,
            )
        )
    except (KeyError, IndexError) as exc:
        raise TemplateError(f"unresolvable placeholder: {exc}") from exc
    parts.append(template.instruction)
    return PromptBundle(
        rendered_text="".join(parts),
        template_hash=template.content_hash,
        example_count=len(neighbors),
        query_case_id=case_id,
    )


def examples_from_neighbors(
    neighbors: Sequence[Neighbor | FusedNeighbor], snapshot: StoreSnapshot
) -> list[RetrievedExample]:
    """Join retrieval results with store metadata, preserving rank order."""
    examples = []
    for position, neighbor in enumerate(neighbors, start=1):
        if isinstance(neighbor, FusedNeighbor):
            case_id, similarity = neighbor.case_id, neighbor.fused_score
        else:
            case_id, similarity = neighbor.case_id, neighbor.score
        record = snapshot.case(case_id)
        examples.append(
            RetrievedExample(
                rank=position,
                similarity=similarity,
                cytology_diagnosis=record.metadata.cytology_diagnosis,
                bethesda=record.metadata.bethesda,
                interpretation=record.metadata.interpretation,
            )
        )
    return examples


def load_template(path: str | Path) -> PromptTemplate:
    """Parse a section-marked template file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise TemplateError(f"cannot read template {path}: {exc}") from exc
    sections: dict[str, list[str]] = {}
    current: str | None = None
    for line in text.splitlines(keepends=True):
        marker = line.strip()
        if marker.startswith("[") and marker.endswith("]") and marker[1:-1] in _SECTIONS:
            current = marker[1:-1]
            if current in sections:
                raise TemplateError(f"duplicate section [{current}] in {path}")
            sections[current] = []
            continue
        if current is None:
            if marker:
                raise TemplateError(f"text before the first section marker in {path}")
            continue
        sections[current].append(line)
    missing = [s for s in _SECTIONS if s not in sections]
    if missing:
        raise TemplateError(f"template {path} is missing sections: {missing}")
    return PromptTemplate(
        preamble="".join(sections["preamble"]),
        example_block="".join(sections["example"]),
        query_block="".join(sections["query"]),
        instruction="".join(sections["instruction"]),
    )


def load_template_dir(directory: str | Path | None) -> dict[str, PromptTemplate]:
    """Load every ``*.txt`` template in a directory, keyed by file stem.

    The built-in template is always present under the id ``default``;
    ``None`` (or a missing directory) yields just that.
    """
    templates = {"default": DEFAULT_TEMPLATE}
    if directory is None or str(directory) == "":
        return templates
    directory = Path(directory)
    if directory.is_dir():
        for path in sorted(directory.glob("*.txt")):
            templates[path.stem] = load_template(path)
    return templates


def resolve_template(templates: dict[str, PromptTemplate], template_id: str | None) -> PromptTemplate:
    if template_id is None:
        return templates["default"]
    try:
        return templates[template_id]
    except KeyError:
        raise UnknownTemplateError(f"no template with id {template_id!r}") from None
