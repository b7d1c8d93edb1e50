"""Domain types shared across the toolkit, plus whole-knowledge-base validation.

Everything here is an immutable value object: construction validates nothing
beyond types, and `validate_knowledge_base` reports every structural problem
as positioned diagnostics instead of raising.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

RISK_ID_RE = re.compile(r"^([a-z0-9][a-z0-9-]*:)?[a-z0-9][a-z0-9-]*$")
TAG_RE = re.compile(r"^[a-z0-9][a-z0-9-]*$")


class RiskCategory(str, Enum):
    TRAINING_DATA = "training-data"
    INFERENCE = "inference"
    OUTPUT = "output"
    NON_TECHNICAL = "non-technical"
    AGENTIC = "agentic"

    @classmethod
    def parse(cls, value: str) -> "RiskCategory":
        for member in cls:
            if member.value == value:
                return member
        raise ValueError(f"unknown category {value!r}")


class Descriptor(str, Enum):
    TRADITIONAL = "traditional risk of AI"
    AMPLIFIED_GENERATIVE = "amplified by generative AI"
    SPECIFIC_GENERATIVE = "specific to generative AI"
    AMPLIFIED_AGENTIC = "amplified by agentic AI"
    SPECIFIC_AGENTIC = "specific to agentic AI"

    @classmethod
    def parse(cls, value: str) -> "Descriptor":
        for member in cls:
            if member.value == value:
                return member
        raise ValueError(f"unknown descriptor {value!r}")


class MappingPredicate(str, Enum):
    EXACT = "exact"
    CLOSE = "close"
    BROAD = "broad"
    NARROW = "narrow"
    RELATED = "related"

    @classmethod
    def parse(cls, value: str) -> "MappingPredicate":
        for member in cls:
            if member.value == value:
                return member
        raise ValueError(f"unknown predicate {value!r}")


@dataclass(frozen=True)
class Risk:
    id: str
    tag: str
    name: str
    description: str
    category: RiskCategory
    taxonomy_id: str
    concern: str = ""
    descriptor: Descriptor | None = None
    dimension: str | None = None
    uri: str | None = None
    provenance: str | None = None
    # source position, for diagnostics
    source: str = ""
    line: int = 0

    def document_text(self) -> str:
        """Text used for lexical scoring: name + description + concern."""
        return " ".join(part for part in (self.name, self.description, self.concern) if part)


@dataclass(frozen=True)
class Taxonomy:
    id: str
    name: str
    version: str = ""
    source_url: str | None = None
    dimensions: tuple[tuple[str, RiskCategory], ...] = ()
    source: str = ""
    line: int = 0


@dataclass(frozen=True)
class Mapping:
    subject_id: str
    predicate: MappingPredicate
    object_id: str
    justification: str | None = None
    confidence: float | None = None
    source: str = ""
    line: int = 0
    subject_label: str | None = None
    object_label: str | None = None

    def key(self) -> str:
        """Stable identity used for deterministic path tie-breaking."""
        return f"{self.source}:{self.line}:{self.subject_id}:{self.predicate.value}:{self.object_id}"


@dataclass(frozen=True)
class MitigationAction:
    id: str
    name: str
    description: str
    source: str = ""
    risk_ids: tuple[str, ...] = ()
    file: str = ""
    line: int = 0


@dataclass(frozen=True)
class Detector:
    id: str
    name: str
    detector_dimension: str = ""
    risk_ids: tuple[str, ...] = ()
    file: str = ""
    line: int = 0


@dataclass(frozen=True)
class BenchmarkLink:
    id: str
    name: str
    description: str = ""
    url: str | None = None
    risk_ids: tuple[str, ...] = ()
    file: str = ""
    line: int = 0


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    source: str
    line: int
    message: str

    def __str__(self) -> str:
        return f"{self.source}:{self.line}: {self.severity}: {self.message}"


def sort_diagnostics(diags: list[Diagnostic]) -> list[Diagnostic]:
    return sorted(diags, key=lambda d: (d.source, d.line, d.message))


def errors_in(diags: list[Diagnostic]) -> list[Diagnostic]:
    return [d for d in diags if d.severity == "error"]


@dataclass(frozen=True)
class KnowledgeBase:
    taxonomies: tuple[Taxonomy, ...] = ()
    risks: tuple[Risk, ...] = ()
    mappings: tuple[Mapping, ...] = ()
    actions: tuple[MitigationAction, ...] = ()
    detectors: tuple[Detector, ...] = ()
    benchmarks: tuple[BenchmarkLink, ...] = ()


def validate_knowledge_base(kb: KnowledgeBase) -> list[Diagnostic]:
    """Return every invariant violation and dangling reference in `kb`.

    Empty result means the knowledge base is valid. Pure and deterministic:
    diagnostics are ordered by (source, line, message).
    """
    diags: list[Diagnostic] = []

    def err(source: str, line: int, message: str) -> None:
        diags.append(Diagnostic("error", source, line, message))

    taxonomy_ids: dict[str, Taxonomy] = {}
    for tax in kb.taxonomies:
        if tax.id in taxonomy_ids:
            err(tax.source, tax.line, f"duplicate taxonomy id '{tax.id}' (also in {taxonomy_ids[tax.id].source})")
        else:
            taxonomy_ids[tax.id] = tax
        seen_dims = set()
        for dim in tax.dimensions:
            if dim in seen_dims:
                err(tax.source, tax.line, f"duplicate dimension ('{dim[0]}', {dim[1].value}) in taxonomy '{tax.id}'")
            seen_dims.add(dim)

    risk_ids: dict[str, Risk] = {}
    tags_by_taxonomy: dict[tuple[str, str], Risk] = {}
    for risk in kb.risks:
        if not RISK_ID_RE.match(risk.id):
            err(risk.source, risk.line, f"invalid risk id '{risk.id}'")
        if not TAG_RE.match(risk.tag):
            err(risk.source, risk.line, f"invalid tag '{risk.tag}'")
        if not risk.description:
            err(risk.source, risk.line, f"risk '{risk.id}' has empty description")
        if risk.id in risk_ids:
            err(risk.source, risk.line, f"duplicate risk id '{risk.id}' (also in {risk_ids[risk.id].source})")
        else:
            risk_ids[risk.id] = risk
        tag_key = (risk.taxonomy_id, risk.tag)
        if tag_key in tags_by_taxonomy:
            err(risk.source, risk.line, f"duplicate tag '{risk.tag}' in taxonomy '{risk.taxonomy_id}'")
        else:
            tags_by_taxonomy[tag_key] = risk
        tax = taxonomy_ids.get(risk.taxonomy_id)
        if tax is None:
            err(risk.source, risk.line, f"risk '{risk.id}' references unknown taxonomy '{risk.taxonomy_id}'")
        elif risk.dimension is not None and (risk.dimension, risk.category) not in tax.dimensions:
            err(
                risk.source,
                risk.line,
                f"risk '{risk.id}' dimension '{risk.dimension}' not declared for "
                f"category '{risk.category.value}' in taxonomy '{risk.taxonomy_id}'",
            )

    for mapping in kb.mappings:
        if mapping.subject_id == mapping.object_id:
            err(mapping.source, mapping.line, f"mapping subject equals object '{mapping.subject_id}'")
        if mapping.confidence is not None and not (0.0 <= mapping.confidence <= 1.0):
            err(mapping.source, mapping.line, f"confidence {mapping.confidence} out of range [0,1]")
        if mapping.subject_id not in risk_ids:
            err(mapping.source, mapping.line, f"dangling mapping subject '{mapping.subject_id}'")
        if mapping.object_id not in risk_ids:
            err(mapping.source, mapping.line, f"dangling mapping object '{mapping.object_id}'")

    def check_links(kind: str, items) -> None:
        seen: dict[str, str] = {}
        for item in items:
            if item.id in seen:
                err(item.file, item.line, f"duplicate {kind} id '{item.id}' (also in {seen[item.id]})")
            else:
                seen[item.id] = item.file
            if not item.risk_ids:
                err(item.file, item.line, f"{kind} '{item.id}' has empty risk_ids")
            for rid in item.risk_ids:
                if rid not in risk_ids:
                    err(item.file, item.line, f"{kind} '{item.id}' references unknown risk '{rid}'")

    check_links("action", kb.actions)
    check_links("detector", kb.detectors)
    check_links("benchmark", kb.benchmarks)

    return sort_diagnostics(diags)
