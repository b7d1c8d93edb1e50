"""Parsers for taxonomy bundle documents and SSSOM-style TSV mapping files.

Both parsers return either a parsed value or a list of positioned
diagnostics; partial results are never returned alongside errors. YAML
documents are walked via the composed node tree so every diagnostic can
carry a 1-based line number.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .model import (
    BenchmarkLink,
    Descriptor,
    Detector,
    Diagnostic,
    KnowledgeBase,
    Mapping,
    MappingPredicate,
    MitigationAction,
    Risk,
    RiskCategory,
    Taxonomy,
    errors_in,
    sort_diagnostics,
    validate_knowledge_base,
)

PREDICATE_CURIES = {
    "skos:exactMatch": MappingPredicate.EXACT,
    "skos:closeMatch": MappingPredicate.CLOSE,
    "skos:broadMatch": MappingPredicate.BROAD,
    "skos:narrowMatch": MappingPredicate.NARROW,
    "skos:relatedMatch": MappingPredicate.RELATED,
}
CURIES_BY_PREDICATE = {v: k for k, v in PREDICATE_CURIES.items()}

SSSOM_REQUIRED_COLUMNS = ("subject_id", "predicate_id", "object_id")
SSSOM_OPTIONAL_COLUMNS = ("mapping_justification", "confidence", "subject_label", "object_label")
SSSOM_CANONICAL_HEADER = SSSOM_REQUIRED_COLUMNS + SSSOM_OPTIONAL_COLUMNS

KNOWN_TOP_KEYS = ("taxonomies", "risks", "actions", "detectors", "benchmarks")
KNOWN_RISK_KEYS = (
    "id", "tag", "name", "description", "concern", "category",
    "descriptor", "dimension", "taxonomy", "uri", "provenance",
)
KNOWN_TAXONOMY_KEYS = ("id", "name", "version", "source_url", "dimensions")
KNOWN_ACTION_KEYS = ("id", "name", "description", "source", "risk_ids")
KNOWN_DETECTOR_KEYS = ("id", "name", "detector_dimension", "risk_ids")
KNOWN_BENCHMARK_KEYS = ("id", "name", "description", "url", "risk_ids")


@dataclass
class TaxonomyBundle:
    taxonomies: list[Taxonomy] = field(default_factory=list)
    risks: list[Risk] = field(default_factory=list)
    actions: list[MitigationAction] = field(default_factory=list)
    detectors: list[Detector] = field(default_factory=list)
    benchmarks: list[BenchmarkLink] = field(default_factory=list)
    warnings: list[Diagnostic] = field(default_factory=list)


@dataclass
class MappingSet:
    metadata: dict[str, str] = field(default_factory=dict)
    mappings: list[Mapping] = field(default_factory=list)
    warnings: list[Diagnostic] = field(default_factory=list)


class _DocErrors(Exception):
    pass


class _Walker:
    """Cursor over a composed YAML node tree, collecting diagnostics."""

    def __init__(self, source: str):
        self.source = source
        self.errors: list[Diagnostic] = []
        self.warnings: list[Diagnostic] = []

    def err(self, node, message: str) -> None:
        self.errors.append(Diagnostic("error", self.source, node.start_mark.line + 1, message))

    def warn(self, node, message: str) -> None:
        self.warnings.append(Diagnostic("warning", self.source, node.start_mark.line + 1, message))

    def mapping_items(self, node) -> list[tuple[str, yaml.Node, yaml.Node]]:
        if not isinstance(node, yaml.MappingNode):
            self.err(node, "expected a mapping")
            return []
        out = []
        for key_node, value_node in node.value:
            out.append((str(key_node.value), key_node, value_node))
        return out

    def sequence_items(self, node) -> list[yaml.Node]:
        if not isinstance(node, yaml.SequenceNode):
            self.err(node, "expected a sequence")
            return []
        return list(node.value)

    def scalar(self, node, context: str) -> str | None:
        if not isinstance(node, yaml.ScalarNode):
            self.err(node, f"expected a scalar for {context}")
            return None
        if node.tag == "tag:yaml.org,2002:null":
            return None
        return str(node.value)


def parse_taxonomy_document(text: str, source_name: str) -> TaxonomyBundle | list[Diagnostic]:
    """Parse one taxonomy bundle document (YAML) into domain objects.

    Unknown keys produce warnings (kept on the bundle); structural errors
    return diagnostics with line numbers instead of a bundle.
    """
    w = _Walker(source_name)
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as exc:
        line = (exc.problem_mark.line + 1) if exc.problem_mark else 1
        return [Diagnostic("error", source_name, line, f"malformed document: {exc.problem}")]

    bundle = TaxonomyBundle()
    if root is None:
        return bundle

    for key, key_node, value_node in w.mapping_items(root):
        if key == "taxonomies":
            for item in w.sequence_items(value_node):
                tax = _parse_taxonomy_entry(w, item)
                if tax is not None:
                    bundle.taxonomies.append(tax)
        elif key == "risks":
            for item in w.sequence_items(value_node):
                risk = _parse_risk_entry(w, item)
                if risk is not None:
                    bundle.risks.append(risk)
        elif key == "actions":
            for item in w.sequence_items(value_node):
                parsed = _parse_link_entry(w, item, KNOWN_ACTION_KEYS, "action")
                if parsed is not None:
                    bundle.actions.append(MitigationAction(
                        id=parsed["id"], name=parsed.get("name", ""),
                        description=parsed.get("description", ""),
                        source=parsed.get("source", ""),
                        risk_ids=parsed["risk_ids"], file=source_name, line=parsed["line"]))
        elif key == "detectors":
            for item in w.sequence_items(value_node):
                parsed = _parse_link_entry(w, item, KNOWN_DETECTOR_KEYS, "detector")
                if parsed is not None:
                    bundle.detectors.append(Detector(
                        id=parsed["id"], name=parsed.get("name", ""),
                        detector_dimension=parsed.get("detector_dimension", ""),
                        risk_ids=parsed["risk_ids"], file=source_name, line=parsed["line"]))
        elif key == "benchmarks":
            for item in w.sequence_items(value_node):
                parsed = _parse_link_entry(w, item, KNOWN_BENCHMARK_KEYS, "benchmark")
                if parsed is not None:
                    bundle.benchmarks.append(BenchmarkLink(
                        id=parsed["id"], name=parsed.get("name", ""),
                        description=parsed.get("description", ""),
                        url=parsed.get("url"),
                        risk_ids=parsed["risk_ids"], file=source_name, line=parsed["line"]))
        else:
            w.warn(key_node, f"unknown top-level key '{key}'")

    if w.errors:
        return sort_diagnostics(w.errors)
    bundle.warnings = sort_diagnostics(w.warnings)
    return bundle


def _entry_fields(w: _Walker, node, known: tuple[str, ...], kind: str) -> dict[str, tuple[str | None, yaml.Node]]:
    fields: dict[str, tuple[str | None, yaml.Node]] = {}
    for key, key_node, value_node in w.mapping_items(node):
        if key not in known and key != "dimensions" and key != "risk_ids":
            w.warn(key_node, f"unknown {kind} key '{key}'")
            continue
        if key in ("dimensions", "risk_ids"):
            fields[key] = (None, value_node)
        else:
            fields[key] = (w.scalar(value_node, f"{kind}.{key}"), value_node)
    return fields


def _require(w: _Walker, node, fields, name: str, kind: str) -> str | None:
    if name not in fields or fields[name][0] is None:
        w.err(node, f"{kind} missing required field '{name}'")
        return None
    return fields[name][0]


def _parse_taxonomy_entry(w: _Walker, node) -> Taxonomy | None:
    fields = _entry_fields(w, node, KNOWN_TAXONOMY_KEYS, "taxonomy")
    tid = _require(w, node, fields, "id", "taxonomy")
    name = _require(w, node, fields, "name", "taxonomy")
    dims: list[tuple[str, RiskCategory]] = []
    ok = tid is not None and name is not None
    if "dimensions" in fields:
        for item in w.sequence_items(fields["dimensions"][1]):
            dname = dcat = None
            for key, key_node, value_node in w.mapping_items(item):
                if key == "name":
                    dname = w.scalar(value_node, "dimension.name")
                elif key == "category":
                    raw = w.scalar(value_node, "dimension.category")
                    if raw is not None:
                        try:
                            dcat = RiskCategory.parse(raw)
                        except ValueError:
                            w.err(value_node, f"unknown category '{raw}'")
                            ok = False
                else:
                    w.warn(key_node, f"unknown dimension key '{key}'")
            if dname is None or dcat is None:
                w.err(item, "dimension requires name and category")
                ok = False
            else:
                dims.append((dname, dcat))
    if not ok:
        return None
    return Taxonomy(
        id=tid, name=name,
        version=fields.get("version", (None, None))[0] or "",
        source_url=fields.get("source_url", (None, None))[0],
        dimensions=tuple(dims),
        source=w.source, line=node.start_mark.line + 1)


def _parse_risk_entry(w: _Walker, node) -> Risk | None:
    fields = _entry_fields(w, node, KNOWN_RISK_KEYS, "risk")
    rid = _require(w, node, fields, "id", "risk")
    tag = _require(w, node, fields, "tag", "risk")
    name = _require(w, node, fields, "name", "risk")
    description = _require(w, node, fields, "description", "risk")
    taxonomy = _require(w, node, fields, "taxonomy", "risk")
    category_raw = _require(w, node, fields, "category", "risk")
    category = None
    if category_raw is not None:
        try:
            category = RiskCategory.parse(category_raw)
        except ValueError:
            w.err(fields["category"][1], f"unknown category '{category_raw}'")
    descriptor = None
    if fields.get("descriptor", (None, None))[0] is not None:
        try:
            descriptor = Descriptor.parse(fields["descriptor"][0])
        except ValueError:
            w.err(fields["descriptor"][1], f"unknown descriptor '{fields['descriptor'][0]}'")
            return None
    if None in (rid, tag, name, description, taxonomy, category):
        return None
    return Risk(
        id=rid, tag=tag, name=name, description=description,
        concern=fields.get("concern", (None, None))[0] or "",
        category=category, descriptor=descriptor,
        dimension=fields.get("dimension", (None, None))[0],
        taxonomy_id=taxonomy,
        uri=fields.get("uri", (None, None))[0],
        provenance=fields.get("provenance", (None, None))[0],
        source=w.source, line=node.start_mark.line + 1)


def _parse_link_entry(w: _Walker, node, known: tuple[str, ...], kind: str) -> dict | None:
    fields = _entry_fields(w, node, known, kind)
    lid = _require(w, node, fields, "id", kind)
    risk_ids: list[str] = []
    if "risk_ids" in fields:
        for item in w.sequence_items(fields["risk_ids"][1]):
            value = w.scalar(item, f"{kind}.risk_ids entry")
            if value is not None:
                risk_ids.append(value)
    else:
        w.err(node, f"{kind} missing required field 'risk_ids'")
        return None
    if lid is None:
        return None
    out = {key: pair[0] for key, pair in fields.items() if pair[0] is not None}
    out["id"] = lid
    out["risk_ids"] = tuple(risk_ids)
    out["line"] = node.start_mark.line + 1
    return out


def parse_sssom_tsv(text: str, source_name: str) -> MappingSet | list[Diagnostic]:
    """Parse an SSSOM-style TSV file: `#key: value` metadata block, then a
    tab-separated header and rows. Returns diagnostics on any structural error.
    """
    errors: list[Diagnostic] = []
    warnings: list[Diagnostic] = []
    metadata: dict[str, str] = {}
    lines = text.split("\n")
    header: list[str] | None = None
    header_line = 0
    rows: list[tuple[int, list[str]]] = []

    for lineno, line in enumerate(lines, start=1):
        if line == "" and lineno == len(lines):
            break  # trailing newline
        if header is None and line.startswith("#"):
            body = line[1:]
            if ":" in body:
                key, _, value = body.partition(":")
                metadata[key.strip()] = value.strip()
            else:
                warnings.append(Diagnostic("warning", source_name, lineno, f"unparseable metadata line '{line}'"))
            continue
        if header is None:
            header = line.split("\t")
            header_line = lineno
            continue
        if line == "":
            continue
        rows.append((lineno, line.split("\t")))

    if header is None:
        errors.append(Diagnostic("error", source_name, max(len(lines), 1), "missing header line"))
        return sort_diagnostics(errors)

    for column in SSSOM_REQUIRED_COLUMNS:
        if column not in header:
            errors.append(Diagnostic("error", source_name, header_line, f"missing required column '{column}'"))
    for column in header:
        if column not in SSSOM_CANONICAL_HEADER:
            warnings.append(Diagnostic("warning", source_name, header_line, f"ignoring unknown column '{column}'"))
    if errors:
        return sort_diagnostics(errors)

    index = {name: i for i, name in enumerate(header)}
    mappings: list[Mapping] = []
    for lineno, cells in rows:
        if len(cells) != len(header):
            errors.append(Diagnostic(
                "error", source_name, lineno,
                f"expected {len(header)} fields, got {len(cells)}"))
            continue

        def cell(name: str) -> str | None:
            if name not in index:
                return None
            value = cells[index[name]].strip()
            return value or None

        predicate_raw = cell("predicate_id") or ""
        predicate = PREDICATE_CURIES.get(predicate_raw)
        if predicate is None:
            errors.append(Diagnostic("error", source_name, lineno, f"unknown predicate '{predicate_raw}'"))
            continue
        confidence = None
        confidence_raw = cell("confidence")
        if confidence_raw is not None:
            try:
                confidence = float(confidence_raw)
            except ValueError:
                errors.append(Diagnostic("error", source_name, lineno, f"non-numeric confidence '{confidence_raw}'"))
                continue
            if not (0.0 <= confidence <= 1.0):
                errors.append(Diagnostic("error", source_name, lineno, f"confidence out of range [0,1]: {confidence_raw}"))
                continue
        mappings.append(Mapping(
            subject_id=cell("subject_id") or "",
            predicate=predicate,
            object_id=cell("object_id") or "",
            justification=cell("mapping_justification"),
            confidence=confidence,
            subject_label=cell("subject_label"),
            object_label=cell("object_label"),
            source=source_name, line=lineno))

    if errors:
        return sort_diagnostics(errors)
    return MappingSet(metadata=metadata, mappings=mappings, warnings=sort_diagnostics(warnings))


def _format_confidence(value: float) -> str:
    # shortest decimal form: repr of a float already is; strip trailing .0 is wrong (parse expects float) -> keep repr
    return repr(value)


def serialize_sssom_tsv(mapping_set: MappingSet) -> str:
    """Emit metadata block, canonical header, and rows in stored order.

    `parse_sssom_tsv(serialize_sssom_tsv(s))` reproduces `s` exactly.
    """
    out: list[str] = []
    for key, value in mapping_set.metadata.items():
        out.append(f"#{key}: {value}")
    out.append("\t".join(SSSOM_CANONICAL_HEADER))
    for m in mapping_set.mappings:
        out.append("\t".join([
            m.subject_id,
            CURIES_BY_PREDICATE[m.predicate],
            m.object_id,
            m.justification or "",
            _format_confidence(m.confidence) if m.confidence is not None else "",
            m.subject_label or "",
            m.object_label or "",
        ]))
    return "\n".join(out) + "\n"


def load_bundle_dir(path: str | Path) -> KnowledgeBase | list[Diagnostic]:
    """Load every `*.taxonomy.yaml` and `*.sssom.tsv` under `path`
    (lexicographic filename order), merge, and validate.

    Returns diagnostics if any file fails to parse or validation finds
    error-severity problems.
    """
    directory = Path(path)
    if not directory.is_dir():
        return [Diagnostic("error", str(directory), 1, "not a directory")]

    taxonomies: list[Taxonomy] = []
    risks: list[Risk] = []
    mappings: list[Mapping] = []
    actions: list[MitigationAction] = []
    detectors: list[Detector] = []
    benchmarks: list[BenchmarkLink] = []
    diags: list[Diagnostic] = []

    for file in sorted(directory.iterdir(), key=lambda p: p.name):
        if file.name.endswith(".taxonomy.yaml"):
            result = parse_taxonomy_document(file.read_text(encoding="utf-8"), file.name)
            if isinstance(result, list):
                diags.extend(result)
                continue
            taxonomies.extend(result.taxonomies)
            risks.extend(result.risks)
            actions.extend(result.actions)
            detectors.extend(result.detectors)
            benchmarks.extend(result.benchmarks)
        elif file.name.endswith(".sssom.tsv"):
            result = parse_sssom_tsv(file.read_text(encoding="utf-8"), file.name)
            if isinstance(result, list):
                diags.extend(result)
                continue
            mappings.extend(result.mappings)

    if errors_in(diags):
        return sort_diagnostics(errors_in(diags))

    kb = KnowledgeBase(
        taxonomies=tuple(taxonomies),
        risks=tuple(risks),
        mappings=tuple(mappings),
        actions=tuple(actions),
        detectors=tuple(detectors),
        benchmarks=tuple(benchmarks))
    validation = errors_in(validate_knowledge_base(kb))
    if validation:
        return validation
    return kb
