"""Immutable indexed knowledge graph with cross-taxonomy relatedness.

Multi-hop relatedness composes mapping predicates conservatively: a path
only yields an inferred relation when every pairwise composition is
defined, and inferred links never claim more than the weakest standard
reading of the underlying match semantics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from collections import defaultdict

from .model import (
    BenchmarkLink,
    Descriptor,
    Detector,
    KnowledgeBase,
    Mapping,
    MappingPredicate,
    MitigationAction,
    Risk,
    RiskCategory,
    Taxonomy,
    errors_in,
    validate_knowledge_base,
)

P = MappingPredicate

_INVERSE = {
    P.EXACT: P.EXACT,
    P.CLOSE: P.CLOSE,
    P.RELATED: P.RELATED,
    P.BROAD: P.NARROW,
    P.NARROW: P.BROAD,
}

# rows = first predicate, cols = second; None = no inference along the path
_COMPOSE: dict[tuple[MappingPredicate, MappingPredicate], MappingPredicate | None] = {}
for _p in P:
    _COMPOSE[(P.EXACT, _p)] = _p
    _COMPOSE[(_p, P.EXACT)] = _p
_COMPOSE[(P.CLOSE, P.CLOSE)] = P.RELATED
_COMPOSE[(P.BROAD, P.BROAD)] = P.BROAD
_COMPOSE[(P.NARROW, P.NARROW)] = P.NARROW
_COMPOSE[(P.CLOSE, P.BROAD)] = P.RELATED
_COMPOSE[(P.CLOSE, P.NARROW)] = P.RELATED
_COMPOSE[(P.BROAD, P.CLOSE)] = P.RELATED
_COMPOSE[(P.NARROW, P.CLOSE)] = P.RELATED
_COMPOSE[(P.BROAD, P.NARROW)] = None
_COMPOSE[(P.NARROW, P.BROAD)] = None
for _p in (P.CLOSE, P.BROAD, P.NARROW, P.RELATED):
    _COMPOSE[(P.RELATED, _p)] = None
    _COMPOSE[(_p, P.RELATED)] = None

STRENGTH = {P.EXACT: 4, P.CLOSE: 3, P.BROAD: 2, P.NARROW: 2, P.RELATED: 1}


def invert_predicate(p: MappingPredicate) -> MappingPredicate:
    return _INVERSE[p]


def compose_predicates(p: MappingPredicate, q: MappingPredicate) -> MappingPredicate | None:
    return _COMPOSE[(p, q)]


class GraphError(Exception):
    pass


class RiskNotFound(GraphError):
    def __init__(self, key: str):
        super().__init__(f"risk not found: '{key}'")
        self.key = key


class AmbiguousTag(GraphError):
    def __init__(self, tag: str, candidates: list[str]):
        super().__init__(f"tag '{tag}' is ambiguous: {', '.join(sorted(candidates))}")
        self.tag = tag
        self.candidates = sorted(candidates)


@dataclass(frozen=True)
class RelatedRisk:
    risk: Risk
    predicate: MappingPredicate
    strength: int
    confidence: float
    path: tuple[Mapping, ...]


class KnowledgeGraph:
    """Read-only indexed view over a validated KnowledgeBase."""

    def __init__(self, kb: KnowledgeBase):
        errors = errors_in(validate_knowledge_base(kb))
        if errors:
            raise GraphError(
                "knowledge base has validation errors: " + "; ".join(str(e) for e in errors[:5]))
        self.kb = kb
        self.risks_by_id: dict[str, Risk] = {r.id: r for r in kb.risks}
        self.risks_by_tag: dict[str, list[Risk]] = defaultdict(list)
        self.by_taxonomy: dict[str, list[Risk]] = defaultdict(list)
        self.by_category: dict[RiskCategory, list[Risk]] = defaultdict(list)
        self.by_dimension: dict[str, list[Risk]] = defaultdict(list)
        self.by_descriptor: dict[Descriptor, list[Risk]] = defaultdict(list)
        for r in kb.risks:
            self.risks_by_tag[r.tag].append(r)
            self.by_taxonomy[r.taxonomy_id].append(r)
            self.by_category[r.category].append(r)
            if r.dimension is not None:
                self.by_dimension[r.dimension].append(r)
            if r.descriptor is not None:
                self.by_descriptor[r.descriptor].append(r)
        self.taxonomies: dict[str, Taxonomy] = {t.id: t for t in kb.taxonomies}

        # adjacency holds (neighbor, predicate-as-traversed, original mapping)
        self.adjacency: dict[str, list[tuple[str, MappingPredicate, Mapping]]] = defaultdict(list)
        for m in kb.mappings:
            self.adjacency[m.subject_id].append((m.object_id, m.predicate, m))
            self.adjacency[m.object_id].append((m.subject_id, invert_predicate(m.predicate), m))

        self.detectors_by_risk: dict[str, list[Detector]] = defaultdict(list)
        self.actions_by_risk: dict[str, list[MitigationAction]] = defaultdict(list)
        self.benchmarks_by_risk: dict[str, list[BenchmarkLink]] = defaultdict(list)
        for det in kb.detectors:
            for rid in det.risk_ids:
                self.detectors_by_risk[rid].append(det)
        for act in kb.actions:
            for rid in act.risk_ids:
                self.actions_by_risk[rid].append(act)
        for bench in kb.benchmarks:
            for rid in bench.risk_ids:
                self.benchmarks_by_risk[rid].append(bench)


def build_graph(kb: KnowledgeBase) -> KnowledgeGraph:
    return KnowledgeGraph(kb)


def get_risk(g: KnowledgeGraph, key: str) -> Risk:
    """Look up a risk by id first, then by tag (error when ambiguous)."""
    risk = g.risks_by_id.get(key)
    if risk is not None:
        return risk
    candidates = g.risks_by_tag.get(key, [])
    if len(candidates) == 1:
        return candidates[0]
    if len(candidates) > 1:
        raise AmbiguousTag(key, [r.id for r in candidates])
    raise RiskNotFound(key)


def list_risks(
    g: KnowledgeGraph,
    taxonomy: str | None = None,
    category: RiskCategory | None = None,
    dimension: str | None = None,
    descriptor: Descriptor | None = None,
    text: str | None = None,
) -> list[Risk]:
    """Conjunctive filter over the risk catalog, sorted by id."""
    risks: list[Risk] = list(g.kb.risks)
    if taxonomy is not None:
        risks = [r for r in risks if r.taxonomy_id == taxonomy]
    if category is not None:
        risks = [r for r in risks if r.category == category]
    if dimension is not None:
        risks = [r for r in risks if r.dimension == dimension]
    if descriptor is not None:
        risks = [r for r in risks if r.descriptor == descriptor]
    if text is not None:
        needle = text.lower()
        risks = [r for r in risks if needle in (r.name + " " + r.description).lower()]
    return sorted(risks, key=lambda r: r.id)


def related_risks(
    g: KnowledgeGraph,
    risk_id: str,
    max_hops: int = 2,
    min_strength: int = 1,
) -> list[RelatedRisk]:
    """All risks reachable from `risk_id` along mapping paths whose predicate
    composition is defined, keeping one best path per target.

    Best per target = (strength desc, path length asc, lexicographically
    smallest sequence of mapping source:line keys). Result sorted by
    (strength desc, target id asc).
    """
    start = get_risk(g, risk_id).id
    # best[target] = (strength, path_len, path_key, predicate, confidence, path)
    best: dict[str, tuple] = {}

    def visit(node: str, predicate: MappingPredicate | None, confidence: float,
              path: tuple[Mapping, ...], seen: frozenset[str]) -> None:
        if len(path) >= max_hops:
            return
        for neighbor, edge_pred, mapping in g.adjacency.get(node, ()):
            if neighbor in seen:
                continue
            folded = edge_pred if predicate is None else compose_predicates(predicate, edge_pred)
            new_path = path + (mapping,)
            new_conf = confidence * (mapping.confidence if mapping.confidence is not None else 1.0)
            if folded is not None and neighbor != start:
                candidate = (
                    -STRENGTH[folded],
                    len(new_path),
                    tuple(m.key() for m in new_path),
                    folded,
                    new_conf,
                    new_path,
                )
                current = best.get(neighbor)
                if current is None or candidate[:3] < current[:3]:
                    best[neighbor] = candidate
            # keep exploring even through an undefined composition? No:
            # a path with a none-composition never contributes, and any
            # extension folds through none as well.
            if folded is not None:
                visit(neighbor, folded, new_conf, new_path, seen | {neighbor})

    visit(start, None, 1.0, (), frozenset({start}))

    out = [
        RelatedRisk(
            risk=g.risks_by_id[target],
            predicate=entry[3],
            strength=STRENGTH[entry[3]],
            confidence=entry[4],
            path=entry[5],
        )
        for target, entry in best.items()
        if STRENGTH[entry[3]] >= min_strength
    ]
    return sorted(out, key=lambda rr: (-rr.strength, rr.risk.id))


@dataclass(frozen=True)
class LinkedItem:
    """A mitigation/evidence link, possibly reached via an exact-related risk."""
    item: object
    via: str | None = None


def _direct_and_related(g: KnowledgeGraph, risk_id: str, index, include_related: bool):
    risk = get_risk(g, risk_id)
    found: dict[str, LinkedItem] = {}
    for item in index.get(risk.id, ()):
        found[item.id] = LinkedItem(item=item)
    if include_related:
        for rel in related_risks(g, risk.id):
            if rel.predicate != MappingPredicate.EXACT:
                continue
            for item in index.get(rel.risk.id, ()):
                if item.id not in found:
                    found[item.id] = LinkedItem(item=item, via=rel.risk.id)
    return [found[k] for k in sorted(found)]


def mitigations_for(g: KnowledgeGraph, risk_id: str, include_related: bool = False) -> dict:
    """Detectors and actions linked to a risk, each list sorted by id."""
    return {
        "detectors": _direct_and_related(g, risk_id, g.detectors_by_risk, include_related),
        "actions": _direct_and_related(g, risk_id, g.actions_by_risk, include_related),
    }


def evidence_for(g: KnowledgeGraph, risk_id: str, include_related: bool = False) -> list[LinkedItem]:
    """Benchmarks linked to a risk, sorted by id."""
    return _direct_and_related(g, risk_id, g.benchmarks_by_risk, include_related)


# ---------------------------------------------------------------------------
# export


def _risk_node(r: Risk) -> dict:
    return {
        "type": "risk",
        "id": r.id,
        "tag": r.tag,
        "name": r.name,
        "description": r.description,
        "concern": r.concern,
        "category": r.category.value,
        "descriptor": r.descriptor.value if r.descriptor else None,
        "dimension": r.dimension,
        "taxonomy": r.taxonomy_id,
        "uri": r.uri,
        "provenance": r.provenance,
    }


def export_json_graph(g: KnowledgeGraph) -> str:
    nodes: list[dict] = []
    for t in sorted(g.kb.taxonomies, key=lambda t: t.id):
        nodes.append({
            "type": "taxonomy", "id": t.id, "name": t.name, "version": t.version,
            "source_url": t.source_url,
            "dimensions": [{"name": d[0], "category": d[1].value} for d in t.dimensions],
        })
    for r in sorted(g.kb.risks, key=lambda r: r.id):
        nodes.append(_risk_node(r))
    for d in sorted(g.kb.detectors, key=lambda d: d.id):
        nodes.append({"type": "detector", "id": d.id, "name": d.name,
                      "detector_dimension": d.detector_dimension})
    for a in sorted(g.kb.actions, key=lambda a: a.id):
        nodes.append({"type": "action", "id": a.id, "name": a.name,
                      "description": a.description, "source": a.source})
    for b in sorted(g.kb.benchmarks, key=lambda b: b.id):
        nodes.append({"type": "benchmark", "id": b.id, "name": b.name,
                      "description": b.description, "url": b.url})

    edges: list[dict] = []
    for m in g.kb.mappings:
        edges.append({
            "type": "mapping", "subject": m.subject_id, "predicate": m.predicate.value,
            "object": m.object_id, "justification": m.justification,
            "confidence": m.confidence,
        })
    for d in g.kb.detectors:
        for rid in d.risk_ids:
            edges.append({"type": "detects", "subject": d.id, "object": rid})
    for a in g.kb.actions:
        for rid in a.risk_ids:
            edges.append({"type": "mitigates", "subject": a.id, "object": rid})
    for b in g.kb.benchmarks:
        for rid in b.risk_ids:
            edges.append({"type": "evaluates", "subject": b.id, "object": rid})
    edges.sort(key=lambda e: (e["type"], e["subject"], e.get("predicate", ""), e["object"]))
    return json.dumps({"nodes": nodes, "edges": edges},
                      sort_keys=True, separators=(",", ":"), ensure_ascii=False)


PREFIXES = {
    "ran": "https://risknexus.dev/ns/core#",
    "risk": "https://risknexus.dev/id/risk/",
    "tax": "https://risknexus.dev/id/taxonomy/",
    "detector": "https://risknexus.dev/id/detector/",
    "action": "https://risknexus.dev/id/action/",
    "benchmark": "https://risknexus.dev/id/benchmark/",
    "skos": "http://www.w3.org/2004/02/skos/core#",
}

_SKOS_PREDICATE = {
    P.EXACT: "exactMatch",
    P.CLOSE: "closeMatch",
    P.BROAD: "broadMatch",
    P.NARROW: "narrowMatch",
    P.RELATED: "relatedMatch",
}


def _literal(value: str) -> str:
    escaped = value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
    return f'"{escaped}"'


def _risk_uri(rid: str) -> str:
    return f"<{PREFIXES['risk']}{rid}>"


def export_ntriples(g: KnowledgeGraph) -> str:
    ran = PREFIXES["ran"]
    skos = PREFIXES["skos"]
    lines: list[str] = []
    for r in g.kb.risks:
        subj = _risk_uri(r.id)
        lines.append(f"{subj} <{ran}name> {_literal(r.name)} .")
        lines.append(f"{subj} <{ran}description> {_literal(r.description)} .")
        lines.append(f"{subj} <{ran}category> {_literal(r.category.value)} .")
        lines.append(f"{subj} <{ran}taxonomy> <{PREFIXES['tax']}{r.taxonomy_id}> .")
        if r.concern:
            lines.append(f"{subj} <{ran}concern> {_literal(r.concern)} .")
        if r.descriptor is not None:
            lines.append(f"{subj} <{ran}descriptor> {_literal(r.descriptor.value)} .")
        if r.dimension is not None:
            lines.append(f"{subj} <{ran}dimension> {_literal(r.dimension)} .")
    for m in g.kb.mappings:
        lines.append(f"{_risk_uri(m.subject_id)} <{skos}{_SKOS_PREDICATE[m.predicate]}> {_risk_uri(m.object_id)} .")
    for d in g.kb.detectors:
        for rid in d.risk_ids:
            lines.append(f"<{PREFIXES['detector']}{d.id}> <{ran}detects> {_risk_uri(rid)} .")
    for a in g.kb.actions:
        for rid in a.risk_ids:
            lines.append(f"<{PREFIXES['action']}{a.id}> <{ran}mitigates> {_risk_uri(rid)} .")
    for b in g.kb.benchmarks:
        for rid in b.risk_ids:
            lines.append(f"<{PREFIXES['benchmark']}{b.id}> <{ran}evaluates> {_risk_uri(rid)} .")
    return "\n".join(sorted(lines)) + ("\n" if lines else "")


def export_graph(g: KnowledgeGraph, format: str) -> str:
    """Serialize the graph deterministically as 'json-graph' or 'ntriples'."""
    if format == "json-graph":
        return export_json_graph(g)
    if format == "ntriples":
        return export_ntriples(g)
    raise GraphError(f"unknown export format '{format}'")


def import_json_graph(text: str) -> KnowledgeGraph:
    """Rebuild a graph from `export_json_graph` output."""
    doc = json.loads(text)
    taxonomies: list[Taxonomy] = []
    risks: list[Risk] = []
    detectors: dict[str, dict] = {}
    actions: dict[str, dict] = {}
    benchmarks: dict[str, dict] = {}
    for node in doc["nodes"]:
        kind = node["type"]
        if kind == "taxonomy":
            taxonomies.append(Taxonomy(
                id=node["id"], name=node["name"], version=node.get("version", ""),
                source_url=node.get("source_url"),
                dimensions=tuple((d["name"], RiskCategory.parse(d["category"]))
                                 for d in node.get("dimensions", []))))
        elif kind == "risk":
            risks.append(Risk(
                id=node["id"], tag=node["tag"], name=node["name"],
                description=node["description"], concern=node.get("concern", ""),
                category=RiskCategory.parse(node["category"]),
                descriptor=Descriptor.parse(node["descriptor"]) if node.get("descriptor") else None,
                dimension=node.get("dimension"), taxonomy_id=node["taxonomy"],
                uri=node.get("uri"), provenance=node.get("provenance")))
        elif kind == "detector":
            detectors[node["id"]] = dict(node, risk_ids=[])
        elif kind == "action":
            actions[node["id"]] = dict(node, risk_ids=[])
        elif kind == "benchmark":
            benchmarks[node["id"]] = dict(node, risk_ids=[])
    mappings: list[Mapping] = []
    for edge in doc["edges"]:
        kind = edge["type"]
        if kind == "mapping":
            mappings.append(Mapping(
                subject_id=edge["subject"],
                predicate=MappingPredicate.parse(edge["predicate"]),
                object_id=edge["object"], justification=edge.get("justification"),
                confidence=edge.get("confidence")))
        elif kind == "detects":
            detectors[edge["subject"]]["risk_ids"].append(edge["object"])
        elif kind == "mitigates":
            actions[edge["subject"]]["risk_ids"].append(edge["object"])
        elif kind == "evaluates":
            benchmarks[edge["subject"]]["risk_ids"].append(edge["object"])
    kb = KnowledgeBase(
        taxonomies=tuple(taxonomies),
        risks=tuple(risks),
        mappings=tuple(mappings),
        actions=tuple(MitigationAction(
            id=a["id"], name=a.get("name", ""), description=a.get("description", ""),
            source=a.get("source", ""), risk_ids=tuple(a["risk_ids"])) for a in actions.values()),
        detectors=tuple(Detector(
            id=d["id"], name=d.get("name", ""),
            detector_dimension=d.get("detector_dimension", ""),
            risk_ids=tuple(d["risk_ids"])) for d in detectors.values()),
        benchmarks=tuple(BenchmarkLink(
            id=b["id"], name=b.get("name", ""), description=b.get("description", ""),
            url=b.get("url"), risk_ids=tuple(b["risk_ids"])) for b in benchmarks.values()))
    return build_graph(kb)
