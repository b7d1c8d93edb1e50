import itertools
import json
import random

import pytest

from risknexus.graph import (
    STRENGTH,
    AmbiguousTag,
    GraphError,
    RiskNotFound,
    build_graph,
    compose_predicates,
    evidence_for,
    export_graph,
    get_risk,
    import_json_graph,
    invert_predicate,
    list_risks,
    mitigations_for,
    related_risks,
)
from risknexus.model import (
    BenchmarkLink,
    Detector,
    KnowledgeBase,
    Mapping,
    MappingPredicate,
    MitigationAction,
    Risk,
    RiskCategory,
    Taxonomy,
)

P = MappingPredicate


def _kb_for(node_names, mappings, detectors=(), actions=(), benchmarks=()):
    tax = Taxonomy(id="t", name="T")
    risks = tuple(
        Risk(id=name, tag=name, name=name.upper(), description=f"risk {name}",
             category=RiskCategory.OUTPUT, taxonomy_id="t")
        for name in node_names)
    return KnowledgeBase(taxonomies=(tax,), risks=risks, mappings=tuple(mappings),
                         detectors=tuple(detectors), actions=tuple(actions),
                         benchmarks=tuple(benchmarks))


# ---------------------------------------------------------------------------
# predicate algebra


def test_inverse_table():
    assert invert_predicate(P.EXACT) == P.EXACT
    assert invert_predicate(P.CLOSE) == P.CLOSE
    assert invert_predicate(P.RELATED) == P.RELATED
    assert invert_predicate(P.BROAD) == P.NARROW
    assert invert_predicate(P.NARROW) == P.BROAD


def test_inverse_is_involution():
    for p in P:
        assert invert_predicate(invert_predicate(p)) == p


def test_composition_examples():
    assert compose_predicates(P.EXACT, P.CLOSE) == P.CLOSE
    assert compose_predicates(P.CLOSE, P.EXACT) == P.CLOSE
    assert compose_predicates(P.CLOSE, P.CLOSE) == P.RELATED
    assert compose_predicates(P.BROAD, P.BROAD) == P.BROAD
    assert compose_predicates(P.NARROW, P.NARROW) == P.NARROW
    assert compose_predicates(P.BROAD, P.NARROW) is None
    assert compose_predicates(P.NARROW, P.BROAD) is None
    assert compose_predicates(P.RELATED, P.CLOSE) is None
    assert compose_predicates(P.CLOSE, P.RELATED) is None
    assert compose_predicates(P.RELATED, P.EXACT) == P.RELATED


def test_exact_is_identity():
    for p in P:
        assert compose_predicates(P.EXACT, p) == p
        assert compose_predicates(p, P.EXACT) == p


def test_composition_total():
    for p, q in itertools.product(P, P):
        compose_predicates(p, q)  # never raises


# ---------------------------------------------------------------------------
# lookup and listing


def test_build_rejects_invalid_kb():
    kb = _kb_for(["a"], [Mapping(subject_id="a", predicate=P.CLOSE, object_id="ghost")])
    with pytest.raises(GraphError):
        build_graph(kb)


def test_lookup_by_id_and_tag(atlas_graph):
    by_tag = get_risk(atlas_graph, "hallucination")
    by_id = get_risk(atlas_graph, "atlas-hallucination")
    assert by_tag is by_id


def test_lookup_not_found(atlas_graph):
    with pytest.raises(RiskNotFound):
        get_risk(atlas_graph, "no-such-risk")


def test_ambiguous_tag(combined_graph):
    # 'prompt-injection' is a tag in both the Atlas and the sample taxonomy
    with pytest.raises(AmbiguousTag) as exc:
        get_risk(combined_graph, "prompt-injection")
    assert set(exc.value.candidates) == {"atlas-prompt-injection", "demo:prompt-injection"}


def test_evasion_attack_fields(atlas_graph):
    risk = get_risk(atlas_graph, "atlas-evasion-attack")
    assert risk.name == "Evasion attack"
    assert risk.category == RiskCategory.INFERENCE


def test_list_risks_empty_filters(atlas_graph):
    everything = list_risks(atlas_graph)
    assert len(everything) == 95
    assert [r.id for r in everything] == sorted(r.id for r in everything)


def test_list_risks_conjunction(atlas_graph):
    found = list_risks(atlas_graph, category=RiskCategory.INFERENCE, dimension="Prompt attacks")
    assert len(found) == 9


def test_list_risks_unknown_dimension(atlas_graph):
    assert list_risks(atlas_graph, dimension="No Such Dimension") == []


def test_list_risks_text_filter(atlas_graph):
    found = list_risks(atlas_graph, text="HALLUCINAT")
    assert any(r.id == "atlas-hallucination" for r in found)


def test_empty_graph_queries():
    g = build_graph(KnowledgeBase())
    assert list_risks(g) == []
    with pytest.raises(RiskNotFound):
        related_risks(g, "anything")


# ---------------------------------------------------------------------------
# relatedness


def test_related_two_hop_example():
    mappings = [
        Mapping(subject_id="a", predicate=P.EXACT, object_id="b", source="m", line=1),
        Mapping(subject_id="b", predicate=P.CLOSE, object_id="c", source="m", line=2),
    ]
    g = build_graph(_kb_for(["a", "b", "c"], mappings))
    found = related_risks(g, "a", max_hops=2)
    assert [(rr.risk.id, rr.predicate) for rr in found] == [("b", P.EXACT), ("c", P.CLOSE)]
    assert [len(rr.path) for rr in found] == [1, 2]


def test_related_no_mappings(atlas_graph):
    assert related_risks(atlas_graph, "atlas-hallucination") == []


def test_related_never_returns_self():
    mappings = [
        Mapping(subject_id="a", predicate=P.EXACT, object_id="b", source="m", line=1),
        Mapping(subject_id="b", predicate=P.EXACT, object_id="c", source="m", line=2),
        Mapping(subject_id="c", predicate=P.EXACT, object_id="a", source="m", line=3),
    ]
    g = build_graph(_kb_for(["a", "b", "c"], mappings))
    assert all(rr.risk.id != "a" for rr in related_risks(g, "a", max_hops=3))


def test_related_reverse_traversal_uses_inverse():
    mappings = [Mapping(subject_id="a", predicate=P.BROAD, object_id="b", source="m", line=1)]
    g = build_graph(_kb_for(["a", "b"], mappings))
    (from_b,) = related_risks(g, "b")
    assert from_b.predicate == P.NARROW


def test_related_exact_symmetry(combined_graph):
    forward = {rr.risk.id: rr.predicate for rr in related_risks(combined_graph, "atlas-prompt-injection")}
    assert forward["demo:prompt-injection"] == P.EXACT
    backward = {rr.risk.id: rr.predicate for rr in related_risks(combined_graph, "demo:prompt-injection")}
    assert backward["atlas-prompt-injection"] == P.EXACT


def test_related_confidence_product():
    mappings = [
        Mapping(subject_id="a", predicate=P.EXACT, object_id="b", confidence=0.9, source="m", line=1),
        Mapping(subject_id="b", predicate=P.EXACT, object_id="c", source="m", line=2),
    ]
    g = build_graph(_kb_for(["a", "b", "c"], mappings))
    by_id = {rr.risk.id: rr for rr in related_risks(g, "a")}
    assert by_id["b"].confidence == pytest.approx(0.9)
    # absent confidence treated as 1.0
    assert by_id["c"].confidence == pytest.approx(0.9)


def test_min_strength_filter():
    mappings = [
        Mapping(subject_id="a", predicate=P.RELATED, object_id="b", source="m", line=1),
        Mapping(subject_id="a", predicate=P.EXACT, object_id="c", source="m", line=2),
    ]
    g = build_graph(_kb_for(["a", "b", "c"], mappings))
    strong = related_risks(g, "a", min_strength=4)
    assert [rr.risk.id for rr in strong] == ["c"]


# ---------------------------------------------------------------------------
# independent oracle: exhaustive simple-path enumeration

ORACLE_INVERSE = {P.EXACT: P.EXACT, P.CLOSE: P.CLOSE, P.RELATED: P.RELATED,
                  P.BROAD: P.NARROW, P.NARROW: P.BROAD}

ORACLE_COMPOSE = {
    (P.CLOSE, P.CLOSE): P.RELATED,
    (P.BROAD, P.BROAD): P.BROAD,
    (P.NARROW, P.NARROW): P.NARROW,
    (P.CLOSE, P.BROAD): P.RELATED,
    (P.CLOSE, P.NARROW): P.RELATED,
    (P.BROAD, P.CLOSE): P.RELATED,
    (P.NARROW, P.CLOSE): P.RELATED,
    (P.BROAD, P.NARROW): None,
    (P.NARROW, P.BROAD): None,
    (P.RELATED, P.CLOSE): None,
    (P.RELATED, P.BROAD): None,
    (P.RELATED, P.NARROW): None,
    (P.RELATED, P.RELATED): None,
    (P.CLOSE, P.RELATED): None,
    (P.BROAD, P.RELATED): None,
    (P.NARROW, P.RELATED): None,
}
for _p in P:
    ORACLE_COMPOSE[(P.EXACT, _p)] = _p
    ORACLE_COMPOSE[(_p, P.EXACT)] = _p


def oracle_related(mappings, start, max_hops, min_strength):
    edges = {}
    for m in mappings:
        edges.setdefault(m.subject_id, []).append((m.object_id, m.predicate, m))
        edges.setdefault(m.object_id, []).append((m.subject_id, ORACLE_INVERSE[m.predicate], m))

    # enumerate every simple path from start up to max_hops
    paths = []

    def extend(node, visited, preds, used):
        if len(used) >= max_hops:
            return
        for neighbor, pred, mapping in edges.get(node, []):
            if neighbor in visited:
                continue
            paths.append((neighbor, preds + [pred], used + [mapping]))
            extend(neighbor, visited | {neighbor}, preds + [pred], used + [mapping])

    extend(start, {start}, [], [])

    best = {}
    for target, preds, used in paths:
        folded = preds[0]
        for pred in preds[1:]:
            if folded is None:
                break
            folded = ORACLE_COMPOSE[(folded, pred)]
        if folded is None:
            continue
        confidence = 1.0
        for m in used:
            confidence *= m.confidence if m.confidence is not None else 1.0
        key = (-STRENGTH[folded], len(used), tuple(m.key() for m in used))
        if target not in best or key < best[target][0]:
            best[target] = (key, folded, confidence, used)
    out = [(target, folded, len(used))
           for target, (key, folded, confidence, used) in best.items()
           if STRENGTH[folded] >= min_strength]
    return sorted(out, key=lambda item: (-STRENGTH[item[1]], item[0]))


def _random_case(rng):
    n_nodes = rng.randint(2, 8)
    nodes = [f"n{i}" for i in range(n_nodes)]
    n_maps = rng.randint(0, 16)
    mappings = []
    for i in range(n_maps):
        a, b = rng.sample(nodes, 2)
        mappings.append(Mapping(
            subject_id=a, predicate=rng.choice(list(P)), object_id=b,
            confidence=rng.choice([None, round(rng.random(), 3)]),
            source="rng.tsv", line=i + 1))
    return nodes, mappings


def test_oracle_equivalence_random_graphs():
    rng = random.Random(20250823)
    for case in range(1000):
        nodes, mappings = _random_case(rng)
        max_hops = rng.randint(1, 4)
        min_strength = rng.randint(1, 4)
        start = rng.choice(nodes)
        g = build_graph(_kb_for(nodes, mappings))
        engine = [(rr.risk.id, rr.predicate, len(rr.path))
                  for rr in related_risks(g, start, max_hops=max_hops, min_strength=min_strength)]
        expected = oracle_related(mappings, start, max_hops, min_strength)
        assert engine == expected, f"case {case}: start={start} hops={max_hops} ms={min_strength}"


def test_monotonicity_in_max_hops():
    rng = random.Random(7)
    for _ in range(200):
        nodes, mappings = _random_case(rng)
        start = rng.choice(nodes)
        g = build_graph(_kb_for(nodes, mappings))
        previous: dict = {}
        for hops in (1, 2, 3):
            current = {rr.risk.id: rr.strength for rr in related_risks(g, start, max_hops=hops)}
            for target, strength in previous.items():
                assert target in current
                assert current[target] >= strength
            previous = current


# ---------------------------------------------------------------------------
# mitigation / evidence adjacency


def _linked_kb():
    mappings = [Mapping(subject_id="a", predicate=P.EXACT, object_id="b", source="m", line=1)]
    detectors = [Detector(id="det-1", name="Det", risk_ids=("a",))]
    actions = [MitigationAction(id="act-1", name="Act", description="", risk_ids=("b",))]
    benchmarks = [
        BenchmarkLink(id="bench-2", name="B2", risk_ids=("a",)),
        BenchmarkLink(id="bench-1", name="B1", risk_ids=("a",)),
    ]
    return _kb_for(["a", "b", "c"], mappings, detectors, actions, benchmarks)


def test_mitigations_direct_only():
    g = build_graph(_linked_kb())
    result = mitigations_for(g, "a")
    assert [li.item.id for li in result["detectors"]] == ["det-1"]
    assert result["actions"] == []


def test_mitigations_include_related_annotates_via():
    g = build_graph(_linked_kb())
    result = mitigations_for(g, "a", include_related=True)
    (action,) = result["actions"]
    assert action.item.id == "act-1"
    assert action.via == "b"


def test_mitigations_empty():
    g = build_graph(_linked_kb())
    result = mitigations_for(g, "c")
    assert result == {"detectors": [], "actions": []}


def test_evidence_sorted_by_id():
    g = build_graph(_linked_kb())
    assert [li.item.id for li in evidence_for(g, "a")] == ["bench-1", "bench-2"]


def test_evidence_not_found():
    g = build_graph(_linked_kb())
    with pytest.raises(RiskNotFound):
        evidence_for(g, "ghost")


# ---------------------------------------------------------------------------
# export


def test_export_empty_graph():
    g = build_graph(KnowledgeBase())
    assert export_graph(g, "json-graph") == '{"edges":[],"nodes":[]}'
    assert export_graph(g, "ntriples") == ""


def test_export_unknown_format(atlas_graph):
    with pytest.raises(GraphError):
        export_graph(atlas_graph, "turtle")


def test_ntriples_single_risk():
    g = build_graph(_kb_for(["a"], []))
    out = export_graph(g, "ntriples")
    assert '<https://risknexus.dev/id/risk/a> <https://risknexus.dev/ns/core#name> "A" .' in out
    assert '"output"' in out
    assert out.endswith(".\n")


def test_export_deterministic(combined_graph, combined_bundle_dir):
    from risknexus.ingest import load_bundle_dir

    again = build_graph(load_bundle_dir(combined_bundle_dir))
    for fmt in ("json-graph", "ntriples"):
        assert export_graph(combined_graph, fmt) == export_graph(again, fmt)


def test_json_graph_reimport_round_trip(combined_graph):
    exported = export_graph(combined_graph, "json-graph")
    rebuilt = import_json_graph(exported)
    assert export_graph(rebuilt, "json-graph") == exported
    assert set(rebuilt.risks_by_id) == set(combined_graph.risks_by_id)
    assert len(rebuilt.kb.mappings) == len(combined_graph.kb.mappings)


def test_prefix_map_matches_shipped_file():
    from risknexus.graph import PREFIXES
    from risknexus import bundled_data_dir

    shipped = json.loads((bundled_data_dir().parent / "prefixes.json").read_text())
    assert shipped == PREFIXES
