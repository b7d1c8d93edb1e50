import json
import threading

import pytest
from fastapi.testclient import TestClient

from risknexus.service import ServiceConfig, create_app
from risknexus.store import AssessmentStore, RevisionConflict


FULL_ANSWERS = {
    "uses_generative_model": "yes",
    "uses_agents": "no",
    "uses_personal_data": "yes",
    "personal_data_kinds": ["pii", "biometric"],
    "user_facing": "yes",
    "consequential_decisions": "yes",
    "decision_domain": "employment",
    "third_party_model": "yes",
}

SCREENING_ATTRS = {"domain": "employment", "function": "candidate-screening"}


@pytest.fixture()
def client(tmp_path):
    app = create_app(ServiceConfig(store_dir=tmp_path / "store"))
    with TestClient(app, raise_server_exceptions=False) as c:
        yield c


@pytest.fixture()
def combined_client(tmp_path, combined_bundle_dir):
    app = create_app(ServiceConfig(data_dir=combined_bundle_dir,
                                   store_dir=tmp_path / "store"))
    with TestClient(app, raise_server_exceptions=False) as c:
        yield c


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json() == {"risks": 95, "status": "ok"}


def test_risks_listing_and_filters(client):
    assert len(client.get("/risks").json()["risks"]) == 95
    scoped = client.get("/risks", params={
        "category": "inference", "dimension": "Prompt attacks"}).json()["risks"]
    assert len(scoped) == 9
    bad = client.get("/risks", params={"category": "nonsense"})
    assert bad.status_code == 422 and bad.json()["code"] == "bad_filter"


def test_risk_lookup_by_id_and_tag(client):
    by_id = client.get("/risks/atlas-hallucination").json()
    by_tag = client.get("/risks/hallucination").json()
    assert by_id == by_tag
    assert by_id["category"] == "output"
    missing = client.get("/risks/atlas-no-such")
    assert missing.status_code == 404
    assert missing.json()["code"] == "risk_not_found"


def test_ambiguous_tag_conflict(combined_client):
    resp = combined_client.get("/risks/prompt-injection")
    assert resp.status_code == 409
    body = resp.json()
    assert body["code"] == "ambiguous_tag"
    assert set(body["details"]) == {"atlas-prompt-injection", "demo:prompt-injection"}


def test_related_endpoint(combined_client):
    resp = combined_client.get("/risks/atlas-prompt-injection/related")
    assert resp.status_code == 200
    related = resp.json()["related"]
    assert related
    ids = [r["risk"]["id"] for r in related]
    assert "demo:prompt-injection" in ids
    for entry in related:
        assert entry["path"]
        assert entry["strength"] >= 1


def test_mitigations_and_evidence_endpoints(client):
    resp = client.get("/risks/atlas-hallucination/mitigations")
    assert resp.status_code == 200
    body = resp.json()
    assert {"detectors", "actions"} == set(body)
    evidence = client.get("/risks/atlas-hallucination/evidence").json()
    assert "benchmarks" in evidence


def test_prioritize_endpoint(client):
    resp = client.post("/prioritize", json={
        "use_case": "a user-facing chatbot that can be tricked by prompt injection",
        "top_k": 5,
        "scope": {"category": "inference"}})
    assert resp.status_code == 200
    body = resp.json()
    assert len(body["ranked"]) == 5
    assert body["ranked"][0]["risk_id"] == "atlas-prompt-injection"
    assert all(rr["method"] == "lexical" for rr in body["ranked"])


def test_tag_endpoint(client):
    resp = client.post("/tag", json={"text": "model hallucination benchmark", "top_k": 3})
    assert resp.status_code == 200
    assert len(resp.json()["ranked"]) == 3


def test_questionnaire_endpoints(client):
    listing = client.get("/questionnaires").json()["questionnaires"]
    assert [q["id"] for q in listing] == ["default-intake"]
    detail = client.get("/questionnaires/default-intake").json()
    assert len(detail["questions"]) == 8
    assert client.get("/questionnaires/nope").status_code == 404


def test_export_endpoint(client):
    resp = client.get("/export", params={"format": "json-graph"})
    assert resp.status_code == 200
    doc = json.loads(resp.text)
    assert {"nodes", "edges"} <= set(doc)
    nt = client.get("/export", params={"format": "ntriples"})
    assert nt.status_code == 200 and nt.text.endswith(" .\n")
    bad = client.get("/export", params={"format": "xml"})
    assert bad.status_code == 422 and bad.json()["code"] == "unknown_format"


# ---------------------------------------------------------------------------
# assessment workflow


def _create(client, attrs=SCREENING_ATTRS):
    resp = client.post("/assessments", json={
        "use_case_text": "Screening job applications with an LLM.",
        "attrs": attrs})
    assert resp.status_code == 201
    return resp.json()


def test_assessment_lifecycle(client):
    record = _create(client)
    aid = record["id"]
    assert record["revision"] == 1 and record["profile"] is None

    fetched = client.get(f"/assessments/{aid}").json()
    initial_qids = [q["id"] for q in fetched["next_questions"]]
    assert "uses_personal_data" in initial_qids
    assert "personal_data_kinds" not in initial_qids  # hidden until branch opens

    resp = client.post(f"/assessments/{aid}/answers",
                       json={"answers": {"uses_personal_data": "yes"}},
                       headers={"If-Match": "1"})
    assert resp.status_code == 200
    body = resp.json()
    assert body["revision"] == 2
    assert "personal_data_kinds" in [q["id"] for q in body["next_questions"]]

    rest = {k: v for k, v in FULL_ANSWERS.items() if k != "uses_personal_data"}
    resp = client.post(f"/assessments/{aid}/answers", json={"answers": rest},
                       headers={"If-Match": "2"})
    assert resp.status_code == 200
    assert resp.json()["next_questions"] == []

    resp = client.post(f"/assessments/{aid}/evaluate", headers={"If-Match": "3"})
    assert resp.status_code == 200
    profile = resp.json()["profile"]
    assert profile["tier"] == "high_risk"
    assert profile["tier_rule_ids"] == ["tier-employment-screening"]
    assert profile["partial"] is False
    assert profile["statuses"]["atlas-prompt-injection"] == "flagged"
    assert profile["statuses"]["atlas-ai-agent-compliance"] == "excluded"
    for rid, status in profile["statuses"].items():
        if status != "undetermined":
            assert profile["triggering_rules"][rid]

    via_endpoint = client.get(f"/assessments/{aid}/profile")
    assert via_endpoint.status_code == 200
    assert via_endpoint.json() == profile


def test_assessment_if_match_protocol(client):
    aid = _create(client)["id"]
    payload = {"answers": {"uses_personal_data": "no"}}

    missing = client.post(f"/assessments/{aid}/answers", json=payload)
    assert missing.status_code == 428
    assert missing.json()["code"] == "missing_if_match"

    bad = client.post(f"/assessments/{aid}/answers", json=payload,
                      headers={"If-Match": "abc"})
    assert bad.status_code == 400 and bad.json()["code"] == "bad_if_match"

    ok = client.post(f"/assessments/{aid}/answers", json=payload,
                     headers={"If-Match": '"1"'})  # quoted etag form accepted
    assert ok.status_code == 200

    stale = client.post(f"/assessments/{aid}/answers", json=payload,
                        headers={"If-Match": "1"})
    assert stale.status_code == 409
    assert stale.json()["code"] == "revision_conflict"


def test_assessment_invalid_answers_rejected(client):
    aid = _create(client)["id"]
    resp = client.post(f"/assessments/{aid}/answers",
                       json={"answers": {"uses_personal_data": "maybe"}},
                       headers={"If-Match": "1"})
    assert resp.status_code == 422
    body = resp.json()
    assert body["code"] == "invalid_answers"
    assert body["details"] and body["details"][0]["question"] == "uses_personal_data"
    # invisible question answers are rejected, not silently stored
    resp = client.post(f"/assessments/{aid}/answers",
                       json={"answers": {"uses_personal_data": "no",
                                         "personal_data_kinds": ["pii"]}},
                       headers={"If-Match": "1"})
    assert resp.status_code == 422
    # failed submissions do not bump the revision
    assert client.get(f"/assessments/{aid}").json()["revision"] == 1


def test_assessment_not_found(client):
    assert client.get("/assessments/deadbeef").status_code == 404
    assert client.get("/assessments/deadbeef/profile").status_code == 404


def test_profile_survives_restart_byte_identical(tmp_path):
    store_dir = tmp_path / "store"
    app = create_app(ServiceConfig(store_dir=store_dir))
    with TestClient(app) as client:
        aid = _create(client)["id"]
        client.post(f"/assessments/{aid}/answers", json={"answers": FULL_ANSWERS},
                    headers={"If-Match": "1"})
        resp = client.post(f"/assessments/{aid}/evaluate", headers={"If-Match": "2"})
        assert resp.status_code == 200
        before = client.get(f"/assessments/{aid}/profile").content

    restarted = create_app(ServiceConfig(store_dir=store_dir))
    with TestClient(restarted) as client:
        after = client.get(f"/assessments/{aid}/profile").content
    assert after == before


def test_concurrent_conflicting_submits_exactly_one_409(tmp_path):
    app = create_app(ServiceConfig(store_dir=tmp_path / "store"))
    with TestClient(app, raise_server_exceptions=False) as setup:
        aid = _create(setup)["id"]

    statuses = []
    barrier = threading.Barrier(2)

    def submit(value):
        with TestClient(app, raise_server_exceptions=False) as c:
            barrier.wait()
            resp = c.post(f"/assessments/{aid}/answers",
                          json={"answers": {"uses_personal_data": value}},
                          headers={"If-Match": "1"})
            statuses.append(resp.status_code)

    threads = [threading.Thread(target=submit, args=(v,)) for v in ("yes", "no")]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(statuses) == [200, 409]


def test_store_mutate_is_atomic_under_contention(tmp_path):
    store = AssessmentStore(tmp_path)
    record = store.create("text", {}, "default-intake", "1.0")
    outcomes = []
    barrier = threading.Barrier(4)

    def worker(i):
        barrier.wait()
        try:
            store.mutate(record.id, 1, lambda rec: rec.answers.update({"who": str(i)}))
            outcomes.append("ok")
        except RevisionConflict:
            outcomes.append("conflict")

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert outcomes.count("ok") == 1 and outcomes.count("conflict") == 3
    assert store.get(record.id).revision == 2


def test_service_config_env_overrides(monkeypatch, tmp_path):
    config_file = tmp_path / "service.toml"
    config_file.write_text('port = 9001\nstore_dir = "/tmp/from-toml"\n')
    monkeypatch.setenv("RAN_PORT", "9002")
    monkeypatch.delenv("RAN_STORE_DIR", raising=False)
    monkeypatch.delenv("RAN_DATA_DIR", raising=False)
    config = ServiceConfig.load(config_file)
    assert config.port == 9002  # env beats TOML
    assert str(config.store_dir) == "/tmp/from-toml"
