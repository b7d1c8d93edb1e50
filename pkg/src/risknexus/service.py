"""HTTP API over the knowledge graph and the assessment workflow.

The graph is built once at startup and shared read-only across handlers;
assessments are persisted file-per-record with optimistic concurrency via
the `If-Match: <revision>` header on mutations.
"""

from __future__ import annotations

import json
import os

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Header, Request, Response
from fastapi.responses import JSONResponse, PlainTextResponse

from . import bundled_data_dir, default_questionnaire_path, default_tier_table_path
from .assess import (
    Questionnaire,
    check_answers,
    classify_eu_tier,
    evaluate_applicability,
    load_questionnaire,
    load_tier_table,
    next_questions,
)
from .graph import (
    AmbiguousTag,
    GraphError,
    KnowledgeGraph,
    RiskNotFound,
    build_graph,
    evidence_for,
    export_graph,
    get_risk,
    list_risks,
    mitigations_for,
    related_risks,
)
from .ingest import load_bundle_dir
from .model import Descriptor, Risk, RiskCategory
from .rank import JudgeEndpoint, prioritize, tag_resource
from .store import AssessmentNotFound, AssessmentStore, RevisionConflict


@dataclass
class ServiceConfig:
    data_dir: Path = field(default_factory=lambda: bundled_data_dir("atlas"))
    store_dir: Path = Path("./assessments")
    port: int = 8000
    judge_url: str | None = None
    judge_token: str | None = None

    @classmethod
    def load(cls, config_path: str | Path | None = None) -> "ServiceConfig":
        """Config file (TOML) overridden by RAN_* environment variables."""
        config = cls()
        if config_path is not None:
            doc = tomllib.loads(Path(config_path).read_text(encoding="utf-8"))
            if "data_dir" in doc:
                config.data_dir = Path(doc["data_dir"])
            if "store_dir" in doc:
                config.store_dir = Path(doc["store_dir"])
            if "port" in doc:
                config.port = int(doc["port"])
            config.judge_url = doc.get("judge_url")
            config.judge_token = doc.get("judge_token")
        if os.environ.get("RAN_DATA_DIR"):
            config.data_dir = Path(os.environ["RAN_DATA_DIR"])
        if os.environ.get("RAN_STORE_DIR"):
            config.store_dir = Path(os.environ["RAN_STORE_DIR"])
        if os.environ.get("RAN_PORT"):
            config.port = int(os.environ["RAN_PORT"])
        if os.environ.get("RAN_JUDGE_URL"):
            config.judge_url = os.environ["RAN_JUDGE_URL"]
        if os.environ.get("RAN_JUDGE_TOKEN"):
            config.judge_token = os.environ["RAN_JUDGE_TOKEN"]
        return config

    def judge(self) -> JudgeEndpoint | None:
        if not self.judge_url:
            return None
        return JudgeEndpoint(url=self.judge_url, token=self.judge_token)


def _error(status: int, code: str, message: str, details: list | None = None) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"code": code, "message": message, "details": details or []})


def _stable_json(payload, status: int = 200) -> Response:
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return Response(content=body, status_code=status, media_type="application/json")


def _risk_dict(r: Risk) -> dict:
    return {
        "id": r.id, "tag": r.tag, "name": r.name, "description": r.description,
        "concern": r.concern, "category": r.category.value,
        "descriptor": r.descriptor.value if r.descriptor else None,
        "dimension": r.dimension, "taxonomy": r.taxonomy_id, "uri": r.uri,
    }


def _question_dict(q) -> dict:
    return {
        "id": q.id, "text": q.text, "kind": q.kind,
        "options": [{"value": v, "label": l} for v, l in q.options],
        "tags": list(q.tags),
    }


def create_app(config: ServiceConfig) -> FastAPI:
    """Build the application; fails fast on an invalid bundle."""
    loaded = load_bundle_dir(config.data_dir)
    if isinstance(loaded, list):
        raise GraphError("invalid bundle: " + "; ".join(str(d) for d in loaded[:5]))
    graph: KnowledgeGraph = build_graph(loaded)
    store = AssessmentStore(config.store_dir)

    questionnaires: dict[str, Questionnaire] = {}
    default_q = load_questionnaire(default_questionnaire_path().read_text(encoding="utf-8"))
    assert isinstance(default_q, Questionnaire)
    questionnaires[default_q.id] = default_q
    tier_table = load_tier_table(default_tier_table_path().read_text(encoding="utf-8"))
    judge = config.judge()

    app = FastAPI(title="risknexus", version="0.1.0")

    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"], expose_headers=["*"])

    @app.exception_handler(Exception)
    async def on_error(request: Request, exc: Exception):
        return _error(500, "internal_error", str(exc))

    @app.get("/health")
    def health():
        return _stable_json({"status": "ok", "risks": len(graph.kb.risks)})

    @app.get("/risks")
    def risks(taxonomy: str | None = None, category: str | None = None,
              dimension: str | None = None, descriptor: str | None = None,
              text: str | None = None):
        try:
            cat = RiskCategory.parse(category) if category else None
            desc = Descriptor.parse(descriptor) if descriptor else None
        except ValueError as exc:
            return _error(422, "bad_filter", str(exc))
        found = list_risks(graph, taxonomy=taxonomy, category=cat,
                           dimension=dimension, descriptor=desc, text=text)
        return _stable_json({"risks": [_risk_dict(r) for r in found]})

    @app.get("/risks/{key}")
    def risk_show(key: str):
        try:
            return _stable_json(_risk_dict(get_risk(graph, key)))
        except AmbiguousTag as exc:
            return _error(409, "ambiguous_tag", str(exc), exc.candidates)
        except RiskNotFound as exc:
            return _error(404, "risk_not_found", str(exc))

    @app.get("/risks/{key}/related")
    def risk_related(key: str, hops: int = 2, min_strength: int = 1):
        try:
            related = related_risks(graph, key, max_hops=hops, min_strength=min_strength)
        except RiskNotFound as exc:
            return _error(404, "risk_not_found", str(exc))
        return _stable_json({"related": [
            {
                "risk": _risk_dict(rr.risk),
                "predicate": rr.predicate.value,
                "strength": rr.strength,
                "confidence": rr.confidence,
                "path": [
                    {"subject": m.subject_id, "predicate": m.predicate.value,
                     "object": m.object_id, "source": m.source, "line": m.line}
                    for m in rr.path
                ],
            }
            for rr in related
        ]})

    @app.get("/risks/{key}/mitigations")
    def risk_mitigations(key: str, include_related: bool = False):
        try:
            found = mitigations_for(graph, key, include_related=include_related)
        except RiskNotFound as exc:
            return _error(404, "risk_not_found", str(exc))
        return _stable_json({
            "detectors": [
                {"id": li.item.id, "name": li.item.name,
                 "detector_dimension": li.item.detector_dimension, "via": li.via}
                for li in found["detectors"]],
            "actions": [
                {"id": li.item.id, "name": li.item.name,
                 "description": li.item.description, "source": li.item.source, "via": li.via}
                for li in found["actions"]],
        })

    @app.get("/risks/{key}/evidence")
    def risk_evidence(key: str, include_related: bool = False):
        try:
            found = evidence_for(graph, key, include_related=include_related)
        except RiskNotFound as exc:
            return _error(404, "risk_not_found", str(exc))
        return _stable_json({"benchmarks": [
            {"id": li.item.id, "name": li.item.name, "description": li.item.description,
             "url": li.item.url, "via": li.via}
            for li in found]})

    def _rank_payload(result) -> dict:
        return {
            "ranked": [
                {"risk_id": rr.risk_id, "score": rr.score, "method": rr.method,
                 "rationale": rr.rationale}
                for rr in result.ranked],
            "warnings": result.warnings,
        }

    @app.post("/prioritize")
    async def do_prioritize(request: Request):
        body = await request.json()
        use_case = body.get("use_case", "")
        top_k = int(body.get("top_k", 10))
        scope = body.get("scope", {}) or {}
        try:
            cat = RiskCategory.parse(scope["category"]) if scope.get("category") else None
            desc = Descriptor.parse(scope["descriptor"]) if scope.get("descriptor") else None
        except ValueError as exc:
            return _error(422, "bad_filter", str(exc))
        result = prioritize(graph, use_case, top_k,
                            taxonomy=scope.get("taxonomy"), category=cat,
                            dimension=scope.get("dimension"), descriptor=desc,
                            text=scope.get("text"), judge=judge)
        return _stable_json(_rank_payload(result))

    @app.post("/tag")
    async def do_tag(request: Request):
        body = await request.json()
        result = tag_resource(graph, body.get("text", ""), int(body.get("top_k", 10)),
                              judge=judge)
        return _stable_json(_rank_payload(result))

    @app.get("/questionnaires")
    def questionnaires_list():
        return _stable_json({"questionnaires": [
            {"id": q.id, "name": q.name, "version": q.version,
             "questions": len(q.questions), "rules": len(q.rules)}
            for q in questionnaires.values()]})

    @app.get("/questionnaires/{qid}")
    def questionnaire_show(qid: str):
        q = questionnaires.get(qid)
        if q is None:
            return _error(404, "questionnaire_not_found", f"no questionnaire '{qid}'")
        return _stable_json({
            "id": q.id, "name": q.name, "version": q.version,
            "questions": [_question_dict(question) for question in q.questions],
        })

    def _questionnaire_for(record) -> Questionnaire | None:
        return questionnaires.get(record.questionnaire_id)

    @app.post("/assessments")
    async def assessment_create(request: Request):
        body = await request.json()
        qid = body.get("questionnaire_id", default_q.id)
        q = questionnaires.get(qid)
        if q is None:
            return _error(404, "questionnaire_not_found", f"no questionnaire '{qid}'")
        record = store.create(
            use_case_text=str(body.get("use_case_text", "")),
            attrs={str(k): str(v) for k, v in (body.get("attrs") or {}).items()},
            questionnaire_id=q.id, questionnaire_version=q.version)
        return _stable_json(record.to_dict(), status=201)

    @app.get("/assessments/{aid}")
    def assessment_get(aid: str):
        try:
            record = store.get(aid)
        except AssessmentNotFound:
            return _error(404, "assessment_not_found", f"no assessment '{aid}'")
        q = _questionnaire_for(record)
        payload = record.to_dict()
        payload["next_questions"] = [
            _question_dict(question) for question in next_questions(q, record.answers)
        ] if q else []
        return _stable_json(payload)

    def _require_if_match(if_match: str | None):
        if if_match is None:
            return None, _error(428, "missing_if_match", "If-Match header with current revision required")
        try:
            return int(if_match.strip('"')), None
        except ValueError:
            return None, _error(400, "bad_if_match", f"unparseable If-Match '{if_match}'")

    @app.post("/assessments/{aid}/answers")
    async def assessment_answers(aid: str, request: Request,
                                 if_match: str | None = Header(default=None)):
        expected, failure = _require_if_match(if_match)
        if failure:
            return failure
        body = await request.json()
        new_answers = body.get("answers", {}) or {}
        try:
            record = store.get(aid)
        except AssessmentNotFound:
            return _error(404, "assessment_not_found", f"no assessment '{aid}'")
        q = _questionnaire_for(record)
        if q is None:
            return _error(409, "questionnaire_missing", f"questionnaire '{record.questionnaire_id}' not loaded")
        merged = dict(record.answers)
        merged.update(new_answers)
        diagnostics = check_answers(q, merged)
        if diagnostics:
            return _error(422, "invalid_answers", "answer validation failed",
                          [{"question": d.source, "message": d.message} for d in diagnostics])
        def _apply(rec):
            rec.answers = merged

        try:
            record = store.mutate(aid, expected, _apply)
        except RevisionConflict as exc:
            return _error(409, "revision_conflict", str(exc))
        except AssessmentNotFound:
            return _error(404, "assessment_not_found", f"no assessment '{aid}'")
        payload = record.to_dict()
        payload["next_questions"] = [_question_dict(question)
                                     for question in next_questions(q, record.answers)]
        return _stable_json(payload)

    @app.post("/assessments/{aid}/evaluate")
    async def assessment_evaluate(aid: str, if_match: str | None = Header(default=None)):
        expected, failure = _require_if_match(if_match)
        if failure:
            return failure
        try:
            record = store.get(aid)
        except AssessmentNotFound:
            return _error(404, "assessment_not_found", f"no assessment '{aid}'")
        q = _questionnaire_for(record)
        if q is None:
            return _error(409, "questionnaire_missing", f"questionnaire '{record.questionnaire_id}' not loaded")
        tier, tier_rule_ids = classify_eu_tier(record.attrs, tier_table)
        profile = evaluate_applicability(q, record.answers, graph,
                                         tier=tier, tier_rule_ids=tier_rule_ids)
        try:
            record = store.mutate(aid, expected,
                                  lambda rec: setattr(rec, "profile", profile.to_dict()))
        except RevisionConflict as exc:
            return _error(409, "revision_conflict", str(exc))
        return _stable_json(record.to_dict())

    @app.get("/assessments/{aid}/profile")
    def assessment_profile(aid: str):
        try:
            record = store.get(aid)
        except AssessmentNotFound:
            return _error(404, "assessment_not_found", f"no assessment '{aid}'")
        if record.profile is None:
            return _error(404, "profile_not_found", f"assessment '{aid}' has no profile yet")
        return _stable_json(record.profile)

    @app.get("/export")
    def do_export(format: str = "json-graph"):
        try:
            payload = export_graph(graph, format)
        except GraphError as exc:
            return _error(422, "unknown_format", str(exc))
        media = "application/json" if format == "json-graph" else "application/n-triples"
        return PlainTextResponse(payload, media_type=media)

    return app


def serve(config: ServiceConfig) -> None:
    """Run the HTTP service until interrupted."""
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host="127.0.0.1", port=config.port, log_level="info")
