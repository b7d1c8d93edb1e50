"""Use-case to risk prioritization.

The deterministic baseline is TF-IDF cosine similarity over each risk's
name + description + concern text. An external judge service can be
configured via a fixed HTTP contract; any judge failure degrades to the
lexical baseline with a warning rather than surfacing an error.
"""

from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass, field
from collections import Counter

import httpx

from .graph import KnowledgeGraph, list_risks
from .model import Descriptor, Risk, RiskCategory

_TOKEN_SPLIT = re.compile(r"[^a-z0-9]+")

JUDGE_CHUNK_SIZE = 25
DEFAULT_JUDGE_TIMEOUT = 30.0
DEFAULT_JUDGE_INSTRUCTIONS = (
    "Score each candidate risk for relevance to the described use case. "
    "Return a score between 0 and 1 per candidate id, with a one-sentence rationale."
)


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumerics, drop tokens shorter than 2."""
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if len(t) >= 2]


@dataclass(frozen=True)
class CorpusStats:
    """Document frequencies over all risk documents in a graph."""
    n_docs: int
    df: dict

    def idf(self, token: str) -> float:
        return math.log((self.n_docs + 1) / (self.df.get(token, 0) + 1)) + 1.0


def build_corpus_stats(risks: list[Risk]) -> CorpusStats:
    df: Counter = Counter()
    for risk in risks:
        df.update(set(tokenize(risk.document_text())))
    return CorpusStats(n_docs=len(risks), df=dict(df))


def _vector(tokens: list[str], stats: CorpusStats) -> dict[str, float]:
    counts = Counter(tokens)
    return {token: count * stats.idf(token) for token, count in counts.items()}


def _cosine(a: dict[str, float], b: dict[str, float]) -> float:
    if not a or not b:
        return 0.0
    dot = sum(weight * b[token] for token, weight in a.items() if token in b)
    norm_a = math.sqrt(sum(w * w for w in a.values()))
    norm_b = math.sqrt(sum(w * w for w in b.values()))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return dot / (norm_a * norm_b)


def lexical_score(use_case: str, risk: Risk, corpus_stats: CorpusStats) -> float:
    """TF-IDF cosine similarity in [0,1] between use case and risk document."""
    return _cosine(_vector(tokenize(use_case), corpus_stats),
                   _vector(tokenize(risk.document_text()), corpus_stats))


@dataclass(frozen=True)
class RankedRisk:
    risk_id: str
    score: float
    method: str  # lexical | judge | judge-fallback-lexical
    rationale: str = ""


@dataclass
class RankResult:
    ranked: list[RankedRisk]
    warnings: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class JudgeEndpoint:
    url: str
    token: str | None = None
    timeout: float = DEFAULT_JUDGE_TIMEOUT
    instructions: str = DEFAULT_JUDGE_INSTRUCTIONS

    @classmethod
    def from_env(cls) -> "JudgeEndpoint | None":
        url = os.environ.get("RAN_JUDGE_URL")
        if not url:
            return None
        return cls(url=url, token=os.environ.get("RAN_JUDGE_TOKEN"))


class JudgeError(Exception):
    pass


def _call_judge(endpoint: JudgeEndpoint, use_case: str, candidates: list[Risk]) -> dict:
    request = {
        "use_case": use_case,
        "candidates": [
            {"id": r.id, "name": r.name, "description": r.description, "concern": r.concern}
            for r in candidates
        ],
        "instructions": endpoint.instructions,
    }
    headers = {"Content-Type": "application/json"}
    if endpoint.token:
        headers["Authorization"] = f"Bearer {endpoint.token}"
    try:
        response = httpx.post(endpoint.url, content=json.dumps(request),
                              headers=headers, timeout=endpoint.timeout)
        response.raise_for_status()
        return response.json()
    except (httpx.HTTPError, json.JSONDecodeError, ValueError) as exc:
        raise JudgeError(str(exc)) from exc


def _judge_scores(endpoint: JudgeEndpoint, use_case: str, candidates: list[Risk],
                  warnings: list[str]) -> dict[str, tuple[float, str]]:
    known = {r.id for r in candidates}
    scores: dict[str, tuple[float, str]] = {}
    for start in range(0, len(candidates), JUDGE_CHUNK_SIZE):
        chunk = candidates[start:start + JUDGE_CHUNK_SIZE]
        response = _call_judge(endpoint, use_case, chunk)
        for entry in response.get("scores", []):
            rid = entry.get("id")
            if rid not in known:
                warnings.append(f"judge returned unknown id '{rid}'; dropped")
                continue
            score = float(entry.get("score", 0.0))
            if score < 0.0 or score > 1.0:
                warnings.append(f"judge score for '{rid}' out of range; clamped")
                score = min(1.0, max(0.0, score))
            scores[rid] = (score, str(entry.get("rationale", "")))
    return scores


def prioritize(
    g: KnowledgeGraph,
    use_case: str,
    top_k: int,
    taxonomy: str | None = None,
    category: RiskCategory | None = None,
    dimension: str | None = None,
    descriptor: Descriptor | None = None,
    text: str | None = None,
    judge: JudgeEndpoint | None = None,
) -> RankResult:
    """Rank the filtered candidate set against a use-case description and
    return the top_k by (score desc, risk_id asc)."""
    candidates = list_risks(g, taxonomy=taxonomy, category=category,
                            dimension=dimension, descriptor=descriptor, text=text)
    stats = build_corpus_stats(list(g.kb.risks))
    warnings: list[str] = []

    judge_scores: dict[str, tuple[float, str]] = {}
    judge_failed = False
    if judge is not None:
        try:
            judge_scores = _judge_scores(judge, use_case, candidates, warnings)
        except JudgeError as exc:
            judge_failed = True
            warnings.append(f"judge unavailable, falling back to lexical scoring: {exc}")

    ranked: list[RankedRisk] = []
    for risk in candidates:
        if risk.id in judge_scores:
            score, rationale = judge_scores[risk.id]
            ranked.append(RankedRisk(risk_id=risk.id, score=score, method="judge",
                                     rationale=rationale))
        else:
            score = lexical_score(use_case, risk, stats)
            if judge is None:
                method = "lexical"
            else:
                method = "judge-fallback-lexical"
                if not judge_failed:
                    warnings.append(f"judge omitted '{risk.id}'; scored lexically")
            ranked.append(RankedRisk(
                risk_id=risk.id, score=score, method=method,
                rationale=f"lexical similarity {score:.4f} to use-case text"))

    ranked.sort(key=lambda rr: (-rr.score, rr.risk_id))
    return RankResult(ranked=ranked[:top_k], warnings=warnings)


def tag_resource(g: KnowledgeGraph, text: str, top_k: int,
                 judge: JudgeEndpoint | None = None) -> RankResult:
    """Tag arbitrary text (abstract, dataset card) with its closest risks."""
    return prioritize(g, text, top_k, judge=judge)
