"""Conditional-branching compliance questionnaires, answer-driven risk
applicability, and rule-table tier classification.

Conditions are conjunctions of atoms only; disjunction is expressed as
multiple rules. Flag rules win over exclude rules when both hit the same
risk, and the conflict is recorded rather than silently resolved.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone

import yaml

from .graph import KnowledgeGraph, list_risks
from .model import Descriptor, Diagnostic, RiskCategory, sort_diagnostics

TIER_SEVERITY = ["unclassified", "minimal_risk", "limited_risk", "high_risk", "prohibited"]

QUESTION_KINDS = ("boolean", "single-choice", "multi-choice", "free-text")
OPERATORS = ("equals", "not-equals", "includes", "answered")


@dataclass(frozen=True)
class ConditionAtom:
    question_id: str
    operator: str
    value: str | None = None


@dataclass(frozen=True)
class Condition:
    atoms: tuple[ConditionAtom, ...]


@dataclass(frozen=True)
class Question:
    id: str
    text: str
    kind: str
    options: tuple[tuple[str, str], ...] = ()
    visible_if: Condition | None = None
    tags: tuple[str, ...] = ()


@dataclass(frozen=True)
class Selector:
    category: RiskCategory | None = None
    dimension: str | None = None
    taxonomy: str | None = None


@dataclass(frozen=True)
class ApplicabilityRule:
    id: str
    when: Condition
    effect: str  # "flag" | "exclude"
    risk_ids: tuple[str, ...] = ()
    selector: Selector | None = None
    rationale: str = ""


@dataclass(frozen=True)
class Questionnaire:
    id: str
    name: str
    version: str
    questions: tuple[Question, ...]
    rules: tuple[ApplicabilityRule, ...] = ()


# answers: question_id -> str (boolean/single-choice/free-text) or list[str] (multi-choice)
AnswerSet = dict


@dataclass
class RiskProfile:
    statuses: dict[str, str]               # risk id -> flagged | excluded | undetermined
    triggering_rules: dict[str, list[str]]  # risk id -> rule ids that fired on it
    tier: str
    tier_rule_ids: list[str]
    questionnaire_id: str
    questionnaire_version: str
    generated_at: str
    partial: bool
    conflicts: dict[str, list[str]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "statuses": dict(sorted(self.statuses.items())),
            "triggering_rules": {k: sorted(v) for k, v in sorted(self.triggering_rules.items())},
            "tier": self.tier,
            "tier_rule_ids": sorted(self.tier_rule_ids),
            "questionnaire_id": self.questionnaire_id,
            "questionnaire_version": self.questionnaire_version,
            "generated_at": self.generated_at,
            "partial": self.partial,
            "conflicts": {k: sorted(v) for k, v in sorted(self.conflicts.items())},
        }


# ---------------------------------------------------------------------------
# loading


def _parse_condition(raw, diags: list[Diagnostic], where: str, line: int) -> Condition | None:
    if not isinstance(raw, list):
        diags.append(Diagnostic("error", where, line, "condition must be a list of atoms"))
        return None
    atoms = []
    for atom in raw:
        if not isinstance(atom, dict) or "question" not in atom or "op" not in atom:
            diags.append(Diagnostic("error", where, line, "condition atom requires 'question' and 'op'"))
            return None
        op = atom["op"]
        if op not in OPERATORS:
            diags.append(Diagnostic("error", where, line, f"unknown operator '{op}'"))
            return None
        value = atom.get("value")
        if op == "answered" and value is not None:
            diags.append(Diagnostic("error", where, line, "'answered' takes no value"))
            return None
        if op != "answered" and value is None:
            diags.append(Diagnostic("error", where, line, f"operator '{op}' requires a value"))
            return None
        atoms.append(ConditionAtom(str(atom["question"]), op, None if value is None else str(value)))
    return Condition(tuple(atoms))


def load_questionnaire(text: str, source_name: str = "<questionnaire>") -> Questionnaire | list[Diagnostic]:
    """Parse and invariant-check a questionnaire document (YAML)."""
    diags: list[Diagnostic] = []
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        line = (exc.problem_mark.line + 1) if exc.problem_mark else 1
        return [Diagnostic("error", source_name, line, f"malformed document: {exc.problem}")]
    if not isinstance(doc, dict):
        return [Diagnostic("error", source_name, 1, "expected a mapping at top level")]
    if doc.get("format_version") not in (1, "1"):
        diags.append(Diagnostic("error", source_name, 1, "unsupported or missing format_version (expected 1)"))

    questions: list[Question] = []
    seen_qids: set[str] = set()
    for raw in doc.get("questions", []) or []:
        qid = str(raw.get("id", ""))
        kind = raw.get("kind", "")
        if not qid:
            diags.append(Diagnostic("error", source_name, 1, "question missing id"))
            continue
        if qid in seen_qids:
            diags.append(Diagnostic("error", source_name, 1, f"duplicate question id '{qid}'"))
            continue
        if kind not in QUESTION_KINDS:
            diags.append(Diagnostic("error", source_name, 1, f"question '{qid}': unknown kind '{kind}'"))
            continue
        options: list[tuple[str, str]] = []
        if kind in ("single-choice", "multi-choice"):
            raw_options = raw.get("options", []) or []
            for opt in raw_options:
                options.append((str(opt.get("value", "")), str(opt.get("label", ""))))
            if len(options) < 2:
                diags.append(Diagnostic("error", source_name, 1,
                                        f"question '{qid}': choice kinds need at least 2 options"))
                continue
            values = [v for v, _ in options]
            if len(set(values)) != len(values):
                diags.append(Diagnostic("error", source_name, 1,
                                        f"question '{qid}': duplicate option values"))
                continue
        visible_if = None
        if raw.get("visible_if") is not None:
            visible_if = _parse_condition(raw["visible_if"], diags, source_name, 1)
            if visible_if is None:
                continue
            for atom in visible_if.atoms:
                if atom.question_id not in seen_qids:
                    diags.append(Diagnostic("error", source_name, 1,
                                            f"question '{qid}': forward reference to '{atom.question_id}'"))
        seen_qids.add(qid)
        questions.append(Question(
            id=qid, text=str(raw.get("text", "")), kind=kind,
            options=tuple(options), visible_if=visible_if,
            tags=tuple(str(t) for t in raw.get("tags", []) or [])))

    rules: list[ApplicabilityRule] = []
    seen_rids: set[str] = set()
    for raw in doc.get("rules", []) or []:
        rid = str(raw.get("id", ""))
        if not rid or rid in seen_rids:
            diags.append(Diagnostic("error", source_name, 1, f"missing or duplicate rule id '{rid}'"))
            continue
        seen_rids.add(rid)
        effect = raw.get("effect", "")
        if effect not in ("flag", "exclude"):
            diags.append(Diagnostic("error", source_name, 1, f"rule '{rid}': unknown effect '{effect}'"))
            continue
        when = _parse_condition(raw.get("when", None), diags, source_name, 1)
        if when is None:
            continue
        has_risks = bool(raw.get("risks"))
        has_selector = bool(raw.get("selector"))
        if has_risks == has_selector:
            diags.append(Diagnostic("error", source_name, 1,
                                    f"rule '{rid}': exactly one of 'risks' or 'selector' required"))
            continue
        selector = None
        if has_selector:
            sel = raw["selector"]
            category = None
            if sel.get("category") is not None:
                try:
                    category = RiskCategory.parse(str(sel["category"]))
                except ValueError:
                    diags.append(Diagnostic("error", source_name, 1,
                                            f"rule '{rid}': unknown category '{sel['category']}'"))
                    continue
            selector = Selector(category=category,
                                dimension=sel.get("dimension"),
                                taxonomy=sel.get("taxonomy"))
        rationale = str(raw.get("rationale", ""))
        if not rationale:
            diags.append(Diagnostic("error", source_name, 1, f"rule '{rid}': rationale required"))
            continue
        rules.append(ApplicabilityRule(
            id=rid, when=when, effect=effect,
            risk_ids=tuple(str(r) for r in raw.get("risks", []) or []),
            selector=selector, rationale=rationale))

    # rule conditions may only reference declared questions
    for rule in rules:
        for atom in rule.when.atoms:
            if atom.question_id not in seen_qids:
                diags.append(Diagnostic("error", source_name, 1,
                                        f"rule '{rule.id}': unknown question '{atom.question_id}'"))

    # 'includes' only against multi-choice
    kinds = {q.id: q.kind for q in questions}
    conditions = [(f"question '{q.id}'", q.visible_if) for q in questions if q.visible_if] + \
                 [(f"rule '{r.id}'", r.when) for r in rules]
    for where, condition in conditions:
        for atom in condition.atoms:
            if atom.operator == "includes" and kinds.get(atom.question_id) != "multi-choice":
                diags.append(Diagnostic("error", source_name, 1,
                                        f"{where}: 'includes' requires a multi-choice question"))

    if diags:
        return sort_diagnostics(diags)
    return Questionnaire(
        id=str(doc.get("id", "")), name=str(doc.get("name", "")),
        version=str(doc.get("version", "")),
        questions=tuple(questions), rules=tuple(rules))


# ---------------------------------------------------------------------------
# evaluation


def _atom_holds(atom: ConditionAtom, answers: AnswerSet) -> bool:
    answered = atom.question_id in answers
    if atom.operator == "answered":
        return answered
    if not answered:
        return False
    value = answers[atom.question_id]
    if atom.operator == "equals":
        return value == atom.value
    if atom.operator == "not-equals":
        return value != atom.value
    if atom.operator == "includes":
        return isinstance(value, list) and atom.value in value
    raise ValueError(f"unknown operator {atom.operator!r}")


def condition_holds(condition: Condition | None, answers: AnswerSet) -> bool:
    if condition is None:
        return True
    return all(_atom_holds(atom, answers) for atom in condition.atoms)


def visible_questions(q: Questionnaire, answers: AnswerSet) -> list[Question]:
    return [question for question in q.questions if condition_holds(question.visible_if, answers)]


def next_questions(q: Questionnaire, answers: AnswerSet) -> list[Question]:
    """Visible-but-unanswered questions in declaration order. Empty means
    the assessment is complete."""
    return [question for question in visible_questions(q, answers) if question.id not in answers]


def check_answers(q: Questionnaire, answers: AnswerSet) -> list[Diagnostic]:
    """Type-check answer values and reject answers to invisible questions."""
    diags: list[Diagnostic] = []
    questions = {question.id: question for question in q.questions}
    visible = {question.id for question in visible_questions(q, answers)}
    for qid, value in answers.items():
        question = questions.get(qid)
        if question is None:
            diags.append(Diagnostic("error", qid, 0, f"unknown question '{qid}'"))
            continue
        if qid not in visible:
            diags.append(Diagnostic("error", qid, 0, f"question '{qid}' is not visible under these answers"))
            continue
        if question.kind == "boolean":
            if value not in ("yes", "no"):
                diags.append(Diagnostic("error", qid, 0, f"question '{qid}': expected 'yes' or 'no'"))
        elif question.kind == "single-choice":
            allowed = {v for v, _ in question.options}
            if not isinstance(value, str) or value not in allowed:
                diags.append(Diagnostic("error", qid, 0,
                                        f"question '{qid}': expected one of {sorted(allowed)}"))
        elif question.kind == "multi-choice":
            allowed = {v for v, _ in question.options}
            if not isinstance(value, list) or not all(v in allowed for v in value):
                diags.append(Diagnostic("error", qid, 0,
                                        f"question '{qid}': expected a list drawn from {sorted(allowed)}"))
        elif question.kind == "free-text":
            if not isinstance(value, str):
                diags.append(Diagnostic("error", qid, 0, f"question '{qid}': expected text"))
    return sort_diagnostics(diags)


def _expand_targets(rule: ApplicabilityRule, g: KnowledgeGraph) -> list[str]:
    if rule.risk_ids:
        return list(rule.risk_ids)
    sel = rule.selector
    return [r.id for r in list_risks(g, taxonomy=sel.taxonomy, category=sel.category,
                                     dimension=sel.dimension)]


def evaluate_applicability(
    q: Questionnaire,
    answers: AnswerSet,
    g: KnowledgeGraph,
    tier: str = "unclassified",
    tier_rule_ids: list[str] | None = None,
    now: datetime | None = None,
) -> RiskProfile:
    """Evaluate every rule whose condition holds and assign per-risk statuses.

    Flag wins over exclude on the same risk; the conflict is recorded.
    Untargeted risks stay undetermined. Partial answer sets are allowed and
    marked on the profile.
    """
    flags: dict[str, list[str]] = {}
    excludes: dict[str, list[str]] = {}
    for rule in q.rules:
        if not condition_holds(rule.when, answers):
            continue
        targets = _expand_targets(rule, g)
        for rid in targets:
            if rid not in g.risks_by_id:
                raise ValueError(f"rule '{rule.id}' targets unknown risk '{rid}'")
            bucket = flags if rule.effect == "flag" else excludes
            bucket.setdefault(rid, []).append(rule.id)

    statuses: dict[str, str] = {r.id: "undetermined" for r in g.kb.risks}
    triggering: dict[str, list[str]] = {}
    conflicts: dict[str, list[str]] = {}
    for rid, rule_ids in excludes.items():
        statuses[rid] = "excluded"
        triggering[rid] = list(rule_ids)
    for rid, rule_ids in flags.items():
        if statuses.get(rid) == "excluded":
            conflicts[rid] = triggering[rid] + rule_ids
        statuses[rid] = "flagged"
        triggering[rid] = triggering.get(rid, []) + rule_ids if rid in conflicts else list(rule_ids)

    timestamp = (now or datetime.now(timezone.utc)).strftime("%Y-%m-%dT%H:%M:%SZ")
    return RiskProfile(
        statuses=statuses,
        triggering_rules=triggering,
        tier=tier,
        tier_rule_ids=list(tier_rule_ids or []),
        questionnaire_id=q.id,
        questionnaire_version=q.version,
        generated_at=timestamp,
        partial=bool(next_questions(q, answers)),
        conflicts=conflicts)


# ---------------------------------------------------------------------------
# tier classification


@dataclass(frozen=True)
class TierRule:
    id: str
    match: tuple[tuple[str, str], ...]  # required attribute equalities
    tier: str


@dataclass(frozen=True)
class TierRuleTable:
    rows: tuple[TierRule, ...]


def load_tier_table(text: str, source_name: str = "<tiers>") -> TierRuleTable | list[Diagnostic]:
    diags: list[Diagnostic] = []
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        line = (exc.problem_mark.line + 1) if exc.problem_mark else 1
        return [Diagnostic("error", source_name, line, f"malformed document: {exc.problem}")]
    if not isinstance(doc, dict) or doc.get("format_version") not in (1, "1"):
        return [Diagnostic("error", source_name, 1, "unsupported or missing format_version (expected 1)")]
    rows: list[TierRule] = []
    seen: set[str] = set()
    for raw in doc.get("rows", []) or []:
        rid = str(raw.get("id", ""))
        tier = raw.get("tier", "")
        match = raw.get("match", {})
        if not rid or rid in seen:
            diags.append(Diagnostic("error", source_name, 1, f"missing or duplicate row id '{rid}'"))
            continue
        seen.add(rid)
        if tier not in TIER_SEVERITY or tier == "unclassified":
            diags.append(Diagnostic("error", source_name, 1, f"row '{rid}': unknown tier '{tier}'"))
            continue
        if not isinstance(match, dict) or not match:
            diags.append(Diagnostic("error", source_name, 1, f"row '{rid}': non-empty match required"))
            continue
        rows.append(TierRule(id=rid, match=tuple(sorted((str(k), str(v)) for k, v in match.items())),
                             tier=tier))
    if diags:
        return sort_diagnostics(diags)
    return TierRuleTable(rows=tuple(rows))


def classify_eu_tier(attrs: dict[str, str], table: TierRuleTable) -> tuple[str, list[str]]:
    """Most severe tier whose row's attribute equalities all hold; rows are
    workflow labels, not legal advice. No matching row -> unclassified."""
    matched = [row for row in table.rows
               if all(attrs.get(key) == value for key, value in row.match)]
    if not matched:
        return "unclassified", []
    best = max(matched, key=lambda row: TIER_SEVERITY.index(row.tier))
    winning = [row.id for row in matched if row.tier == best.tier]
    return best.tier, sorted(winning)
