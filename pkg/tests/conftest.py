import shutil

import pytest

from risknexus import bundled_data_dir, default_questionnaire_path, default_tier_table_path
from risknexus.assess import Questionnaire, load_questionnaire, load_tier_table
from risknexus.graph import build_graph
from risknexus.ingest import load_bundle_dir
from risknexus.model import KnowledgeBase


@pytest.fixture(scope="session")
def atlas_kb() -> KnowledgeBase:
    kb = load_bundle_dir(bundled_data_dir("atlas"))
    assert isinstance(kb, KnowledgeBase), kb
    return kb


@pytest.fixture(scope="session")
def atlas_graph(atlas_kb):
    return build_graph(atlas_kb)


@pytest.fixture(scope="session")
def combined_bundle_dir(tmp_path_factory):
    """Atlas catalog plus the sample external taxonomy and its mappings."""
    target = tmp_path_factory.mktemp("combined")
    for source in (bundled_data_dir("atlas"), bundled_data_dir("samples")):
        for file in source.iterdir():
            shutil.copy(file, target / file.name)
    return target


@pytest.fixture(scope="session")
def combined_graph(combined_bundle_dir):
    kb = load_bundle_dir(combined_bundle_dir)
    assert isinstance(kb, KnowledgeBase), kb
    return build_graph(kb)


@pytest.fixture(scope="session")
def default_questionnaire() -> Questionnaire:
    q = load_questionnaire(default_questionnaire_path().read_text())
    assert isinstance(q, Questionnaire), q
    return q


@pytest.fixture(scope="session")
def default_tiers():
    table = load_tier_table(default_tier_table_path().read_text())
    assert not isinstance(table, list), table
    return table


BRANCHING_QUESTIONNAIRE = """\
format_version: 1
id: branching-fixture
name: Branching fixture
version: "1.0"
questions:
  - id: q1
    text: Use personal data?
    kind: boolean
  - id: q2
    text: Which kinds?
    kind: multi-choice
    visible_if:
      - {question: q1, op: equals, value: "yes"}
    options:
      - {value: pii, label: PII}
      - {value: biometric, label: Biometric}
  - id: q3
    text: Anything else?
    kind: free-text
rules:
  - id: rule-flag-privacy
    when:
      - {question: q1, op: equals, value: "yes"}
    effect: flag
    selector: {dimension: Privacy, taxonomy: ai-risk-atlas}
    rationale: Personal data in scope.
  - id: rule-exclude-privacy
    when:
      - {question: q1, op: equals, value: "no"}
    effect: exclude
    selector: {dimension: Privacy, taxonomy: ai-risk-atlas}
    rationale: No personal data in scope.
  - id: rule-biometric
    when:
      - {question: q2, op: includes, value: biometric}
    effect: flag
    risks: [atlas-reidentification]
    rationale: Biometric data raises reidentification risk.
  - id: rule-conflict-demo
    when:
      - {question: q1, op: equals, value: "no"}
    effect: flag
    risks: [atlas-reidentification]
    rationale: Kept visible for review even without personal data.
"""


@pytest.fixture(scope="session")
def branching_questionnaire() -> Questionnaire:
    q = load_questionnaire(BRANCHING_QUESTIONNAIRE, "branching.yaml")
    assert isinstance(q, Questionnaire), q
    return q
