"""Knowledge-graph tooling for AI risk taxonomies: catalog ingest,
cross-taxonomy mapping closure, questionnaire-driven assessment, and
use-case risk prioritization."""

from importlib import resources
from pathlib import Path

__version__ = "0.1.0"


def bundled_data_dir(name: str = "atlas") -> Path:
    """Path to a bundled data directory shipped with the package."""
    return Path(resources.files("risknexus").joinpath("data", name))


def default_questionnaire_path() -> Path:
    return Path(resources.files("risknexus").joinpath(
        "data", "questionnaires", "default.questionnaire.yaml"))


def default_tier_table_path() -> Path:
    return Path(resources.files("risknexus").joinpath(
        "data", "tiers", "eu-ai-act.tiers.yaml"))
