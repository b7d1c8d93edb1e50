"""Command-line front door: catalog queries, validation, prioritization,
assessments (batch or interactive), export, and the HTTP service.

Exit codes: 0 success, 1 domain error (not found, invalid data), 2 usage
error. In `--format json` mode stdout is always a single JSON document;
human-readable errors go to stderr.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import yaml

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
    GraphError,
    build_graph,
    evidence_for,
    export_graph,
    get_risk,
    list_risks,
    mitigations_for,
    related_risks,
)
from .ingest import load_bundle_dir
from .model import Descriptor, RiskCategory, validate_knowledge_base
from .rank import JudgeEndpoint, prioritize, tag_resource


class DomainError(click.ClickException):
    exit_code = 1


def _load_graph(data_dir: str | None):
    directory = Path(data_dir) if data_dir else bundled_data_dir("atlas")
    loaded = load_bundle_dir(directory)
    if isinstance(loaded, list):
        raise DomainError("invalid bundle:\n" + "\n".join(str(d) for d in loaded))
    return build_graph(loaded)


def _emit(payload: dict, format: str, table_lines: list[str]) -> None:
    if format == "json":
        click.echo(json.dumps(payload, sort_keys=True, ensure_ascii=False))
    else:
        for line in table_lines:
            click.echo(line)


def _risk_dict(r) -> dict:
    return {
        "id": r.id, "tag": r.tag, "name": r.name, "description": r.description,
        "concern": r.concern, "category": r.category.value,
        "descriptor": r.descriptor.value if r.descriptor else None,
        "dimension": r.dimension, "taxonomy": r.taxonomy_id, "uri": r.uri,
    }


format_option = click.option("--format", "fmt", type=click.Choice(["table", "json"]),
                             default="table", show_default=True)
data_option = click.option("--data", "data_dir", default=None,
                           help="Bundle directory (defaults to the shipped catalog).")


@click.group()
def cli():
    """Risk taxonomy knowledge-graph and assessment toolkit."""


@cli.command()
@click.argument("directory")
def validate(directory):
    """Validate a bundle directory; print diagnostics."""
    path = Path(directory)
    if not path.is_dir():
        raise DomainError(f"not a directory: {directory}")
    loaded = load_bundle_dir(path)
    if isinstance(loaded, list):
        for diag in loaded:
            click.echo(str(diag), err=True)
        click.echo(f"{len(loaded)} errors")
        raise SystemExit(1)
    diags = validate_knowledge_base(loaded)
    for diag in diags:
        click.echo(str(diag), err=True)
    click.echo("0 errors")


@cli.group()
def risks():
    """Catalog listing."""


@risks.command("list")
@click.option("--taxonomy", default=None)
@click.option("--category", default=None)
@click.option("--dimension", default=None)
@click.option("--descriptor", default=None)
@click.option("--text", default=None)
@format_option
@data_option
def risks_list(taxonomy, category, dimension, descriptor, text, fmt, data_dir):
    g = _load_graph(data_dir)
    try:
        cat = RiskCategory.parse(category) if category else None
        desc = Descriptor.parse(descriptor) if descriptor else None
    except ValueError as exc:
        raise DomainError(str(exc))
    found = list_risks(g, taxonomy=taxonomy, category=cat, dimension=dimension,
                       descriptor=desc, text=text)
    _emit({"risks": [_risk_dict(r) for r in found]}, fmt,
          [f"{r.id}\t{r.category.value}\t{r.dimension or '-'}\t{r.name}" for r in found])


@cli.command("risk")
@click.argument("action", type=click.Choice(["show"]))
@click.argument("key")
@format_option
@data_option
def risk_cmd(action, key, fmt, data_dir):
    """Show one risk by id or tag."""
    g = _load_graph(data_dir)
    try:
        r = get_risk(g, key)
    except GraphError as exc:
        raise DomainError(str(exc))
    lines = [
        f"id:         {r.id}",
        f"tag:        {r.tag}",
        f"name:       {r.name}",
        f"category:   {r.category.value}",
        f"dimension:  {r.dimension or '-'}",
        f"descriptor: {r.descriptor.value if r.descriptor else '-'}",
        f"taxonomy:   {r.taxonomy_id}",
        f"uri:        {r.uri or '-'}",
        "description:",
        f"  {r.description}",
    ]
    if r.concern:
        lines += ["concern:", f"  {r.concern}"]
    _emit(_risk_dict(r), fmt, lines)


@cli.command()
@click.argument("key")
@click.option("--hops", default=2, show_default=True)
@click.option("--min-strength", default=1, show_default=True)
@format_option
@data_option
def related(key, hops, min_strength, fmt, data_dir):
    """Cross-taxonomy related risks via mapping closure."""
    g = _load_graph(data_dir)
    try:
        found = related_risks(g, key, max_hops=hops, min_strength=min_strength)
    except GraphError as exc:
        raise DomainError(str(exc))
    payload = {"related": [
        {"risk_id": rr.risk.id, "predicate": rr.predicate.value,
         "strength": rr.strength, "confidence": rr.confidence,
         "hops": len(rr.path)}
        for rr in found]}
    _emit(payload, fmt,
          [f"{rr.risk.id}\t{rr.predicate.value}\tstrength={rr.strength}\thops={len(rr.path)}"
           for rr in found])


@cli.command()
@click.argument("key")
@click.option("--include-related", is_flag=True, default=False)
@format_option
@data_option
def mitigations(key, include_related, fmt, data_dir):
    """Detectors and recommended actions linked to a risk."""
    g = _load_graph(data_dir)
    try:
        found = mitigations_for(g, key, include_related=include_related)
        evidence = evidence_for(g, key, include_related=include_related)
    except GraphError as exc:
        raise DomainError(str(exc))
    payload = {
        "detectors": [{"id": li.item.id, "name": li.item.name, "via": li.via}
                      for li in found["detectors"]],
        "actions": [{"id": li.item.id, "name": li.item.name, "via": li.via}
                    for li in found["actions"]],
        "benchmarks": [{"id": li.item.id, "name": li.item.name, "via": li.via}
                       for li in evidence],
    }
    lines = []
    for kind in ("detectors", "actions", "benchmarks"):
        for entry in payload[kind]:
            via = f" (via {entry['via']})" if entry["via"] else ""
            lines.append(f"{kind[:-1]}\t{entry['id']}\t{entry['name']}{via}")
    _emit(payload, fmt, lines)


def _read_text_arg(value: str) -> str:
    if value == "-":
        return sys.stdin.read()
    return Path(value).read_text(encoding="utf-8")


def _rank_emit(result, fmt):
    payload = {"ranked": [
        {"risk_id": rr.risk_id, "score": rr.score, "method": rr.method,
         "rationale": rr.rationale}
        for rr in result.ranked], "warnings": result.warnings}
    for warning in result.warnings:
        click.echo(f"warning: {warning}", err=True)
    _emit(payload, fmt,
          [f"{rr.score:.4f}\t{rr.risk_id}\t{rr.method}" for rr in result.ranked])


@cli.command("prioritize")
@click.option("--use-case", "use_case", required=True,
              help="File with the use-case description, or '-' for stdin.")
@click.option("--top", "top_k", default=10, show_default=True)
@click.option("--judge", "judge_url", default=None,
              help="Judge service URL (RAN_JUDGE_URL also honored).")
@format_option
@data_option
def prioritize_cmd(use_case, top_k, judge_url, fmt, data_dir):
    """Rank catalog risks by relevance to a use-case description."""
    g = _load_graph(data_dir)
    judge = JudgeEndpoint(url=judge_url) if judge_url else JudgeEndpoint.from_env()
    result = prioritize(g, _read_text_arg(use_case), top_k, judge=judge)
    _rank_emit(result, fmt)


@cli.command()
@click.option("--text", required=True, help="File with the text to tag, or '-' for stdin.")
@click.option("--top", "top_k", default=10, show_default=True)
@format_option
@data_option
def tag(text, top_k, fmt, data_dir):
    """Tag arbitrary text (abstract, dataset card) with its closest risks."""
    g = _load_graph(data_dir)
    result = tag_resource(g, _read_text_arg(text), top_k)
    _rank_emit(result, fmt)


@cli.command()
@click.option("--questionnaire", "questionnaire_path", default=None,
              help="Questionnaire file (defaults to the shipped intake questionnaire).")
@click.option("--answers", "answers_path", default=None,
              help="Answers file (YAML/JSON map of question id to value).")
@click.option("--attrs", "attrs_path", default=None,
              help="Use-case attribute file for tier classification.")
@click.option("--interactive", is_flag=True, default=False)
@click.option("--out", "out_path", required=True, help="Where to write the profile JSON.")
@data_option
def assess(questionnaire_path, answers_path, attrs_path, interactive, out_path, data_dir):
    """Run a questionnaire-driven risk assessment and write the profile."""
    g = _load_graph(data_dir)
    qpath = Path(questionnaire_path) if questionnaire_path else default_questionnaire_path()
    loaded = load_questionnaire(qpath.read_text(encoding="utf-8"), qpath.name)
    if not isinstance(loaded, Questionnaire):
        raise DomainError("invalid questionnaire:\n" + "\n".join(str(d) for d in loaded))
    q = loaded

    answers: dict = {}
    if answers_path:
        answers = yaml.safe_load(Path(answers_path).read_text(encoding="utf-8")) or {}
    diags = check_answers(q, answers)
    if diags:
        raise DomainError("invalid answers:\n" + "\n".join(str(d) for d in diags))

    if interactive:
        while True:
            batch = next_questions(q, answers)
            if not batch:
                break
            for question in batch:
                if question.kind == "boolean":
                    value = "yes" if click.confirm(question.text, default=False) else "no"
                elif question.kind == "single-choice":
                    choices = [v for v, _ in question.options]
                    for v, label in question.options:
                        click.echo(f"  {v}: {label}")
                    value = click.prompt(question.text, type=click.Choice(choices))
                elif question.kind == "multi-choice":
                    for v, label in question.options:
                        click.echo(f"  {v}: {label}")
                    raw = click.prompt(f"{question.text} (comma-separated)", default="")
                    value = [v.strip() for v in raw.split(",") if v.strip()]
                else:
                    value = click.prompt(question.text, default="")
                answers[question.id] = value
            # resumable: persist collected answers after every batch
            if answers_path:
                Path(answers_path).write_text(
                    yaml.safe_dump(answers, sort_keys=True), encoding="utf-8")

    table = load_tier_table(default_tier_table_path().read_text(encoding="utf-8"))
    attrs: dict = {}
    if attrs_path:
        attrs = {str(k): str(v) for k, v in
                 (yaml.safe_load(Path(attrs_path).read_text(encoding="utf-8")) or {}).items()}
    tier, tier_rule_ids = classify_eu_tier(attrs, table)
    profile = evaluate_applicability(q, answers, g, tier=tier, tier_rule_ids=tier_rule_ids)
    Path(out_path).write_text(
        json.dumps(profile.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8")
    flagged = sum(1 for s in profile.statuses.values() if s == "flagged")
    excluded = sum(1 for s in profile.statuses.values() if s == "excluded")
    click.echo(f"profile written to {out_path}: {flagged} flagged, {excluded} excluded, "
               f"tier {profile.tier}" + (" (partial)" if profile.partial else ""))


@cli.command()
@click.option("--format", "fmt", type=click.Choice(["json-graph", "ntriples"]),
              default="json-graph", show_default=True)
@data_option
def export(fmt, data_dir):
    """Export the graph as json-graph or N-Triples on stdout."""
    g = _load_graph(data_dir)
    click.echo(export_graph(g, fmt), nl=False)


@cli.command()
@click.option("--config", "config_path", default=None, help="TOML config file.")
@click.option("--port", default=None, type=int)
@data_option
@click.option("--store", "store_dir", default=None, help="Assessment store directory.")
def serve(config_path, port, data_dir, store_dir):
    """Run the HTTP service."""
    from .service import ServiceConfig
    from .service import serve as run_service

    config = ServiceConfig.load(config_path)
    if data_dir:
        config.data_dir = Path(data_dir)
    if store_dir:
        config.store_dir = Path(store_dir)
    if port:
        config.port = port
    run_service(config)


def main():
    cli(standalone_mode=True)


if __name__ == "__main__":
    main()
