"""Command line front door.

adapt          run one adaptation end to end and print or save the schema
serve          start the HTTP API
validate-rules parse a rule file and run the conflict checks
report         emit the standards compliance report
gate-check     run the quality gates over a candidate output, no backend
templates      list or show prompt templates
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path
from typing import Optional

import click
import yaml

from .backends import make_backend, parse_backend_response
from .catalog import load_catalog_file, load_default_catalog
from .config import AppConfig, load_config
from .errors import AdaptForgeError, ParseError, ValidationError
from .gates import run_gates
from .model import DomainInput, TransformResult, UserProfile
from .prompts import PromptStore, load_default_store
from .rules import load_default_rules, load_rules_file, validate_rules
from .service import AdaptationService, JobStatus
from .ui import serialize_schema


def _read_structured(path: str) -> dict:
    """YAML or JSON by suffix; YAML parses JSON too, so default to YAML."""
    raw = Path(path).read_text(encoding="utf-8")
    if path.endswith(".json"):
        return json.loads(raw)
    return yaml.safe_load(raw)


def _service(
    config_path: Optional[str],
    backend: Optional[str],
    rules: Optional[str],
    catalog: Optional[str],
    data_dir: Optional[str],
) -> AdaptationService:
    config = load_config(config_path, env=os.environ)
    overrides = {}
    if backend:
        overrides["backend"] = backend
    if rules:
        overrides["rules_path"] = rules
    if catalog:
        overrides["catalog_path"] = catalog
    if data_dir:
        overrides["data_dir"] = data_dir
    if overrides:
        config = config.replace(**overrides)
    return AdaptationService(config)


@click.group()
@click.version_option(package_name="adapt-forge")
def main() -> None:
    """Adaptive accessible UI generation for medication instructions."""


@main.command()
@click.option("--profile", "profile_path", required=True, type=click.Path(exists=True), help="User profile file (YAML or JSON).")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True), help="Instruction text file (YAML or JSON).")
@click.option("--backend", type=click.Choice(["mock", "remote"]), default=None, help="Override the configured backend.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--rules", type=click.Path(exists=True), default=None)
@click.option("--catalog", type=click.Path(exists=True), default=None)
@click.option("--data-dir", type=click.Path(), default=None)
@click.option("--out", type=click.Path(), default=None, help="Write the UI schema JSON here instead of stdout.")
def adapt(profile_path, input_path, backend, config_path, rules, catalog, data_dir, out):
    """Run the full pipeline for one profile and one input."""
    try:
        profile = UserProfile.from_dict(_read_structured(profile_path))
        input = DomainInput.from_dict(_read_structured(input_path))
        service = _service(config_path, backend, rules, catalog, data_dir)
        job = service.run_sync(profile, input)
    except AdaptForgeError as exc:
        raise click.ClickException(str(exc)) from exc

    click.echo(f"job {job.job_id}: {job.status.value}", err=True)
    for report in job.reports:
        for result in report.per_gate:
            mark = "pass" if result.passed else "FAIL"
            click.echo(
                f"  attempt {report.attempt} {result.gate.value}: {mark} "
                f"(metric {result.metric_value:.4f})",
                err=True,
            )
    schema = job.servable_schema()
    if schema is not None:
        text = serialize_schema(schema)
        if out:
            Path(out).write_text(text, encoding="utf-8")
            click.echo(f"schema written to {out}", err=True)
        else:
            click.echo(text)
        return
    if job.status is JobStatus.ESCALATED:
        click.echo(
            "escalated to human review; no schema is served until a reviewer acts",
            err=True,
        )
        sys.exit(2)
    raise click.ClickException(job.error or "job did not produce a schema")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=None, type=int, help="Defaults to the configured port.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--backend", type=click.Choice(["mock", "remote"]), default=None)
@click.option("--data-dir", type=click.Path(), default=None)
def serve(host, port, config_path, backend, data_dir):
    """Start the HTTP API."""
    import uvicorn

    from .api import create_app

    try:
        service = _service(config_path, backend, None, None, data_dir)
    except AdaptForgeError as exc:
        raise click.ClickException(str(exc)) from exc
    app = create_app(service)
    uvicorn.run(app, host=host, port=port or service.config.port, log_level="info")


@main.command("validate-rules")
@click.option("--rules", type=click.Path(exists=True), default=None, help="Rule file; defaults to the bundled set.")
@click.option("--catalog", type=click.Path(exists=True), default=None)
def validate_rules_cmd(rules, catalog):
    """Parse a rule file, then check refs and co-activation conflicts."""
    try:
        rule_set = load_rules_file(rules) if rules else load_default_rules()
        cat = load_catalog_file(catalog) if catalog else load_default_catalog()
        warnings = validate_rules(rule_set, cat)
    except (ParseError, ValidationError) as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"OK: {len(rule_set.rules)} rules, no conflicts")
    for warning in warnings:
        click.echo(f"warning: {warning}")


@main.command()
@click.option("--format", "fmt", type=click.Choice(["full", "summary"]), default="full", show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--data-dir", type=click.Path(), default=None)
@click.option("--out", type=click.Path(), default=None)
def report(fmt, config_path, data_dir, out):
    """Emit the compliance report over everything in the trace ledger."""
    try:
        service = _service(config_path, None, None, None, data_dir)
        doc = service.compliance_report(format=fmt)
    except AdaptForgeError as exc:
        raise click.ClickException(str(exc)) from exc
    text = json.dumps(doc, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
        click.echo(f"report written to {out}", err=True)
    else:
        click.echo(text)


@main.command("gate-check")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True), help="Original instruction file (YAML or JSON).")
@click.option("--output", "output_path", required=True, type=click.Path(exists=True), help="Candidate output: .json result or raw envelope text.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def gate_check(input_path, output_path, config_path):
    """Run the quality gates over a candidate without calling any backend."""
    try:
        config = load_config(config_path, env=os.environ)
        input = DomainInput.from_dict(_read_structured(input_path))
        if output_path.endswith(".json"):
            doc = _read_structured(output_path)
            result = TransformResult(
                plain_text=doc["plainText"],
                steps=tuple(doc.get("steps", ())),
                raw_response=json.dumps(doc),
            )
        else:
            raw = Path(output_path).read_text(encoding="utf-8")
            result = parse_backend_response(raw)
        report = run_gates(input, result, config.thresholds())
    except (AdaptForgeError, KeyError) as exc:
        raise click.ClickException(str(exc)) from exc
    for gate_result in report.per_gate:
        mark = "pass" if gate_result.passed else "FAIL"
        line = f"{gate_result.gate.value}: {mark} (metric {gate_result.metric_value:.4f}, threshold {gate_result.threshold})"
        if gate_result.details:
            line += f" [{gate_result.details}]"
        click.echo(line)
    click.echo("overall: " + ("pass" if report.overall_passed else "FAIL"))
    sys.exit(0 if report.overall_passed else 1)


@main.group()
def templates():
    """Inspect the prompt template store."""


def _store(templates_dir: Optional[str]) -> PromptStore:
    if templates_dir:
        store = PromptStore()
        store.load_directory(templates_dir)
        return store
    return load_default_store()


@templates.command("list")
@click.option("--templates-dir", type=click.Path(exists=True), default=None)
def templates_list(templates_dir):
    """One line per template: id, versions, placeholders of the latest."""
    store = _store(templates_dir)
    for template_id in store.template_ids():
        versions = store.versions(template_id)
        latest = store.get(template_id)
        markers = ", ".join(latest.required_placeholders) or "(none)"
        click.echo(f"{template_id}  versions={versions}  placeholders: {markers}")


@templates.command("show")
@click.argument("template_id")
@click.option("--version", type=int, default=None, help="Defaults to the latest.")
@click.option("--templates-dir", type=click.Path(exists=True), default=None)
def templates_show(template_id, version, templates_dir):
    """Print one template in its file format."""
    store = _store(templates_dir)
    try:
        template = store.get(template_id, version=version)
    except AdaptForgeError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(template.to_file_text(), nl=False)


if __name__ == "__main__":
    main()
