"""Operator command line: bootstrap, single runs, batches, distillation.

Every command is a thin wrapper over the library against the configured
data directory; `serve` starts the HTTP service for the web console.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import agent as agent_mod
from .agent import Decision, RunStatus
from .bootstrap import (
    BootstrapPlan,
    accrete_icl,
    generate_queries,
    read_query_review_file,
    seed_database,
    write_query_review_file,
)
from .config import ServiceConfig, build_gateway, load_config
from .data_agent import import_schema, write_manifest
from .distiller import DistillConfig, DistillReport, distill
from .errors import QueryflowError
from .model import ComplexityLevel, Query, QueryOrigin, render_workflow
from .prompts import PromptSuite
from .service import write_spec_documents
from .store import ExampleStore


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _open_store(config: ServiceConfig) -> ExampleStore:
    return ExampleStore.load(config.store_path, embedding_dim=config.gateway.embedding_dim)


@click.group()
@click.option(
    "--config",
    "config_path",
    type=click.Path(path_type=Path),
    default=None,
    help="YAML config file; defaults to the offline scripted backend.",
)
@click.pass_context
def main(ctx: click.Context, config_path: Path | None) -> None:
    try:
        ctx.obj = load_config(config_path)
    except QueryflowError as exc:
        _fail(str(exc))


@main.command("seed-queries")
@click.option("--per-level", type=int, default=20, show_default=True)
@click.pass_obj
def seed_queries(config: ServiceConfig, per_level: int) -> None:
    """Generate leveled queries into queries.jsonl for review."""
    try:
        gateway = build_gateway(config)
        suite = PromptSuite(config.prompt_dir)
        queries = generate_queries(config.scope(), per_level, gateway, suite)
        write_query_review_file(queries, config.queries_path)
    except QueryflowError as exc:
        _fail(str(exc))
    click.echo(f"wrote {len(queries)} queries to {config.queries_path}")


@main.command()
@click.pass_obj
def bootstrap(config: ServiceConfig) -> None:
    """Accrete the four seed examples, then seed the store from queries.jsonl."""
    if not config.queries_path.exists():
        _fail(f"{config.queries_path} not found; run seed-queries first")
    try:
        gateway = build_gateway(config)
        suite = PromptSuite(config.prompt_dir)
        store = _open_store(config)
        accepted = [q for q, ok in read_query_review_file(config.queries_path) if ok]
        plan = BootstrapPlan()
        seeds: list[Query] = []
        for level, count in plan.seed_icl_levels:
            matching = [q for q in accepted if q.level is level]
            if len(matching) < count:
                _fail(f"need {count} accepted {level.value} queries for accretion")
            seeds.extend(matching[:count])
        icl = accrete_icl(seeds, config.scope(), gateway, suite)
        batch = [q for q in accepted if q.level in plan.batch_levels]
        report = seed_database(batch, icl, store, gateway, config.scope(), suite)
    except QueryflowError as exc:
        _fail(str(exc))
    click.echo(f"stored {report.stored} records; store size {len(store)}")
    for query_id, error in report.failures:
        click.echo(f"failed {query_id}: {error}", err=True)
    if report.failures:
        sys.exit(1)


@main.command()
@click.argument("query_text")
@click.option("--level", type=click.Choice([l.value for l in ComplexityLevel]),
              default=ComplexityLevel.COMPLEX_SINGLE_GOAL.value, show_default=True)
@click.option("--yes", is_flag=True, help="Accept the workflow without prompting.")
@click.pass_obj
def ask(config: ServiceConfig, query_text: str, level: str, yes: bool) -> None:
    """Run the agent on one query and accept or reject the workflow."""
    try:
        gateway = build_gateway(config)
        suite = PromptSuite(config.prompt_dir)
        store = _open_store(config)
        query = Query(
            id=f"u-{abs(hash(query_text)) % 10**8:08d}",
            text=query_text,
            level=ComplexityLevel.from_value(level),
            origin=QueryOrigin.USER_SUBMITTED,
        )
        state = agent_mod.run(query, store, gateway, config.agent, config.scope(), suite)
        if state.status is RunStatus.FAILED:
            _fail(f"run failed: {state.failure_reason}")
        click.echo(
            f"deliberated {state.iteration_count} iteration(s); converged={state.converged}\n"
        )
        click.echo(render_workflow(state.final_thought, state.final_workflow))
        if yes or click.confirm("\nAccept this workflow into the store?", default=True):
            agent_mod.decide(state, Decision.ACCEPT, store)
            click.echo(f"accepted; store size {len(store)}")
        else:
            agent_mod.decide(state, Decision.REJECT, store)
            click.echo("rejected; logged to the audit file")
    except QueryflowError as exc:
        _fail(str(exc))


@main.command()
@click.argument("query_file", type=click.Path(exists=True, path_type=Path))
@click.option("--review", is_flag=True, help="Confirm each workflow instead of auto-accepting.")
@click.pass_obj
def batch(config: ServiceConfig, query_file: Path, review: bool) -> None:
    """Run the agent over a query review file (accepted entries only)."""
    try:
        gateway = build_gateway(config)
        suite = PromptSuite(config.prompt_dir)
        store = _open_store(config)
        accepted = [q for q, ok in read_query_review_file(query_file) if ok]
        stored = failed = 0
        for query in accepted:
            state = agent_mod.run(query, store, gateway, config.agent, config.scope(), suite)
            if state.status is RunStatus.FAILED:
                click.echo(f"failed {query.id}: {state.failure_reason}", err=True)
                failed += 1
                continue
            if review:
                click.echo(render_workflow(state.final_thought, state.final_workflow))
                if not click.confirm(f"Accept workflow for {query.id}?", default=True):
                    agent_mod.decide(state, Decision.REJECT, store)
                    continue
            agent_mod.decide(state, Decision.ACCEPT, store)
            stored += 1
    except QueryflowError as exc:
        _fail(str(exc))
    click.echo(f"stored {stored} of {len(accepted)} queries; store size {len(store)}")
    if failed:
        sys.exit(1)


@main.command("distill")
@click.option("--incremental", is_flag=True,
              help="Chain on the existing distill_report.json instead of starting fresh.")
@click.pass_obj
def distill_cmd(config: ServiceConfig, incremental: bool) -> None:
    """Distill the store into an API specification and reports."""
    try:
        gateway = build_gateway(config)
        suite = PromptSuite(config.prompt_dir)
        store = _open_store(config)
        baseline = None
        if incremental:
            if not config.report_path.exists():
                _fail(f"{config.report_path} not found; run a fresh distill first")
            baseline = DistillReport.from_json(config.report_path.read_text(encoding="utf-8"))
        schema = import_schema(config.schema_file) if config.schema_file else None
        outcome = distill(
            store, gateway, DistillConfig(schema=schema), baseline=baseline, suite=suite
        )
        config.report_path.parent.mkdir(parents=True, exist_ok=True)
        config.report_path.write_text(outcome.report.to_json(), encoding="utf-8")
        write_spec_documents(outcome.report, config.api_spec_dir)
        if outcome.data_artifacts:
            write_manifest(outcome.data_artifacts, config.manifest_path)
    except QueryflowError as exc:
        _fail(str(exc))
    latest = outcome.report.slices[-1]
    click.echo(
        f"slice {latest.label}: {latest.steps_total} steps, categories {latest.category_counts}"
    )
    click.echo(
        f"functions total {len(outcome.report.functions)};"
        f" data artifacts {len(outcome.data_artifacts)},"
        f" data failures {len(outcome.data_failures)}"
    )
    click.echo(f"report written to {config.report_path}")


@main.command()
@click.pass_obj
def stats(config: ServiceConfig) -> None:
    """Print store size and the latest distillation summary."""
    try:
        store = _open_store(config)
    except QueryflowError as exc:
        _fail(str(exc))
    click.echo(f"store size: {len(store)}")
    if config.report_path.exists():
        report = DistillReport.from_json(config.report_path.read_text(encoding="utf-8"))
        for slice_report in report.slices:
            click.echo(
                f"slice {slice_report.label}: steps {slice_report.steps_total},"
                f" categories {slice_report.category_counts},"
                f" new functions {slice_report.new_function_counts}"
            )
        click.echo(f"functions total: {len(report.functions)}")
    else:
        click.echo("no distill report yet")


@main.command("export-spec")
@click.pass_obj
def export_spec(config: ServiceConfig) -> None:
    """Regenerate the api_spec documents from the stored report."""
    if not config.report_path.exists():
        _fail(f"{config.report_path} not found; run distill first")
    try:
        report = DistillReport.from_json(config.report_path.read_text(encoding="utf-8"))
        write_spec_documents(report, config.api_spec_dir)
    except QueryflowError as exc:
        _fail(str(exc))
    click.echo(f"wrote {config.api_spec_dir}/analysis.md and output.md")


@main.command()
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.pass_obj
def serve(config: ServiceConfig, host: str | None, port: int | None) -> None:
    """Start the HTTP service."""
    from .service import serve as run_service

    if host:
        config.listen_host = host
    if port:
        config.listen_port = port
    try:
        run_service(config)
    except QueryflowError as exc:
        _fail(str(exc))


if __name__ == "__main__":
    main()
