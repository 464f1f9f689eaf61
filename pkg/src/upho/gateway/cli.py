"""Command-line interface.

Thin wrappers over the core package: ``analyze`` calls the same
run_analysis the HTTP service uses, so a request file yields the same
report id either way. Usage errors exit 2; stage errors exit 1 with a
message naming the failed stage.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .. import explain, graphstore, ontology as ontology_mod
from ..errors import UphoError
from . import canonical_json, pipeline
from .pipeline import AnalysisRequest
from .workspace import Workspace, bundled_ontology_text, demo_data_path


def _fail(err: Exception) -> None:
    click.echo(f"error: {err}", err=True)
    sys.exit(1)


@click.group()
@click.option(
    "--workspace",
    "-w",
    envvar="UPHO_WORKSPACE",
    type=click.Path(path_type=Path),
    help="Workspace directory (or set UPHO_WORKSPACE).",
)
@click.pass_context
def main(ctx, workspace):
    ctx.ensure_object(dict)
    ctx.obj["workspace"] = workspace


def _require_workspace(ctx) -> Path:
    ws = ctx.obj.get("workspace")
    if ws is None:
        raise click.UsageError("a workspace is required (--workspace or UPHO_WORKSPACE)")
    return ws


def _load_workspace(ctx) -> Workspace:
    try:
        return Workspace.load(_require_workspace(ctx))
    except UphoError as err:
        _fail(err)


@main.command()
@click.option("--csv", "csvs", multiple=True, required=True,
              type=click.Path(exists=True, path_type=Path),
              help="Feature CSV; repeat with matching --manifest.")
@click.option("--manifest", "manifests", multiple=True, required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--crosswalk", type=click.Path(exists=True, path_type=Path))
@click.option("--ontology", "ontology_path", type=click.Path(exists=True, path_type=Path),
              help="Ontology DSL file; defaults to the bundled one.")
@click.option("--city", default="Memphis", show_default=True)
@click.pass_context
def ingest(ctx, csvs, manifests, crosswalk, ontology_path, city):
    """Link feature CSVs into a workspace."""
    if len(csvs) != len(manifests):
        raise click.UsageError("each --csv needs a matching --manifest")
    root = _require_workspace(ctx)
    try:
        ws = Workspace.ingest(
            root,
            sources=list(zip(csvs, manifests)),
            crosswalk_path=crosswalk,
            ontology_path=ontology_path,
            city=city,
        )
    except UphoError as err:
        _fail(err)
    click.echo(f"ingested {len(ws.table.rows)} rows, {len(ws.table.bindings)} columns -> {root}")


@main.command()
@click.pass_context
def demo(ctx):
    """Materialize the bundled synthetic city into a workspace."""
    root = _require_workspace(ctx)
    try:
        ws = Workspace.ingest(
            root,
            sources=[
                (demo_data_path("health.csv"), demo_data_path("health.manifest.tsv")),
                (demo_data_path("sdoh.csv"), demo_data_path("sdoh.manifest.tsv")),
            ],
            crosswalk_path=demo_data_path("crosswalk.csv"),
            city="Memphis",
        )
    except UphoError as err:
        _fail(err)
    click.echo(f"demo workspace ready: {len(ws.table.rows)} tracts -> {root}")


@main.group(name="ontology")
def ontology_group():
    """Ontology utilities."""


@ontology_group.command(name="check")
@click.argument("file", required=False, type=click.Path(exists=True, path_type=Path))
def ontology_check(file):
    """Parse and validate an ontology file (bundled one by default)."""
    text = Path(file).read_text(encoding="utf-8") if file else bundled_ontology_text()
    try:
        ont = ontology_mod.parse_ontology(text)
    except UphoError as err:
        _fail(err)
    diagnostics = ontology_mod.validate_ontology(ont)
    for diag in diagnostics:
        click.echo(f"{diag.kind}: {diag.message}", err=True)
    if diagnostics:
        sys.exit(1)
    click.echo(
        f"ok: {len(ont.concepts)} concepts, {len(ont.relations)} relations, "
        f"{len(ont.rules)} rules"
    )


@main.command()
@click.option("--request", "request_path", required=True,
              type=click.Path(exists=True, path_type=Path),
              help="JSON file with the analysis request.")
@click.option("--seed", type=int, default=None, help="Override the request seed.")
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path),
              help="key=value file overriding the workspace config.")
@click.option("--out", type=click.Path(path_type=Path), help="Also write the report here.")
@click.pass_context
def analyze(ctx, request_path, seed, config_path, out):
    """Run the full analysis pipeline from a request file."""
    ws = _load_workspace(ctx)
    if config_path is not None:
        from .workspace import Config

        try:
            ws.config = Config.parse(config_path.read_text(encoding="utf-8"))
        except UphoError as err:
            _fail(err)
    try:
        payload = json.loads(request_path.read_text(encoding="utf-8"))
        req = AnalysisRequest.from_payload(payload)
        if seed is not None:
            import dataclasses

            req = dataclasses.replace(req, seed=seed)
        doc = pipeline.run_analysis(ws, req)
    except UphoError as err:
        _fail(err)
    if out is not None:
        out.write_text(canonical_json(doc), encoding="utf-8")
    click.echo(doc["id"])


@main.command()
@click.option("--facts", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--ontology", "ontology_path", type=click.Path(exists=True, path_type=Path),
              help="Ontology DSL file; defaults to the bundled one.")
def reason(facts, ontology_path):
    """Infer derived facts from a fact file and print their provenance."""
    text = (
        Path(ontology_path).read_text(encoding="utf-8")
        if ontology_path
        else bundled_ontology_text()
    )
    try:
        ont = ontology_mod.parse_ontology(text)
        graph = graphstore.load_fact_file(ont, Path(facts).read_text(encoding="utf-8"))
        result = graphstore.infer(graph)
    except UphoError as err:
        _fail(err)
    for edge in result.new_facts:
        subject = graph.nodes[edge.subject].label
        obj = graph.nodes[edge.object].label
        used = ", ".join(edge.provenance[1:]) if len(edge.provenance) > 1 else ""
        rule = edge.provenance[0]
        citation = f"[using {rule}" + (f", {used}" if used else "") + "]"
        click.echo(f"{subject} {edge.relation} {obj} {citation} ({edge.id})")
    click.echo(
        f"# {len(result.new_facts)} facts derived in {result.iterations} rounds",
        err=True,
    )


@main.command()
@click.option("--analysis", "report_id", help="Trace inside a stored analysis report.")
@click.option("--facts", type=click.Path(exists=True, path_type=Path),
              help="Or trace over a fact file graph (after inference).")
@click.option("--ontology", "ontology_path", type=click.Path(exists=True, path_type=Path))
@click.option("--source", required=True, help="Source node id.")
@click.option("--target", required=True, help="Target node id.")
@click.option("--max-len", default=6, show_default=True)
@click.pass_context
def trace(ctx, report_id, facts, ontology_path, source, target, max_len):
    """List causal pathways between two graph nodes."""
    try:
        if report_id:
            ws = _load_workspace(ctx)
            doc = ws.load_report(report_id)
            graph = pipeline.rebuild_graph(ws, doc)
        elif facts:
            text = (
                Path(ontology_path).read_text(encoding="utf-8")
                if ontology_path
                else bundled_ontology_text()
            )
            ont = ontology_mod.parse_ontology(text)
            graph = graphstore.load_fact_file(ont, Path(facts).read_text(encoding="utf-8"))
            graphstore.infer(graph)
        else:
            raise click.UsageError("need --analysis or --facts")
        pathways = explain.trace_pathways(graph, source, target, max_len=max_len)
    except UphoError as err:
        _fail(err)
    for p in pathways:
        chain = " -> ".join(p.nodes)
        click.echo(f"score={p.score:.3f} [{p.kind}] {chain}")
    if not pathways:
        click.echo("# no pathways found", err=True)


@main.command()
@click.option("--bind", default="127.0.0.1:8000", show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path),
              help="key=value file overriding the workspace config.")
@click.option("--static", "static_dir", type=click.Path(exists=True, path_type=Path),
              help="Serve a built dashboard bundle at / (e.g. the frontend directory).")
@click.pass_context
def serve(ctx, bind, config_path, static_dir):
    """Serve the HTTP API over the workspace."""
    ws = _load_workspace(ctx)
    if config_path is not None:
        from .workspace import Config

        try:
            ws.config = Config.parse(config_path.read_text(encoding="utf-8"))
        except UphoError as err:
            _fail(err)
    from .service import serve as run_server

    try:
        run_server(ws, bind, static_dir=static_dir)
    except OSError as err:
        _fail(err)


if __name__ == "__main__":
    main()
