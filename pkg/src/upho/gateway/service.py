"""HTTP surface over the analysis pipeline.

Endpoints::

    GET  /health
    POST /analyses
    GET  /analyses/{id}
    GET  /analyses/{id}/graph
    GET  /analyses/{id}/pathways
    GET  /analyses/{id}/explain/node/{nid}
    GET  /analyses/{id}/explain/edge/{eid}
    GET  /metrics/{tract}

Analyses are cached by request hash; repeating a request returns the
stored report id without recomputing. Each analysis runs on the immutable
workspace snapshot loaded at startup; the report index is the only shared
mutable state and writes to it are serialized.
"""

from __future__ import annotations

import threading

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .. import __version__, explain
from ..errors import StageError, UphoError, WorkspaceError
from . import pipeline
from .pipeline import AnalysisRequest, city_stats, rebuild_graph, resolve_tract
from .workspace import Workspace


class AnalysisRequestModel(BaseModel):
    outcome: str
    aim: str = "causal_pathway"
    level: str = "patient"
    location: str = ""
    granularity: str = "census_tract"
    sdoh_filters: list[str] = Field(default_factory=list)
    seed: int = 0
    importance_mode: str | None = None
    r2_mode: str | None = None
    role: str = "physician"

    def to_request(self) -> AnalysisRequest:
        return AnalysisRequest(
            outcome=self.outcome,
            aim=self.aim,
            level=self.level,
            location=self.location,
            granularity=self.granularity,
            sdoh_filters=tuple(self.sdoh_filters),
            seed=self.seed,
            importance_mode=self.importance_mode,
            r2_mode=self.r2_mode,
            role=self.role,
        )


class AnalysisCreated(BaseModel):
    id: str
    cached: bool


class HealthResponse(BaseModel):
    status: str
    version: str


class ExplanationModel(BaseModel):
    target: str
    text: str
    evidence: list[dict]
    sources: list[str]


class MetricEntry(BaseModel):
    column: str
    term: str
    units: str
    value: float
    city_mean: float


class MetricsResponse(BaseModel):
    tract: str
    metrics: list[MetricEntry]


def create_app(workspace: Workspace, static_dir=None) -> FastAPI:
    app = FastAPI(title="upho", version=__version__)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    write_lock = threading.Lock()
    stats = city_stats(workspace)

    def load_report_or_404(report_id: str) -> dict:
        try:
            return workspace.load_report(report_id)
        except WorkspaceError:
            raise HTTPException(status_code=404, detail=f"no analysis {report_id!r}")

    def templates_for(doc: dict) -> dict[str, str]:
        role = doc.get("request", {}).get("role", "physician")
        return explain.load_templates(
            role="researcher" if role == "researcher" else "physician",
            path=workspace.config.templates_path,
        )

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.post("/analyses", response_model=AnalysisCreated, status_code=201)
    def create_analysis(body: AnalysisRequestModel):
        req = body.to_request()
        request_hash = req.request_hash()
        cached = workspace.report_id_for(request_hash)
        if cached is not None:
            return AnalysisCreated(id=cached, cached=True)
        try:
            with write_lock:
                doc = pipeline.run_analysis(workspace, req)
        except StageError as err:
            status = 403 if "public role" in str(err) else (
                404 if "is not in the workspace table" in str(err) else 422
            )
            raise HTTPException(status_code=status, detail=str(err))
        except UphoError as err:
            raise HTTPException(status_code=422, detail=str(err))
        return AnalysisCreated(id=doc["id"], cached=False)

    @app.get("/analyses/{report_id}")
    def get_analysis(report_id: str):
        return load_report_or_404(report_id)

    @app.get("/analyses/{report_id}/graph")
    def get_graph(report_id: str):
        return load_report_or_404(report_id)["graph"]

    @app.get("/analyses/{report_id}/pathways")
    def get_pathways(report_id: str):
        return load_report_or_404(report_id)["pathways"]

    @app.get("/analyses/{report_id}/explain/node/{node_id}", response_model=ExplanationModel)
    def explain_node_endpoint(report_id: str, node_id: str):
        doc = load_report_or_404(report_id)
        graph = rebuild_graph(workspace, doc)
        try:
            result = explain.explain_node(graph, node_id, stats, templates_for(doc))
        except UphoError as err:
            raise HTTPException(status_code=404, detail=str(err))
        return ExplanationModel(**pipeline._serialize_explanation(result))

    @app.get("/analyses/{report_id}/explain/edge/{edge_id}", response_model=ExplanationModel)
    def explain_edge_endpoint(report_id: str, edge_id: str):
        doc = load_report_or_404(report_id)
        graph = rebuild_graph(workspace, doc)
        try:
            result = explain.explain_edge(graph, edge_id, stats, templates_for(doc))
        except UphoError as err:
            raise HTTPException(status_code=404, detail=str(err))
        return ExplanationModel(**pipeline._serialize_explanation(result))

    @app.get("/metrics/{tract}", response_model=MetricsResponse)
    def get_metrics(tract: str):
        try:
            code = resolve_tract(workspace, tract)
        except UphoError as err:
            raise HTTPException(status_code=404, detail=str(err))
        values = workspace.table.row(code)
        entries = []
        for binding, value in zip(workspace.table.bindings, values):
            term = pipeline.parse_term(binding.term)
            entries.append(
                MetricEntry(
                    column=binding.column_name,
                    term=binding.term,
                    units=binding.units.value,
                    value=value,
                    city_mean=stats.means[term],
                )
            )
        return MetricsResponse(tract=code, metrics=entries)

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="dashboard")

    return app


def serve(workspace: Workspace, bind: str = "127.0.0.1:8000", static_dir=None):
    """Run the service with uvicorn on host:port."""
    import uvicorn

    host, _, port = bind.partition(":")
    app = create_app(workspace, static_dir=static_dir)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or "8000"))
