"""End-to-end analysis: screening, model fit, attribution, graph, report.

The stages run in a fixed order and every module error is re-raised as a
StageError naming the stage that failed. A report is only persisted after
the whole pipeline succeeds, and its id is the content hash of the
canonical document minus timings, so identical requests reproduce
byte-identical reports.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass

import numpy as np

from .. import attribution, explain, graphstore, regression, stats
from ..errors import BadRequest, StageError, UnknownTract, UphoError
from ..ontology import Term
from ..tabledata import FeatureTable
from . import content_hash
from .workspace import Workspace

PATIENT_WHITELIST = explain.CAUSAL_WHITELIST
POPULATION_WHITELIST = frozenset(explain.CAUSAL_WHITELIST | {"locatedIn"})


@dataclass(frozen=True)
class AnalysisRequest:
    outcome: str  # ontology term or column name (S1)
    aim: str = "causal_pathway"  # S2: causal_pathway | descriptive
    level: str = "patient"  # S3: patient | population
    location: str = ""  # tract code (patient) or city name (population)
    granularity: str = "census_tract"  # S4: zip | census_tract
    sdoh_filters: tuple[str, ...] = ()  # S5 highlight terms
    seed: int = 0
    importance_mode: str | None = None
    r2_mode: str | None = None
    role: str = "physician"  # physician | researcher | public

    def to_payload(self) -> dict:
        return {
            "outcome": self.outcome,
            "aim": self.aim,
            "level": self.level,
            "location": self.location,
            "granularity": self.granularity,
            "sdoh_filters": sorted(self.sdoh_filters),
            "seed": self.seed,
            "importance_mode": self.importance_mode,
            "r2_mode": self.r2_mode,
            "role": self.role,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "AnalysisRequest":
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(payload) - known
        if extra:
            raise BadRequest(f"unknown request fields: {sorted(extra)}")
        if "outcome" not in payload:
            raise BadRequest("request needs an outcome")
        data = dict(payload)
        if "sdoh_filters" in data and data["sdoh_filters"] is not None:
            data["sdoh_filters"] = tuple(data["sdoh_filters"])
        return cls(**{k: v for k, v in data.items() if v is not None})

    def request_hash(self) -> str:
        return content_hash(self.to_payload())


class _Stage:
    """Context manager that tags errors and records wall time per stage."""

    def __init__(self, name: str, timings: dict):
        self.name = name
        self.timings = timings

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.timings[self.name] = round(time.perf_counter() - self.start, 6)
        if exc is not None and isinstance(exc, UphoError) and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def term_string(term: Term) -> str:
    return str(term)


def parse_term(text: str) -> Term:
    if ":" in text:
        ns, name = text.split(":", 1)
        return Term(ns, name)
    return Term("local", text)


def resolve_outcome_column(ws: Workspace, outcome: str) -> str:
    """Accept either a bound ontology term or a raw column name."""
    for binding in ws.table.bindings:
        if binding.term == outcome:
            return binding.column_name
    if outcome in ws.table.column_names:
        return outcome
    raise BadRequest(
        f"outcome {outcome!r} matches no bound term or column in the workspace table"
    )


def resolve_tract(ws: Workspace, location: str) -> str:
    """Resolve a tract reference to the table's 11-digit code.

    Accepts the full FIPS code or a short tract number (up to 6 digits,
    e.g. 10300) when it is unambiguous within the workspace's city.
    """
    codes = set(ws.table.codes)
    if location in codes:
        return location
    if location.isdigit() and len(location) <= 6:
        suffix = location.zfill(6)
        matches = [c for c in ws.table.codes if c.endswith(suffix)]
        if len(matches) == 1:
            return matches[0]
        if len(matches) > 1:
            raise BadRequest(f"tract {location!r} is ambiguous: {matches}")
    raise UnknownTract(f"tract {location!r} is not in the workspace table")


def city_stats(ws: Workspace) -> explain.CityStats:
    matrix = np.array([values for _, values in ws.table.rows], dtype=float)
    means: dict[Term, float] = {}
    units: dict[Term, str] = {}
    for i, binding in enumerate(ws.table.bindings):
        term = parse_term(binding.term)
        means[term] = float(matrix[:, i].mean())
        units[term] = binding.units.value
    return explain.CityStats(means=means, units=units)


def _serialize_pathway(p: explain.Pathway) -> dict:
    return {"edges": list(p.edges), "nodes": list(p.nodes), "score": p.score, "kind": p.kind}


def _serialize_explanation(e: explain.Explanation) -> dict:
    return {
        "target": e.target,
        "text": e.text,
        "evidence": [{"name": item.name, "value": item.value} for item in e.evidence],
        "sources": list(e.sources),
    }


def _serialize_shap(expl: attribution.ShapExplanation) -> dict:
    ranked = attribution.rank_contributions(expl)
    return {
        "subject": expl.subject,
        "baseline": expl.baseline,
        "prediction": expl.prediction,
        "contributions": [
            {
                "feature": name,
                "phi": phi,
                "direction": "positive" if phi >= 0 else "negative",
            }
            for name, phi in ranked
        ],
    }


def run_analysis(ws: Workspace, req: AnalysisRequest) -> dict:
    """Execute the full pipeline and persist the finished report."""
    timings: dict[str, float] = {}
    cfg = ws.config
    importance_mode = req.importance_mode or cfg.importance_mode
    r2_mode = req.r2_mode or cfg.r2_mode

    with _Stage("request", timings):
        if req.level not in ("patient", "population"):
            raise BadRequest(f"unknown level {req.level!r}")
        if req.aim not in ("causal_pathway", "descriptive"):
            raise BadRequest(f"unknown aim {req.aim!r}")
        if req.granularity not in ("zip", "census_tract"):
            raise BadRequest(f"unknown granularity {req.granularity!r}")
        if req.role not in ("physician", "researcher", "public"):
            raise BadRequest(f"unknown role {req.role!r}")
        if req.role == "public" and req.level == "patient":
            raise BadRequest("patient-level analyses are not available to the public role")
        outcome_column = resolve_outcome_column(ws, req.outcome)
        tract = resolve_tract(ws, req.location) if req.level == "patient" else None

    table = ws.table
    feature_columns = [c for c in table.column_names if c != outcome_column]
    outcome_binding = table.binding_for(outcome_column)
    outcome_term = parse_term(outcome_binding.term)
    y_all = np.array(table.column(outcome_column), dtype=float)

    with _Stage("correlation", timings):
        rho = {c: stats.spearman(table.column(c), y_all) for c in feature_columns}
        correlation = stats.CorrelationReport(target=outcome_column, rho=rho)

    with _Stage("vif", timings):
        vif_report = stats.vif_filter(table, feature_columns, cfg.vif_threshold)
        kept = [c for c in feature_columns if c not in vif_report.removed]

    with _Stage("standardize", timings):
        features_table = table.select_columns(kept)
        _, params = stats.standardize(features_table)

    with _Stage("split", timings):
        spec = stats.SplitSpec(train_fraction=cfg.train_fraction, k=cfg.k, seed=req.seed)
        train_table, test_table = stats.split(table, spec)

    def design(sub: FeatureTable) -> tuple[np.ndarray, np.ndarray]:
        x = np.array([[v for v in values] for _, values in sub.select_columns(kept).rows])
        return params.transform(x), np.array(sub.column(outcome_column), dtype=float)

    X_train, y_train = design(train_table)
    X_test, y_test = design(test_table)

    with _Stage("grid_search", timings):
        grid = [
            regression.Hyperparams(C=c, epsilon=e)
            for c in cfg.grid_c
            for e in cfg.grid_epsilon
        ]
        best, cv_table = regression.grid_search(
            X_train, y_train, grid, cfg.k, req.seed, max_iter=cfg.solver_max_iter
        )

    with _Stage("train", timings):
        log = None
        log_file = None
        if cfg.solver_log:
            log_file = open(cfg.solver_log, "w", encoding="utf-8")
            log = lambda iteration, objective: log_file.write(f"{iteration}\t{objective!r}\n")
        try:
            model = regression.train_svr(
                X_train, y_train, best, max_iter=cfg.solver_max_iter, log=log
            )
        finally:
            if log_file is not None:
                log_file.close()
        model = dataclasses.replace(model, features=tuple(kept), standardization=params)

    with _Stage("evaluate", timings):
        train_metrics = regression.evaluate(model, X_train, y_train, r2_mode)
        test_metrics = regression.evaluate(model, X_test, y_test, r2_mode)

    with _Stage("importance", timings):
        importance = regression.importance(
            model, table=table, mode=importance_mode, target=outcome_column
        )
        report = regression.ModelReport(
            model=model,
            train=train_metrics,
            test=test_metrics,
            cv_table=cv_table,
            importance=importance,
            importance_mode=importance_mode,
        )

    shap_expl = None
    if req.level == "patient":
        with _Stage("shap", timings):
            background = table.select_columns(kept)
            shap_expl = attribution.shap_explain(
                model, np.array(table.row(tract))[
                    [table.column_names.index(c) for c in kept]
                ], background, subject=tract,
            )

    term_of_feature = {c: parse_term(table.binding_for(c).term) for c in kept}

    with _Stage("graph", timings):
        subject = graphstore.Subject(
            kind=req.level,
            tract=tract,
            city=ws.city if req.level == "population" else None,
        )
        graph = graphstore.seed_graph(
            ws.ontology,
            subject,
            crosswalk=ws.crosswalk if req.granularity == "zip" or req.level == "patient" else None,
            known_tracts=set(table.codes),
        )
        graphstore.attach_city_means(graph, table)
        if req.level == "patient":
            graphstore.attach_evidence(graph, table, tract)
        else:
            graphstore.attach_city_evidence(graph, table, f"city:{ws.city}")
        graphstore.enrich_from_model(
            graph, report, term_of_feature, outcome_term, expl=shap_expl
        )
        # Statistical association edges back the predictor links with the
        # screening correlations.
        outcome_metric = [
            n for n in graph.nodes.values()
            if n.kind == graphstore.METRIC and n.term == outcome_term
        ]
        for feature in kept:
            for node in list(graph.nodes.values()):
                if node.kind == graphstore.METRIC and node.term == term_of_feature[feature]:
                    for target in outcome_metric:
                        graph.assert_fact(
                            node.id, "associatedWith", target.id,
                            origin=graphstore.DATA_EVIDENCE,
                            evidence=graphstore.Evidence(kind="spearman", value=rho[feature]),
                        )
        inference = graphstore.infer(graph)
        highlight = {parse_term(t) for t in req.sdoh_filters}
        graph_doc = graphstore.export_graph(graph, highlight=highlight)

    with _Stage("pathways", timings):
        whitelist = PATIENT_WHITELIST if req.level == "patient" else POPULATION_WHITELIST
        target_node = _pathway_target(graph, outcome_term)
        pathways = (
            explain.trace_pathways(
                graph, graph.subject_id, target_node,
                whitelist=whitelist, max_len=cfg.max_path_len,
            )
            if target_node is not None
            else []
        )

    with _Stage("risk_levels", timings):
        risk = explain.risk_levels(table, model)

    with _Stage("recommendations", timings):
        templates = explain.load_templates(
            role="researcher" if req.role == "researcher" else "physician",
            path=cfg.templates_path,
        )
        recs = explain.recommendations(
            graph, graph.subject_id, templates=templates, whitelist=whitelist
        )

    # Raw scatter data with server-side univariate fits, so the dashboard
    # renders the regression panel without computing statistics locally.
    scatter_features = {}
    fits = {}
    for c in kept:
        xv = np.array(table.column(c), dtype=float)
        slope, intercept = np.polyfit(xv, y_all, 1)
        scatter_features[c] = [float(v) for v in xv]
        fits[c] = {"slope": float(slope), "intercept": float(intercept)}
    plots = {
        "outcome": {"column": outcome_column, "values": [float(v) for v in y_all]},
        "features": scatter_features,
        "fit": fits,
        "tracts": list(table.codes),
    }

    doc = {
        "request": req.to_payload(),
        "correlation": {"target": correlation.target, "rho": correlation.rho},
        "vif": {
            "threshold": vif_report.threshold,
            "vif": vif_report.vif,
            "removed": list(vif_report.removed),
            "trace": list(vif_report.trace),
        },
        "model": {
            "hyper": {"C": model.hyper.C, "epsilon": model.hyper.epsilon},
            "w": {name: w for name, w in zip(model.features, model.w)},
            "b": model.b,
            "objective": model.objective,
            "converged": model.converged,
            "train": {"rmse": train_metrics.rmse, "r2": train_metrics.r2},
            "test": {"rmse": test_metrics.rmse, "r2": test_metrics.r2},
            "cv_table": [
                {"C": hp.C, "epsilon": hp.epsilon, "mean_rmse": rmse}
                for hp, rmse in cv_table
            ],
            "importance": importance,
            "importance_mode": importance_mode,
            "r2_mode": r2_mode,
            "standardization": {
                "columns": list(params.columns),
                "mu": list(params.mu),
                "sigma": list(params.sigma),
            },
        },
        "shap": _serialize_shap(shap_expl) if shap_expl is not None else None,
        "graph": graph_doc,
        "pathways": [_serialize_pathway(p) for p in pathways],
        "risk_levels": [
            {
                "tract": r.tract,
                "predicted": r.predicted,
                "percentile": r.percentile,
                "band": r.band,
            }
            for r in risk
        ],
        "recommendations": [_serialize_explanation(e) for e in recs],
        "plots": plots,
        "inference": {"new_facts": len(inference.new_facts), "iterations": inference.iterations},
    }
    doc["id"] = content_hash(doc)
    # Snapshot the timings so the persisted bytes equal the returned doc.
    doc["timings"] = dict(timings)

    with _Stage("persist", timings):
        ws.store_report(doc, req.request_hash())
    return doc


def _pathway_target(graph: graphstore.KnowledgeGraph, outcome_term: Term) -> str | None:
    """The outcome's disease concept when an indicator axiom names one,
    otherwise the outcome metric node itself."""
    for axiom in graph.ontology.ground_axioms:
        head = axiom.head
        if (
            head.relation == "isHealthIndicatorFor"
            and isinstance(head.subject, Term)
            and head.subject == outcome_term
            and isinstance(head.object, Term)
        ):
            node = graph.nodes.get(str(head.object))
            if node is not None:
                return node.id
    for node in graph.nodes.values():
        if node.kind == graphstore.METRIC and node.term == outcome_term:
            return node.id
    return None


def rebuild_graph(ws: Workspace, doc: dict) -> graphstore.KnowledgeGraph:
    """Reconstruct the knowledge graph of a persisted report."""
    return graphstore.graph_from_document(ws.ontology, doc["graph"])
