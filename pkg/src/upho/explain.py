"""Pathway tracing, hover explanations, risk levels, and recommendations.

All operations read graph snapshots; none mutate. Explanation text is
rendered from tab-separated template files so different user roles can get
different verbosity by swapping template sets. Every number that appears in
rendered text is also present in the explanation's structured evidence
list, which keeps the prose auditable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources as importlib_resources

import numpy as np

from .errors import UnknownEdge, UntrainedModel
from .graphstore import (
    CONCEPT,
    INFERRED,
    LITERAL,
    METRIC,
    ML_DERIVED,
    Edge,
    KnowledgeGraph,
    Node,
    provenance_tree,
)
from .ontology import Term
from .regression import LinearSvrModel
from .stats import average_ranks
from .tabledata import FeatureTable

CAUSAL_WHITELIST = frozenset(
    {
        "livesIn",
        "representsA",
        "hasMetric",
        "hasPhysicalCharacteristic",
        "isPredictorOf",
        "contributesTo",
        "isHealthIndicatorFor",
        "leadsTo",
        "isRiskFactorOf",
        "isExposedTo",
    }
)

DEFAULT_MAX_PATH_LEN = 6
NEUTRAL_EVIDENCE = 0.5

LOW_BAND_LIMIT = 100.0 / 3.0
HIGH_BAND_LIMIT = 200.0 / 3.0


@dataclass(frozen=True)
class Pathway:
    edges: tuple[str, ...]
    nodes: tuple[str, ...]
    score: float
    kind: str  # relation chain, e.g. "livesIn->hasMetric->isPredictorOf"


@dataclass(frozen=True)
class EvidenceItem:
    name: str
    value: str


@dataclass(frozen=True)
class Explanation:
    target: str
    text: str
    evidence: tuple[EvidenceItem, ...]
    sources: tuple[str, ...]


@dataclass(frozen=True)
class RiskLevel:
    tract: str
    predicted: float
    percentile: float
    band: str  # low | medium | high


@dataclass(frozen=True)
class CityStats:
    """Per-term context used when explaining metric nodes."""

    means: dict[Term, float] = field(default_factory=dict)
    units: dict[Term, str] = field(default_factory=dict)


def normalized_evidence(edge: Edge) -> float:
    """Map an edge's evidence to [0, 1]; unscored edges are neutral 0.5.

    importance and prevalence arrive on a 0-100 scale; spearman is already
    in [-1, 1] and scores by magnitude; signed SHAP values map through
    |v| / (1 + |v|), which is bounded and order-preserving in |v|.
    """
    if edge.evidence is None:
        return NEUTRAL_EVIDENCE
    kind, value = edge.evidence.kind, edge.evidence.value
    if kind in ("importance", "prevalence"):
        return min(1.0, max(0.0, value / 100.0))
    if kind == "spearman":
        return min(1.0, abs(value))
    if kind == "shap":
        return abs(value) / (1.0 + abs(value))
    return NEUTRAL_EVIDENCE


def trace_pathways(
    graph: KnowledgeGraph,
    source: str,
    target: str,
    whitelist: frozenset[str] | set[str] = CAUSAL_WHITELIST,
    max_len: int = DEFAULT_MAX_PATH_LEN,
) -> list[Pathway]:
    """All simple directed paths from source to target over whitelisted
    relations, at most max_len edges, best evidence first."""
    graph.node(source)
    graph.node(target)
    out_edges: dict[str, list[Edge]] = {}
    for edge in graph.edges.values():
        if edge.relation in whitelist:
            out_edges.setdefault(edge.subject, []).append(edge)

    found: list[Pathway] = []

    def walk(node_id: str, path_edges: list[Edge], visited: set[str]):
        if len(path_edges) >= max_len:
            return
        for edge in out_edges.get(node_id, ()):
            if edge.object in visited:
                continue
            path_edges.append(edge)
            if edge.object == target:
                scores = [normalized_evidence(e) for e in path_edges]
                found.append(
                    Pathway(
                        edges=tuple(e.id for e in path_edges),
                        nodes=(source,) + tuple(e.object for e in path_edges),
                        score=sum(scores) / len(scores),
                        kind="->".join(e.relation for e in path_edges),
                    )
                )
            else:
                visited.add(edge.object)
                walk(edge.object, path_edges, visited)
                visited.remove(edge.object)
            path_edges.pop()

    walk(source, [], {source})
    found.sort(key=lambda p: (-p.score, p.nodes))
    return found


# --- templates --------------------------------------------------------------


def load_templates(role: str = "physician", path=None) -> dict[str, str]:
    """Load relation-keyed templates: ``relation<TAB>template`` lines."""
    if path is not None:
        text = open(path, encoding="utf-8").read()
    else:
        name = "templates_researcher.tsv" if role == "researcher" else "templates_physician.tsv"
        text = (
            importlib_resources.files("upho")
            .joinpath(f"resources/{name}")
            .read_text(encoding="utf-8")
        )
    out: dict[str, str] = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        key, _, template = line.partition("\t")
        out[key.strip()] = template.strip()
    return out


def format_quantity(value: float, units: str | None) -> str:
    """One decimal place; percent units carry their sign."""
    text = f"{value:.1f}"
    if units == "percent":
        return f"{text}%"
    return text


def _node_display(node: Node) -> str:
    if node.kind == METRIC:
        return node.term.name
    if node.kind == CONCEPT:
        return node.label
    return node.label


def explain_edge(
    graph: KnowledgeGraph,
    edge_id: str,
    city_stats: CityStats | None = None,
    templates: dict[str, str] | None = None,
) -> Explanation:
    """Render the hover text for an edge."""
    if edge_id not in graph.edges:
        raise UnknownEdge(f"no edge {edge_id!r}")
    edge = graph.edges[edge_id]
    templates = templates or load_templates()
    subject = graph.nodes[edge.subject]
    obj = graph.nodes[edge.object]

    evidence: list[EvidenceItem] = [
        EvidenceItem("subject", subject.label),
        EvidenceItem("object", obj.label),
        EvidenceItem("relation", edge.relation),
    ]
    fields = {
        "subject": _node_display(subject),
        "object": _node_display(obj),
        "relation": edge.relation,
        "value": "",
        "city_mean": "",
    }
    evidence.append(EvidenceItem("subject_name", fields["subject"]))
    evidence.append(EvidenceItem("object_name", fields["object"]))
    if edge.evidence is not None:
        fields["value"] = format_quantity(edge.evidence.value, None)
        evidence.append(EvidenceItem(edge.evidence.kind, fields["value"]))

    template = templates.get(edge.relation, templates.get("edge.default", "{subject} {object}."))
    text = template.format(**fields)

    sources: list[str] = []
    if edge.origin == ML_DERIVED:
        suffix = templates.get("edge.ml.suffix", "")
        if suffix:
            text += " " + suffix.format(**fields)
    elif edge.origin == INFERRED and edge.provenance:
        rule_id, *support = edge.provenance
        sources.append(rule_id)
        sources.extend(support)
        suffix = templates.get("edge.inferred.suffix", "")
        cited = ", ".join(edge.provenance)
        if suffix:
            text += " " + suffix.format(provenance=cited, **fields)
        evidence.append(EvidenceItem("provenance", cited))
    else:
        sources.append(subject.term.namespace)

    return Explanation(
        target=edge_id,
        text=text,
        evidence=tuple(evidence),
        sources=tuple(sources),
    )


def explain_node(
    graph: KnowledgeGraph,
    node_id: str,
    city_stats: CityStats | None = None,
    templates: dict[str, str] | None = None,
) -> Explanation:
    """Render the hover text for a node.

    Metric nodes report their value against the city average when the city
    stats carry one; concept nodes get a definition sentence citing their
    namespace.
    """
    node = graph.node(node_id)
    templates = templates or load_templates()
    evidence: list[EvidenceItem] = [EvidenceItem("label", node.label)]
    sources = (node.term.namespace,)

    if node.kind in (METRIC, LITERAL) and node.value is not None:
        value_text = format_quantity(node.value, node.units)
        evidence.append(EvidenceItem("value", value_text))
        mean = None if city_stats is None else city_stats.means.get(node.term)
        if mean is not None:
            mean_text = format_quantity(mean, node.units)
            direction = "above" if node.value >= mean else "below"
            evidence.append(EvidenceItem("city_mean", mean_text))
            evidence.append(EvidenceItem("direction", direction))
            template = templates.get(
                "node.metric",
                "{name}: {value}, {direction} the city average of {city_mean}.",
            )
            text = template.format(
                name=node.term.name,
                value=value_text,
                direction=direction,
                city_mean=mean_text,
            )
        else:
            template = templates.get("node.literal", "{name}: {value}.")
            text = template.format(name=node.term.name, value=value_text)
        evidence.append(EvidenceItem("name", node.term.name))
    elif node.kind == CONCEPT:
        template = templates.get(
            "node.concept", "{name} is a concept from the {ns} vocabulary."
        )
        text = template.format(name=node.label, ns=node.term.namespace)
        evidence.append(EvidenceItem("ns", node.term.namespace))
    else:
        template = templates.get("node.instance", "{label}, a {type}.")
        text = template.format(label=node.label, type=node.term.name)
        evidence.append(EvidenceItem("type", node.term.name))

    return Explanation(
        target=node_id, text=text, evidence=tuple(evidence), sources=sources
    )


# --- risk levels ------------------------------------------------------------


def band_of(percentile: float) -> str:
    if percentile < LOW_BAND_LIMIT:
        return "low"
    if percentile >= HIGH_BAND_LIMIT:
        return "high"
    return "medium"


def risk_levels(table: FeatureTable, model: LinearSvrModel) -> list[RiskLevel]:
    """Within-city percentile banding of model predictions per tract."""
    if model.standardization is None:
        raise UntrainedModel("model carries no standardization parameters")
    features = list(model.features)
    sub = table.select_columns(features)
    matrix = np.array([values for _, values in sub.rows], dtype=float)
    preds = model.predict_raw(matrix)
    n = len(preds)
    if n == 1:
        return [RiskLevel(tract=sub.rows[0][0].code, predicted=float(preds[0]),
                          percentile=0.0, band="low")]
    ranks = average_ranks(preds)
    out = []
    for (unit, _), pred, rank in zip(sub.rows, preds, ranks):
        pct = (rank - 1.0) / (n - 1) * 100.0
        out.append(
            RiskLevel(tract=unit.code, predicted=float(pred),
                      percentile=float(pct), band=band_of(float(pct)))
        )
    return out


# --- recommendations --------------------------------------------------------


def _tree_ids(tree) -> list[str]:
    out = [tree.fact_id] if tree.rule_id is None else [tree.rule_id, tree.fact_id]
    for child in tree.children:
        out.extend(_tree_ids(child))
    seen: set[str] = set()
    return [x for x in out if not (x in seen or seen.add(x))]


def recommendations(
    graph: KnowledgeGraph,
    subject: str,
    templates: dict[str, str] | None = None,
    whitelist: frozenset[str] | set[str] = CAUSAL_WHITELIST,
) -> list[Explanation]:
    """Actionable inferred facts for the subject, strongest pathway first.

    One entry per inferred edge from the subject whose relation starts with
    ``should``; each embeds the ids of its provenance tree. Ordering uses
    the best-scoring causal pathway from the subject to the recommended
    target, falling back to neutral when no pathway exists.
    """
    graph.node(subject)
    templates = templates or load_templates()
    candidates = [
        e
        for e in graph.edges.values()
        if e.subject == subject and e.origin == INFERRED and e.relation.startswith("should")
    ]
    scored: list[tuple[float, str, Explanation]] = []
    for edge in candidates:
        paths = trace_pathways(graph, subject, edge.object, whitelist=whitelist)
        score = paths[0].score if paths else 0.0
        tree = provenance_tree(graph, edge.id)
        base = explain_edge(graph, edge.id, templates=templates)
        entry = Explanation(
            target=edge.id,
            text=base.text,
            evidence=base.evidence,
            sources=tuple(_tree_ids(tree)),
        )
        scored.append((score, edge.id, entry))
    scored.sort(key=lambda item: (-item[0], item[1]))
    return [entry for _, _, entry in scored]
