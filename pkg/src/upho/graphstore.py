"""Typed knowledge graph with forward-chaining inference and provenance.

Nodes are concepts, instances, or valued metrics; edges are facts with an
origin (asserted, data_evidence, ml_derived, inferred) and, for inferred
facts, the rule and supporting fact ids that produced them.

Rule matching is two-tier:

* graph edges satisfy a body atom and contribute their fact id to the
  derived fact's provenance;
* type-level ground axioms satisfy an atom as ontological background and
  contribute nothing. An axiom ``T_s rel T_o`` applies to any node whose
  type is subsumed by ``T_s``; its object resolves to the concept node of
  ``T_o``. Where both tiers produce the same variable bindings the edge
  match wins, so provenance always prefers concrete facts.

This split mirrors how a derived exposure can cite only the residence and
measurement facts while the taxonomic knowledge stays implicit.

Fact ids mint as ``F<n>`` in assertion order; inferred ids as ``D<n>``.
Guard thresholds resolve from the attached city means: directly for metric
terms, or through a ground axiom linking a metric term to the guarded
concept. A graph lacking the needed mean simply fails the guard.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DslSyntaxError,
    InferenceOverflow,
    TractNotInTable,
    UnknownFact,
    UnknownNode,
    UnknownTract,
    UnmappedFeature,
)
from .ontology import (
    LOCAL_NS,
    Atom,
    Ontology,
    RuleAxiom,
    Term,
    ThresholdRef,
    Var,
    _tokenize,
    subsumes,
)
from .tabledata import FeatureTable, ZipTractCrosswalk

CONCEPT = "concept"
INSTANCE = "instance"
METRIC = "metric"
LITERAL = "literal"

ASSERTED = "asserted"
DATA_EVIDENCE = "data_evidence"
ML_DERIVED = "ml_derived"
INFERRED = "inferred"


@dataclass(frozen=True)
class Node:
    id: str
    label: str
    term: Term
    kind: str
    value: float | None = None
    units: str | None = None

    def __post_init__(self):
        if self.kind in (METRIC, LITERAL) and self.value is None:
            raise ValueError(f"{self.kind} node {self.id!r} must carry a value")


@dataclass(frozen=True)
class Evidence:
    kind: str  # importance | shap | spearman | prevalence
    value: float


@dataclass(frozen=True)
class Edge:
    id: str
    subject: str
    relation: str
    object: str
    origin: str
    evidence: Evidence | None = None
    provenance: tuple[str, ...] = ()
    alternatives: tuple[tuple[str, ...], ...] = ()


@dataclass
class InferenceResult:
    new_facts: list[Edge]
    iterations: int


@dataclass(frozen=True)
class ProvenanceTree:
    fact_id: str
    rule_id: str | None
    children: tuple["ProvenanceTree", ...]


@dataclass(frozen=True)
class Subject:
    kind: str  # "patient" | "population"
    tract: str | None = None
    city: str | None = None


class KnowledgeGraph:
    """Mutable store; mutate under a single writer, snapshot via export."""

    def __init__(self, ontology: Ontology):
        self.ontology = ontology
        self.nodes: dict[str, Node] = {}
        self.edges: dict[str, Edge] = {}
        self.city_means: dict[Term, float] = {}
        self.subject_id: str | None = None
        self.at_fixpoint = False
        self._fact_counter = 0
        self._derived_counter = 0
        self._triple_index: dict[tuple[str, str, str], str] = {}

    # --- construction ---------------------------------------------------

    def add_node(self, node: Node) -> Node:
        existing = self.nodes.get(node.id)
        if existing is not None:
            return existing
        self.nodes[node.id] = node
        return node

    def concept_node(self, term: Term) -> Node:
        return self.add_node(
            Node(id=str(term), label=term.name, term=term, kind=CONCEPT)
        )

    def _mint_fact_id(self) -> str:
        # Explicitly assigned ids (fact files) may occupy slots; skip them.
        while True:
            self._fact_counter += 1
            candidate = f"F{self._fact_counter}"
            if candidate not in self.edges:
                return candidate

    def _mint_derived_id(self) -> str:
        while True:
            self._derived_counter += 1
            candidate = f"D{self._derived_counter}"
            if candidate not in self.edges:
                return candidate

    def find_edge(self, subject: str, relation: str, object_: str) -> Edge | None:
        eid = self._triple_index.get((subject, relation, object_))
        return self.edges.get(eid) if eid is not None else None

    def assert_fact(
        self,
        subject: str,
        relation: str,
        object_: str,
        origin: str = ASSERTED,
        evidence: Evidence | None = None,
        fact_id: str | None = None,
    ) -> Edge:
        """Add a non-inferred fact; idempotent on (subject, relation, object)."""
        if subject not in self.nodes or object_ not in self.nodes:
            raise UnknownNode(f"endpoint missing for {subject} {relation} {object_}")
        existing = self.find_edge(subject, relation, object_)
        if existing is not None:
            return existing
        if fact_id is not None and fact_id in self.edges:
            raise UnknownFact(f"fact id {fact_id!r} is already in use")
        eid = fact_id if fact_id is not None else self._mint_fact_id()
        edge = Edge(id=eid, subject=subject, relation=relation, object=object_,
                    origin=origin, evidence=evidence)
        self.edges[eid] = edge
        self._triple_index[(subject, relation, object_)] = eid
        self.at_fixpoint = False
        return edge

    def _add_inferred(self, subject: str, relation: str, object_: str,
                      provenance: tuple[str, ...]) -> Edge | None:
        """Add an inferred edge, or append alternative provenance. Returns
        the edge only when it is genuinely new."""
        existing = self.find_edge(subject, relation, object_)
        if existing is not None:
            if provenance != existing.provenance and provenance not in existing.alternatives:
                self.edges[existing.id] = replace(
                    existing, alternatives=existing.alternatives + (provenance,)
                )
            return None
        eid = self._mint_derived_id()
        edge = Edge(id=eid, subject=subject, relation=relation, object=object_,
                    origin=INFERRED, provenance=provenance)
        self.edges[eid] = edge
        self._triple_index[(subject, relation, object_)] = eid
        return edge

    # --- queries ----------------------------------------------------------

    def node(self, node_id: str) -> Node:
        if node_id not in self.nodes:
            raise UnknownNode(f"no node {node_id!r}")
        return self.nodes[node_id]

    def edge(self, edge_id: str) -> Edge:
        if edge_id not in self.edges:
            raise UnknownFact(f"no fact {edge_id!r}")
        return self.edges[edge_id]


def _term_matches(ont: Ontology, wanted: Term, node: Node) -> bool:
    if wanted == node.term:
        return True
    if wanted in ont.concepts and node.term in ont.concepts:
        return subsumes(ont, wanted, node.term)
    return False


def resolve_threshold(graph: KnowledgeGraph, node: Node) -> float | None:
    """City-mean threshold for a guarded node, if resolvable."""
    if node.term in graph.city_means:
        return graph.city_means[node.term]
    for axiom in graph.ontology.ground_axioms:
        head = axiom.head
        if (
            isinstance(head.subject, Term)
            and isinstance(head.object, Term)
            and head.object == node.term
            and head.subject in graph.city_means
        ):
            return graph.city_means[head.subject]
    return None


def _match_atom(graph: KnowledgeGraph, atom: Atom, bindings: dict[str, str]):
    """Yield (new_bindings, support_fact_id_or_None) for one body atom."""
    ont = graph.ontology

    def side_ok(pattern: Term | Var, node: Node, bound: dict[str, str]) -> dict[str, str] | None:
        if isinstance(pattern, Var):
            if pattern.name in bound:
                return bound if bound[pattern.name] == node.id else None
            out = dict(bound)
            out[pattern.name] = node.id
            return out
        return bound if _term_matches(ont, pattern, node) else None

    produced: set[tuple[tuple[str, str], ...]] = set()

    for edge in list(graph.edges.values()):
        if edge.relation != atom.relation:
            continue
        after_subject = side_ok(atom.subject, graph.nodes[edge.subject], bindings)
        if after_subject is None:
            continue
        after_object = side_ok(atom.object, graph.nodes[edge.object], after_subject)
        if after_object is None:
            continue
        produced.add(tuple(sorted(after_object.items())))
        yield after_object, edge.id

    # Type-level axioms as background knowledge (no provenance contribution).
    for axiom in ont.ground_axioms:
        head = axiom.head
        if head.relation != atom.relation:
            continue
        if not isinstance(head.subject, Term) or not isinstance(head.object, Term):
            continue
        object_node = graph.nodes.get(str(head.object))
        if object_node is None:
            continue

        # Subject side: the axiom covers every node typed under its subject.
        if isinstance(atom.subject, Var):
            if atom.subject.name in bindings:
                node = graph.nodes[bindings[atom.subject.name]]
                subject_candidates = [node] if _term_matches(ont, head.subject, node) else []
            else:
                subject_candidates = [
                    n for n in graph.nodes.values() if _term_matches(ont, head.subject, n)
                ]
        else:
            ok = head.subject == atom.subject or (
                head.subject in ont.concepts
                and atom.subject in ont.concepts
                and subsumes(ont, head.subject, atom.subject)
            )
            subject_candidates = [None] if ok else []

        for cand in subject_candidates:
            after = dict(bindings)
            if isinstance(atom.subject, Var) and cand is not None:
                after[atom.subject.name] = cand.id
            after_object = side_ok(atom.object, object_node, after)
            if after_object is None:
                continue
            sig = tuple(sorted(after_object.items()))
            if sig in produced:
                continue
            produced.add(sig)
            yield after_object, None


def _match_rule(graph: KnowledgeGraph, rule: RuleAxiom):
    """Yield (bindings, supports) for every satisfied body+guard instantiation."""

    def recurse(index: int, bindings: dict[str, str], supports: tuple[str, ...]):
        if index == len(rule.body):
            for guard in rule.guards:
                node = graph.nodes[bindings[guard.var]]
                if node.value is None:
                    return
                if isinstance(guard.threshold, ThresholdRef):
                    ref_node = graph.nodes[bindings[guard.threshold.var]]
                    limit = resolve_threshold(graph, ref_node)
                    if limit is None:
                        return
                else:
                    limit = guard.threshold
                if not guard.compare(node.value, limit):
                    return
            yield bindings, supports
            return
        for new_bindings, support in _match_atom(graph, rule.body[index], bindings):
            new_supports = supports + ((support,) if support is not None else ())
            yield from recurse(index + 1, new_bindings, new_supports)

    yield from recurse(0, {}, ())


def _head_endpoint(graph: KnowledgeGraph, pattern: Term | Var, bindings: dict[str, str]) -> str:
    if isinstance(pattern, Var):
        return bindings[pattern.name]
    return graph.concept_node(pattern).id


def infer(graph: KnowledgeGraph) -> InferenceResult:
    """Apply all rules to fixpoint (naive evaluation).

    Each round scans every rule against the current edge set and adds the
    newly derived edges at the end of the round. A derivation whose triple
    already exists contributes alternative provenance instead of a new
    edge. The round after the last productive one confirms the fixpoint.
    """
    ont = graph.ontology
    new_facts: list[Edge] = []
    iterations = 0
    productive = 0
    while True:
        iterations += 1
        # Productive rounds are bounded by the triple space; the final
        # fixpoint-confirming round is free. The cap tracks node growth
        # from auto-created head concepts.
        cap = max(1, len(graph.nodes)) ** 2 * max(1, len(ont.relations))
        if productive > cap:
            raise InferenceOverflow(
                f"inference exceeded {cap} productive rounds; rules likely generate unboundedly"
            )
        pending: list[tuple[str, str, str, tuple[str, ...]]] = []
        for rule in ont.rules:
            for bindings, supports in _match_rule(graph, rule):
                subject = _head_endpoint(graph, rule.head.subject, bindings)
                object_ = _head_endpoint(graph, rule.head.object, bindings)
                seen: set[str] = set()
                dedup = tuple(
                    s for s in supports if not (s in seen or seen.add(s))
                )
                pending.append((subject, rule.head.relation, object_, (rule.id,) + dedup))
        added = False
        for subject, relation, object_, provenance in pending:
            edge = graph._add_inferred(subject, relation, object_, provenance)
            if edge is not None:
                new_facts.append(edge)
                added = True
        if not added:
            break
        productive += 1
    graph.at_fixpoint = True
    return InferenceResult(new_facts=new_facts, iterations=iterations)


def provenance_tree(graph: KnowledgeGraph, fact_id: str) -> ProvenanceTree:
    """Expand a fact's primary derivation into a tree of rule applications."""
    edge = graph.edge(fact_id)
    if edge.origin != INFERRED or not edge.provenance:
        return ProvenanceTree(fact_id=fact_id, rule_id=None, children=())
    rule_id, *supports = edge.provenance
    return ProvenanceTree(
        fact_id=fact_id,
        rule_id=rule_id,
        children=tuple(provenance_tree(graph, s) for s in supports),
    )


def provenance_closure(graph: KnowledgeGraph, fact_id: str) -> set[str]:
    """All rule and fact ids reachable through any recorded derivation."""
    out: set[str] = set()
    stack = [fact_id]
    while stack:
        fid = stack.pop()
        if fid in out:
            continue
        out.add(fid)
        edge = graph.edges.get(fid)
        if edge is None:
            continue  # a rule id
        for prov in (edge.provenance,) + edge.alternatives:
            if not prov:
                continue
            rule_id, *supports = prov
            out.add(rule_id)
            stack.extend(supports)
    out.discard(fact_id)
    return out


# --- construction from ontology + data ------------------------------------


def _rule_concept_terms(ont: Ontology) -> list[Term]:
    """Concept terms mentioned in rule heads and bodies, declaration order."""
    out: list[Term] = []
    seen: set[Term] = set()
    for rule in ont.rules:
        for atom in (rule.head, *rule.body):
            for side in (atom.subject, atom.object):
                if isinstance(side, Term) and side not in seen:
                    seen.add(side)
                    out.append(side)
    return out


def seed_graph(
    ont: Ontology,
    subject: Subject,
    crosswalk: ZipTractCrosswalk | None = None,
    known_tracts: set[str] | None = None,
) -> KnowledgeGraph:
    """Build the preliminary graph: the subject, its geography, and the
    concept nodes reachable from the loaded rule axioms."""
    graph = KnowledgeGraph(ont)

    patient_term = _find_term(ont, "Patient")
    population_term = _find_term(ont, "Population")
    tract_term = _find_term(ont, "CensusTract")
    zip_term = _find_term(ont, "ZipCode")
    city_term = _find_term(ont, "City")
    neighborhood_term = _find_term(ont, "Neighborhood")

    if subject.kind == "patient":
        if subject.tract is None:
            raise UnknownTract("patient subject requires a tract code")
        if known_tracts is not None and subject.tract not in known_tracts:
            raise UnknownTract(f"tract {subject.tract} is not in the workspace table")
        person = graph.add_node(
            Node(id="individual", label="individual", term=patient_term, kind=INSTANCE)
        )
        tract = graph.add_node(
            Node(id=subject.tract, label=subject.tract, term=tract_term, kind=INSTANCE)
        )
        graph.subject_id = person.id
        graph.assert_fact(person.id, "livesIn", tract.id)
        _assert_type(graph, person, patient_term)
        _assert_type(graph, tract, tract_term)
        if crosswalk is not None:
            zip_code = crosswalk.zip_of_tract(subject.tract)
            if zip_code is not None:
                zip_node = graph.add_node(
                    Node(id=f"zip:{zip_code}", label=zip_code, term=zip_term, kind=INSTANCE)
                )
                graph.assert_fact(zip_node.id, "hasTract", tract.id)
                _assert_type(graph, zip_node, zip_term)
        hood = graph.add_node(
            Node(
                id=f"neighborhood:{subject.tract}",
                label=f"neighborhood {subject.tract}",
                term=neighborhood_term,
                kind=INSTANCE,
            )
        )
        graph.assert_fact(tract.id, "representsA", hood.id)
        _assert_type(graph, hood, neighborhood_term)
    elif subject.kind == "population":
        city_name = subject.city or "city"
        pop = graph.add_node(
            Node(id="population", label="population", term=population_term, kind=INSTANCE)
        )
        city = graph.add_node(
            Node(id=f"city:{city_name}", label=city_name, term=city_term, kind=INSTANCE)
        )
        graph.subject_id = pop.id
        graph.assert_fact(pop.id, "locatedIn", city.id)
        _assert_type(graph, pop, population_term)
        _assert_type(graph, city, city_term)
    else:
        raise ValueError(f"unknown subject kind {subject.kind!r}")

    for term in _rule_concept_terms(ont):
        graph.concept_node(term)
    return graph


def _find_term(ont: Ontology, name: str) -> Term:
    for term in sorted(ont.concepts):
        if term.name == name:
            return term
    return Term(LOCAL_NS, name)


def _assert_type(graph: KnowledgeGraph, node: Node, term: Term):
    if term in graph.ontology.concepts:
        concept = graph.concept_node(term)
        graph.assert_fact(node.id, "isA", concept.id)


def metric_node_id(tract_code: str, term: Term) -> str:
    return f"m:{tract_code}:{term}"


def _format_value(value: float) -> str:
    return f"{value:g}"


def attach_evidence(graph: KnowledgeGraph, table: FeatureTable, tract: str) -> list[str]:
    """Attach one tract's measurements as metric nodes.

    Adds a valued metric node and a ``hasMetric`` edge per bound column,
    plus instance-level health-indicator edges projected from the type
    axioms (a metric whose term indicates a disease points at that disease
    concept). Idempotent: re-attaching returns the same fact ids.
    """
    if tract not in set(table.codes):
        raise TractNotInTable(f"tract {tract} is not in the table")
    tract_node = graph.nodes.get(tract)
    if tract_node is None:
        tract_node = graph.add_node(
            Node(id=tract, label=tract, term=_find_term(graph.ontology, "CensusTract"),
                 kind=INSTANCE)
        )
    values = table.row(tract)
    fact_ids: list[str] = []
    for binding, value in zip(table.bindings, values):
        term = _parse_binding_term(graph.ontology, binding.term)
        node = graph.add_node(
            Node(
                id=metric_node_id(tract, term),
                label=_format_value(value),
                term=term,
                kind=METRIC,
                value=float(value),
                units=binding.units.value,
            )
        )
        edge = graph.assert_fact(
            tract_node.id, "hasMetric", node.id, origin=DATA_EVIDENCE,
            evidence=Evidence(kind="prevalence", value=float(value)),
        )
        fact_ids.append(edge.id)
        for axiom in graph.ontology.ground_axioms:
            head = axiom.head
            if (
                head.relation == "isHealthIndicatorFor"
                and isinstance(head.subject, Term)
                and isinstance(head.object, Term)
                and head.subject == term
            ):
                target = graph.concept_node(head.object)
                edge = graph.assert_fact(node.id, head.relation, target.id,
                                         origin=DATA_EVIDENCE)
                fact_ids.append(edge.id)
    return fact_ids


def attach_city_means(graph: KnowledgeGraph, table: FeatureTable):
    """Record per-term city means used to resolve guard thresholds."""
    matrix = np.array([values for _, values in table.rows], dtype=float)
    for i, binding in enumerate(table.bindings):
        term = _parse_binding_term(graph.ontology, binding.term)
        graph.city_means[term] = float(matrix[:, i].mean())


def attach_city_evidence(graph: KnowledgeGraph, table: FeatureTable, city_node_id: str) -> list[str]:
    """Population-level analogue of attach_evidence: city-mean metrics."""
    city = graph.node(city_node_id)
    matrix = np.array([values for _, values in table.rows], dtype=float)
    fact_ids: list[str] = []
    for i, binding in enumerate(table.bindings):
        term = _parse_binding_term(graph.ontology, binding.term)
        mean = float(matrix[:, i].mean())
        node = graph.add_node(
            Node(
                id=metric_node_id("city", term),
                label=_format_value(mean),
                term=term,
                kind=METRIC,
                value=mean,
                units=binding.units.value,
            )
        )
        edge = graph.assert_fact(
            city.id, "hasMetric", node.id, origin=DATA_EVIDENCE,
            evidence=Evidence(kind="prevalence", value=mean),
        )
        fact_ids.append(edge.id)
        for axiom in graph.ontology.ground_axioms:
            head = axiom.head
            if (
                head.relation == "isHealthIndicatorFor"
                and isinstance(head.subject, Term)
                and head.subject == term
                and isinstance(head.object, Term)
            ):
                target = graph.concept_node(head.object)
                edge = graph.assert_fact(node.id, head.relation, target.id,
                                         origin=DATA_EVIDENCE)
                fact_ids.append(edge.id)
    return fact_ids


def _parse_binding_term(ont: Ontology, text: str) -> Term:
    if ":" in text:
        ns, name = text.split(":", 1)
        return Term(ns, name)
    return Term(LOCAL_NS, text)


def enrich_from_model(
    graph: KnowledgeGraph,
    report,
    term_of_feature: dict[str, Term],
    outcome_term: Term,
    expl=None,
) -> list[str]:
    """Add model-derived edges from a trained model report.

    ``isPredictorOf`` edges run from each feature's metric node to the
    outcome metric node, carrying the 0-100 importance as evidence. When a
    SHAP explanation is supplied, ``contributesTo`` edges carry the signed
    per-feature contribution.
    """
    importance: dict[str, float] = report.importance if report is not None else {}
    shap_phi = expl.phi if expl is not None else None
    fact_ids: list[str] = []
    targets = [
        node for node in graph.nodes.values()
        if node.kind == METRIC and node.term == outcome_term
    ]
    if not targets and importance:
        raise UnmappedFeature(f"no metric node for outcome term {outcome_term}")
    for feature, score in importance.items():
        if feature not in term_of_feature:
            raise UnmappedFeature(f"feature {feature!r} has no ontology term")
        term = term_of_feature[feature]
        sources = [
            node for node in graph.nodes.values()
            if node.kind == METRIC and node.term == term
        ]
        if not sources:
            raise UnmappedFeature(f"no metric node for feature {feature!r} ({term})")
        for source in sources:
            for target in targets:
                if source.id == target.id:
                    continue
                edge = graph.assert_fact(
                    source.id, "isPredictorOf", target.id, origin=ML_DERIVED,
                    evidence=Evidence(kind="importance", value=float(score)),
                )
                fact_ids.append(edge.id)
                if shap_phi is not None and feature in shap_phi:
                    edge = graph.assert_fact(
                        source.id, "contributesTo", target.id, origin=ML_DERIVED,
                        evidence=Evidence(kind="shap", value=float(shap_phi[feature])),
                    )
                    fact_ids.append(edge.id)
    return fact_ids


# --- fact files ------------------------------------------------------------


class _FactCursor:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, kind: str, expected: str):
        tok = self.peek()
        if tok is None or tok.kind != kind:
            line = tok.line if tok else (self.tokens[-1].line if self.tokens else 1)
            col = tok.column if tok else 1
            raise DslSyntaxError(line, col, expected, tok.text if tok else "end of input")
        self.pos += 1
        return tok

    def take_name(self, expected: str):
        tok = self.peek()
        if tok is None or tok.kind not in ("TERM", "IDENT"):
            line = tok.line if tok else 1
            col = tok.column if tok else 1
            raise DslSyntaxError(line, col, expected, tok.text if tok else "end of input")
        self.pos += 1
        return tok


EVIDENCE_KINDS = ("importance", "shap", "spearman", "prevalence")


def load_fact_file(ont: Ontology, text: str) -> KnowledgeGraph:
    """Build a graph from a fact file.

    Statements::

        node lpa49 : HIO:%PopWLackOfPhysicalActivity = 49 .
        fact F2: tract10300 hasMetric lpa49 .
        fact F6: lpa49 isPredictorOf obs46 importance=100 .
        threshold HIO:%PopWLackOfPhysicalActivity 36.2 .

    Fact endpoints name declared nodes (bare identifiers) or concept terms
    (namespace-qualified). Fact ids come from the file, so derivations cite
    the same labels the file uses. Threshold statements record the city
    mean used by guard resolution without becoming facts themselves.
    """
    graph = KnowledgeGraph(ont)
    for term in _rule_concept_terms(ont):
        graph.concept_node(term)
    cur = _FactCursor(_tokenize(text))

    def to_term(tok) -> Term:
        if tok.kind == "TERM":
            ns, name = tok.text.split(":", 1)
            return Term(ns, name)
        return Term(LOCAL_NS, tok.text)

    def endpoint(tok) -> str:
        if tok.kind == "TERM":
            return graph.concept_node(to_term(tok)).id
        if tok.text in graph.nodes:
            return tok.text
        raise UnknownNode(f"line {tok.line}: node {tok.text!r} is not declared")

    while cur.peek() is not None:
        tok = cur.take("IDENT", "'node', 'fact' or 'threshold'")
        if tok.text == "node":
            ident = cur.take("IDENT", "a node id")
            cur.take("COLON", "':'")
            term = to_term(cur.take_name("a term"))
            value = None
            if cur.peek() is not None and cur.peek().kind == "EQUALS":
                cur.pos += 1
                value = float(cur.take("NUMBER", "a number").text)
            kind = METRIC if value is not None else INSTANCE
            label = _format_value(value) if value is not None else ident.text
            graph.add_node(
                Node(id=ident.text, label=label, term=term, kind=kind, value=value)
            )
            cur.take("DOT", "'.'")
        elif tok.text == "fact":
            fact_id = cur.take("IDENT", "a fact id").text
            cur.take("COLON", "':'")
            subject = endpoint(cur.take_name("a node id or term"))
            relation = cur.take("IDENT", "a relation name").text
            object_ = endpoint(cur.take_name("a node id or term"))
            evidence = None
            nxt = cur.peek()
            if nxt is not None and nxt.kind == "IDENT" and nxt.text in EVIDENCE_KINDS:
                cur.pos += 1
                cur.take("EQUALS", "'='")
                evidence = Evidence(
                    kind=nxt.text, value=float(cur.take("NUMBER", "a number").text)
                )
            origin = (
                ML_DERIVED
                if evidence is not None and evidence.kind in ("importance", "shap")
                else ASSERTED
            )
            graph.assert_fact(subject, relation, object_, origin=origin,
                              evidence=evidence, fact_id=fact_id)
            cur.take("DOT", "'.'")
        elif tok.text == "threshold":
            term = to_term(cur.take_name("a term"))
            graph.city_means[term] = float(cur.take("NUMBER", "a number").text)
            cur.take("DOT", "'.'")
        else:
            raise DslSyntaxError(
                tok.line, tok.column, "'node', 'fact' or 'threshold'", tok.text
            )
    return graph


# --- export ----------------------------------------------------------------


def export_graph(graph: KnowledgeGraph, highlight: set[Term] | None = None) -> dict:
    """Emit the wire-format graph document."""
    highlight = highlight or set()
    nodes = []
    for node in graph.nodes.values():
        flagged = False
        for term in highlight:
            if term == node.term:
                flagged = True
                break
            if term in graph.ontology.concepts and node.term in graph.ontology.concepts:
                if subsumes(graph.ontology, term, node.term):
                    flagged = True
                    break
        entry: dict = {
            "id": node.id,
            "label": node.label,
            "ns": node.term.namespace,
            "kind": node.kind,
        }
        if node.value is not None:
            entry["value"] = node.value
        if node.units is not None:
            entry["units"] = node.units
        entry["highlighted"] = flagged
        nodes.append(entry)
    edges = []
    for edge in graph.edges.values():
        entry = {
            "id": edge.id,
            "src": edge.subject,
            "rel": edge.relation,
            "dst": edge.object,
            "origin": edge.origin,
        }
        if edge.evidence is not None:
            entry["evidence"] = {"kind": edge.evidence.kind, "value": edge.evidence.value}
        if edge.provenance:
            entry["provenance"] = list(edge.provenance)
        edges.append(entry)
    return {"nodes": nodes, "edges": edges}


def graph_from_document(ont: Ontology, doc: dict) -> KnowledgeGraph:
    """Rebuild a graph from an exported document (for offline tracing).

    Concept terms recover from node ids; instance terms recover from their
    isA edges where present.
    """
    graph = KnowledgeGraph(ont)
    for entry in doc["nodes"]:
        ns = entry["ns"]
        if entry["kind"] == CONCEPT:
            raw = entry["id"]
            name = raw.split(":", 1)[1] if ":" in raw else raw
            term = Term(ns, name)
        else:
            term = Term(ns, entry["label"])
        graph.add_node(
            Node(
                id=entry["id"],
                label=entry["label"],
                term=term,
                kind=entry["kind"],
                value=entry.get("value"),
                units=entry.get("units"),
            )
        )
    for entry in doc["edges"]:
        edge = Edge(
            id=entry["id"],
            subject=entry["src"],
            relation=entry["rel"],
            object=entry["dst"],
            origin=entry["origin"],
            evidence=Evidence(**entry["evidence"]) if "evidence" in entry else None,
            provenance=tuple(entry.get("provenance", ())),
        )
        graph.edges[edge.id] = edge
        graph._triple_index[(edge.subject, edge.relation, edge.object)] = edge.id
    for edge in graph.edges.values():
        if edge.relation == "isA":
            src = graph.nodes.get(edge.subject)
            dst = graph.nodes.get(edge.object)
            if src is not None and dst is not None and src.kind != CONCEPT:
                graph.nodes[src.id] = replace(src, term=dst.term)
    for entry in doc["nodes"]:
        if entry["kind"] == METRIC and entry["id"].startswith("m:"):
            parts = entry["id"].split(":", 2)
            if len(parts) == 3:
                raw = parts[2]
                ns, _, name = raw.partition(":")
                term = Term(ns, name) if name else Term(LOCAL_NS, raw)
                node = graph.nodes[entry["id"]]
                graph.nodes[node.id] = replace(node, term=term)
    return graph
