import re

import numpy as np
import pytest

from oracles import enumerate_simple_paths
from upho.errors import UnknownEdge, UnknownNode
from upho.explain import (
    CAUSAL_WHITELIST,
    CityStats,
    band_of,
    explain_edge,
    explain_node,
    load_templates,
    normalized_evidence,
    recommendations,
    risk_levels,
    trace_pathways,
)
from upho.graphstore import (
    DATA_EVIDENCE,
    Evidence,
    KnowledgeGraph,
    Node,
    infer,
    load_fact_file,
)
from upho.ontology import Term, parse_ontology
from upho.regression import Hyperparams, LinearSvrModel
from upho.stats import StandardizationParams


def digit_runs(text):
    return re.findall(r"\d+(?:\.\d+)?", text)


def assert_numbers_backed_by_evidence(expl):
    haystack = " ".join(item.value for item in expl.evidence)
    for run in digit_runs(expl.text):
        assert run in haystack, f"{run!r} in text but not in evidence: {expl.text!r}"


class TestTracePathways:
    def test_textbox_red_pathway_present(self, textbox_fixpoint):
        paths = trace_pathways(textbox_fixpoint, "individual", "DO:Obesity")
        kinds = {p.kind for p in paths}
        assert "livesIn->hasMetric->isPredictorOf->isHealthIndicatorFor" in kinds
        for p in paths:
            assert p.nodes[0] == "individual"
            assert p.nodes[-1] == "DO:Obesity"

    def test_source_equals_target_gives_empty(self, textbox_fixpoint):
        assert trace_pathways(textbox_fixpoint, "individual", "individual") == []

    def test_unknown_node(self, textbox_fixpoint):
        with pytest.raises(UnknownNode):
            trace_pathways(textbox_fixpoint, "nope", "DO:Obesity")

    def test_matches_dfs_oracle_on_random_dags(self):
        rng = np.random.default_rng(70)
        ont = parse_ontology("prefix T .\nrelation r domain T:A range T:A .")
        term = Term("T", "A")
        for _ in range(40):
            n = int(rng.integers(2, 9))
            graph = KnowledgeGraph(ont)
            for i in range(n):
                graph.add_node(Node(id=f"n{i}", label=f"n{i}", term=term, kind="instance"))
            adjacency = {}
            for i in range(n):
                for j in range(n):
                    if i != j and rng.random() < 0.3:
                        edge = graph.assert_fact(f"n{i}", "r", f"n{j}")
                        adjacency.setdefault(f"n{i}", []).append((edge.id, f"n{j}"))
            paths = trace_pathways(graph, "n0", f"n{n-1}", whitelist={"r"}, max_len=6)
            expected = set(enumerate_simple_paths(adjacency, "n0", f"n{n-1}", 6))
            assert {p.edges for p in paths} == expected

    def test_all_outputs_validate_against_graph(self, textbox_fixpoint):
        paths = trace_pathways(textbox_fixpoint, "individual", "DO:Obesity")
        assert paths
        for p in paths:
            assert len(p.edges) <= 6
            for eid, src, dst in zip(p.edges, p.nodes, p.nodes[1:]):
                edge = textbox_fixpoint.edges[eid]
                assert edge.subject == src and edge.object == dst
                assert edge.relation in CAUSAL_WHITELIST
            assert len(set(p.nodes)) == len(p.nodes)
            assert 0.0 <= p.score <= 1.0

    def test_sorted_by_score_then_node_sequence(self, textbox_fixpoint):
        paths = trace_pathways(textbox_fixpoint, "individual", "DO:Obesity")
        keys = [(-p.score, p.nodes) for p in paths]
        assert keys == sorted(keys)

    def test_evidence_normalization(self):
        def edge_with(kind, value):
            from upho.graphstore import Edge

            return Edge(id="e", subject="a", relation="r", object="b",
                        origin=DATA_EVIDENCE, evidence=Evidence(kind=kind, value=value))

        from upho.graphstore import Edge

        assert normalized_evidence(Edge(id="e", subject="a", relation="r",
                                        object="b", origin=DATA_EVIDENCE)) == 0.5
        assert normalized_evidence(edge_with("importance", 100.0)) == 1.0
        assert normalized_evidence(edge_with("spearman", -0.8)) == pytest.approx(0.8)
        assert normalized_evidence(edge_with("shap", -3.0)) == pytest.approx(0.75)
        assert normalized_evidence(edge_with("prevalence", 25.0)) == pytest.approx(0.25)


class TestExplainEdge:
    def test_predictor_edge_names_importance(self, textbox_fixpoint):
        expl = explain_edge(textbox_fixpoint, "F6")
        assert "predictor" in expl.text
        assert "100.0" in expl.text
        assert_numbers_backed_by_evidence(expl)

    def test_asserted_isa_cites_namespace(self, bundled_ontology):
        from upho.graphstore import Subject, seed_graph

        graph = seed_graph(bundled_ontology, Subject(kind="patient", tract="47157010300"))
        isa = next(e for e in graph.edges.values() if e.relation == "isA")
        expl = explain_edge(graph, isa.id)
        assert expl.sources == (graph.nodes[isa.subject].term.namespace,)
        assert "classified" in expl.text

    def test_inferred_edge_lists_provenance_ids(self, textbox_fixpoint):
        [screen] = [
            e for e in textbox_fixpoint.edges.values() if e.relation == "shouldBeScreenedFor"
        ]
        expl = explain_edge(textbox_fixpoint, screen.id)
        assert "SCREEN" in expl.text
        assert "SCREEN" in expl.sources
        assert_numbers_backed_by_evidence(expl)

    def test_unknown_edge(self, textbox_fixpoint):
        with pytest.raises(UnknownEdge):
            explain_edge(textbox_fixpoint, "F999")


class TestExplainNode:
    def stats(self):
        return CityStats(
            means={Term("HIO", "%UnderPovertyLine"): 28.7},
            units={Term("HIO", "%UnderPovertyLine"): "percent"},
        )

    def graph_with_poverty_metric(self, bundled_ontology):
        graph = KnowledgeGraph(bundled_ontology)
        graph.add_node(
            Node(
                id="pov",
                label="60.8",
                term=Term("HIO", "%UnderPovertyLine"),
                kind="metric",
                value=60.8,
                units="percent",
            )
        )
        return graph

    def test_metric_compares_to_city_average(self, bundled_ontology):
        graph = self.graph_with_poverty_metric(bundled_ontology)
        expl = explain_node(graph, "pov", self.stats())
        assert "60.8%" in expl.text
        assert "28.7%" in expl.text
        assert "above" in expl.text
        assert_numbers_backed_by_evidence(expl)

    def test_concept_node_definition_cites_namespace(self, textbox_fixpoint):
        expl = explain_node(textbox_fixpoint, "DO:Obesity")
        assert "DO" in expl.text
        assert expl.sources == ("DO",)

    def test_metric_without_city_stats_renders_value_only(self, bundled_ontology):
        graph = self.graph_with_poverty_metric(bundled_ontology)
        expl = explain_node(graph, "pov", CityStats())
        assert "60.8%" in expl.text
        assert "average" not in expl.text
        assert_numbers_backed_by_evidence(expl)

    def test_role_templates_differ(self, textbox_fixpoint):
        phys = explain_edge(textbox_fixpoint, "F6", templates=load_templates("physician"))
        res = explain_edge(textbox_fixpoint, "F6", templates=load_templates("researcher"))
        assert phys.text != res.text

    def test_every_rendered_number_is_backed_by_evidence(self, textbox_fixpoint):
        # Sweep both roles over every node and edge of the inferred graph.
        for role in ("physician", "researcher"):
            templates = load_templates(role)
            stats = CityStats(
                means={Term("HIO", "%PopWLackOfPhysicalActivity"): 36.2},
                units={Term("HIO", "%PopWLackOfPhysicalActivity"): "percent"},
            )
            for node_id in textbox_fixpoint.nodes:
                assert_numbers_backed_by_evidence(
                    explain_node(textbox_fixpoint, node_id, stats, templates)
                )
            for edge_id in textbox_fixpoint.edges:
                assert_numbers_backed_by_evidence(
                    explain_edge(textbox_fixpoint, edge_id, stats, templates)
                )


def prediction_model(features):
    d = len(features)
    return LinearSvrModel(
        w=tuple([1.0] * d),
        b=0.0,
        hyper=Hyperparams(C=1, epsilon=0.1),
        objective=0.0,
        features=tuple(features),
        standardization=StandardizationParams(
            columns=tuple(features), mu=tuple([0.0] * d), sigma=tuple([1.0] * d)
        ),
    )


class TestRiskLevels:
    def test_single_tract_is_low_band(self):
        from test_tabledata import make_table

        table = make_table(["47157000100"], {"x": [3.0]})
        [level] = risk_levels(table, prediction_model(["x"]))
        assert level.percentile == 0.0
        assert level.band == "low"

    def test_three_distinct_predictions(self):
        from test_tabledata import make_table

        table = make_table(
            ["47157000100", "47157000200", "47157000300"], {"x": [1.0, 2.0, 3.0]}
        )
        levels = risk_levels(table, prediction_model(["x"]))
        assert [l.percentile for l in levels] == [0.0, 50.0, 100.0]
        assert [l.band for l in levels] == ["low", "medium", "high"]

    def test_demo_city_band_counts(self, demo_workspace):
        table = demo_workspace.table.select_columns(["lack_physical_activity"])
        levels = risk_levels(table, prediction_model(["lack_physical_activity"]))
        counts = {"low": 0, "medium": 0, "high": 0}
        for level in levels:
            counts[level.band] += 1
        assert abs(counts["low"] - 59) <= 1
        assert abs(counts["medium"] - 59) <= 1
        assert abs(counts["high"] - 60) <= 1

    def test_percentiles_monotone_in_predictions(self, demo_workspace):
        table = demo_workspace.table.select_columns(["poverty_pct"])
        levels = risk_levels(table, prediction_model(["poverty_pct"]))
        pairs = sorted((l.predicted, l.percentile) for l in levels)
        for (pa, qa), (pb, qb) in zip(pairs, pairs[1:]):
            assert qb >= qa

    def test_band_boundaries(self):
        assert band_of(33.32) == "low"
        assert band_of(33.34) == "medium"
        assert band_of(66.66) == "medium"
        assert band_of(66.67) == "high"


TWO_DISEASE_ONTOLOGY = """
prefix DO .
prefix HIO .
prefix ACESO .
prefix COPE .
prefix GISO .
concept ACESO:Patient .
ACESO:SDoH isA ACESO:RiskFactor .
COPE:smoking isA ACESO:SDoH .
COPE:drinking isA ACESO:SDoH .
DO:LungDisease isA DO:Disease .
DO:LiverDisease isA DO:Disease .
HIO:%Smokers isA HIO:Metric .
HIO:%Drinkers isA HIO:Metric .
relation livesIn domain ACESO:Patient range GISO:CensusTract .
relation hasMetric domain GISO:CensusTract range HIO:Metric .
relation indicatorOfRisk domain HIO:Metric range ACESO:RiskFactor .
relation leadsTo domain ACESO:RiskFactor range DO:Disease .
relation isExposedTo domain ACESO:Patient range ACESO:RiskFactor .
relation shouldBeScreenedFor domain ACESO:Patient range DO:Disease .
axiom S1: HIO:%Smokers indicatorOfRisk COPE:smoking .
axiom S2: HIO:%Drinkers indicatorOfRisk COPE:drinking .
axiom L1: COPE:smoking leadsTo DO:LungDisease .
axiom L2: COPE:drinking leadsTo DO:LiverDisease .
rule EXPOSE: ?p isExposedTo ?r :- ?p livesIn ?t, ?t hasMetric ?m, ?m indicatorOfRisk ?r, value(?m) >= threshold(?r) .
rule SCREEN2: ?p shouldBeScreenedFor ?d :- ?p isExposedTo ?r, ?r leadsTo ?d .
"""

TWO_DISEASE_FACTS = """
node p : ACESO:Patient .
node t : GISO:CensusTract .
node smoke : HIO:%Smokers = 80 .
node drink : HIO:%Drinkers = 40 .
fact F1: p livesIn t .
fact F2: t hasMetric smoke .
fact F3: t hasMetric drink .
threshold HIO:%Smokers 30 .
threshold HIO:%Drinkers 30 .
"""


class TestRecommendations:
    def test_textbox_yields_screening_recommendation(self, textbox_fixpoint):
        recs = recommendations(textbox_fixpoint, "individual")
        assert len(recs) == 1
        assert "Diabetes" in recs[0].text
        assert "SCREEN" in recs[0].sources
        assert "F1" in recs[0].sources and "F2" in recs[0].sources

    def test_graph_before_inference_has_none(self, textbox_graph):
        assert recommendations(textbox_graph, "individual") == []

    def test_two_screenings_ordered_by_pathway_score(self):
        ont = parse_ontology(TWO_DISEASE_ONTOLOGY)
        graph = load_fact_file(ont, TWO_DISEASE_FACTS)
        # Lung pathway gets strong model support, liver pathway weak.
        graph.assert_fact(
            "smoke", "leadsTo", "DO:LungDisease", origin="ml_derived",
            evidence=Evidence(kind="importance", value=95.0),
        )
        graph.assert_fact(
            "drink", "leadsTo", "DO:LiverDisease", origin="ml_derived",
            evidence=Evidence(kind="importance", value=5.0),
        )
        infer(graph)
        recs = recommendations(graph, "p")
        assert len(recs) == 2
        assert "LungDisease" in recs[0].text
        assert "LiverDisease" in recs[1].text

    def test_stable_across_repeated_calls(self, textbox_fixpoint):
        first = recommendations(textbox_fixpoint, "individual")
        second = recommendations(textbox_fixpoint, "individual")
        assert [(r.target, r.text, r.sources) for r in first] == [
            (r.target, r.text, r.sources) for r in second
        ]
