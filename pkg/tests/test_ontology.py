import itertools

import pytest

from upho.errors import (
    CyclicIsA,
    DslSyntaxError,
    UnboundHeadVariable,
    UndeclaredPrefix,
    UnknownTerm,
)
from upho.ontology import (
    Atom,
    RuleAxiom,
    Term,
    ThresholdRef,
    Var,
    parse_ontology,
    print_ontology,
    subsumes,
    validate_ontology,
    validate_rule,
)

TAXONOMY = """
prefix ACESO .
prefix COPE .
concept ACESO:RiskFactor .
ACESO:SDoH isA ACESO:RiskFactor .
COPE:lackOfTransportation isA ACESO:SDoH .
COPE:poverty isA ACESO:SDoH .
"""


class TestParse:
    def test_ground_axiom(self):
        text = """
prefix COPE .
prefix DO .
relation leadsTo domain COPE:lackOfPhysicalActivity range DO:Obesity .
axiom R1: COPE:lackOfPhysicalActivity leadsTo DO:Obesity .
"""
        ont = parse_ontology(text)
        [rule] = ont.rules
        assert rule.id == "R1"
        assert rule.body == ()
        assert rule.head.relation == "leadsTo"
        assert rule.head.subject == Term("COPE", "lackOfPhysicalActivity")
        assert rule.is_ground

    def test_empty_input(self):
        ont = parse_ontology("")
        assert not ont.concepts
        assert not ont.rules

    def test_comments_only(self):
        ont = parse_ontology("# nothing here\n   # at all\n")
        assert not ont.concepts

    def test_undeclared_prefix(self):
        with pytest.raises(UndeclaredPrefix):
            parse_ontology("XX:Foo isA RiskFactor .")

    def test_local_namespace_needs_no_prefix(self):
        ont = parse_ontology("Foo isA RiskFactor .")
        assert Term("local", "Foo") in ont.concepts

    def test_duplicate_declarations_idempotent(self):
        text = "prefix DO .\nconcept DO:Obesity .\nconcept DO:Obesity .\nprefix DO .\n"
        ont = parse_ontology(text)
        assert len(ont.concepts) == 1

    def test_rule_with_guards(self):
        text = """
prefix HIO .
relation hasMetric domain Area range HIO:Metric .
relation flaggedIn domain Area range Area .
rule G1: ?t flaggedIn ?t :- ?t hasMetric ?m, value(?m) >= 30.5, value(?m) < threshold(?m) .
"""
        ont = parse_ontology(text)
        [rule] = ont.rules
        assert len(rule.guards) == 2
        assert rule.guards[0].threshold == 30.5
        assert rule.guards[1].threshold == ThresholdRef("m")

    def test_unbound_head_variable_rejected(self):
        text = """
relation r domain A range A .
rule BAD: ?x r ?y :- ?x r ?x .
"""
        with pytest.raises(UnboundHeadVariable):
            parse_ontology(text)

    def test_unbound_guard_variable_rejected(self):
        text = """
relation r domain A range A .
rule BAD: ?x r ?x :- ?x r ?x, value(?q) >= 3 .
"""
        with pytest.raises(UnboundHeadVariable):
            parse_ontology(text)

    def test_cyclic_isa_rejected(self):
        with pytest.raises(CyclicIsA):
            parse_ontology("A isA B .\nB isA C .\nC isA A .")

    def test_self_loop_rejected(self):
        with pytest.raises(CyclicIsA):
            parse_ontology("A isA A .")

    def test_syntax_error_carries_position(self):
        with pytest.raises(DslSyntaxError) as err:
            parse_ontology("concept Obesity\nconcept X .")
        assert err.value.line == 2
        assert "'.'" in err.value.expected

    def test_unlexable_character(self):
        with pytest.raises(DslSyntaxError) as err:
            parse_ontology("concept @bad .")
        assert err.value.line == 1
        assert err.value.column == 9

    def test_statement_order_independence(self):
        statements = [
            "prefix DO .",
            "concept DO:Obesity .",
            "DO:Obesity isA DO:Disease .",
            "relation leadsTo domain DO:Disease range DO:Disease .",
        ]
        base = parse_ontology("\n".join(statements))
        for perm in itertools.permutations(statements):
            text = "\n".join(perm)
            if perm.index(statements[0]) > perm.index(statements[1]):
                continue  # prefix must precede its uses
            if perm.index(statements[0]) > perm.index(statements[2]):
                continue
            if perm.index(statements[0]) > perm.index(statements[3]):
                continue
            assert parse_ontology(text) == base


class TestRoundTrip:
    def test_bundled_ontology_round_trips(self, bundled_ontology):
        printed = print_ontology(bundled_ontology)
        assert parse_ontology(printed) == bundled_ontology

    def test_guard_thresholds_round_trip(self):
        text = """
relation r domain A range A .
rule G: ?x r ?x :- ?x r ?x, value(?x) >= 0.001 .
"""
        ont = parse_ontology(text)
        assert parse_ontology(print_ontology(ont)) == ont


class TestSubsumes:
    def test_reflexive(self):
        ont = parse_ontology(TAXONOMY)
        risk = Term("ACESO", "RiskFactor")
        assert subsumes(ont, risk, risk)

    def test_transitive_chain(self):
        ont = parse_ontology(TAXONOMY)
        assert subsumes(
            ont, Term("ACESO", "RiskFactor"), Term("COPE", "lackOfTransportation")
        )

    def test_siblings_unrelated(self):
        ont = parse_ontology(TAXONOMY)
        assert not subsumes(ont, Term("COPE", "poverty"), Term("COPE", "lackOfTransportation"))
        assert not subsumes(ont, Term("COPE", "lackOfTransportation"), Term("COPE", "poverty"))

    def test_antisymmetric_on_fixture(self):
        ont = parse_ontology(TAXONOMY)
        terms = sorted(ont.concepts)
        for a in terms:
            for b in terms:
                if a != b:
                    assert not (subsumes(ont, a, b) and subsumes(ont, b, a))

    def test_unknown_term(self):
        ont = parse_ontology(TAXONOMY)
        with pytest.raises(UnknownTerm):
            subsumes(ont, Term("DO", "Nope"), Term("ACESO", "RiskFactor"))


class TestValidateRule:
    def test_bundled_rules_are_clean(self, bundled_ontology):
        assert validate_ontology(bundled_ontology) == []

    def test_well_typed_ground_axiom(self, bundled_ontology):
        rule = bundled_ontology.rule_by_id("R3")
        assert validate_rule(bundled_ontology, rule) == []

    def test_unbound_head_variable_diagnostic(self, bundled_ontology):
        rule = RuleAxiom(
            id="BAD",
            head=Atom("leadsTo", Var("nowhere"), Term("DO", "Obesity")),
            body=(Atom("leadsTo", Term("COPE", "poverty"), Term("DO", "Obesity")),),
        )
        kinds = {d.kind for d in validate_rule(bundled_ontology, rule)}
        assert "UnboundHeadVariable" in kinds

    def test_type_mismatch_diagnostic(self, bundled_ontology):
        # A disease in the subject slot of leadsTo (declared for risk factors).
        rule = RuleAxiom(
            id="ILL",
            head=Atom("leadsTo", Term("DO", "Diabetes"), Term("DO", "Obesity")),
        )
        kinds = {d.kind for d in validate_rule(bundled_ontology, rule)}
        assert "TypeMismatch" in kinds

    def test_unknown_relation_diagnostic(self, bundled_ontology):
        rule = RuleAxiom(
            id="NRL", head=Atom("notARelation", Term("DO", "Obesity"), Term("DO", "Diabetes"))
        )
        kinds = {d.kind for d in validate_rule(bundled_ontology, rule)}
        assert "UnknownRelation" in kinds

    def test_incompatible_variable_typing_diagnostic(self, bundled_ontology):
        # ?x used both as a patient (livesIn subject) and a disease
        # (isRiskFactorOf subject).
        rule = RuleAxiom(
            id="VAR",
            head=Atom("isRiskFactorOf", Var("x"), Term("DO", "Diabetes")),
            body=(
                Atom("livesIn", Var("x"), Var("t")),
                Atom("isRiskFactorOf", Var("x"), Var("d")),
            ),
        )
        kinds = {d.kind for d in validate_rule(bundled_ontology, rule)}
        assert "TypeMismatch" in kinds
