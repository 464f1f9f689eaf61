"""A small text DSL for ontologies: namespaced concepts, isA taxonomies,
relation signatures, and Horn rule axioms with numeric guards.

Statement forms (``.`` terminates a statement, ``#`` starts a comment):

    prefix HIO .
    concept DO:Obesity .
    DO:Obesity isA DO:Disease .
    relation leadsTo domain ACESO:RiskFactor range DO:Disease .
    axiom R1: COPE:lackOfPhysicalActivity leadsTo DO:Obesity .
    rule EXPOSE: ?p isExposedTo ?r :- ?p livesIn ?t, ?t hasMetric ?m,
        ?m indicatorOfRisk ?r, value(?m) >= threshold(?r) .

Unqualified names take the implicit ``local`` namespace. Axioms are ground
rules with an empty body. Any term mentioned in a statement is implicitly
declared as a concept, which keeps ontologies order-independent.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import (
    CyclicIsA,
    DslSyntaxError,
    UnboundHeadVariable,
    UndeclaredPrefix,
    UnknownTerm,
)

LOCAL_NS = "local"


@dataclass(frozen=True, order=True)
class Term:
    namespace: str
    name: str

    def __str__(self) -> str:
        if self.namespace == LOCAL_NS:
            return self.name
        return f"{self.namespace}:{self.name}"


@dataclass(frozen=True, order=True)
class Var:
    name: str

    def __str__(self) -> str:
        return f"?{self.name}"


@dataclass(frozen=True)
class Atom:
    relation: str
    subject: Term | Var
    object: Term | Var

    def __str__(self) -> str:
        return f"{self.subject} {self.relation} {self.object}"

    def variables(self) -> set[str]:
        out = set()
        if isinstance(self.subject, Var):
            out.add(self.subject.name)
        if isinstance(self.object, Var):
            out.add(self.object.name)
        return out


@dataclass(frozen=True)
class ThresholdRef:
    """Guard threshold resolved at inference time from city statistics."""

    var: str

    def __str__(self) -> str:
        return f"threshold(?{self.var})"


def _fmt_number(x: float) -> str:
    # The DSL has no scientific notation, so print tiny values positionally.
    text = repr(x)
    if "e" in text or "E" in text:
        text = f"{x:.12f}".rstrip("0").rstrip(".") or "0"
    return text


@dataclass(frozen=True)
class Guard:
    var: str
    op: str  # one of >=, >, <=, <
    threshold: float | ThresholdRef

    def __str__(self) -> str:
        if isinstance(self.threshold, ThresholdRef):
            return f"value(?{self.var}) {self.op} {self.threshold}"
        return f"value(?{self.var}) {self.op} {_fmt_number(self.threshold)}"

    def compare(self, value: float, threshold: float) -> bool:
        if self.op == ">=":
            return value >= threshold
        if self.op == ">":
            return value > threshold
        if self.op == "<=":
            return value <= threshold
        return value < threshold


@dataclass(frozen=True)
class RuleAxiom:
    id: str
    head: Atom
    body: tuple[Atom, ...] = ()
    guards: tuple[Guard, ...] = ()

    @property
    def is_ground(self) -> bool:
        return not self.body and not self.head.variables()


@dataclass(frozen=True)
class RelationDecl:
    name: str
    domain: Term
    range: Term


@dataclass(frozen=True)
class Ontology:
    prefixes: frozenset[str]
    concepts: frozenset[Term]
    isa_edges: frozenset[tuple[Term, Term]]  # (child, parent)
    relations: tuple[RelationDecl, ...]
    rules: tuple[RuleAxiom, ...]

    def relation(self, name: str) -> RelationDecl | None:
        for r in self.relations:
            if r.name == name:
                return r
        return None

    @property
    def relation_names(self) -> set[str]:
        return {r.name for r in self.relations}

    @property
    def ground_axioms(self) -> tuple[RuleAxiom, ...]:
        return tuple(r for r in self.rules if r.is_ground)

    def parents_of(self, term: Term) -> set[Term]:
        return {p for c, p in self.isa_edges if c == term}

    def rule_by_id(self, rule_id: str) -> RuleAxiom | None:
        for r in self.rules:
            if r.id == rule_id:
                return r
        return None


EMPTY_ONTOLOGY = Ontology(
    prefixes=frozenset({LOCAL_NS}),
    concepts=frozenset(),
    isa_edges=frozenset(),
    relations=(),
    rules=(),
)


# --- lexer ---------------------------------------------------------------

_TOKEN_SPEC = [
    ("TERM", re.compile(r"[A-Za-z_][A-Za-z0-9_]*:%?[A-Za-z0-9_%]+")),
    ("IDENT", re.compile(r"[A-Za-z_][A-Za-z0-9_]*")),
    ("NUMBER", re.compile(r"-?[0-9]+(\.[0-9]+)?")),
    ("VAR", re.compile(r"\?[A-Za-z_][A-Za-z0-9_]*")),
    ("IMPLIES", re.compile(r":-")),
    ("CMP", re.compile(r">=|<=|>|<")),
    ("EQUALS", re.compile(r"=")),
    ("COLON", re.compile(r":")),
    ("COMMA", re.compile(r",")),
    ("DOT", re.compile(r"\.")),
    ("LPAREN", re.compile(r"\(")),
    ("RPAREN", re.compile(r"\)")),
]


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        pos = 0
        while pos < len(line):
            ch = line[pos]
            if ch == "#":
                break
            if ch.isspace():
                pos += 1
                continue
            for kind, pattern in _TOKEN_SPEC:
                m = pattern.match(line, pos)
                if m:
                    tokens.append(_Token(kind, m.group(), line_no, pos + 1))
                    pos = m.end()
                    break
            else:
                raise DslSyntaxError(line_no, pos + 1, "a statement token", ch)
    return tokens


# --- parser --------------------------------------------------------------

_KEYWORDS = {"prefix", "concept", "relation", "axiom", "rule"}


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0
        self.prefixes: set[str] = {LOCAL_NS}
        self.concepts: set[Term] = set()
        self.isa: set[tuple[Term, Term]] = set()
        self.relations: list[RelationDecl] = []
        self.relation_names: set[str] = set()
        self.rules: list[RuleAxiom] = []
        self.rule_ids: set[str] = set()

    def _peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _fail(self, expected: str):
        tok = self._peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else None
            line = last.line if last else 1
            col = last.column + len(last.text) if last else 1
            raise DslSyntaxError(line, col, expected, "end of input")
        raise DslSyntaxError(tok.line, tok.column, expected, tok.text)

    def _take(self, kind: str, expected: str) -> _Token:
        tok = self._peek()
        if tok is None or tok.kind != kind:
            self._fail(expected)
        self.pos += 1
        return tok

    def _take_word(self, word: str):
        tok = self._peek()
        if tok is None or tok.kind != "IDENT" or tok.text != word:
            self._fail(f"'{word}'")
        self.pos += 1

    def _term(self, tok: _Token) -> Term:
        if tok.kind == "TERM":
            ns, name = tok.text.split(":", 1)
            if ns not in self.prefixes:
                raise UndeclaredPrefix(
                    f"line {tok.line}: namespace {ns!r} has no prefix declaration"
                )
            term = Term(ns, name)
        else:
            term = Term(LOCAL_NS, tok.text)
        self.concepts.add(term)
        return term

    def _parse_term(self, expected: str = "a term") -> Term:
        tok = self._peek()
        if tok is None or tok.kind not in ("TERM", "IDENT"):
            self._fail(expected)
        self.pos += 1
        return self._term(tok)

    def _parse_term_or_var(self) -> Term | Var:
        tok = self._peek()
        if tok is not None and tok.kind == "VAR":
            self.pos += 1
            return Var(tok.text[1:])
        return self._parse_term("a term or ?variable")

    def _parse_atom(self) -> Atom:
        subject = self._parse_term_or_var()
        rel = self._take("IDENT", "a relation name").text
        obj = self._parse_term_or_var()
        return Atom(relation=rel, subject=subject, object=obj)

    def _parse_guard(self) -> Guard:
        self._take_word("value")
        self._take("LPAREN", "'('")
        var = self._take("VAR", "a ?variable").text[1:]
        self._take("RPAREN", "')'")
        op = self._take("CMP", "a comparison operator").text
        tok = self._peek()
        if tok is not None and tok.kind == "NUMBER":
            self.pos += 1
            return Guard(var=var, op=op, threshold=float(tok.text))
        if tok is not None and tok.kind == "IDENT" and tok.text == "threshold":
            self.pos += 1
            self._take("LPAREN", "'('")
            ref = self._take("VAR", "a ?variable").text[1:]
            self._take("RPAREN", "')'")
            return Guard(var=var, op=op, threshold=ThresholdRef(ref))
        self._fail("a number or threshold(?var)")

    def _guard_ahead(self) -> bool:
        tok = self._peek()
        nxt = self.tokens[self.pos + 1] if self.pos + 1 < len(self.tokens) else None
        return (
            tok is not None
            and tok.kind == "IDENT"
            and tok.text == "value"
            and nxt is not None
            and nxt.kind == "LPAREN"
        )

    def _add_rule(self, rule: RuleAxiom, line: int):
        bound = set()
        for atom in rule.body:
            bound |= atom.variables()
        unbound_head = rule.head.variables() - bound
        if unbound_head:
            raise UnboundHeadVariable(
                f"line {line}: head variable(s) {sorted(unbound_head)} of rule "
                f"{rule.id} never occur in the body"
            )
        for guard in rule.guards:
            guard_vars = {guard.var}
            if isinstance(guard.threshold, ThresholdRef):
                guard_vars.add(guard.threshold.var)
            missing = guard_vars - bound
            if missing:
                raise UnboundHeadVariable(
                    f"line {line}: guard variable(s) {sorted(missing)} of rule "
                    f"{rule.id} never occur in the body"
                )
        if rule.id in self.rule_ids:
            self.rules = [r for r in self.rules if r.id != rule.id]
        self.rule_ids.add(rule.id)
        self.rules.append(rule)

    def parse(self) -> Ontology:
        while self._peek() is not None:
            tok = self._peek()
            if tok.kind == "IDENT" and tok.text in _KEYWORDS:
                getattr(self, f"_stmt_{tok.text}")()
            elif tok.kind in ("TERM", "IDENT"):
                self._stmt_isa()
            else:
                self._fail("a statement keyword or a term")
        self._check_acyclic()
        return Ontology(
            prefixes=frozenset(self.prefixes),
            concepts=frozenset(self.concepts),
            isa_edges=frozenset(self.isa),
            relations=tuple(self.relations),
            rules=tuple(self.rules),
        )

    def _stmt_prefix(self):
        self._take_word("prefix")
        ns = self._take("IDENT", "a namespace name").text
        self.prefixes.add(ns)
        self._take("DOT", "'.'")

    def _stmt_concept(self):
        self._take_word("concept")
        self._parse_term()
        self._take("DOT", "'.'")

    def _stmt_isa(self):
        line = self._peek().line
        child = self._parse_term()
        self._take_word("isA")
        parent = self._parse_term()
        self._take("DOT", "'.'")
        if child == parent:
            raise CyclicIsA(f"line {line}: {child} isA itself")
        self.isa.add((child, parent))

    def _stmt_relation(self):
        self._take_word("relation")
        name = self._take("IDENT", "a relation name").text
        self._take_word("domain")
        domain = self._parse_term()
        self._take_word("range")
        rng = self._parse_term()
        self._take("DOT", "'.'")
        decl = RelationDecl(name=name, domain=domain, range=rng)
        if name in self.relation_names:
            self.relations = [r for r in self.relations if r.name != name]
        self.relation_names.add(name)
        self.relations.append(decl)

    def _stmt_axiom(self):
        self._take_word("axiom")
        ident = self._take("IDENT", "an axiom id")
        self._take("COLON", "':'")
        subject = self._parse_term()
        rel = self._take("IDENT", "a relation name").text
        obj = self._parse_term()
        self._take("DOT", "'.'")
        self._add_rule(
            RuleAxiom(id=ident.text, head=Atom(rel, subject, obj)), ident.line
        )

    def _stmt_rule(self):
        self._take_word("rule")
        ident = self._take("IDENT", "a rule id")
        self._take("COLON", "':'")
        head = self._parse_atom()
        self._take("IMPLIES", "':-'")
        body: list[Atom] = []
        guards: list[Guard] = []
        if self._guard_ahead():
            guards.append(self._parse_guard())
        else:
            body.append(self._parse_atom())
        while self._peek() is not None and self._peek().kind == "COMMA":
            self.pos += 1
            if self._guard_ahead():
                guards.append(self._parse_guard())
            elif guards:
                self._fail("a guard (atoms must precede guards)")
            else:
                body.append(self._parse_atom())
        self._take("DOT", "'.'")
        self._add_rule(
            RuleAxiom(id=ident.text, head=head, body=tuple(body), guards=tuple(guards)),
            ident.line,
        )

    def _check_acyclic(self):
        children: dict[Term, set[Term]] = {}
        for child, parent in self.isa:
            children.setdefault(parent, set()).add(child)
        WHITE, GRAY, BLACK = 0, 1, 2
        state: dict[Term, int] = {}

        def visit(node: Term, trail: list[Term]):
            state[node] = GRAY
            for nxt in children.get(node, ()):
                if state.get(nxt, WHITE) == GRAY:
                    cycle = " -> ".join(str(t) for t in trail + [node, nxt])
                    raise CyclicIsA(f"isA cycle: {cycle}")
                if state.get(nxt, WHITE) == WHITE:
                    visit(nxt, trail + [node])
            state[node] = BLACK

        for term in {t for pair in self.isa for t in pair}:
            if state.get(term, WHITE) == WHITE:
                visit(term, [])


def parse_ontology(text: str) -> Ontology:
    """Parse DSL text into a validated Ontology."""
    return _Parser(_tokenize(text)).parse()


def print_ontology(ont: Ontology) -> str:
    """Render an ontology back to DSL text (parses to an equal ontology)."""
    lines: list[str] = []
    for ns in sorted(ont.prefixes - {LOCAL_NS}):
        lines.append(f"prefix {ns} .")
    for term in sorted(ont.concepts):
        lines.append(f"concept {term} .")
    for child, parent in sorted(ont.isa_edges):
        lines.append(f"{child} isA {parent} .")
    for rel in ont.relations:
        lines.append(f"relation {rel.name} domain {rel.domain} range {rel.range} .")
    for rule in ont.rules:
        if not rule.body and not rule.guards:
            lines.append(f"axiom {rule.id}: {rule.head} .")
        else:
            parts = [str(a) for a in rule.body] + [str(g) for g in rule.guards]
            lines.append(f"rule {rule.id}: {rule.head} :- {', '.join(parts)} .")
    return "\n".join(lines) + "\n"


def subsumes(ont: Ontology, ancestor: Term, descendant: Term) -> bool:
    """True iff ancestor == descendant or an isA path leads up to ancestor."""
    for term in (ancestor, descendant):
        if term not in ont.concepts:
            raise UnknownTerm(f"term {term} is not declared")
    if ancestor == descendant:
        return True
    frontier = [descendant]
    seen = {descendant}
    while frontier:
        current = frontier.pop()
        for parent in ont.parents_of(current):
            if parent == ancestor:
                return True
            if parent not in seen:
                seen.add(parent)
                frontier.append(parent)
    return False


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    message: str


def _compatible(ont: Ontology, declared: Term, actual: Term) -> bool:
    try:
        return subsumes(ont, declared, actual)
    except UnknownTerm:
        return False


def validate_rule(ont: Ontology, rule: RuleAxiom) -> list[Diagnostic]:
    """Static checks for one rule; returns diagnostics instead of raising."""
    out: list[Diagnostic] = []
    var_constraints: dict[str, list[tuple[str, Term]]] = {}

    def check_atom(atom: Atom, where: str):
        decl = ont.relation(atom.relation)
        if decl is None:
            out.append(
                Diagnostic(
                    "UnknownRelation",
                    f"{where} of {rule.id}: relation {atom.relation!r} is not declared",
                )
            )
            return
        for position, value, expected in (
            ("subject", atom.subject, decl.domain),
            ("object", atom.object, decl.range),
        ):
            if isinstance(value, Term):
                if not _compatible(ont, expected, value):
                    out.append(
                        Diagnostic(
                            "TypeMismatch",
                            f"{where} of {rule.id}: {value} is outside the declared "
                            f"{position} type {expected} of {atom.relation}",
                        )
                    )
            else:
                var_constraints.setdefault(value.name, []).append(
                    (atom.relation, expected)
                )

    check_atom(rule.head, "head")
    for atom in rule.body:
        check_atom(atom, "body")

    bound = set()
    for atom in rule.body:
        bound |= atom.variables()
    for name in sorted(rule.head.variables() - bound):
        out.append(
            Diagnostic(
                "UnboundHeadVariable",
                f"head variable ?{name} of {rule.id} never occurs in the body",
            )
        )
    for guard in rule.guards:
        names = {guard.var}
        if isinstance(guard.threshold, ThresholdRef):
            names.add(guard.threshold.var)
        for name in sorted(names - bound):
            out.append(
                Diagnostic(
                    "UnboundGuardVariable",
                    f"guard variable ?{name} of {rule.id} never occurs in the body",
                )
            )

    for name, constraints in sorted(var_constraints.items()):
        for i in range(len(constraints)):
            for j in range(i + 1, len(constraints)):
                (rel_a, t_a), (rel_b, t_b) = constraints[i], constraints[j]
                if not (_compatible(ont, t_a, t_b) or _compatible(ont, t_b, t_a)):
                    out.append(
                        Diagnostic(
                            "TypeMismatch",
                            f"variable ?{name} of {rule.id} is typed {t_a} by "
                            f"{rel_a} but {t_b} by {rel_b}",
                        )
                    )
    return out


def validate_ontology(ont: Ontology) -> list[Diagnostic]:
    """Diagnostics for every rule in the ontology."""
    out: list[Diagnostic] = []
    for rule in ont.rules:
        out.extend(validate_rule(ont, rule))
    return out
