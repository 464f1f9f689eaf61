"""Independent reference implementations used to check the engine.

These deliberately avoid the production code paths: the SVR oracle is a
zooming dense grid over (w, b), the reasoner oracle grounds rules by
exhaustive enumeration, the VIF oracle inverts the correlation matrix, and
path enumeration is a plain recursive DFS over an adjacency list.
"""

from __future__ import annotations

import itertools

import numpy as np


def svr_objective(X, y, w, b, C, eps):
    resid = np.abs(y - (X @ w + b)) - eps
    return 0.5 * float(np.dot(w, w)) + C * float(np.maximum(resid, 0.0).sum())


def _best_intercepts(resid, eps, C, stages=6, points=33):
    """For each residual row, min over b of C*sum(max(0, |r - b| - eps)).

    Plain 1-D zooming grid per row; for a 1-D convex function the grid
    argmin is within one cell of the true argmin, so zooming is safe.
    """
    G, n = resid.shape
    lo = resid.min(axis=1) - eps
    hi = resid.max(axis=1) + eps
    best = np.full(G, np.inf)
    for _ in range(stages):
        t = np.linspace(0.0, 1.0, points)
        B = lo[:, None] + t[None, :] * (hi - lo)[:, None]  # (G, points)
        loss = np.maximum(np.abs(resid[:, None, :] - B[:, :, None]) - eps, 0.0).sum(axis=2)
        vals = C * loss
        k = vals.argmin(axis=1)
        best = np.minimum(best, vals[np.arange(G), k])
        center = B[np.arange(G), k]
        spacing = (hi - lo) / (points - 1)
        width = 4.0 * spacing
        lo = center - width / 2.0
        hi = center + width / 2.0
    return best


def svr_grid_minimum(X, y, C, eps, stages=10, points=33):
    """Dense zooming grid minimization of the SVR primal.

    The grid runs over the weights only; the intercept is minimized out
    per grid point by a nested 1-D zoom, which removes the w-b coupling
    that would otherwise trap a zooming box. The incumbent best point sits
    on every refined grid (odd point count), so stage values never regress
    and each stage shrinks gently around it. Works for 1 or 2 features.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    d = X.shape[1]
    assert d in (1, 2)

    # Any optimum satisfies 0.5*||w*||^2 <= F* <= F(0, b0), bounding w.
    resid0 = (y - np.median(y)).reshape(1, -1)
    f0 = float(_best_intercepts(resid0, eps, C)[0])
    wbound = float(np.sqrt(2.0 * f0)) + 1e-6

    centers = np.zeros(d)
    widths = np.full(d, 2.0 * max(wbound, 1e-6))
    best_val = f0
    best_w = np.zeros(d)

    for _ in range(stages):
        axes = [
            np.linspace(centers[k] - widths[k] / 2, centers[k] + widths[k] / 2, points)
            for k in range(d)
        ]
        grids = np.meshgrid(*axes, indexing="ij")
        W = np.stack([g.reshape(-1) for g in grids], axis=1)  # (G, d)
        resid = y[None, :] - W @ X.T  # (G, n)
        vals = 0.5 * (W**2).sum(axis=1) + _best_intercepts(resid, eps, C)
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val = float(vals[k])
            best_w = W[k].copy()
        centers = best_w.copy()
        widths = widths * (8.0 / (points - 1))
    return best_val, best_w


def vif_from_correlation(matrix: np.ndarray) -> np.ndarray:
    """VIFs as the diagonal of the inverse correlation matrix."""
    corr = np.corrcoef(matrix, rowvar=False)
    return np.diag(np.linalg.inv(corr))


def enumerate_simple_paths(adjacency, source, target, max_len):
    """All simple paths as edge-id tuples via plain DFS.

    ``adjacency`` maps node -> list of (edge_id, dst).
    """
    out = []

    def dfs(node, edges, visited):
        if len(edges) >= max_len:
            return
        for edge_id, dst in adjacency.get(node, ()):
            if dst in visited:
                continue
            if dst == target:
                out.append(tuple(edges + [edge_id]))
            else:
                dfs(dst, edges + [edge_id], visited | {dst})

    if source != target:
        dfs(source, [], {source})
    return out


# --- reasoner oracle ---------------------------------------------------------


def _oracle_subsumes(isa_parents, ancestor, descendant):
    if ancestor == descendant:
        return True
    frontier = [descendant]
    seen = {descendant}
    while frontier:
        cur = frontier.pop()
        for parent in isa_parents.get(cur, ()):
            if parent == ancestor:
                return True
            if parent not in seen:
                seen.add(parent)
                frontier.append(parent)
    return False


def oracle_infer(ont, graph):
    """Exhaustive-grounding forward chaining; returns the set of derived
    (subject, relation, object) triples.

    Matching semantics mirror the engine's contract: a body atom is
    satisfied by a graph edge, or by a ground type-level axiom applied to a
    node whose type the axiom's subject subsumes (the object then being the
    concept node of the axiom's object). Guards compare metric values with
    literal thresholds or city means resolved per term.
    """
    from upho.graphstore import CONCEPT
    from upho.ontology import Term, ThresholdRef, Var

    isa_parents: dict = {}
    for child, parent in ont.isa_edges:
        isa_parents.setdefault(child, set()).add(parent)

    def term_matches(wanted: Term, node) -> bool:
        return _oracle_subsumes(isa_parents, wanted, node.term)

    def resolve_threshold(node) -> float | None:
        if node.term in graph.city_means:
            return graph.city_means[node.term]
        for axiom in ont.rules:
            if axiom.body or axiom.guards:
                continue
            head = axiom.head
            if isinstance(head.subject, Term) and isinstance(head.object, Term):
                if head.object == node.term and head.subject in graph.city_means:
                    return graph.city_means[head.subject]
        return None

    triples = {
        (e.subject, e.relation, e.object) for e in graph.edges.values()
    }
    nodes = dict(graph.nodes)

    def concept_id(term: Term) -> str:
        nid = str(term)
        if nid not in nodes:
            from upho.graphstore import Node

            nodes[nid] = Node(id=nid, label=term.name, term=term, kind=CONCEPT)
        return nid

    def atom_holds(atom, subst) -> bool:
        subj = subst[atom.subject.name] if isinstance(atom.subject, Var) else None
        obj = subst[atom.object.name] if isinstance(atom.object, Var) else None

        def subject_ok(node_id):
            if isinstance(atom.subject, Var):
                return node_id == subj
            return term_matches(atom.subject, nodes[node_id])

        def object_ok(node_id):
            if isinstance(atom.object, Var):
                return node_id == obj
            return term_matches(atom.object, nodes[node_id])

        for s, r, o in triples:
            if r == atom.relation and subject_ok(s) and object_ok(o):
                return True
        for axiom in ont.rules:
            if axiom.body or axiom.guards:
                continue
            head = axiom.head
            if head.relation != atom.relation:
                continue
            if not isinstance(head.subject, Term) or not isinstance(head.object, Term):
                continue
            if str(head.object) not in nodes:
                continue
            if isinstance(atom.subject, Var):
                sub_ok = subj in nodes and term_matches(head.subject, nodes[subj])
            else:
                sub_ok = _oracle_subsumes(isa_parents, head.subject, atom.subject)
            if not sub_ok:
                continue
            if isinstance(atom.object, Var):
                if obj == str(head.object):
                    return True
            else:
                if term_matches(atom.object, nodes[str(head.object)]):
                    return True
        return False

    def guards_hold(rule, subst) -> bool:
        for guard in rule.guards:
            node = nodes[subst[guard.var]]
            if node.value is None:
                return False
            if isinstance(guard.threshold, ThresholdRef):
                limit = resolve_threshold(nodes[subst[guard.threshold.var]])
                if limit is None:
                    return False
            else:
                limit = guard.threshold
            if not guard.compare(node.value, limit):
                return False
        return True

    derived = set()
    changed = True
    while changed:
        changed = False
        for rule in ont.rules:
            var_names = sorted(
                set().union(*[a.variables() for a in rule.body]) if rule.body else set()
            )
            node_ids = list(nodes)
            for combo in itertools.product(node_ids, repeat=len(var_names)):
                subst = dict(zip(var_names, combo))
                if not all(atom_holds(a, subst) for a in rule.body):
                    continue
                if not guards_hold(rule, subst):
                    continue
                s = (
                    subst[rule.head.subject.name]
                    if isinstance(rule.head.subject, Var)
                    else concept_id(rule.head.subject)
                )
                o = (
                    subst[rule.head.object.name]
                    if isinstance(rule.head.object, Var)
                    else concept_id(rule.head.object)
                )
                triple = (s, rule.head.relation, o)
                if triple not in triples:
                    triples.add(triple)
                    derived.add(triple)
                    changed = True
    return derived
