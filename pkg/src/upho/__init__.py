"""Explainable population-health observatory engine.

Links tract-level health and social-determinant tables, trains an
interpretable linear support-vector regressor, builds an ontology-grounded
knowledge graph enriched with statistical evidence, infers causal pathways
with full provenance, and serves explanations over HTTP and a CLI.
"""

__version__ = "0.1.0"
