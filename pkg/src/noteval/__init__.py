"""Evaluation harness for machine-generated consultation notes.

Loads consultation corpora with human judgements, scores notes with
lexical, edit-distance, embedding-sidecar, and concept metrics, computes
inter-evaluator agreement, and reproduces the metric/criteria
correlation study.
"""

__version__ = "0.1.0"
