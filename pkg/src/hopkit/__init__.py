"""Toolkit for RL post-training of retrieval-augmented multi-hop QA generators.

Covers the offline side of the training loop: dataset ingestion into a
unified record model, difficulty-graded training-set construction,
rule-based reward scoring of model completions, group-relative advantage
math, evaluation metrics, and a record/replay rollout client.
"""

__version__ = "0.1.0"
