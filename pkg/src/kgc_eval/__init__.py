"""kgc-eval: entity-ranking evaluation toolkit for knowledge graph completion.

Micro (per-answer) and macro (per-question, IR-style) metrics under the
filtered setting, TREC-style pool construction with trivial-triple
filtering, a two-annotator judgment campaign with adjudication, and
meta-evaluation of metrics (rank correlation, pooling-depth sweeps,
subsample stability, discriminative power).
"""

__version__ = "0.1.0"
