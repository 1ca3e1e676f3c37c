"""Desk-scale benchmark pipeline for multi-label diagnosis-code
assignment from clinical discharge summaries.

Subpackages and modules:

- corpus: CSV ingestion, label catalogs, dataset assembly, splits, and
  a seeded synthetic corpus generator.
- textproc: tokenizer, stopwords, vocabularies.
- features: tf-idf, CBOW word embeddings, averaged document vectors,
  padded index sequences.
- neuralcore: numpy layers with exact gradients, BCE, SGD/RMSprop,
  gradient checking, checkpoints.
- models: LR/RF one-vs-rest baselines and FNN/CNN/RNN/LSTM/GRU families
  with presets and early stopping.
- metrics: example-based metrics, hamming, macro AUC, AP/PR curves,
  precision@k; oracles: brute-force counterparts.
- harness: config-driven cached pipeline; cli: command-line front end.
"""

__version__ = "0.1.0"
