"""Statutory entailment via retrieval and analogical reasoning.

The library turns corpora of statute-case entailment pairs into labeled
analogy quadruples, scores quadruples with vector arithmetic or external
classifiers, and answers entailment queries by retrieving prototype pairs
and majority-voting over per-neighbor analogy verdicts.
"""

__version__ = "0.1.0"

from analex.corpus import Case, Corpus, EntailmentLabel, Statute
from analex.quadgen import AnalogyLabel, PairRef, QuadDataset, Quadruple

__all__ = [
    "AnalogyLabel",
    "Case",
    "Corpus",
    "EntailmentLabel",
    "PairRef",
    "QuadDataset",
    "Quadruple",
    "Statute",
    "__version__",
]
