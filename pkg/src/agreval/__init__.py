"""Workbench for German syntactic-agreement minimal pairs.

Generates controlled grammatical/ungrammatical sentence pairs from
feature-annotated context-free grammars and evaluates sentence scorers
(including external neural language models) on their ability to prefer
the grammatical variant.
"""

__version__ = "0.1.0"

from .grammar import Grammar, GrammarError, enumerate_sentences, parse_grammar, validate_grammar
from .pairs import MinimalPair, generate_corpus, read_pairs, write_pairs
from .scoring import SentenceScore, cross_entropy

__all__ = [
    "Grammar",
    "GrammarError",
    "MinimalPair",
    "SentenceScore",
    "__version__",
    "cross_entropy",
    "enumerate_sentences",
    "generate_corpus",
    "parse_grammar",
    "read_pairs",
    "validate_grammar",
    "write_pairs",
]
