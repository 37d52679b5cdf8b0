"""Unsupervised phrase-based MT pipeline: python surface over the C++ core."""

from usmt._core import (
    EmbeddingSpace,
    Ibm1Result,
    NGramModel,
    TranslationSystem,
    UsmtError,
    bleu,
    collect_phrases,
    extract_phrases,
    filter_keep_count,
    fisher_pvalue,
    lexical_prob,
    make_fixture,
    phrase_score,
    run_pipeline,
    tokenize,
    topk_candidates,
    train_ibm1,
)

__all__ = [
    "EmbeddingSpace",
    "Ibm1Result",
    "NGramModel",
    "TranslationSystem",
    "UsmtError",
    "bleu",
    "collect_phrases",
    "extract_phrases",
    "filter_keep_count",
    "fisher_pvalue",
    "lexical_prob",
    "make_fixture",
    "phrase_score",
    "run_pipeline",
    "tokenize",
    "topk_candidates",
    "train_ibm1",
]

__version__ = "0.1.0"
