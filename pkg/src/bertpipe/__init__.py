"""Corpus-to-pretraining-data pipeline and cross-lingual evaluation harness."""

__version__ = "0.1.0"

from .corpus import Granularity, TextUnit
from .dedup import DedupStats, ShingleIndex, dedup_corpus, duplicate_fraction, shingle
from .pretrain import MaskingConfig, TrainingInstance, build_instances, phase_datasets
from .schedule import PhaseSpec, TrainingPlan, make_plan, steps_for
from .vocab import LanguageBudget, Vocab, WordCounts, count_words, learn_wordpieces, sample_subset, tokenize

__all__ = [
    "DedupStats",
    "Granularity",
    "LanguageBudget",
    "MaskingConfig",
    "PhaseSpec",
    "ShingleIndex",
    "TextUnit",
    "TrainingInstance",
    "TrainingPlan",
    "Vocab",
    "WordCounts",
    "__version__",
    "build_instances",
    "count_words",
    "dedup_corpus",
    "duplicate_fraction",
    "learn_wordpieces",
    "make_plan",
    "phase_datasets",
    "sample_subset",
    "shingle",
    "steps_for",
    "tokenize",
]
