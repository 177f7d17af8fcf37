"""Hybrid missing-value imputation: association rules with partial matching, kNN fallback."""

from .dataset import (
    CATEGORICAL,
    CONTINUOUS,
    AttributeSchema,
    CorruptionMask,
    Dataset,
    ItemCodebook,
    build_codebook,
    discretize,
    inject_missing,
    load_table,
    to_transactions,
)
from .benchmarks import fetch_benchmarks, load_benchmark

__version__ = "0.1.0"
