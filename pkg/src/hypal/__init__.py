"""Hypothesis-driven active learning over molecular feature tables.

Candidate structure-property equations are generated from a small data
subset (operator expansion + L1 sparsification), wrapped as prior mean
functions of Matérn Gaussian processes, and set to compete in a
reward-driven epsilon-greedy exploration loop over the unseen pool.
"""

from hypal.data import (
    FeatureTable,
    MoleculeRecord,
    DatasetPartition,
    histogram,
    load_feature_table,
    partition_first_n,
    write_feature_table,
)
from hypal.hypotheses import (
    Hypothesis,
    ParamPrior,
    load_bundled_hypotheses,
    load_hypotheses,
    save_hypotheses,
)

__all__ = [
    "FeatureTable",
    "MoleculeRecord",
    "DatasetPartition",
    "histogram",
    "load_feature_table",
    "partition_first_n",
    "write_feature_table",
    "Hypothesis",
    "ParamPrior",
    "load_bundled_hypotheses",
    "load_hypotheses",
    "save_hypotheses",
]

__version__ = "0.1.0"
