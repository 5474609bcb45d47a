"""Histogram gradient-boosted regression trees with leaf-wise growth and an L1 objective."""

from .binning import apply_bins, build_bins
from .boosting import GBDTConfig, GBDTModel, fit, predict, truncated
from .tree import Tree, grow_tree

__all__ = [
    "GBDTConfig",
    "GBDTModel",
    "Tree",
    "apply_bins",
    "build_bins",
    "fit",
    "grow_tree",
    "predict",
    "truncated",
]
