"""Binary Greedy Network: compact binary-activated networks for tabular regression."""

from bgn.bann import BannModel, BinaryLayer, Neuron
from bgn.dataset import Dataset, SplitSpec, load_csv, split, standardize
from bgn.trainer import TrainConfig, TrainTrace, train

__all__ = [
    "BannModel",
    "BinaryLayer",
    "Dataset",
    "Neuron",
    "SplitSpec",
    "TrainConfig",
    "TrainTrace",
    "load_csv",
    "split",
    "standardize",
    "train",
]

__version__ = "0.1.0"
