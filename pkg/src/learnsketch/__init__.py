"""Learned CountSketch positions and values for sketched low-rank approximation and k-means."""

from ._backend import get_backend, set_backend
from .matlin import InvalidInputError
from .sketch import (CountSketch, StackedSketch, apply_left, apply_right, random_countsketch,
                     stack, to_dense)
from .lra import LowRankFactors, LraSketchSet, sketch_lowrank
from .kmeans import Clustering, sketch_kmeans
from .learn import GreedyConfig, TrainSet, greedy_positions, optimize_values, train_pipeline

__version__ = "0.1.0"

__all__ = [
    "Clustering", "CountSketch", "GreedyConfig", "InvalidInputError", "LowRankFactors",
    "LraSketchSet", "StackedSketch", "TrainSet", "apply_left", "apply_right", "get_backend",
    "greedy_positions", "optimize_values", "random_countsketch", "set_backend",
    "sketch_kmeans", "sketch_lowrank", "stack", "to_dense", "train_pipeline",
]
