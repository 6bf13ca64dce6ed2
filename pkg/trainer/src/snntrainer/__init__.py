"""Surrogate-gradient trainer for exported spiking network architectures."""

from .model import ArchitectureError, MotifNet, build_trainable
from .train import TrainSpec, TrainingDiverged, rank_topk, train_and_eval

__version__ = "0.1.0"
