"""Encoder-decoder knowledge tracing: count-based and GRU encoders, iswf decoders."""
from .counters import CounterTable, assemble_features, compute_counters
from .data import Dataset, FoldAssignment, QMatrix, StudentSequence, parse_interactions, parse_wide_matrix, split_folds
from .decoder import DecoderSpec
from .evaluation import PredictionLog, accuracy, auc, cross_validate, predict_students
from .model import Model, ModelSpec
from .training import TrainConfig, fit

__version__ = "0.1.0"
