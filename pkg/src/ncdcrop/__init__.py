"""Training-free pixel time-series classification with compression distances.

Pipeline: equal-width symbolic quantization -> cross-transformed symbol
sequences -> multi-scale normalized compression distance -> kNN.
"""

from .classifier import Prediction, classify_all, knn_predict
from .compressors import Compressor, LengthCache, compressed_length, joint_compressed_length
from .dataset import (
    Dataset, Pixel, Split, global_extrema, load_dataset, sample_few_shot,
    split_stratified, subsample_protocol,
)
from .distance import DistanceMatrix, distance_matrix, mncd, ncd, whole_ncd
from .embedding import SymbolicEmbedding, cross_transform, flatten
from .metrics import (
    ConfusionMatrix, EvaluationReport, TrialAggregate, aggregate_trials,
    average_accuracy, confusion, mean_iou, overall_accuracy,
)
from .symbolic import (
    Alphabet, Breakpoints, SymbolicPixel, build_breakpoints, quantize_value,
    symbolize_pixel,
)

__version__ = "0.1.0"
