"""Moment and tail bounds for decoupled Gaussian chaos, with exact and Monte-Carlo oracles."""

__version__ = "0.1.0"

from .errors import CapacityError, PostconditionError, ValidationError
from .norms import AlsConfig, NormResult, alpha_s, alphas, injective_norm, partition_norm
from .partitions import SetPartition, enumerate_partitions, partitions_of_size
from .tensor import CoefficientTensor, load_tensor, new_tensor

__all__ = [
    "__version__", "AlsConfig", "CapacityError", "CoefficientTensor", "NormResult",
    "PostconditionError", "SetPartition", "ValidationError", "alpha_s", "alphas",
    "enumerate_partitions", "injective_norm", "load_tensor", "new_tensor", "partition_norm",
    "partitions_of_size",
]
