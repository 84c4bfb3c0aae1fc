"""Hybrid federated learning simulator and solvers.

Data may be partitioned over samples, features, or both. The package ships a
primal-dual coordinate-ascent protocol (HyFDCA) with mock-encryption cost
accounting, a hybrid FedAvg baseline, a centralized dual coordinate ascent
oracle, measurement utilities, and a grey-relational hyperparameter selector.
"""

from .data import (
    DatasetStats,
    SparseDataset,
    compute_stats,
    load_libsvm,
    mnist_label_map,
    normalize_samples,
    parse_libsvm,
    synth_dataset,
    to_libsvm,
)
from .errors import ConfigError, HyflError, LabelError, ParseError
from .objective import (
    Regularization,
    closed_form_dual_step,
    dual_objective,
    dual_to_primal,
    duality_gap,
    hinge_conjugate_neg,
    hinge_loss,
    hinge_subgradient,
    line_search_dual_step,
    primal_objective,
)
from .partition import (
    Partition,
    client_matrices,
    partition_horizontal,
    partition_nonzero_split,
    partition_quadrant,
    partition_summary,
    partition_vertical,
    validate_partition,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
