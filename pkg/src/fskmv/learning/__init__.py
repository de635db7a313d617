"""Federated signSGD training with over-the-air majority vote."""

from fskmv.learning.data import (
    Dataset,
    load_idx_dataset,
    partition_iid,
    partition_location,
    read_idx,
    ring_labels,
    synthetic_task,
    write_idx,
)
from fskmv.learning.models import LinearSoftmax, OneHiddenLayer, build_model
from fskmv.learning.training import (
    SCHEMES,
    LinkConfig,
    TrainConfig,
    TrainResult,
    TrainState,
    aggregate,
    apply_update,
    batch_indices,
    evaluate,
    init_state,
    local_gradient,
    local_losses,
    run_training,
    sign_vector,
    train_round,
)

__all__ = [
    "Dataset",
    "load_idx_dataset",
    "partition_iid",
    "partition_location",
    "read_idx",
    "write_idx",
    "ring_labels",
    "synthetic_task",
    "LinearSoftmax",
    "OneHiddenLayer",
    "build_model",
    "SCHEMES",
    "LinkConfig",
    "TrainConfig",
    "TrainResult",
    "TrainState",
    "aggregate",
    "apply_update",
    "batch_indices",
    "evaluate",
    "init_state",
    "local_gradient",
    "local_losses",
    "run_training",
    "sign_vector",
    "train_round",
]
