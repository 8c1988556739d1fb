"""Streaming memory compression, readiness gating and compute routing."""

from ._streamroute import (
    ConfigError,
    DataError,
    Error,
    NumericalError,
    SequencingError,
    StructuralError,
    __version__,
    band_penalties,
    default_config,
    drop_ratio,
    evaluate,
    generate_boundary_dataset,
    generate_stream,
    group_advantages,
    jsd,
    modulated_reward,
    naive_reward,
    normalize_config,
    partition_history,
    readiness_probability,
    train,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Error",
    "NumericalError",
    "SequencingError",
    "StructuralError",
    "__version__",
    "band_penalties",
    "default_config",
    "drop_ratio",
    "evaluate",
    "generate_boundary_dataset",
    "generate_stream",
    "group_advantages",
    "jsd",
    "modulated_reward",
    "naive_reward",
    "normalize_config",
    "partition_history",
    "readiness_probability",
    "train",
]
