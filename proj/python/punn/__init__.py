"""Partition of unity neural networks."""

from ._punn import (
    ConfigError,
    DomainError,
    Model,
    NumericError,
    ParseError,
    PunnError,
    activation,
    density_demo,
    exact_reconstruct,
    fnv1a_hex,
    gamma_from_pmap,
    load_csv,
    make_synthetic,
    partition_from_gates,
    phi_targets,
    run_config,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "Model",
    "NumericError",
    "ParseError",
    "PunnError",
    "activation",
    "density_demo",
    "exact_reconstruct",
    "fnv1a_hex",
    "gamma_from_pmap",
    "load_csv",
    "make_synthetic",
    "partition_from_gates",
    "phi_targets",
    "run_config",
]
