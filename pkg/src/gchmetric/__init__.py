"""Quantum Fisher information and channel metric tools for Gaussian probes.

The package estimates how well Gaussian probe states can sense the
parameters of multi-mode dissipative Gaussian channels.  It provides

- first/second-moment Gaussian state machinery (:mod:`gchmetric.gaussian`),
- the dissipative channel family and its parameter bookkeeping
  (:mod:`gchmetric.channel`),
- symmetric logarithmic derivatives and quantum Fisher information
  matrices computed in closed form from the moments (:mod:`gchmetric.qfi`),
- rejection-free sampling of fixed-energy probe families
  (:mod:`gchmetric.sampler`),
- a determinant-minimizing matrix cover that turns sampled information
  matrices into a single channel metric (:mod:`gchmetric.metric`),
- an independent truncated-Fock-space oracle for validation
  (:mod:`gchmetric.fock`, :mod:`gchmetric.validation`), and
- a deterministic CLI with JSON reports and a binary sample cache
  (:mod:`gchmetric.cli`, :mod:`gchmetric.config`, :mod:`gchmetric.cache`).
"""

from __future__ import annotations

__version__ = "0.1.0"

from .cache import SampleCache, cache_header
from .channel import (
    PARAMETER_KINDS,
    ChannelMode,
    ChannelPoint,
    ParameterIndex,
    apply_channel,
    asymptotic_cm,
    channel_from_values,
    damping_matrix,
    environment_cm,
    parameter_list,
    parameter_values,
)
from .config import RunConfig, build_probe, load_config, parse_config
from .errors import (
    BadModeIndex,
    CacheMismatch,
    ConfigError,
    CutoffTooSmall,
    DimensionMismatch,
    GchMetricError,
    IllConditioned,
    InvalidChannel,
    InvalidSplit,
    ModeMismatch,
    NonPhysicalCovariance,
    NonSymmetric,
    SingularPureMode,
    SolverStalled,
    StiffnessFailure,
)
from .gaussian import (
    GaussianState,
    WilliamsonDecomposition,
    apply_symplectic,
    bloch_messiah,
    check_physical,
    coherent_state,
    embed_symplectic,
    mean_photon,
    partial_trace,
    passive_to_unitary,
    purify,
    rotation_symplectic,
    squeeze_symplectic,
    symplectic_form,
    symplectic_spectrum,
    thermal_state,
    tms_symplectic,
    two_mode_squeezed,
    unitary_to_passive,
    vacuum_state,
    williamson,
)
from .metric import (
    ConstraintSet,
    MetricResult,
    TraceEntry,
    containment_check,
    default_regularization,
    min_det_upper_bound,
    sample_and_solve,
)
from .qfi import QfiMatrix, SldForm, qfi, regularize_pure, reparametrize, sld
from .sampler import (
    ResourceSplit,
    probe_for_counter,
    probe_from_split,
    resource_parameters,
    sample_probe,
    split_for_counter,
)
from .validation import CheckResult, run_oracle_checks

__all__ = [
    "__version__",
    # states
    "GaussianState",
    "WilliamsonDecomposition",
    "apply_symplectic",
    "bloch_messiah",
    "check_physical",
    "coherent_state",
    "embed_symplectic",
    "mean_photon",
    "partial_trace",
    "passive_to_unitary",
    "purify",
    "rotation_symplectic",
    "squeeze_symplectic",
    "symplectic_form",
    "symplectic_spectrum",
    "thermal_state",
    "tms_symplectic",
    "two_mode_squeezed",
    "unitary_to_passive",
    "vacuum_state",
    "williamson",
    # channel
    "PARAMETER_KINDS",
    "ChannelMode",
    "ChannelPoint",
    "ParameterIndex",
    "apply_channel",
    "asymptotic_cm",
    "channel_from_values",
    "damping_matrix",
    "environment_cm",
    "parameter_list",
    "parameter_values",
    # information matrices
    "QfiMatrix",
    "SldForm",
    "qfi",
    "regularize_pure",
    "reparametrize",
    "sld",
    # sampling
    "ResourceSplit",
    "probe_for_counter",
    "probe_from_split",
    "resource_parameters",
    "sample_probe",
    "split_for_counter",
    # covering metric
    "ConstraintSet",
    "MetricResult",
    "TraceEntry",
    "containment_check",
    "default_regularization",
    "min_det_upper_bound",
    "sample_and_solve",
    # interface layer
    "RunConfig",
    "SampleCache",
    "build_probe",
    "cache_header",
    "load_config",
    "parse_config",
    "CheckResult",
    "run_oracle_checks",
    # errors
    "GchMetricError",
    "BadModeIndex",
    "CacheMismatch",
    "ConfigError",
    "CutoffTooSmall",
    "DimensionMismatch",
    "IllConditioned",
    "InvalidChannel",
    "InvalidSplit",
    "ModeMismatch",
    "NonPhysicalCovariance",
    "NonSymmetric",
    "SingularPureMode",
    "SolverStalled",
    "StiffnessFailure",
]
