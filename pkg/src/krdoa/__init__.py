"""Decoupled azimuth-elevation angle-of-arrival estimation for separable
planar arrays.

The steering matrix of a separable planar array is the column-wise Kronecker
product of two axis steering matrices. This package exploits that structure
to split joint 2-D angle estimation into two 1-D problems plus a pairing
step, alongside a conventional joint 2-D search baseline and a Monte-Carlo
bench harness.
"""

from .bench import (
    METHODS,
    EnsembleConfig,
    EnsembleResult,
    GeometrySpec,
    SourceSpec,
    SweepCell,
    dispatch_estimator,
    rmse,
    run_ensemble,
    run_timing,
    write_outputs,
)
from .errors import (
    CapabilityError,
    DomainError,
    EstimationError,
    KrdoaError,
    SubspaceSeparationWarning,
)
from .est1d import (
    FrequencyEstimates,
    Spectrum1D,
    coarse_fine_search,
    coarse_opt_search,
    esprit_1d,
    find_minima,
    music_spectrum_1d,
    refine_opt,
    root_music_1d,
    uniform_spacing,
)
from .est2d import (
    DecoupledBackend,
    EstimateSet,
    estimate_2d_music,
    estimate_decoupled,
    pair_angles,
    pairing_cost_matrix,
)
from .geometry import (
    ArrayGeometry,
    ArrayKind,
    SourceSet,
    angle_to_mu,
    mu_to_angle,
    steering_matrix,
    steering_vector_1d,
    steering_vector_2d,
)
from .subspace import (
    DecoupledSubspaces,
    JointSubspace,
    build_azimuth_stack,
    build_elevation_stack,
    decouple,
    signal_subspace,
    unvec_column,
)
from .synth import (
    Covariance,
    SnapshotMatrix,
    exact_covariance,
    load_snapshots,
    sample_covariance,
    save_snapshots,
    synthesize,
)

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry",
    "ArrayKind",
    "CapabilityError",
    "Covariance",
    "DecoupledBackend",
    "DecoupledSubspaces",
    "DomainError",
    "EnsembleConfig",
    "EnsembleResult",
    "EstimateSet",
    "EstimationError",
    "FrequencyEstimates",
    "GeometrySpec",
    "JointSubspace",
    "KrdoaError",
    "METHODS",
    "SnapshotMatrix",
    "SourceSet",
    "SourceSpec",
    "Spectrum1D",
    "SubspaceSeparationWarning",
    "SweepCell",
    "angle_to_mu",
    "build_azimuth_stack",
    "build_elevation_stack",
    "coarse_fine_search",
    "coarse_opt_search",
    "decouple",
    "dispatch_estimator",
    "esprit_1d",
    "estimate_2d_music",
    "estimate_decoupled",
    "exact_covariance",
    "find_minima",
    "load_snapshots",
    "mu_to_angle",
    "music_spectrum_1d",
    "pair_angles",
    "pairing_cost_matrix",
    "refine_opt",
    "rmse",
    "root_music_1d",
    "run_ensemble",
    "run_timing",
    "sample_covariance",
    "save_snapshots",
    "signal_subspace",
    "steering_matrix",
    "steering_vector_1d",
    "steering_vector_2d",
    "synthesize",
    "uniform_spacing",
    "unvec_column",
    "write_outputs",
]
