"""csbeam: compressive-sensing beamforming for noisy microphone-array data.

Builds sparse acoustic source-power maps from simulated array measurements
with three algorithms: the conventional beamformer (CB), snapshot-domain
sparse recovery (CSB-I), and covariance-domain nonnegative sparse recovery
through a lifted steering model (CSB-II).
"""

from .beamform import (
    DeltaPolicy,
    PowerMap,
    cb,
    csb1,
    csb1_multi,
    csb2,
    resolve_delta_csb1,
    resolve_delta_csb2,
    save_power_map,
)
from .estimators import (
    BasisPursuitDenoising,
    CompressiveBeamformerI,
    CompressiveBeamformerII,
    ConventionalBeamformer,
)
from .exceptions import (
    AllZeroMapError,
    ConfigError,
    CsbeamError,
    DegenerateGeometryError,
    InfeasibleNonnegError,
    NyquistError,
    OffBinFrequencyError,
)
from .geometry import (
    ArrayGeometry,
    ImagingGrid,
    load_geometry_csv,
    make_grid,
    save_geometry_csv,
    spiral_array,
    subsample_sensors,
)
from .metrics import MapMetrics, axial_slice, compute_metrics, normalize_db
from .simulate import (
    CrossSpectralMatrix,
    SnapshotSet,
    Source,
    SourceScene,
    TimeSeries,
    add_noise,
    broadband,
    csm_from_blocks,
    estimate_csm,
    load_timeseries,
    save_csm_csv,
    save_timeseries,
    snapshot_noise_variance,
    synthesize,
    to_snapshots,
    tone,
    vectorize_csm,
)
from .solver import (
    BpdnProblem,
    BpdnSolution,
    delta_zero_feasibility,
    min_measurements,
    solve_bpdn,
)
from .waves import (
    DEFAULT_SPEED,
    LiftedMatrix,
    SteeringMatrix,
    lift_steering_matrix,
    steering_matrix,
    steering_vector,
)

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry",
    "ImagingGrid",
    "spiral_array",
    "make_grid",
    "subsample_sensors",
    "save_geometry_csv",
    "load_geometry_csv",
    "SteeringMatrix",
    "LiftedMatrix",
    "steering_vector",
    "steering_matrix",
    "lift_steering_matrix",
    "DEFAULT_SPEED",
    "Source",
    "SourceScene",
    "TimeSeries",
    "SnapshotSet",
    "CrossSpectralMatrix",
    "tone",
    "broadband",
    "synthesize",
    "add_noise",
    "to_snapshots",
    "snapshot_noise_variance",
    "estimate_csm",
    "csm_from_blocks",
    "vectorize_csm",
    "save_timeseries",
    "load_timeseries",
    "save_csm_csv",
    "BpdnProblem",
    "BpdnSolution",
    "solve_bpdn",
    "delta_zero_feasibility",
    "min_measurements",
    "PowerMap",
    "DeltaPolicy",
    "cb",
    "csb1",
    "csb1_multi",
    "csb2",
    "resolve_delta_csb1",
    "resolve_delta_csb2",
    "save_power_map",
    "MapMetrics",
    "normalize_db",
    "compute_metrics",
    "axial_slice",
    "ConventionalBeamformer",
    "CompressiveBeamformerI",
    "CompressiveBeamformerII",
    "BasisPursuitDenoising",
    "CsbeamError",
    "DegenerateGeometryError",
    "NyquistError",
    "OffBinFrequencyError",
    "InfeasibleNonnegError",
    "AllZeroMapError",
    "ConfigError",
]
