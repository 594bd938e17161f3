"""Space-time POD, spectral POD, and block-Toeplitz mode estimation."""

from .analysis import (
    StudyCell,
    StudyError,
    StudyReport,
    StudySpec,
    captured_energy,
    convergence_study,
    cumulative_energy,
    fold_psd,
    measured_decorrelation_time,
    mode_psd,
    mode_similarity,
    psd_peak_fraction,
    time_averaged_spatial_similarity,
)
from .backend import active_backend, set_backend, using_backend
from .correlation import (
    LagCorrelationSet,
    SpaceTimeCorrelation,
    assemble_block_toeplitz,
    hankel_correlation,
    lag_correlations,
    same_lag_spread,
)
from .decomposition import (
    ModeSet,
    WeightSpec,
    canonicalize_modes,
    load_modes,
    modes_from_correlation,
    orient_modes,
    save_modes,
    space_only_pod,
    spacetime_pod,
    spacetime_pod_toeplitz,
    weighted_svd_modes,
)
from .embedding import DataMatrix, EmbeddingSpec, build_embedded, reshape_mode
from .spod import (
    FrequencyModeSet,
    SpodSpec,
    load_frequency_modes,
    save_frequency_modes,
    spod,
)
from .timeseries import (
    FormatError,
    GeneratorSpec,
    SnapshotSeries,
    generate,
    load,
    ou_lag_covariance,
    ou_stationary_covariance,
    save,
    subtract_temporal_mean,
)

__version__ = "0.1.0"
