"""Edge-of-chaos diagnostics for iterated maps and neural-network operators."""

__version__ = "0.1.0"

from .attractor import AttractorReport, PoincareSeries, Trajectory, detect_attractor, iterate, poincare_projection, twin_separation
from .errors import (
    BadMagicError,
    ConvergenceError,
    CountMismatchError,
    DimensionError,
    EdgeChaosError,
    IdxFormatError,
    InsufficientDataError,
    NonFiniteError,
    NumericalError,
    TruncatedFileError,
    WeightFormatError,
)
from .information import BinSpec, entropy, joint_histogram, logistic_mi_sweep, mutual_information
from .operators import (
    DenseLayer,
    LogisticStack,
    Mlp,
    RandomTanh,
    ScaledWeights,
    apply,
    jacobian,
    jacobian_fd,
    jacobian_norm,
    load_weights,
    make_mlp,
    make_random_tanh,
    save_weights,
    scale_weights,
)
from .spectra import circular_law_experiment, eigvals, spectral_radius
from .stability import (
    Phase,
    StabilityConfig,
    StabilityReport,
    classify_phase,
    edge_crossing_scan,
    jac_norm_geomean,
    lyapunov_method1,
    lyapunov_method2,
    lyapunov_method3,
)
