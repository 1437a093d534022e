"""rcarpanel: random-coefficient autoregressive panels.

Scalar AR(p) series whose coefficient vector is a random draw per
individual, held fixed over time.  The package computes exact
second-moment quantities (stationarity criteria, lag covariances, moment
series, spectral density), simulates panels reproducibly, estimates
moments from observed panels through cross-sectional and per-individual
pathways, and verifies the estimators' limit behavior with a Monte Carlo
harness.  The ``rcarpanel`` CLI exposes all of it on files.
"""

from .companion import (
    char_poly_roots,
    coeffs_from_companion,
    companion_matrix,
    is_stationary_coeffs,
    spectral_radius,
)
from .distributions import (
    CoefficientDistribution,
    DegenerateCoefficients,
    DiscreteCoefficients,
    GaussianCoefficients,
    ModelSpec,
    NoiseSpec,
    is_second_order_stationary,
    mean_kron_square,
)
from .estimators import (
    CrossSectionalMoments,
    EstimationReport,
    PerIndividualMoments,
    a_hat_individual,
    build_states,
    estimate_cross_sectional,
    estimate_per_individual,
    upsilon_hat,
)
from .exceptions import (
    ConfigError,
    DataFormatError,
    EstimationError,
    NonstationaryError,
    NumericalError,
    RankDeficiencyError,
    RcarError,
    SimulationError,
    TruncationError,
)
from .moments import (
    CovarianceSet,
    MomentSeries,
    SpectralDensityValue,
    gamma0_direct,
    gamma0_series,
    gamma_u,
    identify_transition,
    kron,
    moment_mu,
    moment_series,
    spectral_density,
    spectral_existence_check,
    unvec,
    upsilon_series,
    vec,
)
from .montecarlo import (
    ExperimentPlan,
    ExperimentResult,
    StationarityDiagnostic,
    run_ahat_convergence,
    run_clt,
    run_consistency,
    run_stationarity_diagnostic,
)
from .panelio import read_panel, read_truth, write_panel, write_report
from .simulate import (
    IndividualDraw,
    InitMode,
    Panel,
    draw_individual,
    individual_stream,
    simulate_panel,
    simulate_path,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # companion / stationarity
    "companion_matrix", "coeffs_from_companion", "char_poly_roots",
    "spectral_radius", "is_stationary_coeffs",
    # distributions and model
    "CoefficientDistribution", "DegenerateCoefficients",
    "DiscreteCoefficients", "GaussianCoefficients", "NoiseSpec", "ModelSpec",
    "mean_kron_square", "is_second_order_stationary",
    # moments
    "vec", "unvec", "kron", "gamma0_direct", "gamma0_series", "gamma_u",
    "identify_transition", "moment_mu", "moment_series", "upsilon_series",
    "spectral_existence_check", "spectral_density",
    "CovarianceSet", "MomentSeries", "SpectralDensityValue",
    # simulation
    "InitMode", "IndividualDraw", "Panel", "individual_stream",
    "draw_individual", "simulate_path", "simulate_panel",
    # estimation
    "build_states", "upsilon_hat", "a_hat_individual",
    "estimate_cross_sectional", "estimate_per_individual",
    "EstimationReport", "CrossSectionalMoments", "PerIndividualMoments",
    # harness
    "ExperimentPlan", "ExperimentResult", "StationarityDiagnostic",
    "run_consistency", "run_clt", "run_ahat_convergence",
    "run_stationarity_diagnostic",
    # io
    "read_panel", "read_truth", "write_panel", "write_report",
    # errors
    "RcarError", "NonstationaryError", "TruncationError",
    "RankDeficiencyError", "NumericalError", "SimulationError",
    "EstimationError", "ConfigError", "DataFormatError",
]
