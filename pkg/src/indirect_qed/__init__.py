"""Indirectly driven cavity QED: effective photonic models, steady states,
fluctuations, spectra and an exact Fock-space oracle."""

from .model import (
    SystemParams,
    LinearEffectiveModel,
    NonlinearEffectiveModel,
    KerrModel,
    SqueezeModel,
    SingularDetuningError,
    derive_linear_model,
    derive_nonlinear_model,
    thermal_occupation,
    validity_report,
)
from .roots import SolverConfig
from .steady import (
    SteadyState,
    BranchCurve,
    kerr_steady_states,
    squeeze_steady_states,
    classify_stability,
    scan_drive,
)
from .fluctuations import (
    CorrelationResult,
    analyze,
    correlation_matrix,
    drift_matrix,
    diffusion_matrix,
    g2_scan,
    g2_zero,
)
from .spectrum import linear_response_spectrum, output_intensity_spectrum, spectrum_coefficients
from .oracle import OneModeSpec, TwoModeSpec, solve_one_mode, two_mode_oracle, truncation_check

__version__ = "0.1.0"
