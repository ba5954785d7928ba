"""Multiuser detection of ternary on-off BPSK signals over an underdetermined
linear AWGN model.

The package provides the SOAV-regularized MAP detector (penalty weights
calibrated from the symbol prior, solved by accelerated proximal gradient
with a closed-form ternary prox) next to LMMSE, LASSO, and exhaustive-MAP
baselines, plus a reproducible Monte Carlo harness and CLI.
"""

from .detectors import (
    DETECTOR_KINDS,
    DetectionResult,
    DetectorConfig,
    EnumerationBoundError,
    exhaustive_map,
    lasso,
    lmmse,
    map_lattice_objective,
    map_soav,
    run_detector,
    threshold_map,
)
from .frontend import (
    FrontendModel,
    SingularGramError,
    WaveformBank,
    build_frontend,
    cross_correlate,
    gram,
    load_bank,
    whiten,
)
from .harness import (
    ExperimentConfig,
    SweepResult,
    TrialRecord,
    emit_csv,
    error_ratio,
    run_sweep,
    run_trial,
)
from .model import (
    SnrSpec,
    SymbolPrior,
    SystemInstance,
    bpsk_prior,
    draw_symbols,
    gaussian_matrix,
    sigma_from_snr,
    substream,
    synthesize,
)
from .optim import (
    DegenerateOperatorError,
    DivergenceError,
    QuadraticData,
    SolveReport,
    SolverConfig,
    estimate_lipschitz,
    fista,
    gradient,
    soft_threshold,
)
from .soav import (
    ProxSpec,
    SingularWeightSystemError,
    SoavWeights,
    UnsupportedAlphabetError,
    build_weight_system,
    default_offset,
    prox_general,
    prox_general_vector,
    prox_ternary,
    prox_vector,
    soav_objective,
    soav_penalty,
    solve_weights,
)

__version__ = "0.1.0"
