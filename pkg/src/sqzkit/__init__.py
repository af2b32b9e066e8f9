"""Simulation, signal processing, and parameter estimation for pulsed
single-pass waveguide squeezing measurements."""

from .config import RunConfig, default_config, load_config, parse_config
from .dsp import (
    PhaseFitResult,
    QuadratureSeries,
    VariancePhaseSeries,
    aggregate_traces,
    bin_variances,
    fit_phase_curve,
    integrate_pulses,
    normalize_to_shot,
    process_trace_sets,
)
from .errors import (
    ConfigError,
    DataError,
    FitConvergenceError,
    SingularNormalEquationsError,
    SqzError,
    UnphysicalInputError,
)
from .fitting import (
    FitProblem,
    FitResult,
    finite_difference_jacobian,
    fit_gain_curve,
    fit_squeezing_curve,
    levenberg_marquardt,
)
from .physics import (
    DetectionBudget,
    GainResult,
    PulseTrain,
    SqueezingLevels,
    WaveguideParams,
    apply_detection_loss,
    budget_total,
    db_to_linear,
    electronic_efficiency,
    infer_onchip_squeezing,
    linear_to_db,
    normalized_to_total_efficiency,
    parametric_gain,
    peak_power,
    squeezing_levels,
    visibility_to_efficiency,
)
from .qpm import (
    DispersionInput,
    PolingMap,
    defective_qpm_spectrum,
    filtered_pulse_duration,
    gvm_from_dispersion,
    ideal_qpm_spectrum,
    jittered_poling_map,
    load_dispersion_csv,
    periodic_poling_map,
    spectrum_asymmetry,
    symmetric_detuning_grid,
    temporal_walkoff,
)
from .synth import (
    AcquisitionConfig,
    default_pulse_kernel,
    derive_trace_seed,
    gaussian_samples,
    synthesize_power_sweep,
    synthesize_trace,
)
from .traceio import HomodyneTrace, read_trace, write_trace

__version__ = "0.1.0"
