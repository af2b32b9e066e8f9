"""Trace-to-variance pipeline.

Samples are grouped into pulse windows and integrated against the pulse
kernel to give one quadrature value per pulse; consecutive pulses are
grouped into phase bins (default 5000 per bin) whose unbiased sample
variance, with the Gaussian variance-of-variance error
``var * sqrt(2/(n-1))``, forms a VariancePhaseSeries.  Series from repeated
traces are averaged bin-wise, normalized to the mean shot-noise variance,
and the phase curve ``S+ sin^2(a x + b) + S- cos^2(a x + b)`` is fitted to
recover the squeezing and anti-squeezing levels in dB.

Per-trace processing is independent; aggregation is an ordered reduction
over the given trace order, so results do not depend on how the per-trace
work is scheduled.  Trailing pulses that do not fill a bin are dropped,
never padded.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import fitting
from .errors import DataError, FitConvergenceError
from .traceio import HomodyneTrace

DB_PER_NEPER = 10.0 / math.log(10.0)
DEFAULT_PULSES_PER_BIN = 5000


@dataclass
class QuadratureSeries:
    """Per-pulse quadrature values from one trace."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    @property
    def n_pulses(self) -> int:
        return int(self.values.size)


@dataclass
class VariancePhaseSeries:
    """Per-bin quadrature variances with uncertainties.

    pulse_start/pulse_stop give each bin's pulse-index range (stop
    exclusive).  shot_reference / electronic_reference record the mean
    reference variances used during normalization, in raw units.
    """

    bin_index: np.ndarray
    pulse_start: np.ndarray
    pulse_stop: np.ndarray
    variance: np.ndarray
    stderr: np.ndarray
    n_traces: int = 1
    shot_reference: float | None = None
    electronic_reference: float | None = None

    def __post_init__(self):
        self.bin_index = np.asarray(self.bin_index, dtype=int)
        self.pulse_start = np.asarray(self.pulse_start, dtype=int)
        self.pulse_stop = np.asarray(self.pulse_stop, dtype=int)
        self.variance = np.asarray(self.variance, dtype=float)
        self.stderr = np.asarray(self.stderr, dtype=float)

    @property
    def n_bins(self) -> int:
        return int(self.bin_index.size)

    @property
    def pulses_per_bin(self) -> int:
        return int(self.pulse_stop[0] - self.pulse_start[0])

    def same_binning(self, other: "VariancePhaseSeries") -> bool:
        return (self.n_bins == other.n_bins
                and np.array_equal(self.pulse_start, other.pulse_start)
                and np.array_equal(self.pulse_stop, other.pulse_stop))


def integrate_pulses(trace: HomodyneTrace, kernel: np.ndarray | None = None,
                     trigger_offset: int = 0) -> QuadratureSeries:
    """Window the trace into pulses and integrate each against the kernel.

    The kernel defaults to the one recorded in the trace and must match the
    window length; if its L2 norm is off by more than 1e-6 it is
    renormalized and a warning is issued.  trigger_offset shifts the first
    window start by that many samples (misaligned real data); trailing
    samples that no longer fill a window are dropped.
    """
    kernel = np.asarray(trace.kernel if kernel is None else kernel, dtype=float)
    w = trace.samples_per_pulse
    if kernel.size != w:
        raise DataError(f"kernel length {kernel.size} != samples per pulse {w}")
    norm = float(np.linalg.norm(kernel))
    if norm == 0.0:
        raise DataError("kernel has zero norm")
    if abs(norm - 1.0) > 1e-6:
        warnings.warn(f"pulse kernel renormalized (L2 norm was {norm:.9f})",
                      stacklevel=2)
        kernel = kernel / norm
    if trigger_offset < 0:
        raise DataError("trigger_offset must be >= 0")
    samples = trace.samples[trigger_offset:].astype(np.float64)
    if trigger_offset == 0 and samples.size % w != 0:
        raise DataError(f"trace length {samples.size} not divisible by window {w}")
    n_windows = samples.size // w
    if n_windows == 0:
        raise DataError("trace too short for one pulse window")
    windows = samples[: n_windows * w].reshape(n_windows, w)
    return QuadratureSeries(values=windows @ kernel)


def bin_variances(quadratures: QuadratureSeries,
                  pulses_per_bin: int = DEFAULT_PULSES_PER_BIN) -> VariancePhaseSeries:
    """Unbiased sample variance per phase bin of consecutive pulses."""
    if pulses_per_bin < 2:
        raise DataError(f"pulses_per_bin must be >= 2, got {pulses_per_bin}")
    n = quadratures.n_pulses
    n_bins = n // pulses_per_bin
    if n_bins == 0:
        raise DataError(f"{n} pulses cannot fill one bin of {pulses_per_bin}")
    dropped = n - n_bins * pulses_per_bin
    if dropped:
        warnings.warn(f"dropping {dropped} trailing pulses that do not fill a bin",
                      stacklevel=2)
    grouped = quadratures.values[: n_bins * pulses_per_bin].reshape(n_bins, pulses_per_bin)
    variance = grouped.var(axis=1, ddof=1)
    stderr = variance * math.sqrt(2.0 / (pulses_per_bin - 1))
    starts = np.arange(n_bins) * pulses_per_bin
    return VariancePhaseSeries(
        bin_index=np.arange(n_bins),
        pulse_start=starts,
        pulse_stop=starts + pulses_per_bin,
        variance=variance,
        stderr=stderr,
    )


def normalize_to_shot(squeezed: VariancePhaseSeries, shot: VariancePhaseSeries,
                      electronic: VariancePhaseSeries | None = None,
                      subtract_electronic: bool = False) -> VariancePhaseSeries:
    """Express variances in shot-noise units.

    Default is the as-measured convention: divide by the mean shot
    variance.  With subtract_electronic=True the electronic floor is
    removed from both numerator and denominator first; this is refused when
    the shot variance is not at least 1.5x the electronic variance.
    Uncertainties are propagated in quadrature.
    """
    if not squeezed.same_binning(shot):
        raise DataError("squeezed and shot series have different bin structure")
    shot_mean = float(shot.variance.mean())
    shot_mean_err = float(np.sqrt(np.sum(shot.stderr ** 2))) / shot.n_bins
    if shot_mean <= 0.0:
        raise DataError("shot reference variance must be positive")

    e_mean: float | None = None
    if electronic is not None:
        if not squeezed.same_binning(electronic):
            raise DataError("electronic series has different bin structure")
        e_mean = float(electronic.variance.mean())

    if subtract_electronic:
        if electronic is None:
            raise DataError("corrected mode requires an electronic series")
        e_mean_err = float(np.sqrt(np.sum(electronic.stderr ** 2))) / electronic.n_bins
        if shot_mean < 1.5 * e_mean:
            raise DataError(
                f"shot variance ({shot_mean:.4g}) not clear of electronic variance "
                f"({e_mean:.4g}); ratio {shot_mean / e_mean:.3f} < 1.5, refusing "
                "electronic subtraction"
            )
        num = squeezed.variance - e_mean
        den = shot_mean - e_mean
        num_err = np.sqrt(squeezed.stderr ** 2 + e_mean_err ** 2)
        den_err = math.hypot(shot_mean_err, e_mean_err)
        variance = num / den
        stderr = np.sqrt((num_err / den) ** 2 + (num * den_err / den ** 2) ** 2)
    else:
        variance = squeezed.variance / shot_mean
        stderr = np.sqrt(
            (squeezed.stderr / shot_mean) ** 2
            + (squeezed.variance * shot_mean_err / shot_mean ** 2) ** 2
        )
    return replace(
        squeezed,
        variance=variance,
        stderr=stderr,
        shot_reference=shot_mean,
        electronic_reference=e_mean,
    )


def aggregate_traces(series: list[VariancePhaseSeries]) -> VariancePhaseSeries:
    """Bin-wise mean across repeated traces.

    The standard error per bin is the sample standard deviation across
    traces over sqrt(n); with a single series it is passed through.
    Reduction follows the order of the input list.
    """
    if not series:
        raise DataError("no series to aggregate")
    first = series[0]
    for other in series[1:]:
        if not first.same_binning(other):
            raise DataError("cannot aggregate series with different bin structure")
    if len(series) == 1:
        return replace(first)
    stack = np.stack([s.variance for s in series])
    n = stack.shape[0]
    mean = stack.mean(axis=0)
    stderr = stack.std(axis=0, ddof=1) / math.sqrt(n)

    def common_ref(values):
        present = [v for v in values if v is not None]
        return float(np.mean(present)) if len(present) == len(values) else None

    return replace(
        first,
        variance=mean,
        stderr=stderr,
        n_traces=sum(s.n_traces for s in series),
        shot_reference=common_ref([s.shot_reference for s in series]),
        electronic_reference=common_ref([s.electronic_reference for s in series]),
    )


@dataclass
class PhaseFitResult:
    """Squeezing levels extracted from a binned variance curve."""

    s_minus_db: float
    s_minus_err_db: float
    s_plus_db: float
    s_plus_err_db: float
    s_minus_lin: float
    s_plus_lin: float
    ramp_slope: float
    ramp_offset: float
    fit: fitting.FitResult

    def as_dict(self) -> dict:
        return {
            "s_minus_db": self.s_minus_db,
            "s_minus_err_db": self.s_minus_err_db,
            "s_plus_db": self.s_plus_db,
            "s_plus_err_db": self.s_plus_err_db,
            "s_minus_lin": self.s_minus_lin,
            "s_plus_lin": self.s_plus_lin,
            "ramp_slope": self.ramp_slope,
            "ramp_offset": self.ramp_offset,
            "sse": self.fit.sse,
            "iterations": self.fit.iterations,
            "converged": self.fit.converged,
        }


def _phase_curve_init(values: np.ndarray) -> tuple[float, float, float, float]:
    """FFT-based start for (S-, S+, slope, offset) on bin indices."""
    n = values.size
    s_minus0 = max(float(values.min()), 1e-12)
    s_plus0 = max(float(values.max()), s_minus0)
    centered = values - values.mean()
    spectrum = np.fft.rfft(centered)
    if spectrum.size > 1 and np.any(np.abs(spectrum[1:]) > 0):
        k = 1 + int(np.argmax(np.abs(spectrum[1:])))
        omega = 2.0 * math.pi * k / n
        # centered ~ -(S+ - S-)/2 * cos(2(a x + b)) = A cos(omega x + phi)
        phi = float(np.angle(spectrum[k]))
        slope0 = omega / 2.0
        offset0 = (phi - math.pi) / 2.0
    else:
        slope0 = math.pi / n
        offset0 = 0.0
    return s_minus0, s_plus0, slope0, offset0


def fit_phase_curve(series: VariancePhaseSeries, tol: float = 1e-10,
                    max_iter: int = 200) -> PhaseFitResult:
    """Weighted fit of the quadrature-rotation law to the binned variances.

    Recovers (S-, S+) in dB with covariance-based uncertainties plus the
    effective ramp slope/offset in radians per bin.  Raises
    FitConvergenceError (with the final residual attached) if the solver
    gives up.
    """
    if series.n_bins < 8:
        raise DataError(f"phase fit needs >= 8 bins, got {series.n_bins}")
    x = series.bin_index.astype(float)
    y = series.variance
    finite_err = np.all(np.isfinite(series.stderr)) and np.all(series.stderr > 0)
    weights = 1.0 / series.stderr ** 2 if finite_err else None

    s_minus0, s_plus0, slope0, offset0 = _phase_curve_init(y)

    def residual(params):
        return fitting.phase_curve_model(x, *params) - y

    def jacobian(params):
        return fitting.phase_curve_jacobian(x, *params)

    problem = fitting.FitProblem(
        residual=residual,
        jacobian=jacobian,
        initial_params=np.array([s_minus0, s_plus0, slope0, offset0]),
        weights=weights,
        bounds=[(1e-12, np.inf), (1e-12, np.inf), (-np.inf, np.inf), (-np.inf, np.inf)],
    )
    result = fitting.levenberg_marquardt(problem, tol=tol, max_iter=max_iter)
    if not result.converged:
        raise FitConvergenceError(
            f"phase-curve fit did not converge (final weighted SSE {result.sse:.6g})",
            final_sse=result.sse,
        )

    params = result.params.copy()
    cov = result.covariance.copy()
    if params[0] > params[1]:
        # quarter-period shift swaps the quadratures; keep S- <= S+
        params[[0, 1]] = params[[1, 0]]
        params[3] += math.pi / 2.0
        cov[[0, 1], :] = cov[[1, 0], :]
        cov[:, [0, 1]] = cov[:, [1, 0]]
    s_minus_lin, s_plus_lin, slope, offset = params
    err_minus = math.sqrt(max(cov[0, 0], 0.0))
    err_plus = math.sqrt(max(cov[1, 1], 0.0))
    return PhaseFitResult(
        s_minus_db=10.0 * math.log10(s_minus_lin),
        s_minus_err_db=DB_PER_NEPER * err_minus / s_minus_lin,
        s_plus_db=10.0 * math.log10(s_plus_lin),
        s_plus_err_db=DB_PER_NEPER * err_plus / s_plus_lin,
        s_minus_lin=float(s_minus_lin),
        s_plus_lin=float(s_plus_lin),
        ramp_slope=float(slope),
        ramp_offset=float(offset),
        fit=result,
    )


def trace_to_series(trace: HomodyneTrace,
                    pulses_per_bin: int = DEFAULT_PULSES_PER_BIN,
                    kernel: np.ndarray | None = None,
                    trigger_offset: int = 0) -> VariancePhaseSeries:
    """integrate_pulses + bin_variances for one trace."""
    return bin_variances(integrate_pulses(trace, kernel=kernel,
                                          trigger_offset=trigger_offset),
                         pulses_per_bin=pulses_per_bin)


def process_trace_sets(squeezed: list[HomodyneTrace], shot: list[HomodyneTrace],
                       electronic: list[HomodyneTrace] | None = None,
                       pulses_per_bin: int = DEFAULT_PULSES_PER_BIN,
                       subtract_electronic: bool = False,
                       tol: float = 1e-10, max_iter: int = 200,
                       ) -> tuple[VariancePhaseSeries, PhaseFitResult]:
    """Full pipeline: per-trace binning, aggregation over repeated traces,
    shot normalization, and the phase-curve fit."""
    if not squeezed or not shot:
        raise DataError("need at least one squeezed and one shot trace")
    sq_series = aggregate_traces([trace_to_series(t, pulses_per_bin) for t in squeezed])
    shot_series = aggregate_traces([trace_to_series(t, pulses_per_bin) for t in shot])
    e_series = None
    if electronic:
        e_series = aggregate_traces([trace_to_series(t, pulses_per_bin) for t in electronic])
    normalized = normalize_to_shot(sq_series, shot_series, e_series,
                                   subtract_electronic=subtract_electronic)
    fit = fit_phase_curve(normalized, tol=tol, max_iter=max_iter)
    return normalized, fit
