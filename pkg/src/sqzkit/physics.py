"""Closed-form models for a pulsed single-pass waveguide squeezer.

Ties pump power to parametric gain and measured squeezing, and carries the
multiplicative detection-efficiency (loss budget) algebra.  Conventions:

* all dB values are power dB, ``10*log10(x)``;
* efficiencies are fractions in [0, 1];
* the small-signal gain coefficient ``alpha_per_w`` is a fraction per watt
  (a conversion efficiency of 28 %/W is stored as 0.28 /W);
* quadrature variances are normalized so that shot noise = 1.

Core gain/squeezing law, for peak pump power P and efficiency eta::

    G(+/-) = eta * exp(+/- 2*sqrt(alpha*P)) + 1 - eta

With eta the pump/seed mode-matching this is the classical seed gain; with
eta the total detection efficiency it gives the measured squeezing and
anti-squeezing variances S(+/-).

All functions here are pure and safe for concurrent use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import UnphysicalInputError

# Peak power = shape_factor * pulse_energy / FWHM.  A flat-top pulse has
# factor 1; sech^2 and Gaussian temporal profiles concentrate less power
# at the peak for the same energy and FWHM.
SHAPE_FACTOR_FLAT = 1.0
SHAPE_FACTOR_SECH2 = math.log(1.0 + math.sqrt(2.0))       # arccosh(sqrt(2)) ~ 0.8814
SHAPE_FACTOR_GAUSSIAN = 2.0 * math.sqrt(math.log(2.0) / math.pi)  # ~ 0.9394


def db_to_linear(db: float) -> float:
    """Power dB -> linear ratio, 10^(dB/10)."""
    return 10.0 ** (db / 10.0)


def linear_to_db(linear: float) -> float:
    """Linear power ratio -> dB, 10*log10(x).  Requires x > 0."""
    if linear <= 0.0:
        raise ValueError(f"dB undefined for non-positive ratio {linear!r}")
    return 10.0 * math.log10(linear)


@dataclass(frozen=True)
class WaveguideParams:
    """Everything the chip contributes to the model.

    norm_efficiency is the normalized SHG conversion efficiency as a
    fraction per watt per cm^2 (127 %/Wcm^2 -> 1.27).  poling_period_um and
    temperature_c are metadata and do not enter any formula here.
    """

    length_m: float
    norm_efficiency: float
    prop_loss_db_per_cm: float
    gvm_ps_per_mm: float
    poling_period_um: float = 0.0
    temperature_c: float = 0.0

    def __post_init__(self):
        if self.length_m <= 0.0:
            raise ValueError(f"length_m must be > 0, got {self.length_m}")
        if self.norm_efficiency < 0.0:
            raise ValueError(f"norm_efficiency must be >= 0, got {self.norm_efficiency}")
        if self.prop_loss_db_per_cm < 0.0:
            raise ValueError(
                f"prop_loss_db_per_cm must be >= 0, got {self.prop_loss_db_per_cm}"
            )

    @property
    def length_cm(self) -> float:
        return self.length_m * 100.0

    def total_efficiency_per_w(self) -> float:
        """Length-integrated conversion efficiency, fraction per watt."""
        return normalized_to_total_efficiency(self.norm_efficiency, self.length_cm)

    def propagation_efficiency(self) -> float:
        """Linear transmission through the full waveguide length."""
        return db_to_linear(-self.prop_loss_db_per_cm * self.length_cm)


@dataclass(frozen=True)
class PulseTrain:
    """Pulsed pump description; converts average power to per-pulse numbers."""

    avg_power_w: float
    rep_rate_hz: float
    fwhm_s: float
    shape_factor: float = SHAPE_FACTOR_FLAT

    def __post_init__(self):
        if self.rep_rate_hz <= 0.0:
            raise ValueError(f"rep_rate_hz must be > 0, got {self.rep_rate_hz}")
        if self.fwhm_s <= 0.0:
            raise ValueError(f"fwhm_s must be > 0, got {self.fwhm_s}")
        if not 0.0 < self.shape_factor <= 1.2:
            raise ValueError(f"shape_factor must be in (0, 1.2], got {self.shape_factor}")
        if self.avg_power_w < 0.0:
            raise ValueError(f"avg_power_w must be >= 0, got {self.avg_power_w}")

    @property
    def pulse_energy_j(self) -> float:
        return self.avg_power_w / self.rep_rate_hz


def peak_power(pulses: PulseTrain) -> float:
    """Peak pulse power in watts, shape_factor * energy / FWHM."""
    return pulses.shape_factor * pulses.pulse_energy_j / pulses.fwhm_s


@dataclass(frozen=True)
class GainResult:
    """Phase-sensitive amplification (+) and deamplification (-) of a seed."""

    g_plus_db: float
    g_minus_db: float
    g_plus_lin: float
    g_minus_lin: float


@dataclass(frozen=True)
class SqueezingLevels:
    """Quadrature variances relative to shot noise = 1."""

    s_minus_lin: float
    s_plus_lin: float
    s_minus_db: float
    s_plus_db: float


def _two_branch_gain(power_w: float, alpha_per_w: float, eta: float) -> tuple[float, float]:
    if power_w < 0.0:
        raise ValueError(f"peak power must be >= 0, got {power_w}")
    if alpha_per_w < 0.0:
        raise ValueError(f"alpha_per_w must be >= 0, got {alpha_per_w}")
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"efficiency must be in [0, 1], got {eta}")
    exponent = 2.0 * math.sqrt(alpha_per_w * power_w)
    plus = eta * math.exp(exponent) + 1.0 - eta
    minus = eta * math.exp(-exponent) + 1.0 - eta
    return plus, minus


def parametric_gain(peak_power_w: float, alpha_per_w: float, eta_mm: float) -> GainResult:
    """Classical parametric gain of a seed, both phase branches.

    eta_mm is the pump/seed mode-matching fraction.  At zero pump power both
    branches are exactly unity (0 dB).
    """
    plus, minus = _two_branch_gain(peak_power_w, alpha_per_w, eta_mm)
    return GainResult(
        g_plus_db=linear_to_db(plus),
        g_minus_db=linear_to_db(minus),
        g_plus_lin=plus,
        g_minus_lin=minus,
    )


def squeezing_levels(peak_power_w: float, alpha_per_w: float, eta_total: float) -> SqueezingLevels:
    """Measured squeezing / anti-squeezing variances after detection loss.

    eta_total is the total detection efficiency; at eta_total = 0 the
    channel is fully lossy and both variances collapse to shot noise.
    """
    plus, minus = _two_branch_gain(peak_power_w, alpha_per_w, eta_total)
    return SqueezingLevels(
        s_minus_lin=minus,
        s_plus_lin=plus,
        s_minus_db=linear_to_db(minus),
        s_plus_db=linear_to_db(plus),
    )


def electronic_efficiency(clearance_db: float) -> float:
    """Effective efficiency of the detector's electronic noise floor.

    clearance_db is the shot-noise to electronic-noise variance ratio in dB;
    returns 1 - 10^(-clearance/10).  Infinite clearance -> 1.
    """
    if clearance_db < 0.0:
        raise ValueError(f"clearance_db must be >= 0, got {clearance_db}")
    return 1.0 - 10.0 ** (-clearance_db / 10.0)


def visibility_to_efficiency(visibility: float) -> float:
    """Mode-overlap efficiency from interference visibility: V^2."""
    if not 0.0 <= visibility <= 1.0:
        raise ValueError(f"visibility must be in [0, 1], got {visibility}")
    return visibility * visibility


@dataclass(frozen=True)
class DetectionBudget:
    """Multiplicative detection-efficiency chain.

    eta_visibility is the mode-overlap term (visibility squared),
    eta_electronic the clearance-derived effective efficiency.
    """

    eta_waveguide: float
    eta_optics: float
    eta_visibility: float
    eta_quantum: float
    eta_electronic: float

    def __post_init__(self):
        for name in ("eta_waveguide", "eta_optics", "eta_visibility",
                     "eta_quantum", "eta_electronic"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")

    @classmethod
    def from_raw(cls, eta_waveguide: float, eta_optics: float, visibility: float,
                 eta_quantum: float, clearance_db: float) -> "DetectionBudget":
        """Build from directly measured quantities (visibility, clearance)."""
        return cls(
            eta_waveguide=eta_waveguide,
            eta_optics=eta_optics,
            eta_visibility=visibility_to_efficiency(visibility),
            eta_quantum=eta_quantum,
            eta_electronic=electronic_efficiency(clearance_db),
        )

    def homodyne_efficiency(self) -> float:
        """Detector-side chain: overlap x quantum efficiency x electronics."""
        return self.eta_visibility * self.eta_quantum * self.eta_electronic

    def external_efficiency(self) -> float:
        """Everything after the waveguide output facet (optics x homodyne)."""
        return self.eta_optics * self.homodyne_efficiency()

    def total(self) -> float:
        return self.eta_waveguide * self.external_efficiency()


def budget_total(budget: DetectionBudget) -> tuple[float, float]:
    """Product of the efficiency chain, as (fraction, dB)."""
    total = budget.total()
    if total == 0.0:
        return 0.0, -math.inf
    return total, linear_to_db(total)


def apply_detection_loss(variance_db: float, eta: float) -> float:
    """Quadrature variance after a loss channel of efficiency eta, in dB.

    V_out = eta * V_in + (1 - eta), with shot noise = 1.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must be in [0, 1], got {eta}")
    return linear_to_db(eta * db_to_linear(variance_db) + 1.0 - eta)


def infer_onchip_squeezing(measured_db: float, eta_external: float) -> float:
    """Invert the external loss chain to recover the on-chip variance in dB.

    eta_external is the transmission between the waveguide output and the
    recorded variance.  A measured variance at or below the loss floor
    1 - eta_external cannot come from any physical state and is rejected.
    """
    if not 0.0 < eta_external <= 1.0:
        raise ValueError(f"eta_external must be in (0, 1], got {eta_external}")
    measured_lin = db_to_linear(measured_db)
    floor = 1.0 - eta_external
    if measured_lin <= floor:
        raise UnphysicalInputError(
            f"measured variance {measured_lin:.6g} (= {measured_db} dB) is at or "
            f"below the loss floor {floor:.6g} for eta_external = {eta_external}"
        )
    return linear_to_db((measured_lin - floor) / eta_external)


def normalized_to_total_efficiency(norm_efficiency: float, length_cm: float) -> float:
    """Length-integrated conversion efficiency: norm * length^2.

    Unit-agnostic: %/Wcm^2 in gives %/W out, fraction/Wcm^2 gives fraction/W.
    """
    if norm_efficiency < 0.0 or length_cm < 0.0:
        raise ValueError("norm_efficiency and length_cm must be >= 0")
    return norm_efficiency * length_cm * length_cm
