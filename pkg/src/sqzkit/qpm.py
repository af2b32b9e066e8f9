"""Quasi-phase-matching spectra, poling defects, and walk-off arithmetic.

The phase-matching response is modeled in the detuning frame: delta_k = 0 is
the QPM resonance of the ideally poled device, and the ideal normalized
response is sinc^2(delta_k * L / 2).

Defective structures are evaluated domain by domain.  Domain j spanning
[z_j, z_{j+1}] contributes its exact envelope integral

    c_j * l_j * sinc(delta_k * l_j / 2) * exp(i * delta_k * zbar_j)

with zbar_j the domain midpoint and c_j a complex coefficient carrying the
two defect channels: a sign factor (+1 where the poling direction matches
the ideal alternation, -1 where a domain failed to flip) and a carrier
phase error exp(i * pi * (z_j - z_j_ideal) / l_nominal) accumulated by
boundary drift.  For a perfectly periodic map every c_j = 1 and the sum
collapses to the ideal sinc^2 response; boundary jitter makes the
coefficients complex, which is what skews the spectrum.  This defect model
is illustrative: real poling errors are not published at domain resolution.

Monte Carlo map constructors take an explicit seed; everything else is pure.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

SPEED_OF_LIGHT_M_PER_S = 299_792_458.0


@dataclass(frozen=True)
class DispersionInput:
    """Tabulated modal indices for the fundamental and second-harmonic bands.

    Wavelengths in nm, strictly increasing within each band; indices > 1.
    Group indices are user-supplied (mode-solver output), never computed here.
    """

    fund_wavelength_nm: np.ndarray
    fund_n_eff: np.ndarray
    fund_n_g: np.ndarray
    sh_wavelength_nm: np.ndarray
    sh_n_eff: np.ndarray
    sh_n_g: np.ndarray

    def __post_init__(self):
        for band in ("fund", "sh"):
            wl = getattr(self, f"{band}_wavelength_nm")
            if wl.size == 0:
                raise DataError(f"dispersion table has no rows for band '{band}'")
            if wl.size > 1 and not np.all(np.diff(wl) > 0):
                raise DataError(f"band '{band}' wavelengths must be strictly increasing")
            for col in ("n_eff", "n_g"):
                idx = getattr(self, f"{band}_{col}")
                if idx.shape != wl.shape:
                    raise DataError(f"band '{band}' column {col} length mismatch")
                if not np.all(idx > 1.0):
                    raise DataError(f"band '{band}' {col} values must be > 1")


DISPERSION_CSV_HEADER = ["band", "wavelength_nm", "n_eff", "n_g"]


def load_dispersion_csv(path) -> DispersionInput:
    """Read a dispersion table: header ``band,wavelength_nm,n_eff,n_g``,
    band labels ``fund`` / ``sh``."""
    rows = {"fund": [], "sh": []}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != DISPERSION_CSV_HEADER:
            raise DataError(
                f"bad dispersion CSV header {header!r}, expected {DISPERSION_CSV_HEADER}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 columns, got {len(row)}")
            band = row[0].strip()
            if band not in rows:
                raise DataError(f"{path}:{lineno}: unknown band {band!r} (use fund/sh)")
            try:
                rows[band].append(tuple(float(cell) for cell in row[1:]))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-numeric cell ({exc})") from exc
    def cols(band, i):
        return np.array([r[i] for r in sorted(rows[band])], dtype=float)
    return DispersionInput(
        fund_wavelength_nm=cols("fund", 0),
        fund_n_eff=cols("fund", 1),
        fund_n_g=cols("fund", 2),
        sh_wavelength_nm=cols("sh", 0),
        sh_n_eff=cols("sh", 1),
        sh_n_g=cols("sh", 2),
    )


@dataclass(frozen=True)
class PolingMap:
    """Ordered domain lengths (um) with the sign of the nonlinearity in each.

    nominal_domain_um is the design domain length (half the poling period,
    one coherence length); it anchors the ideal alternation and the carrier
    phase of the defect model.
    """

    domain_lengths_um: np.ndarray
    signs: np.ndarray
    nominal_domain_um: float

    def __post_init__(self):
        lengths = np.asarray(self.domain_lengths_um, dtype=float)
        signs = np.asarray(self.signs, dtype=int)
        object.__setattr__(self, "domain_lengths_um", lengths)
        object.__setattr__(self, "signs", signs)
        if lengths.size == 0:
            raise ValueError("poling map must contain at least one domain")
        if not np.all(lengths > 0.0):
            raise ValueError("all domain lengths must be > 0")
        if signs.shape != lengths.shape:
            raise ValueError("signs and domain_lengths_um must have equal length")
        if not np.all(np.abs(signs) == 1):
            raise ValueError("signs must be +1 or -1")
        if self.nominal_domain_um <= 0.0:
            raise ValueError("nominal_domain_um must be > 0")

    @property
    def n_domains(self) -> int:
        return int(self.domain_lengths_um.size)

    @property
    def total_length_um(self) -> float:
        return float(self.domain_lengths_um.sum())

    def matches_device_length(self, length_m: float) -> bool:
        """Total map length equals the device length within one domain."""
        return abs(self.total_length_um - length_m * 1e6) <= self.nominal_domain_um


def periodic_poling_map(length_m: float, poling_period_um: float) -> PolingMap:
    """Perfectly periodic map covering length_m; a trailing partial domain
    absorbs any remainder so the total length is exact."""
    if length_m <= 0.0 or poling_period_um <= 0.0:
        raise ValueError("length_m and poling_period_um must be > 0")
    nominal = poling_period_um / 2.0
    total_um = length_m * 1e6
    n_full = int(total_um // nominal)
    remainder = total_um - n_full * nominal
    lengths = [nominal] * n_full
    if remainder > 1e-9 * nominal:
        lengths.append(remainder)
    signs = [1 if j % 2 == 0 else -1 for j in range(len(lengths))]
    return PolingMap(np.array(lengths), np.array(signs), nominal)


def jittered_poling_map(length_m: float, poling_period_um: float,
                        jitter_frac: float, flip_probability: float = 0.0,
                        seed: int = 0) -> PolingMap:
    """Randomly degraded map: Gaussian domain-length jitter (fraction of the
    nominal length, clipped at 3 sigma) plus optional isolated sign-flip
    defects.  Lengths are rescaled so the total device length is preserved.
    """
    if jitter_frac < 0.0 or not 0.0 <= flip_probability <= 1.0:
        raise ValueError("jitter_frac must be >= 0 and flip_probability in [0, 1]")
    base = periodic_poling_map(length_m, poling_period_um)
    rng = np.random.default_rng(seed)
    noise = np.clip(rng.standard_normal(base.n_domains), -3.0, 3.0)
    lengths = base.domain_lengths_um * (1.0 + jitter_frac * noise)
    lengths = np.maximum(lengths, 0.05 * base.nominal_domain_um)
    lengths *= base.total_length_um / lengths.sum()
    signs = base.signs.copy()
    if flip_probability > 0.0:
        defects = rng.random(base.n_domains) < flip_probability
        signs[defects] *= -1
    return PolingMap(lengths, signs, base.nominal_domain_um)


def ideal_qpm_spectrum(delta_k: np.ndarray, length_m: float) -> np.ndarray:
    """Normalized conversion-efficiency response sinc^2(delta_k * L / 2).

    delta_k is the detuning from the QPM resonance in rad/m; the peak is 1
    at delta_k = 0.
    """
    if length_m <= 0.0:
        raise ValueError(f"length_m must be > 0, got {length_m}")
    x = np.asarray(delta_k, dtype=float) * length_m / 2.0
    return np.sinc(x / np.pi) ** 2


def defective_qpm_spectrum(poling: PolingMap, delta_k: np.ndarray) -> np.ndarray:
    """Normalized response of an arbitrary poling map on a detuning grid.

    Reduces exactly to ideal_qpm_spectrum for a perfectly periodic map; the
    peak never exceeds 1 and equals 1 only for perfect poling.
    """
    dk = np.atleast_1d(np.asarray(delta_k, dtype=float))
    lengths_m = poling.domain_lengths_um * 1e-6
    nominal_m = poling.nominal_domain_um * 1e-6
    starts = np.concatenate([[0.0], np.cumsum(lengths_m)[:-1]])
    mids = starts + 0.5 * lengths_m
    total = lengths_m.sum()

    n = poling.n_domains
    ideal_alternation = np.where(np.arange(n) % 2 == 0, 1, -1)
    sign_vs_ideal = poling.signs * ideal_alternation
    # carrier phase error of each domain start against the ideal boundary
    # grid, accumulated from the per-domain length deviations (exact zero
    # for an unjittered map)
    deviations = poling.domain_lengths_um - poling.nominal_domain_um
    boundary_drift_um = np.concatenate([[0.0], np.cumsum(deviations)[:-1]])
    phase_error = (math.pi / poling.nominal_domain_um) * boundary_drift_um
    coeff = sign_vs_ideal * np.exp(1j * phase_error)

    # per-domain exact envelope integral, summed coherently (grid x domains)
    envelope = lengths_m[None, :] * np.sinc(dk[:, None] * lengths_m[None, :] / (2.0 * np.pi))
    carrier = np.exp(1j * dk[:, None] * mids[None, :])
    amplitude = (envelope * carrier) @ coeff / total
    out = np.abs(amplitude) ** 2
    return out if np.ndim(delta_k) else float(out[0])


def symmetric_detuning_grid(max_abs: float, n_half: int) -> np.ndarray:
    """Detuning grid with exact +/- pairs about 0, for asymmetry metrics."""
    if max_abs <= 0.0 or n_half < 1:
        raise ValueError("max_abs must be > 0 and n_half >= 1")
    positive = np.linspace(max_abs / n_half, max_abs, n_half)
    return np.concatenate([-positive[::-1], [0.0], positive])


def spectrum_asymmetry(delta_k: np.ndarray, efficiency: np.ndarray) -> float:
    """Normalized L1 difference between the spectrum and its mirror image.

    Requires a grid symmetric about 0 (see symmetric_detuning_grid); exactly
    0 for an even spectrum.
    """
    dk = np.asarray(delta_k, dtype=float)
    eff = np.asarray(efficiency, dtype=float)
    if dk.shape != eff.shape:
        raise ValueError("delta_k and efficiency must have the same shape")
    if not np.array_equal(dk, -dk[::-1]):
        raise ValueError("delta_k grid must be symmetric about 0")
    mirrored = eff[::-1]
    denom = float(np.sum(eff + mirrored))
    if denom == 0.0:
        return 0.0
    return float(np.sum(np.abs(eff - mirrored)) / denom)


def temporal_walkoff(gvm_ps_per_mm: float, length_m: float) -> float:
    """Accumulated group-velocity walk-off in ps over the device length."""
    if length_m < 0.0:
        raise ValueError(f"length_m must be >= 0, got {length_m}")
    return gvm_ps_per_mm * length_m * 1e3


def gvm_from_dispersion(dispersion: DispersionInput, lambda_fund_nm: float) -> float:
    """Group-velocity mismatch (inverse-velocity difference) in ps/mm.

    Interpolates the group index linearly at the fundamental wavelength and
    at its second harmonic; both must lie inside their band's table range.
    """
    lambda_sh_nm = lambda_fund_nm / 2.0
    fund_wl = dispersion.fund_wavelength_nm
    sh_wl = dispersion.sh_wavelength_nm
    if not fund_wl[0] <= lambda_fund_nm <= fund_wl[-1]:
        raise DataError(
            f"fundamental wavelength {lambda_fund_nm} nm outside table range "
            f"[{fund_wl[0]}, {fund_wl[-1]}]"
        )
    if not sh_wl[0] <= lambda_sh_nm <= sh_wl[-1]:
        raise DataError(
            f"second-harmonic wavelength {lambda_sh_nm} nm outside table range "
            f"[{sh_wl[0]}, {sh_wl[-1]}]"
        )
    n_g_fund = float(np.interp(lambda_fund_nm, fund_wl, dispersion.fund_n_g))
    n_g_sh = float(np.interp(lambda_sh_nm, sh_wl, dispersion.sh_n_g))
    # (n_g static difference) / c, expressed in ps/mm
    c_mm_per_ps = SPEED_OF_LIGHT_M_PER_S * 1e3 * 1e-12
    return (n_g_sh - n_g_fund) / c_mm_per_ps


# Time-bandwidth products of the transform-limited FWHM duration.  The
# rectangular value uses the sinc-pulse main-lobe convention.
_TIME_BANDWIDTH = {"gaussian": 0.441, "rectangular": 0.886}


def filtered_pulse_duration(filter_fwhm_hz: float, filter_shape: str) -> float:
    """Transform-limited FWHM duration (s) behind a spectral filter."""
    if filter_fwhm_hz <= 0.0:
        raise ValueError(f"filter_fwhm_hz must be > 0, got {filter_fwhm_hz}")
    try:
        tbp = _TIME_BANDWIDTH[filter_shape]
    except KeyError:
        raise ValueError(
            f"unknown filter shape {filter_shape!r}, expected one of "
            f"{sorted(_TIME_BANDWIDTH)}"
        ) from None
    return tbp / filter_fwhm_hz
