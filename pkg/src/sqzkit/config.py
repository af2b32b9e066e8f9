"""Run configuration: strict JSON schema, defaults, and round-trip emission.

A config document has five sections (waveguide, pulses, acquisition,
budget, fit).  Unknown keys are rejected; keys starting with an underscore
are reserved for human comments and ignored.  ``pulses.avg_power_w`` may be
a single number or a list of numbers (a pump-power sweep).  The budget
section takes either direct efficiencies (eta_visibility, eta_electronic)
or the raw measurements they derive from (visibility, clearance_db).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .physics import DetectionBudget, PulseTrain, WaveguideParams
from .synth import AcquisitionConfig


@dataclass(frozen=True)
class FitSettings:
    tol: float = 1e-10
    max_iter: int = 200
    fix_alpha: bool = True


@dataclass
class RunConfig:
    waveguide: WaveguideParams
    avg_powers_w: list[float]
    rep_rate_hz: float
    fwhm_s: float
    shape_factor: float
    acquisition: AcquisitionConfig
    budget: DetectionBudget
    fit: FitSettings
    pulses_per_bin: int = 5000
    filter_fwhm_hz: float | None = None
    signal_fwhm_s: float | None = None

    def pulse_train(self, avg_power_w: float | None = None) -> PulseTrain:
        power = self.avg_powers_w[0] if avg_power_w is None else avg_power_w
        return PulseTrain(avg_power_w=power, rep_rate_hz=self.rep_rate_hz,
                          fwhm_s=self.fwhm_s, shape_factor=self.shape_factor)

    def alpha_per_w(self) -> float:
        """Length-integrated conversion efficiency, fraction per watt."""
        return self.waveguide.total_efficiency_per_w()

    def to_dict(self) -> dict:
        """Canonical emission; parsing the result reproduces this config."""
        doc = {
            "waveguide": {
                "length_m": self.waveguide.length_m,
                "norm_eff": self.waveguide.norm_efficiency,
                "loss_db_per_cm": self.waveguide.prop_loss_db_per_cm,
                "gvm_ps_per_mm": self.waveguide.gvm_ps_per_mm,
                "poling_period_um": self.waveguide.poling_period_um,
                "temperature_c": self.waveguide.temperature_c,
            },
            "pulses": {
                "avg_power_w": (self.avg_powers_w[0] if len(self.avg_powers_w) == 1
                                else list(self.avg_powers_w)),
                "rep_rate_hz": self.rep_rate_hz,
                "fwhm_s": self.fwhm_s,
                "shape_factor": self.shape_factor,
            },
            "acquisition": {
                "sample_rate_hz": self.acquisition.sample_rate_hz,
                "rep_rate_hz": self.acquisition.rep_rate_hz,
                "n_samples": self.acquisition.n_samples,
                "n_traces": self.acquisition.n_traces,
                "lo_clearance_db": self.acquisition.lo_clearance_db,
                "ramp_start_rad": self.acquisition.ramp_start_rad,
                "ramp_end_rad": self.acquisition.ramp_end_rad,
                "seed": self.acquisition.seed,
                "pulses_per_bin": self.pulses_per_bin,
            },
            "budget": {
                "eta_waveguide": self.budget.eta_waveguide,
                "eta_optics": self.budget.eta_optics,
                "eta_visibility": self.budget.eta_visibility,
                "eta_quantum": self.budget.eta_quantum,
                "eta_electronic": self.budget.eta_electronic,
            },
            "fit": {
                "tol": self.fit.tol,
                "max_iter": self.fit.max_iter,
                "fix_alpha": self.fit.fix_alpha,
            },
        }
        if self.filter_fwhm_hz is not None:
            doc["pulses"]["filter_fwhm_hz"] = self.filter_fwhm_hz
        if self.signal_fwhm_s is not None:
            doc["pulses"]["signal_fwhm_s"] = self.signal_fwhm_s
        if self.acquisition.pulse_kernel is not None:
            doc["acquisition"]["pulse_kernel"] = list(self.acquisition.pulse_kernel)
        return doc


def _section(doc: dict, name: str, allowed: set[str], required: set[str]) -> dict:
    raw = doc.get(name)
    if raw is None:
        raise ConfigError(f"missing config section '{name}'")
    if not isinstance(raw, dict):
        raise ConfigError(f"config section '{name}' must be an object")
    cleaned = {k: v for k, v in raw.items() if not k.startswith("_")}
    unknown = set(cleaned) - allowed
    if unknown:
        raise ConfigError(
            f"unknown keys in section '{name}': {sorted(unknown)} "
            f"(allowed: {sorted(allowed)})"
        )
    missing = required - set(cleaned)
    if missing:
        raise ConfigError(f"section '{name}' missing required keys: {sorted(missing)}")
    return cleaned


def _number(section: str, key: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {value!r}")
    return float(value)


def _integer(section: str, key: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{section}.{key} must be an integer, got {value!r}")
    return value


def _boolean(section: str, key: str, value) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"{section}.{key} must be a boolean, got {value!r}")
    return value


def parse_config(doc: dict) -> RunConfig:
    """Validate a parsed JSON document against the strict schema."""
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = {k for k in doc if not k.startswith("_")} - {
        "waveguide", "pulses", "acquisition", "budget", "fit"}
    if unknown:
        raise ConfigError(f"unknown top-level sections: {sorted(unknown)}")

    wg = _section(doc, "waveguide",
                  {"length_m", "norm_eff", "loss_db_per_cm", "gvm_ps_per_mm",
                   "poling_period_um", "temperature_c"},
                  {"length_m", "norm_eff", "loss_db_per_cm", "gvm_ps_per_mm"})
    pu = _section(doc, "pulses",
                  {"avg_power_w", "rep_rate_hz", "fwhm_s", "shape_factor",
                   "filter_fwhm_hz", "signal_fwhm_s"},
                  {"avg_power_w", "rep_rate_hz", "fwhm_s"})
    ac = _section(doc, "acquisition",
                  {"sample_rate_hz", "rep_rate_hz", "n_samples", "n_traces",
                   "lo_clearance_db", "ramp_start_rad", "ramp_end_rad",
                   "pulse_kernel", "seed", "pulses_per_bin"},
                  set())
    bu = _section(doc, "budget",
                  {"eta_waveguide", "eta_optics", "eta_quantum",
                   "visibility", "eta_visibility", "clearance_db", "eta_electronic"},
                  {"eta_waveguide", "eta_optics", "eta_quantum"})
    fi = _section(doc, "fit", {"tol", "max_iter", "fix_alpha"}, set())

    try:
        waveguide = WaveguideParams(
            length_m=_number("waveguide", "length_m", wg["length_m"]),
            norm_efficiency=_number("waveguide", "norm_eff", wg["norm_eff"]),
            prop_loss_db_per_cm=_number("waveguide", "loss_db_per_cm", wg["loss_db_per_cm"]),
            gvm_ps_per_mm=_number("waveguide", "gvm_ps_per_mm", wg["gvm_ps_per_mm"]),
            poling_period_um=_number("waveguide", "poling_period_um",
                                     wg.get("poling_period_um", 0.0)),
            temperature_c=_number("waveguide", "temperature_c",
                                  wg.get("temperature_c", 0.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"waveguide: {exc}") from exc

    power_raw = pu["avg_power_w"]
    if isinstance(power_raw, list):
        if not power_raw:
            raise ConfigError("pulses.avg_power_w list must be nonempty")
        powers = [_number("pulses", "avg_power_w[]", p) for p in power_raw]
    else:
        powers = [_number("pulses", "avg_power_w", power_raw)]
    if any(p < 0 for p in powers):
        raise ConfigError("pulses.avg_power_w must be >= 0")
    rep_rate = _number("pulses", "rep_rate_hz", pu["rep_rate_hz"])
    fwhm = _number("pulses", "fwhm_s", pu["fwhm_s"])
    shape = _number("pulses", "shape_factor", pu.get("shape_factor", 1.0))
    try:
        PulseTrain(avg_power_w=powers[0], rep_rate_hz=rep_rate, fwhm_s=fwhm,
                   shape_factor=shape)
    except ValueError as exc:
        raise ConfigError(f"pulses: {exc}") from exc

    kernel = ac.get("pulse_kernel")
    if kernel is not None:
        if not isinstance(kernel, list) or not kernel:
            raise ConfigError("acquisition.pulse_kernel must be a nonempty list")
        kernel = np.array([_number("acquisition", "pulse_kernel[]", v) for v in kernel])
    try:
        acquisition = AcquisitionConfig(
            sample_rate_hz=_integer("acquisition", "sample_rate_hz",
                                    ac.get("sample_rate_hz", 1_000_000_000)),
            rep_rate_hz=_integer("acquisition", "rep_rate_hz",
                                 ac.get("rep_rate_hz", 100_000_000)),
            n_samples=_integer("acquisition", "n_samples", ac.get("n_samples", 5_000_000)),
            n_traces=_integer("acquisition", "n_traces", ac.get("n_traces", 18)),
            lo_clearance_db=_number("acquisition", "lo_clearance_db",
                                    ac.get("lo_clearance_db", 8.0)),
            ramp_start_rad=_number("acquisition", "ramp_start_rad",
                                   ac.get("ramp_start_rad", 0.0)),
            ramp_end_rad=_number("acquisition", "ramp_end_rad",
                                 ac.get("ramp_end_rad", 2.0 * math.pi)),
            pulse_kernel=kernel,
            seed=_integer("acquisition", "seed", ac.get("seed", 0)),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"acquisition: {exc}") from exc
    pulses_per_bin = _integer("acquisition", "pulses_per_bin",
                              ac.get("pulses_per_bin", 5000))
    if pulses_per_bin < 2:
        raise ConfigError("acquisition.pulses_per_bin must be >= 2")

    if ("visibility" in bu) == ("eta_visibility" in bu):
        raise ConfigError("budget needs exactly one of visibility / eta_visibility")
    if ("clearance_db" in bu) == ("eta_electronic" in bu):
        raise ConfigError("budget needs exactly one of clearance_db / eta_electronic")
    try:
        from .physics import electronic_efficiency, visibility_to_efficiency
        eta_vis = (visibility_to_efficiency(_number("budget", "visibility", bu["visibility"]))
                   if "visibility" in bu
                   else _number("budget", "eta_visibility", bu["eta_visibility"]))
        eta_e = (electronic_efficiency(_number("budget", "clearance_db", bu["clearance_db"]))
                 if "clearance_db" in bu
                 else _number("budget", "eta_electronic", bu["eta_electronic"]))
        budget = DetectionBudget(
            eta_waveguide=_number("budget", "eta_waveguide", bu["eta_waveguide"]),
            eta_optics=_number("budget", "eta_optics", bu["eta_optics"]),
            eta_visibility=eta_vis,
            eta_quantum=_number("budget", "eta_quantum", bu["eta_quantum"]),
            eta_electronic=eta_e,
        )
    except ValueError as exc:
        raise ConfigError(f"budget: {exc}") from exc

    fit = FitSettings(
        tol=_number("fit", "tol", fi.get("tol", 1e-10)),
        max_iter=_integer("fit", "max_iter", fi.get("max_iter", 200)),
        fix_alpha=_boolean("fit", "fix_alpha", fi.get("fix_alpha", True)),
    )
    if fit.tol <= 0 or fit.max_iter < 1:
        raise ConfigError("fit.tol must be > 0 and fit.max_iter >= 1")

    filter_fwhm = pu.get("filter_fwhm_hz")
    if filter_fwhm is not None:
        filter_fwhm = _number("pulses", "filter_fwhm_hz", filter_fwhm)
        if filter_fwhm <= 0:
            raise ConfigError("pulses.filter_fwhm_hz must be > 0")
    signal_fwhm = pu.get("signal_fwhm_s")
    if signal_fwhm is not None:
        signal_fwhm = _number("pulses", "signal_fwhm_s", signal_fwhm)
        if signal_fwhm <= 0:
            raise ConfigError("pulses.signal_fwhm_s must be > 0")

    return RunConfig(
        waveguide=waveguide,
        avg_powers_w=powers,
        rep_rate_hz=rep_rate,
        fwhm_s=fwhm,
        shape_factor=shape,
        acquisition=acquisition,
        budget=budget,
        fit=fit,
        pulses_per_bin=pulses_per_bin,
        filter_fwhm_hz=filter_fwhm,
        signal_fwhm_s=signal_fwhm,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(doc)


def default_config_dict() -> dict:
    """Reference configuration matching the characterized 4.7 mm device."""
    return {
        "waveguide": {
            "_comment": "4.7 mm poled strip-loaded waveguide; normalized SHG "
                        "efficiency 1.27 /W/cm^2 (127 %/Wcm^2)",
            "length_m": 4.7e-3,
            "norm_eff": 1.27,
            "loss_db_per_cm": 0.6,
            "gvm_ps_per_mm": 0.3128,
            "poling_period_um": 4.93,
            "temperature_c": 29.0,
        },
        "pulses": {
            "_comment": "pump pulse train: 310 uW average power at 100 MHz, "
                        "~10 ps FWHM; signal pulses measure 12 ps behind the "
                        "100 GHz filter",
            "avg_power_w": 3.1e-4,
            "rep_rate_hz": 1.0e8,
            "fwhm_s": 1.0e-11,
            "shape_factor": 1.0,
            "filter_fwhm_hz": 1.0e11,
            "signal_fwhm_s": 1.2e-11,
        },
        "acquisition": {
            "_comment": "1 GS/s, 5M points per trace = 500k pulses, 18 traces, "
                        "8 dB shot-noise clearance, full 2*pi ramp per trace",
            "sample_rate_hz": 1_000_000_000,
            "rep_rate_hz": 100_000_000,
            "n_samples": 5_000_000,
            "n_traces": 18,
            "lo_clearance_db": 8.0,
            "ramp_start_rad": 0.0,
            "ramp_end_rad": 6.283185307179586,
            "seed": 1556,
            "pulses_per_bin": 5000,
        },
        "budget": {
            "_comment": "waveguide -0.29 dB, other optics -4.57 dB, homodyne: "
                        "92% visibility, 98% quantum efficiency, 8 dB clearance",
            "eta_waveguide": 0.9354056741475519,
            "eta_optics": 0.3491403154785861,
            "visibility": 0.92,
            "eta_quantum": 0.98,
            "clearance_db": 8.0,
        },
        "fit": {
            "tol": 1e-10,
            "max_iter": 200,
            "fix_alpha": True,
        },
    }


def default_config() -> RunConfig:
    return parse_config(default_config_dict())
