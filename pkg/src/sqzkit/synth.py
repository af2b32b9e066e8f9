"""Synthetic homodyne trace generation.

Models the acquisition as a pulse train whose per-pulse quadrature variance
follows the local-oscillator phase ramp:

    V(theta) = S_plus * sin^2(theta) + S_minus * cos^2(theta)

Pulse k gets a Gaussian draw of variance V(theta_k) deposited on the pulse
kernel inside its sample window.  Shot traces are the S = 1 case and define
the variance unit.  Electronic traces model the detector noise floor as
white Gaussian noise whose integrated variance sits ``clearance_db`` below
the integrated shot variance; this floor is a separate trace kind and is
not mixed into squeezed/shot traces, so their integrated variances stay
calibrated to the quadrature levels they carry (the clearance enters the
efficiency budget as an effective loss instead).

Analog front-end shaping (notch and high-pass filters, detector bandwidth)
is not simulated; its net effect is absorbed into the pulse-kernel
assumption, and the processing side must integrate with the matching
kernel.

Reproducibility: trace i of a run is generated from Philox4x64 seeded by
hash(master_seed, i), so parallel and serial generation agree bit for bit,
and every trace file records its own derived seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import physics
from .errors import ConfigError
from .traceio import HomodyneTrace, write_trace


def default_pulse_kernel(samples_per_pulse: int) -> np.ndarray:
    """Raised-cosine window with unit L2 norm."""
    if samples_per_pulse < 1:
        raise ValueError("samples_per_pulse must be >= 1")
    i = np.arange(samples_per_pulse, dtype=float)
    kernel = 0.5 * (1.0 - np.cos(2.0 * np.pi * (i + 0.5) / samples_per_pulse))
    if samples_per_pulse == 1:
        kernel = np.ones(1)
    return kernel / np.linalg.norm(kernel)


@dataclass
class AcquisitionConfig:
    """Digitizer and ramp settings for one synthetic acquisition run."""

    sample_rate_hz: int = 1_000_000_000
    rep_rate_hz: int = 100_000_000
    n_samples: int = 5_000_000
    n_traces: int = 18
    lo_clearance_db: float = 8.0
    ramp_start_rad: float = 0.0
    ramp_end_rad: float = 2.0 * math.pi
    pulse_kernel: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        if self.sample_rate_hz <= 0 or self.rep_rate_hz <= 0:
            raise ConfigError("sample_rate_hz and rep_rate_hz must be > 0")
        if self.sample_rate_hz % self.rep_rate_hz != 0:
            raise ConfigError(
                f"sample_rate_hz {self.sample_rate_hz} not divisible by "
                f"rep_rate_hz {self.rep_rate_hz}"
            )
        w = self.samples_per_pulse
        if self.n_samples <= 0 or self.n_samples % w != 0:
            raise ConfigError(
                f"n_samples {self.n_samples} not divisible by samples per pulse {w}"
            )
        if self.n_traces < 1:
            raise ConfigError("n_traces must be >= 1")
        if self.lo_clearance_db < 0:
            raise ConfigError("lo_clearance_db must be >= 0")
        if self.pulse_kernel is None:
            self.pulse_kernel = default_pulse_kernel(w)
        else:
            self.pulse_kernel = np.asarray(self.pulse_kernel, dtype=float)
            if self.pulse_kernel.size != w:
                raise ConfigError(
                    f"pulse_kernel length {self.pulse_kernel.size} != samples per pulse {w}"
                )
            norm = np.linalg.norm(self.pulse_kernel)
            if abs(norm - 1.0) > 1e-6:
                raise ConfigError(f"pulse_kernel must have unit L2 norm, got {norm!r}")

    @property
    def samples_per_pulse(self) -> int:
        return self.sample_rate_hz // self.rep_rate_hz

    @property
    def n_pulses(self) -> int:
        return self.n_samples // self.samples_per_pulse

    def pulse_phases(self) -> np.ndarray:
        """LO phase per pulse: linear in pulse index, end point exclusive."""
        k = np.arange(self.n_pulses, dtype=float)
        return self.ramp_start_rad + (self.ramp_end_rad - self.ramp_start_rad) * k / self.n_pulses


def derive_trace_seed(master_seed: int, trace_index: int) -> int:
    """Per-trace 64-bit stream seed; stable across platforms and runs."""
    ss = np.random.SeedSequence([int(master_seed), int(trace_index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def gaussian_samples(seed: int, count: int) -> np.ndarray:
    """Standard normal draws: Box-Muller over a Philox4x64 counter stream."""
    if count < 0:
        raise ValueError("count must be >= 0")
    rng = np.random.Generator(np.random.Philox(seed))
    pairs = (count + 1) // 2
    u1 = 1.0 - rng.random(pairs)   # (0, 1], keeps log finite
    u2 = rng.random(pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    out = np.empty(2 * pairs)
    out[0::2] = radius * np.cos(angle)
    out[1::2] = radius * np.sin(angle)
    return out[:count]


def synthesize_trace(cfg: AcquisitionConfig, s_minus_lin: float | None = None,
                     s_plus_lin: float | None = None, kind: str = "squeezed",
                     trace_index: int = 0) -> HomodyneTrace:
    """Generate one trace of the requested kind.

    squeezed   requires s_minus_lin / s_plus_lin (variances, shot = 1)
    shot       forces S = 1 on both quadratures
    electronic white noise, integrated variance 10^(-clearance/10)
    """
    seed = derive_trace_seed(cfg.seed, trace_index)
    w = cfg.samples_per_pulse
    if kind == "shot":
        s_minus_lin, s_plus_lin = 1.0, 1.0
    if kind in ("squeezed", "shot"):
        if s_minus_lin is None or s_plus_lin is None:
            raise ValueError("squeezed traces need s_minus_lin and s_plus_lin")
        if s_minus_lin <= 0.0 or s_plus_lin <= 0.0:
            raise ValueError("quadrature variances must be > 0")
        theta = cfg.pulse_phases()
        variance = s_plus_lin * np.sin(theta) ** 2 + s_minus_lin * np.cos(theta) ** 2
        draws = gaussian_samples(seed, cfg.n_pulses) * np.sqrt(variance)
        samples = (draws[:, None] * cfg.pulse_kernel[None, :]).reshape(-1)
    elif kind == "electronic":
        sigma = math.sqrt(10.0 ** (-cfg.lo_clearance_db / 10.0))
        samples = gaussian_samples(seed, cfg.n_samples) * sigma
    else:
        raise ValueError(f"unknown trace kind {kind!r}")
    return HomodyneTrace(
        kind=kind,
        sample_rate_hz=cfg.sample_rate_hz,
        rep_rate_hz=cfg.rep_rate_hz,
        ramp_start_rad=cfg.ramp_start_rad,
        ramp_end_rad=cfg.ramp_end_rad,
        clearance_db=cfg.lo_clearance_db,
        seed=seed,
        kernel=cfg.pulse_kernel,
        samples=samples.astype(np.float32),
    )


@dataclass
class SweepEntry:
    path: str
    kind: str
    avg_power_w: float


def synthesize_power_sweep(cfg: AcquisitionConfig, alpha_per_w: float, eta: float,
                           avg_powers_w: list[float], pulses: physics.PulseTrain,
                           out_dir) -> list[SweepEntry]:
    """Write one squeezed trace set per pump power plus shot and electronic
    reference sets; returns the manifest entries (also written as
    ``manifest.json`` in out_dir).

    The injected quadrature levels for each power come from the gain model
    at peak power derived from ``pulses`` (with its avg_power_w replaced by
    the sweep value).
    """
    if len(avg_powers_w) == 0:
        raise ValueError("avg_powers_w must be nonempty")
    if any(p < 0 for p in avg_powers_w):
        raise ValueError("avg_powers_w must be nonnegative")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    entries: list[SweepEntry] = []
    stream = 0

    def emit(trace: HomodyneTrace, name: str, avg_power: float):
        path = out_dir / name
        write_trace(path, trace)
        entries.append(SweepEntry(path=str(path), kind=trace.kind, avg_power_w=avg_power))

    for t in range(cfg.n_traces):
        emit(synthesize_trace(cfg, kind="shot", trace_index=stream),
             f"trace_shot_{t:03d}.sqzt", 0.0)
        stream += 1
    for t in range(cfg.n_traces):
        emit(synthesize_trace(cfg, kind="electronic", trace_index=stream),
             f"trace_electronic_{t:03d}.sqzt", 0.0)
        stream += 1
    for p_idx, avg_power in enumerate(avg_powers_w):
        train = physics.PulseTrain(
            avg_power_w=avg_power,
            rep_rate_hz=pulses.rep_rate_hz,
            fwhm_s=pulses.fwhm_s,
            shape_factor=pulses.shape_factor,
        )
        levels = physics.squeezing_levels(physics.peak_power(train), alpha_per_w, eta)
        for t in range(cfg.n_traces):
            trace = synthesize_trace(
                cfg, levels.s_minus_lin, levels.s_plus_lin,
                kind="squeezed", trace_index=stream,
            )
            emit(trace, f"trace_squeezed_p{p_idx:02d}_{t:03d}.sqzt", avg_power)
            stream += 1

    manifest = [entry.__dict__ for entry in entries]
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return entries
