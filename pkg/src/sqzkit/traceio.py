"""Binary trace file I/O.

Format (little-endian), version 1:

    offset  type              field
    0       4s     magic      b"SQZT"
    4       u16    version    1
    6       u8     trace_kind 0 = squeezed, 1 = shot, 2 = electronic
    7       u64    sample_rate_hz
    15      u64    rep_rate_hz
    23      u64    n_samples
    31      f64    ramp_start_rad
    39      f64    ramp_end_rad
    47      f64    clearance_db
    55      u64    seed       per-trace generator seed
    63      u16    kernel_len
    65      f64[kernel_len]   pulse kernel
    ...     f32[n_samples]    samples

Version 1 pins the sample generator: Philox4x64 keyed by the stored seed,
Gaussians via Box-Muller (see synth.gaussian_samples), so a trace is fully
reproducible from its own header.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError

TRACE_MAGIC = b"SQZT"
TRACE_VERSION = 1

TRACE_KINDS = ("squeezed", "shot", "electronic")
_KIND_TO_CODE = {name: code for code, name in enumerate(TRACE_KINDS)}

_HEADER_STRUCT = struct.Struct("<4sHBQQQdddQH")


@dataclass
class HomodyneTrace:
    """One sampled photocurrent stream plus the acquisition metadata
    needed to process it.  Samples are float32, in units where the
    integrated shot-noise variance is 1."""

    kind: str
    sample_rate_hz: int
    rep_rate_hz: int
    ramp_start_rad: float
    ramp_end_rad: float
    clearance_db: float
    seed: int
    kernel: np.ndarray
    samples: np.ndarray

    def __post_init__(self):
        if self.kind not in _KIND_TO_CODE:
            raise ValueError(f"unknown trace kind {self.kind!r}")
        self.kernel = np.asarray(self.kernel, dtype=np.float64)
        self.samples = np.asarray(self.samples, dtype=np.float32)

    @property
    def n_samples(self) -> int:
        return int(self.samples.size)

    @property
    def samples_per_pulse(self) -> int:
        return int(self.sample_rate_hz // self.rep_rate_hz)

    @property
    def n_pulses(self) -> int:
        return self.n_samples // self.samples_per_pulse


def write_trace(path, trace: HomodyneTrace) -> None:
    """Write a trace file; overwrites any existing file at path."""
    kernel = np.ascontiguousarray(trace.kernel, dtype="<f8")
    samples = np.ascontiguousarray(trace.samples, dtype="<f4")
    header = _HEADER_STRUCT.pack(
        TRACE_MAGIC,
        TRACE_VERSION,
        _KIND_TO_CODE[trace.kind],
        int(trace.sample_rate_hz),
        int(trace.rep_rate_hz),
        samples.size,
        float(trace.ramp_start_rad),
        float(trace.ramp_end_rad),
        float(trace.clearance_db),
        int(trace.seed),
        kernel.size,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(kernel.tobytes())
        fh.write(samples.tobytes())


def read_trace(path) -> HomodyneTrace:
    """Read and validate a trace file."""
    path = Path(path)
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER_STRUCT.size)
        if len(raw) < _HEADER_STRUCT.size:
            raise DataError(f"{path}: truncated header")
        (magic, version, kind_code, sample_rate, rep_rate, n_samples,
         ramp_start, ramp_end, clearance_db, seed, kernel_len) = _HEADER_STRUCT.unpack(raw)
        if magic != TRACE_MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}, not a trace file")
        if version != TRACE_VERSION:
            raise DataError(f"{path}: unsupported version {version}")
        if kind_code >= len(TRACE_KINDS):
            raise DataError(f"{path}: unknown trace kind code {kind_code}")
        kernel_bytes = fh.read(8 * kernel_len)
        if len(kernel_bytes) < 8 * kernel_len:
            raise DataError(f"{path}: truncated kernel block")
        kernel = np.frombuffer(kernel_bytes, dtype="<f8").copy()
        sample_bytes = fh.read(4 * n_samples)
        if len(sample_bytes) < 4 * n_samples:
            raise DataError(
                f"{path}: truncated sample block "
                f"({len(sample_bytes) // 4} of {n_samples} samples)"
            )
        samples = np.frombuffer(sample_bytes, dtype="<f4").copy()
    return HomodyneTrace(
        kind=TRACE_KINDS[kind_code],
        sample_rate_hz=sample_rate,
        rep_rate_hz=rep_rate,
        ramp_start_rad=ramp_start,
        ramp_end_rad=ramp_end,
        clearance_db=clearance_db,
        seed=seed,
        kernel=kernel,
        samples=samples,
    )
