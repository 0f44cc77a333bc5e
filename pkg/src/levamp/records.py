"""Continuous measurement records and their on-disk formats.

A homodyne position record is a regularly sampled time series

    y_k = sqrt(meas_rate) * Q(t_k) + xi_k / sqrt(dt)

where ``xi_k`` are independent standard normals (the Ito increment
``dW_k / dt`` of a Wiener process).  Samples taken while detection is
gated off carry no information; they are flagged through a boolean
``gate`` mask and stored as NaN rather than silently zero-filled.

Two serializations are provided: a CSV form with columns
``t_s, y, gate`` for inspection, and a compact little-endian binary
form (magic ``LKR1``) for large ensembles.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"LKR1"

_CSV_HEADER = ["t_s", "y", "gate"]


@dataclass(frozen=True)
class MeasurementRecord:
    """A uniformly sampled detector record.

    Parameters
    ----------
    t0 : float
        Time of the first sample in seconds.
    dt : float
        Sample spacing in seconds, strictly positive.
    samples : ndarray
        Record values ``y_k``. Gated-off entries hold NaN.
    gate : ndarray of bool
        True where detection was on for the sample.
    """

    t0: float
    dt: float
    samples: np.ndarray = field(repr=False)
    gate: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=float)
        gate = np.asarray(self.gate, dtype=bool)
        if samples.ndim != 1 or gate.shape != samples.shape:
            raise ValueError("samples and gate must be 1-d arrays of equal length")
        if not (self.dt > 0.0 and np.isfinite(self.dt)):
            raise ValueError("dt must be positive and finite")
        if not np.isfinite(self.t0):
            raise ValueError("t0 must be finite")
        if samples.size and not np.all(np.isfinite(samples[gate])):
            raise ValueError("gated-on samples must be finite")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "gate", gate)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        """Span covered by the record, ``n * dt`` seconds."""
        return self.samples.size * self.dt

    @property
    def times(self) -> np.ndarray:
        """Sample timestamps ``t0 + k * dt``."""
        return self.t0 + self.dt * np.arange(self.samples.size)

    def all_gated_on(self) -> bool:
        return bool(np.all(self.gate))


def write_record_csv(record: MeasurementRecord, path) -> None:
    """Write a record as CSV with mandatory header ``t_s, y, gate``."""
    times = record.times
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_HEADER)
        for k in range(len(record)):
            writer.writerow(
                [
                    format(times[k], ".17g"),
                    format(record.samples[k], ".17g"),
                    int(record.gate[k]),
                ]
            )


def read_record_csv(path) -> MeasurementRecord:
    """Read a record written by :func:`write_record_csv`.

    The sample spacing is recovered from the first two timestamps; a
    single-sample record gets a placeholder spacing of 1 s.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _CSV_HEADER:
            raise ValueError(f"expected header {_CSV_HEADER}, got {header}")
        rows = [row for row in reader if row]
    if not rows:
        raise ValueError("record CSV has no samples")
    times = np.array([float(r[0]) for r in rows])
    samples = np.array([float(r[1]) for r in rows])
    gate = np.array([bool(int(r[2])) for r in rows])
    dt = float(times[1] - times[0]) if len(times) > 1 else 1.0
    return MeasurementRecord(t0=float(times[0]), dt=dt, samples=samples, gate=gate)


def write_record_binary(record: MeasurementRecord, path) -> None:
    """Write the little-endian binary form.

    Layout: magic ``LKR1``, u64 sample count, f64 t0, f64 dt,
    f64 samples, u8 gate flags.
    """
    n = len(record)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Qdd", n, record.t0, record.dt))
        fh.write(record.samples.astype("<f8").tobytes())
        fh.write(record.gate.astype(np.uint8).tobytes())


def read_record_binary(path) -> MeasurementRecord:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"bad magic {magic!r}, expected {MAGIC!r}")
        n, t0, dt = struct.unpack("<Qdd", fh.read(24))
        samples = np.frombuffer(fh.read(8 * n), dtype="<f8").astype(float)
        gate = np.frombuffer(fh.read(n), dtype=np.uint8).astype(bool)
    if samples.size != n or gate.size != n:
        raise ValueError("truncated record file")
    return MeasurementRecord(t0=t0, dt=dt, samples=samples, gate=gate)
