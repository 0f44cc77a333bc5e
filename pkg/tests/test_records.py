"""Measurement record container and its CSV / binary round trips."""

import numpy as np
import pytest

from levamp.records import (
    MeasurementRecord,
    read_record_binary,
    read_record_csv,
    write_record_binary,
    write_record_csv,
)

RNG = np.random.default_rng(905)


def make_record(n=64, t0=1.25e-4, dt=9.615384615384615e-8, gaps=False):
    gate = np.ones(n, dtype=bool)
    samples = RNG.standard_normal(n)
    if gaps:
        gate[n // 3 : n // 2] = False
        samples[~gate] = np.nan
    return MeasurementRecord(t0, dt, samples, gate)


def test_basic_accessors():
    rec = make_record(n=10)
    assert len(rec) == 10
    assert rec.duration == pytest.approx(10 * rec.dt, rel=1e-15)
    assert np.allclose(rec.times, rec.t0 + rec.dt * np.arange(10))
    assert rec.all_gated_on()


def test_gaps_clear_all_gated_on():
    assert not make_record(gaps=True).all_gated_on()


def test_csv_round_trip(tmp_path):
    rec = make_record()
    path = tmp_path / "rec.csv"
    write_record_csv(rec, path)
    back = read_record_csv(path)
    assert back.t0 == pytest.approx(rec.t0, rel=1e-15)
    assert back.dt == pytest.approx(rec.dt, rel=1e-15)
    assert np.allclose(back.samples, rec.samples, atol=1e-15)
    assert np.array_equal(back.gate, rec.gate)


def test_csv_round_trip_keeps_gated_off_samples_nan(tmp_path):
    rec = make_record(gaps=True)
    path = tmp_path / "rec.csv"
    write_record_csv(rec, path)
    back = read_record_csv(path)
    assert np.array_equal(back.gate, rec.gate)
    assert np.all(np.isnan(back.samples[~back.gate]))
    on = rec.gate
    assert np.allclose(back.samples[on], rec.samples[on], atol=1e-15)


def test_binary_round_trip_is_exact(tmp_path):
    rec = make_record(n=257, gaps=True)
    path = tmp_path / "rec.lkr"
    write_record_binary(rec, path)
    back = read_record_binary(path)
    assert back.t0 == rec.t0
    assert back.dt == rec.dt
    on = rec.gate
    assert np.array_equal(back.samples[on], rec.samples[on])
    assert np.array_equal(back.gate, rec.gate)


def test_csv_rejects_wrong_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("time,value\n0.0,1.0\n")
    with pytest.raises(ValueError, match="header"):
        read_record_csv(path)


def test_csv_rejects_empty_body(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("t_s,y,gate\n")
    with pytest.raises(ValueError):
        read_record_csv(path)


def test_binary_rejects_wrong_magic(tmp_path):
    path = tmp_path / "bad.lkr"
    path.write_bytes(b"XXXX" + b"\x00" * 40)
    with pytest.raises(ValueError):
        read_record_binary(path)


def test_binary_rejects_truncation(tmp_path):
    rec = make_record(n=32)
    path = tmp_path / "rec.lkr"
    write_record_binary(rec, path)
    data = path.read_bytes()
    path.write_bytes(data[: len(data) - 7])
    with pytest.raises(ValueError, match="truncated"):
        read_record_binary(path)


def test_record_validation():
    with pytest.raises(ValueError):
        MeasurementRecord(0.0, -1e-8, np.zeros(4), np.ones(4, dtype=bool))
    with pytest.raises(ValueError):
        MeasurementRecord(0.0, 1e-8, np.zeros(4), np.ones(3, dtype=bool))
    with pytest.raises(ValueError):
        MeasurementRecord(np.nan, 1e-8, np.zeros(4), np.ones(4, dtype=bool))
    samples = np.array([0.0, np.nan, 0.0, 0.0])
    with pytest.raises(ValueError):
        MeasurementRecord(0.0, 1e-8, samples, np.ones(4, dtype=bool))
