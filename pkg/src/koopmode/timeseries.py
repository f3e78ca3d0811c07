"""Uniformly sampled multichannel time series: ingestion, windowing, spectra.

The snapshot convention is column-oriented: ``samples[:, k]`` is the k-th
snapshot of all m channels, taken at time ``t0_s + k * period_s``.  CSV files
use the transposed, sensor-friendly orientation (one row per time sample).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    EmptyFile,
    MissingHeader,
    NonFinite,
    NonUniformSampling,
    OutOfRange,
    RaggedRows,
    UnknownChannel,
)

_TIME_LABELS = {"t", "time", "time_s", "t_s"}


@dataclass(frozen=True, eq=False)
class SnapshotSeries:
    """m-channel, N-sample uniformly sampled real data matrix.

    Parameters
    ----------
    channels : sequence of str
        Unique channel labels, length m.
    samples : ndarray, shape (m, N)
        Column k is the k-th snapshot.  Finite entries only, N >= 2.
    period_s : float
        Sampling period in seconds, > 0.
    t0_s : float
        Timestamp of the first sample.
    meta : dict, optional
        Free-form provenance (e.g. simulation blow-up flags).  Not part of
        the data contract.

    Instances are immutable; the sample array is locked against writes.
    """

    channels: tuple
    samples: np.ndarray
    period_s: float
    t0_s: float = 0.0
    meta: dict | None = None

    def __post_init__(self):
        channels = tuple(str(c) for c in self.channels)
        samples = np.array(self.samples, dtype=float, copy=True)
        if samples.ndim != 2:
            raise ValueError(f"samples must be 2-D (m x N), got ndim={samples.ndim}")
        m, n = samples.shape
        if m < 1 or n < 2:
            raise ValueError(f"need m >= 1 channels and N >= 2 samples, got {m} x {n}")
        if len(channels) != m:
            raise ValueError(f"{len(channels)} labels for {m} channel rows")
        if len(set(channels)) != m:
            raise ValueError("channel labels must be unique")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples contain non-finite entries")
        if not (float(self.period_s) > 0.0):
            raise ValueError(f"period_s must be > 0, got {self.period_s}")
        samples.flags.writeable = False
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "period_s", float(self.period_s))
        object.__setattr__(self, "t0_s", float(self.t0_s))

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def times_s(self) -> np.ndarray:
        """Sample timestamps ``t0_s + k * period_s``."""
        return self.t0_s + self.period_s * np.arange(self.n_samples)

    def channel_index(self, label: str) -> int:
        try:
            return self.channels.index(label)
        except ValueError:
            raise UnknownChannel(f"no channel {label!r}; have {list(self.channels)}") from None

    def channel(self, label: str) -> np.ndarray:
        """One channel as a 1-D array."""
        return self.samples[self.channel_index(label)]


@dataclass(frozen=True)
class WindowSpec:
    """Contiguous snapshot window: ``start_index`` .. ``start_index + length - 1``."""

    start_index: int
    length: int

    def __post_init__(self):
        if self.start_index < 0:
            raise ValueError(f"start_index must be >= 0, got {self.start_index}")
        if self.length < 2:
            raise ValueError(f"length must be >= 2, got {self.length}")


def window(series: SnapshotSeries, spec: WindowSpec) -> SnapshotSeries:
    """Contiguous sub-series; t0 advances by ``start_index * period_s``."""
    stop = spec.start_index + spec.length
    if stop > series.n_samples:
        raise OutOfRange(
            f"window [{spec.start_index}, {stop}) exceeds N={series.n_samples}"
        )
    return SnapshotSeries(
        channels=series.channels,
        samples=series.samples[:, spec.start_index:stop],
        period_s=series.period_s,
        t0_s=series.t0_s + spec.start_index * series.period_s,
    )


def demean(series: SnapshotSeries) -> SnapshotSeries:
    """Remove the per-channel mean.  Optional pre-processing; raw data is the default."""
    centered = series.samples - series.samples.mean(axis=1, keepdims=True)
    return SnapshotSeries(series.channels, centered, series.period_s, series.t0_s)


def _parse_cell(cell: str, row: int, col: int) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise NonFinite(row, col, cell) from None
    if not math.isfinite(value):
        raise NonFinite(row, col, cell)
    return value


def _looks_numeric(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return cell.strip().lower() in {"nan", "inf", "-inf", "+inf"}
    return True


def load_csv(path, period_s: float | None = None, t0_s: float = 0.0) -> SnapshotSeries:
    """Read a rows-are-time CSV into a SnapshotSeries.

    The first row must be a header of channel labels; each subsequent row is
    one time sample.  A leading column labelled ``t``/``time``/``time_s`` is
    treated as timestamps: spacing must be uniform (relative jitter below
    1e-6) and, when ``period_s`` is also given, consistent with it.

    When ``period_s`` is omitted a sidecar JSON ``<stem>.json`` next to the
    file with ``{"period_s": ...}`` is consulted.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise EmptyFile(f"{path}: no rows")
    header = [c.strip() for c in rows[0]]
    if all(_looks_numeric(c) for c in header):
        raise MissingHeader(f"{path}: first row looks like data, not channel labels")

    n_cols = len(header)
    data = np.empty((len(rows) - 1, n_cols))
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != n_cols:
            raise RaggedRows(row=i, expected=n_cols, got=len(row))
        for j, cell in enumerate(row):
            data[i - 1, j] = _parse_cell(cell, row=i, col=j)

    if header and header[0].lower() in _TIME_LABELS:
        times = data[:, 0]
        data = data[:, 1:]
        header = header[1:]
        if len(times) < 2:
            raise EmptyFile(f"{path}: need at least 2 samples")
        steps = np.diff(times)
        step = steps.mean()
        if step <= 0 or np.any(np.abs(steps - step) > 1e-6 * abs(step)):
            raise NonUniformSampling(f"{path}: timestamp spacing is not uniform")
        if period_s is not None and abs(period_s - step) > 1e-6 * step:
            raise NonUniformSampling(
                f"{path}: timestamps step {step:g} s but period_s={period_s:g} given"
            )
        period_s = step
        t0_s = float(times[0])

    if period_s is None:
        sidecar = path.with_suffix(".json")
        if sidecar.exists() and sidecar != path:
            with open(sidecar, encoding="utf-8") as fh:
                period_s = float(json.load(fh)["period_s"])
        else:
            raise ValueError(f"{path}: no period_s given and no sidecar {sidecar.name}")

    return SnapshotSeries(channels=header, samples=data.T, period_s=period_s, t0_s=t0_s)


def save_csv(series: SnapshotSeries, path, include_time: bool = False) -> None:
    """Write the rows-are-time CSV form.  Values use shortest round-trip
    decimal form, so load_csv(save_csv(s)) reproduces the data bit for bit."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        labels = list(series.channels)
        if include_time:
            writer.writerow(["time_s"] + labels)
            for k in range(series.n_samples):
                t = series.t0_s + k * series.period_s
                writer.writerow([repr(t)] + [repr(v) for v in series.samples[:, k]])
        else:
            writer.writerow(labels)
            for k in range(series.n_samples):
                writer.writerow([repr(v) for v in series.samples[:, k]])


def save_sidecar(series: SnapshotSeries, csv_path) -> None:
    """Write the ``{"period_s": ...}`` sidecar next to a CSV."""
    sidecar = Path(csv_path).with_suffix(".json")
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump({"period_s": series.period_s, "t0_s": series.t0_s}, fh)


def power_spectrum(series: SnapshotSeries, channel: str):
    """Discrete Fourier magnitude spectrum of one channel.

    Returns ``(freqs_hz, magnitudes)`` up to the Nyquist frequency
    1/(2 period).  Magnitudes are ``|DFT| / N`` so a pure cosine of amplitude
    A shows a peak of about A/2.
    """
    y = series.channel(channel)
    n = series.n_samples
    mags = np.abs(np.fft.rfft(y)) / n
    freqs = np.fft.rfftfreq(n, d=series.period_s)
    return freqs, mags


def spectral_peaks(freqs: np.ndarray, mags: np.ndarray, threshold: float):
    """Local spectrum maxima with magnitude >= threshold, as (freq, mag) pairs.

    The threshold is caller-supplied on purpose: what counts as a peak is a
    judgement the analyst makes by inspecting the spectrum.
    """
    peaks = []
    for i in range(1, len(mags) - 1):
        if mags[i] >= threshold and mags[i] > mags[i - 1] and mags[i] >= mags[i + 1]:
            peaks.append((float(freqs[i]), float(mags[i])))
    return peaks
