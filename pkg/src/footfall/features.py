"""Per-footstep feature vectors and F-footstep aggregated samples.

One footstep yields 134 numbers, in this order:

* time domain: std, skewness, kurtosis of the samples
* envelope: mean, std, skewness, kurtosis of the analytic-signal magnitude
* 125 relative band energies, 2 Hz wide, covering 0-250 Hz
* cadence (seconds since the previous footstep onset; NaN for the first)
* duration in samples
"""
from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import hilbert

from .errors import DegenerateEventError, InvalidArgumentError
from .signal_core import BAND_HZ, N_BANDS, TimeSeries

TIME_COLUMNS = ("std", "skewness", "kurtosis")
ENVELOPE_COLUMNS = ("env_mean", "env_std", "env_skewness", "env_kurtosis")
BAND_COLUMNS = tuple(f"band_{int(k * BAND_HZ):03d}_{int((k + 1) * BAND_HZ):03d}"
                     for k in range(N_BANDS))
FEATURE_COLUMNS = TIME_COLUMNS + ENVELOPE_COLUMNS + BAND_COLUMNS + ("cadence_s", "duration_samples")
N_FEATURES = len(FEATURE_COLUMNS)
CADENCE_INDEX = FEATURE_COLUMNS.index("cadence_s")

# Features that scale linearly with the event amplitude; all others are scale invariant.
AMPLITUDE_COLUMNS = ("std", "env_mean", "env_std")

NYQUIST_FRACTION = 0.9  # usable share of the band below Nyquist after decimation


def columns_for(f_count: int) -> tuple[str, ...]:
    """Column layout of an aggregated sample; single-footstep samples carry no cadence."""
    if f_count == 1:
        return FEATURE_COLUMNS[:CADENCE_INDEX] + FEATURE_COLUMNS[CADENCE_INDEX + 1:]
    return FEATURE_COLUMNS


def columns_hash(columns) -> str:
    return hashlib.sha256("\n".join(columns).encode()).hexdigest()


@dataclass(frozen=True, eq=False)
class FeatureVector:
    time_stats: np.ndarray
    hilbert_stats: np.ndarray
    band_energies: np.ndarray
    cadence_s: float  # NaN when there is no previous footstep
    duration_samples: int

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.time_stats, self.hilbert_stats, self.band_energies,
                               [self.cadence_s, float(self.duration_samples)]])

    @classmethod
    def from_array(cls, values) -> "FeatureVector":
        v = np.asarray(values, dtype=float)
        if v.shape != (N_FEATURES,):
            raise InvalidArgumentError(f"expected {N_FEATURES} features, got shape {v.shape}")
        return cls(v[0:3].copy(), v[3:7].copy(), v[7:7 + N_BANDS].copy(),
                   float(v[CADENCE_INDEX]), int(v[-1]))


@dataclass(frozen=True, eq=False)
class AggregatedSample:
    features: np.ndarray
    f_count: int
    label: int | None = None

    @property
    def columns(self) -> tuple[str, ...]:
        return columns_for(self.f_count)


def moments(x: np.ndarray) -> tuple[float, float, float]:
    """Biased std, skewness m3/m2^1.5 and kurtosis m4/m2^2."""
    d = x - x.mean()
    d2 = d * d
    m2 = d2.mean()
    if not m2 > 0:
        raise DegenerateEventError("zero-variance signal has no skewness or kurtosis")
    return math.sqrt(m2), float((d2 * d).mean() / m2**1.5), float((d2 * d2).mean() / m2**2)


def envelope(x: np.ndarray) -> np.ndarray:
    """Analytic-signal magnitude, computed on the next power-of-two zero padding."""
    n = x.shape[0]
    n_fft = 1 << max(n - 1, 0).bit_length()
    return np.abs(hilbert(x, N=n_fft))[:n]


def band_energies(x: np.ndarray, sample_rate_hz: float) -> np.ndarray:
    """Relative energy in [2k, 2k+2) Hz bands up to 250 Hz.

    Bands above 0.9 x Nyquist (the anti-alias cutoff of the decimator) are
    left at zero, so a 500 Hz signal still yields 125 values.

    A DFT bin no wider than a band goes to the band holding its centre
    frequency; a wider bin is spread uniformly over its own width and split
    between the bands it overlaps.
    """
    n = x.shape[0]
    power = np.abs(np.fft.rfft(x)) ** 2
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate_hz)
    df = sample_rate_hz / n
    top = min(N_BANDS * BAND_HZ, NYQUIST_FRACTION * sample_rate_hz / 2)
    edges = np.arange(N_BANDS + 1) * BAND_HZ

    out = np.zeros(N_BANDS)
    if df <= BAND_HZ:
        inside = freqs < top
        band = np.minimum((freqs[inside] // BAND_HZ).astype(int), N_BANDS - 1)
        np.add.at(out, band, power[inside])
    else:
        lo = np.clip(freqs - df / 2, 0.0, sample_rate_hz / 2)
        hi = np.clip(freqs + df / 2, 0.0, sample_rate_hz / 2)
        width = hi - lo
        # share of each bin's interval below every band edge (capped at `top`)
        cut = np.minimum(edges, top)
        below = np.clip((cut[:, None] - lo[None, :]) / width[None, :], 0.0, 1.0)
        out = np.diff(below, axis=0) @ power
    total = out.sum()
    if not total > 0:
        raise DegenerateEventError("event has no energy below 250 Hz")
    return out / total


def extract_features(event: TimeSeries, onset_s: float = 0.0,
                     prev_onset_s: float | None = None) -> FeatureVector:
    x = event.samples
    if x.shape[0] == 0:
        raise InvalidArgumentError("empty event")
    time_stats = np.array(moments(x))
    env = envelope(x)
    e_std, e_skew, e_kurt = moments(env)
    hilbert_stats = np.array([env.mean(), e_std, e_skew, e_kurt])
    cadence = float("nan") if prev_onset_s is None else float(onset_s - prev_onset_s)
    return FeatureVector(time_stats, hilbert_stats, band_energies(x, event.sample_rate_hz),
                         cadence, int(x.shape[0]))


def aggregate_sample(footsteps, f_count: int | None = None, label: int | None = None) -> AggregatedSample:
    """Mean of F consecutive footstep vectors; the cadence is averaged where defined."""
    footsteps = list(footsteps)
    if not footsteps:
        raise InvalidArgumentError("cannot aggregate an empty list of footsteps")
    if f_count is None:
        f_count = len(footsteps)
    if f_count != len(footsteps):
        raise InvalidArgumentError(f"f_count={f_count} but {len(footsteps)} footsteps given")
    stack = np.stack([fv.as_array() if isinstance(fv, FeatureVector) else np.asarray(fv, float)
                      for fv in footsteps])
    if stack.shape[1] != N_FEATURES:
        raise InvalidArgumentError(f"expected {N_FEATURES} features per footstep")
    cadence = stack[:, CADENCE_INDEX]
    mean = np.delete(stack, CADENCE_INDEX, axis=1).mean(axis=0)
    if f_count == 1:
        return AggregatedSample(mean, 1, label)
    defined = cadence[~np.isnan(cadence)]
    if defined.size == 0:
        raise InvalidArgumentError("no footstep in the group has a defined cadence")
    return AggregatedSample(np.insert(mean, CADENCE_INDEX, defined.mean()), f_count, label)


def group_consecutive(footsteps, f_count: int, label: int | None = None) -> list[AggregatedSample]:
    """Split one walk's footsteps into non-overlapping runs of F and aggregate each run."""
    if f_count < 1:
        raise InvalidArgumentError("f_count must be >= 1")
    footsteps = list(footsteps)
    return [aggregate_sample(footsteps[i:i + f_count], f_count, label)
            for i in range(0, len(footsteps) - f_count + 1, f_count)]


def samples_matrix(samples) -> tuple[np.ndarray, np.ndarray]:
    """Stack aggregated samples into (X, y); all must share one F."""
    samples = list(samples)
    if not samples:
        raise InvalidArgumentError("no samples")
    if len({s.f_count == 1 for s in samples}) != 1:
        raise InvalidArgumentError("cannot mix F=1 and F>1 samples")
    X = np.stack([s.features for s in samples])
    y = np.array([-1 if s.label is None else s.label for s in samples], dtype=int)
    return X, y


def write_features_csv(path, samples) -> None:
    samples = list(samples)
    cols = samples[0].columns if samples else FEATURE_COLUMNS
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(("label", "f_count") + tuple(cols))
        for s in samples:
            out.writerow(["" if s.label is None else s.label, s.f_count]
                         + [repr(float(v)) for v in s.features])


def read_features_csv(path) -> list[AggregatedSample]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    out = []
    for r in body:
        f = int(r[1])
        if tuple(header[2:]) != columns_for(f):
            raise InvalidArgumentError("feature CSV columns do not match the known layout")
        out.append(AggregatedSample(np.array([float(v) for v in r[2:]]), f,
                                    int(r[0]) if r[0] != "" else None))
    return out
