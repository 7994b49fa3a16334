"""Sampled signals, decimation and the synthetic footfall generator.

The generator stands in for a real geophone recording: a walk is a train of
footstep bursts, each burst a sparse sum of Gabor atoms from the same family
the codec's dictionary is built from, plus white sensor noise.
"""
from __future__ import annotations

import csv
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import firwin

from .dictionary import OMEGAS, gabor_atom
from .errors import EmptyWalkError, InvalidArgumentError

MIN_EVENT_S = 0.144
MAX_EVENT_S = 0.437

FILTER_TAPS = 63
CUTOFF_FRACTION = 0.45  # of the post-decimation Nyquist

N_BANDS = 125
BAND_HZ = 2.0

# Rate of the codec's down-sampled grid; synthetic atoms are phase-aligned to it.
CODEC_RATE_HZ = 1000.0


@dataclass(frozen=True, eq=False)
class TimeSeries:
    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise InvalidArgumentError(f"sample rate must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float).reshape(-1))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz

    def times(self) -> np.ndarray:
        return np.arange(len(self)) / self.sample_rate_hz


@dataclass
class SyntheticPersonProfile:
    person_id: int
    band_weights: np.ndarray
    cadence_mean_s: float = 0.6
    cadence_std_s: float = 0.04
    footstep_duration_mean_s: float = 0.25
    footstep_duration_std_s: float = 0.03
    amplitude_jitter: float = 0.3
    noise_floor: float = 0.1
    atoms_range: tuple[int, int] = (8, 25)

    def __post_init__(self):
        w = np.clip(np.asarray(self.band_weights, dtype=float).reshape(-1), 0.0, None)
        if w.shape[0] != N_BANDS:
            raise InvalidArgumentError(f"band_weights needs {N_BANDS} entries, got {w.shape[0]}")
        if w.sum() <= 0:
            raise InvalidArgumentError("band_weights must have positive mass")
        self.band_weights = w / w.sum()
        for name in ("cadence_mean_s", "cadence_std_s", "footstep_duration_mean_s",
                     "footstep_duration_std_s"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be positive")


def _prime_factors(n: int) -> list[int]:
    out, p = [], 2
    while p * p <= n:
        while n % p == 0:
            out.append(p)
            n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


def _stage_filter(fs: float, factor: int) -> np.ndarray:
    cutoff = CUTOFF_FRACTION * (fs / factor) / 2.0
    return firwin(FILTER_TAPS, cutoff, window="hamming", fs=fs)


def _decimate_stage(x: np.ndarray, fs: float, factor: int) -> np.ndarray:
    half = FILTER_TAPS // 2
    if x.shape[0] <= half:
        raise InvalidArgumentError(
            f"signal of {x.shape[0]} samples is shorter than the filter warm-up ({half + 1})")
    h = _stage_filter(fs, factor)
    padded = np.pad(x, half, mode="reflect", reflect_type="odd")
    y = np.convolve(padded, h, mode="valid")
    return y[::factor][: x.shape[0] // factor]


def decimate(signal: TimeSeries, factor: int) -> TimeSeries:
    """Low-pass and subsample by ``factor``.

    Runs one 63-tap Hamming windowed-sinc stage per prime factor (smallest
    first), each with its cutoff at 0.45 of that stage's output Nyquist, so
    ``decimate(s, a*b)`` and ``decimate(decimate(s, a), b)`` share stages
    whenever the factorizations line up.
    """
    if int(factor) != factor or factor < 1:
        raise InvalidArgumentError(f"decimation factor must be a positive integer, got {factor}")
    factor = int(factor)
    if len(signal) < factor:
        raise InvalidArgumentError("signal shorter than the decimation factor")
    if factor == 1:
        return signal
    x, fs = signal.samples, signal.sample_rate_hz
    for p in _prime_factors(factor):
        x = _decimate_stage(x, fs, p)
        fs = fs / p
    return TimeSeries(x, fs)


# -- synthetic walks ---------------------------------------------------------

def synthesize_footstep(rng: np.random.Generator, profile: SyntheticPersonProfile,
                        width_s: float, sample_rate_hz: float) -> tuple[np.ndarray, list]:
    """One footstep burst with unit RMS, before amplitude jitter.

    Returns the samples and the list of (tau, omega, kind, weight) atoms used.
    The normalized time axis is anchored to the 1 kHz codec grid so the burst,
    once decimated to 1 kHz, is an exact combination of dictionary columns.
    """
    n = int(round(width_s * sample_rate_hz))
    per_codec = sample_rate_hz / CODEC_RATE_HZ
    length_l = max(int(n // per_codec), 2)
    t = (np.arange(n) / per_codec) / (length_l - 1)

    lo, hi = profile.atoms_range
    k = int(rng.integers(lo, hi + 1))
    bands = rng.choice(N_BANDS, size=k, p=profile.band_weights)
    freqs = (bands + rng.random(k)) * BAND_HZ
    # physical Hz -> radians per unit normalized time, snapped to the omega grid
    omegas = 2 * np.pi * freqs * (length_l - 1) / CODEC_RATE_HZ
    omegas = np.clip(np.round(omegas / 5.0) * 5.0, OMEGAS[0], OMEGAS[-1])
    tau_idx = rng.integers(0, int(0.6 * (length_l - 1)) + 1, size=k)
    kinds = rng.choice(["cos", "sin"], size=k)
    weights = rng.normal(1.0, 0.3, size=k) * rng.choice([-1.0, 1.0], size=k)

    burst = np.zeros(n)
    used = []
    for tau_i, om, kind, wgt in zip(tau_idx, omegas, kinds, weights):
        tau = tau_i / (length_l - 1)
        burst += wgt * gabor_atom(t, tau, om, str(kind))
        used.append((tau, float(om), str(kind), float(wgt)))
    rms = np.sqrt(np.mean(burst**2))
    if rms > 0:
        burst /= rms
    return burst, used


def generate_walk(profile: SyntheticPersonProfile, duration_s: float, sample_rate_hz: float,
                  rng_seed: int, min_gap_s: float = 0.05) -> tuple[TimeSeries, list[float]]:
    """Synthesize a walk and return it with the true footstep onsets (seconds).

    Consecutive bursts never overlap: each onset waits at least the previous
    burst's width plus ``min_gap_s``.
    """
    if not duration_s > 0 or not sample_rate_hz > 0:
        raise InvalidArgumentError("duration and sample rate must be positive")
    rng = np.random.default_rng(rng_seed)
    n_total = int(round(duration_s * sample_rate_hz))
    signal = np.zeros(n_total)

    onset = float(rng.uniform(0.3, 0.3 + profile.cadence_mean_s))
    onsets = []
    while True:
        width = float(np.clip(rng.normal(profile.footstep_duration_mean_s,
                                         profile.footstep_duration_std_s),
                              MIN_EVENT_S, MAX_EVENT_S))
        start = int(round(onset * sample_rate_hz))
        burst, _ = synthesize_footstep(rng, profile, width, sample_rate_hz)
        if start + burst.shape[0] > n_total:
            break
        amp = float(np.exp(rng.normal(0.0, profile.amplitude_jitter)))
        signal[start:start + burst.shape[0]] += amp * burst
        onsets.append(start / sample_rate_hz)
        step = max(float(rng.normal(profile.cadence_mean_s, profile.cadence_std_s)),
                   width + min_gap_s)
        onset = start / sample_rate_hz + step

    if not onsets:
        raise EmptyWalkError(f"{duration_s} s is too short for a single footstep")
    if profile.noise_floor > 0:
        signal += rng.normal(0.0, profile.noise_floor, n_total)
    return TimeSeries(signal, sample_rate_hz), onsets


def generate_noise(duration_s: float, sample_rate_hz: float, noise_floor: float,
                   rng_seed: int) -> TimeSeries:
    """A walk with zero footsteps: white noise only."""
    rng = np.random.default_rng(rng_seed)
    n = int(round(duration_s * sample_rate_hz))
    return TimeSeries(rng.normal(0.0, noise_floor, n), sample_rate_hz)


def _bump(centers_hz, widths_hz, heights) -> np.ndarray:
    f = (np.arange(N_BANDS) + 0.5) * BAND_HZ
    w = np.zeros(N_BANDS)
    for c, s, h in zip(centers_hz, widths_hz, heights):
        w += h * np.exp(-0.5 * ((f - c) / s) ** 2)
    return w + 1e-3


def default_profiles(n: int = 8, seed: int = 0, spread: float = 0.8,
                     noise_floor: float = 0.1) -> list[SyntheticPersonProfile]:
    """Person profiles with controllable separability.

    ``spread`` scales how far apart the people's spectral peaks, cadences and
    footstep durations sit; 0.8 is the tuned default used by the benchmarks.
    """
    rng = np.random.default_rng(seed)
    profiles = []
    for pid in range(n):
        base = 25.0 + 90.0 * pid / max(n - 1, 1)
        c1 = 70.0 + spread * (base - 70.0) + rng.normal(0, 4)
        c2 = c1 + rng.uniform(25, 45)
        weights = _bump([c1, c2], [rng.uniform(10, 16), rng.uniform(12, 20)],
                        [1.0, rng.uniform(0.3, 0.7)])
        cadence = 0.6 + spread * rng.uniform(-0.08, 0.08)
        dur = 0.25 + spread * rng.uniform(-0.04, 0.04)
        profiles.append(SyntheticPersonProfile(
            person_id=pid, band_weights=weights,
            cadence_mean_s=cadence, cadence_std_s=0.05,
            footstep_duration_mean_s=dur, footstep_duration_std_s=0.03,
            amplitude_jitter=0.3, noise_floor=noise_floor))
    return profiles


# -- file I/O ----------------------------------------------------------------

def read_signal(path, sample_rate_hz: float | None = None) -> TimeSeries:
    """Load a 16-bit PCM mono WAV (rate from header) or a one-column CSV."""
    path = Path(path)
    if path.suffix.lower() == ".wav":
        with wave.open(str(path), "rb") as w:
            if w.getnchannels() != 1 or w.getsampwidth() != 2:
                raise InvalidArgumentError("only 16-bit PCM mono WAV is supported")
            rate = w.getframerate()
            raw = w.readframes(w.getnframes())
        x = np.frombuffer(raw, dtype="<i2").astype(float) / 32768.0
        return TimeSeries(x, rate)
    if sample_rate_hz is None:
        raise InvalidArgumentError("CSV signals need an explicit sample rate")
    x = np.loadtxt(path, dtype=float, ndmin=1, delimiter=",")
    return TimeSeries(x.reshape(-1), sample_rate_hz)


def write_signal(path, signal: TimeSeries) -> None:
    """Write WAV (peak-normalized to 90% of 16-bit full scale) or CSV."""
    path = Path(path)
    if path.suffix.lower() == ".wav":
        x = signal.samples
        peak = np.max(np.abs(x)) if x.size else 0.0
        scale = 0.9 * 32767 / peak if peak > 0 else 1.0
        pcm = np.round(x * scale).astype("<i2")
        with wave.open(str(path), "wb") as w:
            w.setnchannels(1)
            w.setsampwidth(2)
            w.setframerate(int(round(signal.sample_rate_hz)))
            w.writeframes(pcm.tobytes())
        return
    np.savetxt(path, signal.samples, fmt="%.17g")


def write_onsets(path, onsets, person_id: int) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["onset_s", "person_id"])
        for t in onsets:
            out.writerow([repr(float(t)), int(person_id)])


def read_onsets(path) -> list[tuple[float, int]]:
    with open(path, newline="") as fh:
        return [(float(r["onset_s"]), int(r["person_id"])) for r in csv.DictReader(fh)]
