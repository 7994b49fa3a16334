"""Adaptive-threshold footfall event extraction.

A frame is active when its short-time energy exceeds ``mean + k_sigma * std``
of the surrounding baseline.  The baseline is a centred rolling window over
frames that are themselves inactive (sigma clipping), so a dense train of
footsteps does not raise its own threshold.  Every quantity scales with the
signal power, which makes detection invariant to a global gain.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .signal_core import MAX_EVENT_S, MIN_EVENT_S, TimeSeries

CLIP_ROUNDS = 30
MIN_BASELINE_FRAMES = 10


@dataclass(frozen=True)
class DetectorConfig:
    frame_s: float = 0.025
    hop_s: float = 0.010
    k_sigma: float = 3.0
    baseline_window_s: float = 2.0
    hangover_frames: int = 3
    min_run_frames: int = 3  # shorter runs of active frames are treated as noise blips
    min_width_s: float = MIN_EVENT_S
    max_width_s: float = MAX_EVENT_S

    def __post_init__(self):
        if not self.frame_s > self.hop_s > 0:
            raise InvalidArgumentError("need frame_s > hop_s > 0")
        if not self.k_sigma > 0:
            raise InvalidArgumentError("k_sigma must be positive")
        if not self.baseline_window_s > self.frame_s:
            raise InvalidArgumentError("baseline window must exceed one frame")
        if self.hangover_frames < 0:
            raise InvalidArgumentError("hangover_frames must be >= 0")
        if self.min_run_frames < 1:
            raise InvalidArgumentError("min_run_frames must be >= 1")
        if not 0 < self.min_width_s <= self.max_width_s:
            raise InvalidArgumentError("need 0 < min_width_s <= max_width_s")


@dataclass(frozen=True)
class EventWindow:
    start_index: int
    end_index: int  # exclusive
    onset_time_s: float

    def __post_init__(self):
        if not self.end_index > self.start_index >= 0:
            raise InvalidArgumentError(
                f"invalid window [{self.start_index}, {self.end_index})")

    @property
    def n_samples(self) -> int:
        return self.end_index - self.start_index

    def width_s(self, sample_rate_hz: float) -> float:
        return self.n_samples / sample_rate_hz


@dataclass(frozen=True)
class RejectedWindow:
    window: EventWindow
    reason: str  # "too-narrow" | "too-wide"


@dataclass(frozen=True)
class Detection:
    accepted: list
    rejected: list
    sample_rate_hz: float


def frame_energy(x: np.ndarray, frame: int, hop: int) -> np.ndarray:
    """Mean square of ``x[j*hop : j*hop + frame]`` for every full frame j."""
    n_frames = 1 + (x.shape[0] - frame) // hop
    c = np.concatenate(([0.0], np.cumsum(x * x)))
    starts = np.arange(n_frames) * hop
    return (c[starts + frame] - c[starts]) / frame


def _rolling_masked_stats(e: np.ndarray, keep: np.ndarray, half: int):
    """Centred rolling mean/std of ``e`` over frames where ``keep`` is True."""
    n = e.shape[0]
    w = keep.astype(float)
    cs = [np.concatenate(([0.0], np.cumsum(v))) for v in (w, w * e, w * e * e)]
    lo = np.clip(np.arange(n) - half, 0, n)
    hi = np.clip(np.arange(n) + half + 1, 0, n)
    cnt, s1, s2 = (c[hi] - c[lo] for c in cs)

    # windows with too few quiet frames fall back to the global quiet statistics
    g_cnt = w.sum()
    if g_cnt >= 2:
        g_mean = (w * e).sum() / g_cnt
        g_var = (w * e * e).sum() / g_cnt - g_mean**2
    else:
        g_mean, g_var = float(np.median(e)), float(np.var(e))
    sparse = cnt < MIN_BASELINE_FRAMES
    safe = np.where(sparse, 1.0, cnt)
    mean = np.where(sparse, g_mean, s1 / safe)
    var = np.where(sparse, g_var, s2 / safe - mean**2)
    return mean, np.sqrt(np.maximum(var, 0.0))


def active_frames(energy: np.ndarray, config: DetectorConfig, hop: int,
                  sample_rate_hz: float) -> np.ndarray:
    half = max(int(round(config.baseline_window_s * sample_rate_hz / hop / 2)), 1)
    # Seed the clipping with a robust global cut; starting from every frame lets a
    # long burst inflate the first rolling std enough to hide itself.
    med = np.median(energy)
    mad = 1.4826 * np.median(np.abs(energy - med))
    keep = energy <= med + config.k_sigma * mad
    for _ in range(CLIP_ROUNDS):
        mean, std = _rolling_masked_stats(energy, keep, half)
        active = energy > mean + config.k_sigma * std
        # exclude the frames around detections from the next baseline estimate
        grown = active.copy()
        for s in range(1, config.hangover_frames + 1):
            grown[s:] |= active[:-s]
            grown[:-s] |= active[s:]
        new_keep = ~grown
        if np.array_equal(new_keep, keep):
            break
        keep = new_keep
    return active


def _drop_short_runs(active: np.ndarray, min_run: int) -> np.ndarray:
    if min_run <= 1:
        return active
    out = active.copy()
    edges = np.diff(np.concatenate(([0], active.astype(np.int8), [0])))
    for a, b in zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)):
        if b - a < min_run:
            out[a:b] = False
    return out


def _runs(active: np.ndarray, hangover: int) -> list[tuple[int, int]]:
    """Inclusive (first, last) frame runs, bridging gaps of <= hangover frames."""
    idx = np.flatnonzero(active)
    if idx.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) > hangover + 1)
    firsts = np.concatenate(([idx[0]], idx[breaks + 1]))
    lasts = np.concatenate((idx[breaks], [idx[-1]]))
    return list(zip(firsts.tolist(), lasts.tolist()))


def _snap_outward(x: np.ndarray, start: int, end: int, reach: int) -> tuple[int, int]:
    """Move ``start`` back and ``end`` forward to the nearest zero crossing within ``reach``."""
    sign = np.signbit(x)
    lo = max(start - reach, 1)
    for i in range(start, lo - 1, -1):
        if i < x.shape[0] and (x[i] == 0 or sign[i] != sign[i - 1]):
            start = i
            break
    hi = min(end + reach, x.shape[0])
    for i in range(end, hi):
        if x[i] == 0 or sign[i] != sign[i - 1]:
            end = i
            break
    return start, end


def detect_events(signal: TimeSeries, config: DetectorConfig = DetectorConfig()) -> Detection:
    """Find candidate events and split them into accepted and width-rejected windows."""
    fs = signal.sample_rate_hz
    x = signal.samples
    if x.shape[0] < config.baseline_window_s * fs:
        raise InvalidArgumentError(
            f"signal of {x.shape[0] / fs:.3f} s is shorter than the "
            f"{config.baseline_window_s} s baseline window")
    frame = max(int(round(config.frame_s * fs)), 1)
    hop = max(int(round(config.hop_s * fs)), 1)
    energy = frame_energy(x, frame, hop)
    active = _drop_short_runs(active_frames(energy, config, hop, fs), config.min_run_frames)

    spans = []
    for first, last in _runs(active, config.hangover_frames):
        # the previous frame was quiet, so the onset lies in its last hop
        start = first * hop + frame - hop
        end = min(last * hop + hop, x.shape[0])
        if first == 0:
            start = 0
        if end <= start:
            end = min(start + hop, x.shape[0])
        spans.append(_snap_outward(x, start, end, frame))

    merged: list[list[int]] = []
    for start, end in spans:
        if merged and start <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])

    accepted, rejected = [], []
    for start, end in merged:
        win = EventWindow(start, end, start / fs)
        width = win.width_s(fs)
        if width < config.min_width_s:
            rejected.append(RejectedWindow(win, "too-narrow"))
        elif width > config.max_width_s:
            rejected.append(RejectedWindow(win, "too-wide"))
        else:
            accepted.append(win)
    return Detection(accepted, rejected, fs)


def extract_events(signal: TimeSeries, config: DetectorConfig = DetectorConfig()) -> list[EventWindow]:
    return detect_events(signal, config).accepted


def slice_event(signal: TimeSeries, window: EventWindow) -> TimeSeries:
    if window.end_index > len(signal):
        raise InvalidArgumentError(
            f"window [{window.start_index}, {window.end_index}) exceeds {len(signal)} samples")
    return TimeSeries(signal.samples[window.start_index:window.end_index].copy(),
                      signal.sample_rate_hz)
