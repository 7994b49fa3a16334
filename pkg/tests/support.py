"""Shared builders for the test suite."""
import numpy as np

from footfall.signal_core import TimeSeries, default_profiles, synthesize_footstep

PROFILES = default_profiles()


def known_atom_event(rng, noise_std=0.1, person=0, width_s=None):
    """An 8 kHz unit-RMS burst built from known atoms, plus white noise.

    With ``noise_std=0.1`` the signal-to-noise ratio is 20 dB.
    Returns (noisy event, clean burst, atoms used).
    """
    if width_s is None:
        width_s = float(np.clip(rng.normal(0.25, 0.04), 0.15, 0.42))
    burst, used = synthesize_footstep(rng, PROFILES[person % len(PROFILES)], width_s, 8000.0)
    noisy = burst + rng.normal(0.0, noise_std, burst.size)
    return TimeSeries(noisy, 8000.0), TimeSeries(burst, 8000.0), used


def blobs(n_per_class=60, n_classes=3, dim=5, sep=8.0, seed=0):
    """Well separated Gaussian blobs with integer labels 0..n_classes-1."""
    rng = np.random.default_rng(seed)
    centres = rng.normal(0.0, sep, size=(n_classes, dim))
    X = np.concatenate([c + rng.normal(size=(n_per_class, dim)) for c in centres])
    y = np.repeat(np.arange(n_classes), n_per_class)
    return X, y
