"""Desk-scale versions of the identification experiments on the synthetic corpus.

A :class:`Corpus` is a set of seeded walks per synthetic person together
with the 8 kHz events extracted from them.  Everything downstream (codec
round trips, features, classifier sweeps) is a pure function of the corpus
and a seed, apart from wall-clock timings.
"""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .classify import Hyperparams, holdout_split, predict_arrays, train_arrays, cross_validate
from .codec import (CODEC_LASSO, THING_RATE_HZ, CompressedEvent, Discarded, GateConfig,
                    airtime_s, compress_ds16, compress_ds8bp, datagram_size, decompress)
from .events import DetectorConfig, extract_events, slice_event
from .features import extract_features, group_consecutive, samples_matrix
from .seeding import derive_seed, fingerprint
from .signal_core import TimeSeries, decimate, default_profiles, generate_walk
from .sparse import LassoConfig

log = logging.getLogger(__name__)

CODECS = ("NC", "DS16", "DS8BP")


@dataclass(frozen=True)
class CorpusConfig:
    n_profiles: int = 8
    footsteps_per_profile: int = 2000
    walk_duration_s: float = 10.0
    sample_rate_hz: float = THING_RATE_HZ
    spread: float = 0.8
    noise_floor: float = 0.1
    profile_seed: int = 0
    seed: int = 0


@dataclass
class Walk:
    person_id: int
    seed: int
    events: list  # 8 kHz TimeSeries slices
    onsets: list  # detected onset times (s)


@dataclass
class Corpus:
    config: CorpusConfig
    detector: DetectorConfig
    profiles: list
    walks: list = field(default_factory=list)

    @property
    def n_events(self) -> int:
        return sum(len(w.events) for w in self.walks)

    def regenerate(self, walk: Walk) -> TimeSeries:
        """The full 8 kHz walk signal a Walk was extracted from."""
        signal, _ = generate_walk(self.profiles[walk.person_id], self.config.walk_duration_s,
                                  self.config.sample_rate_hz, walk.seed)
        return signal


def build_corpus(config: CorpusConfig = CorpusConfig(),
                 detector: DetectorConfig = DetectorConfig()) -> Corpus:
    profiles = default_profiles(config.n_profiles, seed=config.profile_seed, spread=config.spread,
                                noise_floor=config.noise_floor)
    corpus = Corpus(config, detector, profiles)
    for prof in profiles:
        count, k = 0, 0
        while count < config.footsteps_per_profile:
            seed = derive_seed(config.seed, "walk", prof.person_id, k)
            k += 1
            signal, _ = generate_walk(prof, config.walk_duration_s, config.sample_rate_hz, seed)
            windows = extract_events(signal, detector)
            walk = Walk(prof.person_id, seed, [slice_event(signal, w) for w in windows],
                        [w.onset_time_s for w in windows])
            corpus.walks.append(walk)
            count += len(walk.events)
    return corpus


# -- codec passes ------------------------------------------------------------

def compress_corpus(corpus: Corpus, gates: GateConfig = GateConfig(),
                    lasso: LassoConfig = CODEC_LASSO) -> list[list]:
    """DS8BP outcome (CompressedEvent or Discarded) for every event, per walk.

    Events are processed in order of their down-sampled length so each
    dictionary is built once.
    """
    flat = [(wi, ei, ev) for wi, w in enumerate(corpus.walks) for ei, ev in enumerate(w.events)]
    flat.sort(key=lambda item: (len(item[2]) // 8, item[0], item[1]))
    out = [[None] * len(w.events) for w in corpus.walks]
    for wi, ei, ev in flat:
        out[wi][ei] = compress_ds8bp(ev, gates, lasso)
    return out


def footstep_features(corpus: Corpus, codec: str = "NC", compressed: list | None = None) -> list:
    """Per-walk lists of (onset_s, FeatureVector) after passing events through a codec.

    Discarded DS8BP events are dropped; the cadence then spans the gap to
    the previous delivered footstep, as it would at a receiver.
    """
    if codec not in CODECS:
        raise ValueError(f"unknown codec {codec!r}")
    if codec == "DS8BP" and compressed is None:
        compressed = compress_corpus(corpus)
    walks = []
    for wi, w in enumerate(corpus.walks):
        feats, prev = [], None
        for ei, (ev, onset) in enumerate(zip(w.events, w.onsets)):
            if codec == "NC":
                sig = ev
            elif codec == "DS16":
                sig = compress_ds16(ev)
            else:
                c = compressed[wi][ei]
                if isinstance(c, Discarded):
                    continue
                sig = decompress(c)
            feats.append((onset, extract_features(sig, onset, prev)))
            prev = onset
        walks.append(feats)
    return walks


def build_samples(corpus: Corpus, walk_features: list, f_count: int) -> list:
    samples = []
    for w, feats in zip(corpus.walks, walk_features):
        samples.extend(group_consecutive([fv for _, fv in feats], f_count, w.person_id))
    return samples


# -- evaluation --------------------------------------------------------------

def score_samples(samples, kind: str, hyperparams: Hyperparams = Hyperparams(), seed: int = 0,
                  folds: int = 0, test_fraction: float = 0.3) -> float:
    """Accuracy by k-fold cross-validation, or by one stratified hold-out split when folds == 0."""
    if folds:
        return cross_validate(samples, kind, hyperparams, folds, seed).accuracy_mean
    X, y = samples_matrix(samples)
    tr, te = holdout_split(y, test_fraction, seed, X)
    f_count = samples[0].f_count
    model = train_arrays(X[tr], y[tr], kind, hyperparams, seed, f_count)
    pred, _ = predict_arrays(model, X[te])
    return float(np.mean(pred == y[te]))


@dataclass
class Table:
    """Result rows plus the fingerprint of every config that produced them."""
    columns: list
    rows: list
    fingerprint: str

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["# config", self.fingerprint])
            out.writerow(self.columns)
            out.writerows(self.rows)

    def lookup(self, **keys):
        idx = {c: i for i, c in enumerate(self.columns)}
        for r in self.rows:
            if all(r[idx[k]] == v for k, v in keys.items()):
                return r
        raise KeyError(keys)


def sweep_footsteps(corpus: Corpus, kinds, f_values, hyperparams: Hyperparams = Hyperparams(),
                    seed: int = 0, folds: int = 0, walk_features=None) -> Table:
    walk_features = walk_features or footstep_features(corpus, "NC")
    rows = []
    for f in f_values:
        samples = build_samples(corpus, walk_features, f)
        n_classes = len({s.label for s in samples})
        if n_classes < corpus.config.n_profiles:
            log.warning("F=%d leaves too few samples for some people; cell skipped", f)
            for kind in kinds:
                rows.append([kind, f, len(samples), float("nan"), "skipped: walks too short"])
            continue
        for kind in kinds:
            acc = score_samples(samples, kind, hyperparams, derive_seed(seed, "footsteps", f), folds)
            rows.append([kind, f, len(samples), acc, ""])
    return Table(["kind", "f_count", "n_samples", "accuracy", "note"], rows,
                 fingerprint(corpus.config, corpus.detector, hyperparams, seed, folds))


def _median_time(fn, repeats: int) -> float:
    fn()  # warm-up
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def sweep_sampling(corpus: Corpus, rates, kinds, f_count: int = 1,
                   hyperparams: Hyperparams = Hyperparams(), seed: int = 0, folds: int = 0,
                   timing_walks: int = 10, timing_repeats: int = 5) -> Table:
    """Accuracy, EDT and FET after decimating the walks to each rate.

    EDT is extraction time per detected event and FET feature time per
    event, both medians over ``timing_repeats`` runs on the first
    ``timing_walks`` walks.
    """
    base = corpus.config.sample_rate_hz
    factors = {}
    for rate in rates:
        factor = base / rate
        if rate < 250 or factor != int(factor):
            raise ValueError(f"rate {rate} must divide {base:g} and be at least 250 Hz")
        factors[rate] = int(factor)

    # each walk is regenerated once and decimated to every rate
    walk_features = {rate: [] for rate in rates}
    timed = {rate: [] for rate in rates}
    for wi, w in enumerate(corpus.walks):
        full = corpus.regenerate(w)
        for rate, factor in factors.items():
            signal = decimate(full, factor)
            windows = extract_events(signal, corpus.detector)
            feats, prev = [], None
            for win in windows:
                feats.append((win.onset_time_s,
                              extract_features(slice_event(signal, win), win.onset_time_s, prev)))
                prev = win.onset_time_s
            walk_features[rate].append(feats)
            if wi < timing_walks:
                timed[rate].append((signal, windows))

    rows = []
    for rate in rates:
        sigs = timed[rate]
        n_ev = max(sum(len(ws) for _, ws in sigs), 1)
        edt = _median_time(lambda: [extract_events(s, corpus.detector) for s, _ in sigs],
                           timing_repeats) / n_ev
        fet = _median_time(lambda: [extract_features(slice_event(s, win)) for s, ws in sigs
                                    for win in ws], timing_repeats) / n_ev
        samples = build_samples(corpus, walk_features[rate], f_count)
        for kind in kinds:
            acc = score_samples(samples, kind, hyperparams, derive_seed(seed, "sampling", rate), folds)
            rows.append([rate, kind, f_count, len(samples), acc, edt, fet])
    return Table(["rate_hz", "kind", "f_count", "n_samples", "accuracy", "edt_s", "fet_s"], rows,
                 fingerprint(corpus.config, corpus.detector, hyperparams, seed, folds, list(rates)))


def compare_codecs(corpus: Corpus, kinds, f_values, hyperparams: Hyperparams = Hyperparams(),
                   seed: int = 0, folds: int = 0, compressed=None, codecs=CODECS) -> Table:
    if "DS8BP" in codecs and compressed is None:
        compressed = compress_corpus(corpus)
    rows = []
    for codec in codecs:
        walk_features = footstep_features(corpus, codec, compressed)
        for f in f_values:
            samples = build_samples(corpus, walk_features, f)
            for kind in kinds:
                acc = score_samples(samples, kind, hyperparams, derive_seed(seed, "codec", f), folds)
                rows.append([codec, kind, f, len(samples), acc])
    return Table(["codec", "kind", "f_count", "n_samples", "accuracy"], rows,
                 fingerprint(corpus.config, corpus.detector, hyperparams, seed, folds))


@dataclass(frozen=True)
class CompressionStats:
    factors: np.ndarray  # L / M per accepted event
    atom_counts: np.ndarray
    discarded: dict  # reason -> count
    histogram: tuple  # (counts, bin_edges)

    @property
    def mean_factor(self) -> float:
        return float(self.factors.mean())

    @property
    def std_factor(self) -> float:
        return float(self.factors.std())

    @property
    def mean_airtime_s(self) -> float:
        return float(np.mean([airtime_s(datagram_size(m)) for m in self.atom_counts]))


def histogram_compression(corpus: Corpus, compressed=None, bins: int = 20) -> CompressionStats:
    compressed = compressed if compressed is not None else compress_corpus(corpus)
    accepted = [c for w in compressed for c in w if isinstance(c, CompressedEvent)]
    discarded: dict[str, int] = {}
    for w in compressed:
        for c in w:
            if isinstance(c, Discarded):
                discarded[c.reason] = discarded.get(c.reason, 0) + 1
    factors = np.array([c.compression_factor for c in accepted])
    counts = np.array([c.n_atoms for c in accepted])
    return CompressionStats(factors, counts, discarded, np.histogram(factors, bins=bins))
