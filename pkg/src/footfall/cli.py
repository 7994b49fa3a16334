"""Command-line entry point: ``footfall <command> [options]``.

Every command is a thin wrapper over the library.  All randomness comes from
``--seed``; each component gets its own seed by stable hashing.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import bench, classify, codec, events, features, pipeline, signal_core
from .config import load_settings
from .errors import FootfallError, InvalidArgumentError
from .seeding import derive_seed

log = logging.getLogger("footfall")


def _out(args, name: str) -> Path:
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    return d / name


def _read(args, path) -> signal_core.TimeSeries:
    return signal_core.read_signal(path, args.sample_rate)


def _write_signal(args, name: str, ts: signal_core.TimeSeries) -> Path:
    p = _out(args, name)
    signal_core.write_signal(p, ts)
    return p


# -- commands ----------------------------------------------------------------

def cmd_gen_walk(args, cfg):
    profiles = signal_core.default_profiles(cfg.corpus.n_profiles, cfg.corpus.profile_seed,
                                            cfg.corpus.spread, cfg.corpus.noise_floor)
    if not 0 <= args.person < len(profiles):
        raise InvalidArgumentError(f"person must be in [0, {len(profiles)})")
    rate = args.sample_rate or codec.THING_RATE_HZ
    seed = derive_seed(args.seed, "gen-walk", args.person)
    ts, onsets = signal_core.generate_walk(profiles[args.person], args.duration, rate, seed)
    path = _write_signal(args, f"walk.{args.format}", ts)
    signal_core.write_onsets(_out(args, "onsets.csv"), onsets, args.person)
    print(f"wrote {path} ({len(onsets)} footsteps)")


def cmd_extract(args, cfg):
    ts = _read(args, args.input)
    det = events.detect_events(ts, cfg.detector)
    rows = [(w, True, "") for w in det.accepted] + [(r.window, False, r.reason) for r in det.rejected]
    rows.sort(key=lambda r: r[0].start_index)
    fs = ts.sample_rate_hz
    with open(_out(args, "events.csv"), "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["start_s", "end_s", "width_s", "accepted_flag", "reject_reason"])
        for w, ok, why in rows:
            out.writerow([repr(w.start_index / fs), repr(w.end_index / fs), repr(w.width_s(fs)),
                          int(ok), why])
    if args.slices:
        for k, w in enumerate(det.accepted):
            _write_signal(args, f"event_{k:04d}.csv", events.slice_event(ts, w))
    print(f"{len(det.accepted)} accepted, {len(det.rejected)} rejected")


def cmd_compress(args, cfg):
    ts = _read(args, args.input)
    result = codec.compress_ds8bp(ts, cfg.gates, cfg.lasso, args.energy_fraction)
    if isinstance(result, codec.Discarded):
        print(f"discarded: {result.reason} (atoms={result.atom_count}, L={result.length_l})")
        return
    data = codec.encode_datagram(result)
    p = _out(args, "event.dgram")
    p.write_bytes(data)
    print(f"wrote {p}: L={result.length_l} M={result.n_atoms} bytes={len(data)} "
          f"factor={result.compression_factor:.2f} airtime_ms={1e3 * codec.airtime_s(len(data)):.2f}")


def cmd_decompress(args, cfg):
    ev = codec.decode_datagram(Path(args.input).read_bytes())
    p = _write_signal(args, "recovered.csv", codec.decompress(ev))
    print(f"wrote {p} ({ev.length_l} samples at 1 kHz)")


def cmd_ds16(args, cfg):
    p = _write_signal(args, "ds16.csv", codec.compress_ds16(_read(args, args.input)))
    print(f"wrote {p}")


def cmd_features(args, cfg):
    samples = []
    for path in args.inputs:
        ts = _read(args, path)
        feats, prev = [], None
        for w in events.extract_events(ts, cfg.detector):
            ev = events.slice_event(ts, w)
            if args.codec == "DS16":
                ev = codec.compress_ds16(ev)
            elif args.codec == "DS8BP":
                c = codec.compress_ds8bp(ev, cfg.gates, cfg.lasso)
                if isinstance(c, codec.Discarded):
                    continue
                ev = codec.decompress(c)
            feats.append(features.extract_features(ev, w.onset_time_s, prev))
            prev = w.onset_time_s
        samples.extend(features.group_consecutive(feats, args.f_count, args.label))
    p = _out(args, "features.csv")
    features.write_features_csv(p, samples)
    print(f"wrote {p} ({len(samples)} samples)")


def _load_samples(paths):
    samples = []
    for p in paths:
        samples.extend(features.read_features_csv(p))
    if not samples:
        raise InvalidArgumentError("no samples in the feature files")
    return samples


def cmd_train(args, cfg):
    kind = args.kind or cfg.classifier.kind
    model = classify.train(_load_samples(args.inputs), kind, cfg.hyperparams,
                           derive_seed(args.seed, "train", kind))
    p = _out(args, "model.json")
    classify.save_model(model, p)
    print(f"wrote {p} ({kind}, {model.classes.size} classes)")


def cmd_predict(args, cfg):
    model = classify.load_model(args.model)
    samples = _load_samples(args.inputs)
    p = _out(args, "predictions.csv")
    with open(p, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["label", "predicted", "confidence"])
        for s in samples:
            lab, conf = classify.predict(model, s)
            out.writerow(["" if s.label is None else s.label, lab, repr(conf)])
    labelled = [s for s in samples if s.label is not None]
    if labelled:
        m = classify.evaluate(model, labelled)
        print(f"accuracy {m.accuracy:.4f} on {len(labelled)} labelled samples")
    print(f"wrote {p}")


def cmd_cross_validate(args, cfg):
    kind = args.kind or cfg.classifier.kind
    cv = classify.cross_validate(_load_samples(args.inputs), kind, cfg.hyperparams, args.folds,
                                 derive_seed(args.seed, "cross-validate", kind))
    print(f"{kind}: accuracy {cv.accuracy_mean:.4f} +- {cv.accuracy_std:.4f}, "
          f"precision {cv.precision_mean:.4f}, recall {cv.recall_mean:.4f}, "
          f"F1 {cv.f1_mean:.4f} +- {cv.f1_std:.4f}")


def cmd_learning_curve(args, cfg):
    kind = args.kind or cfg.classifier.kind
    sizes = [int(s) for s in args.sizes.split(",")]
    curve = classify.learning_curve(_load_samples(args.inputs), kind, cfg.hyperparams, sizes,
                                    derive_seed(args.seed, "learning-curve", kind))
    p = _out(args, "learning_curve.csv")
    with open(p, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["train_per_class", "accuracy"])
        out.writerows(sorted(curve.items()))
    for size, acc in sorted(curve.items()):
        print(f"{size:6d} {acc:.4f}")


def cmd_simulate(args, cfg):
    if not args.config:
        raise InvalidArgumentError("simulate needs --config with a [topology] section")
    topo = pipeline.load_topology(args.config)
    sim = cfg.simulation
    corpus_cfg = replace(cfg.corpus, footsteps_per_profile=sim.train_footsteps_per_profile,
                         seed=derive_seed(args.seed, "simulate-train"))
    corpus = bench.build_corpus(corpus_cfg, cfg.detector)
    f_count = cfg.classifier.f_count
    train_samples = bench.build_samples(corpus, bench.footstep_features(corpus, "DS8BP"), f_count)
    model = classify.train(train_samples, cfg.classifier.kind, cfg.hyperparams,
                           derive_seed(args.seed, "simulate-model"))

    captures, truth = {}, {}
    for i, (zone, sub) in enumerate(topo.things()):
        person = i % len(corpus.profiles)
        truth[(zone, sub)] = person
        captures[(zone, sub)] = [
            signal_core.generate_walk(corpus.profiles[person], pipeline.CAPTURE_WINDOW_S,
                                      codec.THING_RATE_HZ,
                                      derive_seed(args.seed, "simulate", zone, sub, k))[0]
            for k in range(sim.windows_per_thing)]
    result = pipeline.simulate(topo, captures, model, f_count, Path(args.out) / "stores",
                               cfg.detector, cfg.gates, cfg.lasso)
    for zone, s in result.summary().items():
        recs = result.fog_stores[zone].records()
        hits = sum(r.predicted_person == truth[(r.zone_id, r.subzone_id)] for r in recs)
        print(f"zone {zone}: {s['records']} records ({hits} correct), {s['datagrams']} datagrams, "
              f"{s['discarded']} discarded, airtime {s['airtime_s'] * 1e3:.1f} ms")
    print(f"cloud: {len(result.cloud)} records, sync added {result.sync.added}, "
          f"failed stores {len(result.sync.failed)}")


def cmd_bench(args, cfg):
    corpus_cfg = replace(cfg.corpus, seed=derive_seed(args.seed, "bench-corpus"))
    if args.footsteps_per_profile:
        corpus_cfg = replace(corpus_cfg, footsteps_per_profile=args.footsteps_per_profile)
    corpus = bench.build_corpus(corpus_cfg, cfg.detector)
    kinds = args.kinds.split(",")
    f_values = [int(f) for f in args.f_values.split(",")]
    seed = derive_seed(args.seed, "bench", args.sweep)
    if args.sweep == "footsteps":
        table = bench.sweep_footsteps(corpus, kinds, f_values, cfg.hyperparams, seed, args.folds)
    elif args.sweep == "sampling":
        rates = [float(r) for r in args.rates.split(",")]
        table = bench.sweep_sampling(corpus, rates, kinds, f_values[0], cfg.hyperparams, seed,
                                     args.folds)
    elif args.sweep == "codecs":
        table = bench.compare_codecs(corpus, kinds, f_values, cfg.hyperparams, seed, args.folds)
    else:
        stats = bench.histogram_compression(corpus)
        counts, edges = stats.histogram
        table = bench.Table(["bin_lo", "bin_hi", "count"],
                            [[edges[i], edges[i + 1], int(c)] for i, c in enumerate(counts)],
                            bench.fingerprint(corpus.config, corpus.detector))
        print(f"mean factor {stats.mean_factor:.2f} +- {stats.std_factor:.2f}, "
              f"mean M {stats.atom_counts.mean():.2f}, "
              f"mean airtime {stats.mean_airtime_s * 1e3:.2f} ms, discarded {stats.discarded}")
    p = _out(args, f"bench_{args.sweep}.csv")
    table.write_csv(p)
    print(",".join(table.columns))
    for row in table.rows:
        print(",".join(str(v) for v in row))
    print(f"wrote {p} (config {table.fingerprint})")


# -- parser ------------------------------------------------------------------

def _global_flags(parser, suppress: bool):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=int, default=d(0), help="master random seed")
    parser.add_argument("--config", default=d(None), help="INI config / topology file")
    parser.add_argument("--sample-rate", type=float, default=d(None),
                        help="sample rate for CSV signals (and gen-walk output)")
    parser.add_argument("--out", default=d("."), help="output directory")
    parser.add_argument("-v", "--verbose", action="store_true", default=d(False))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    p = argparse.ArgumentParser(prog="footfall", description=__doc__.splitlines()[0])
    _global_flags(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=fn)
        return sp

    sp = add("gen-walk", cmd_gen_walk, "synthesize a walk and its ground-truth onsets")
    sp.add_argument("--person", type=int, default=0)
    sp.add_argument("--duration", type=float, default=10.0)
    sp.add_argument("--format", choices=("wav", "csv"), default="wav")

    sp = add("extract", cmd_extract, "detect footfall events")
    sp.add_argument("input")
    sp.add_argument("--slices", action="store_true", help="also write accepted events as CSV")

    sp = add("compress", cmd_compress, "DS8BP-compress one 8 kHz event into a datagram")
    sp.add_argument("input")
    sp.add_argument("--energy-fraction", type=float, default=codec.DEFAULT_ENERGY_FRACTION)

    sp = add("decompress", cmd_decompress, "rebuild a 1 kHz event from a datagram")
    sp.add_argument("input")

    sp = add("ds16", cmd_ds16, "decimate one event by 16")
    sp.add_argument("input")

    sp = add("features", cmd_features, "feature CSV from one or more walk signals")
    sp.add_argument("inputs", nargs="+")
    sp.add_argument("--label", type=int, default=None)
    sp.add_argument("--f-count", type=int, default=1)
    sp.add_argument("--codec", choices=bench.CODECS, default="NC")

    for name, fn, help_ in (("train", cmd_train, "train a classifier on feature CSVs"),
                            ("cross-validate", cmd_cross_validate, "stratified k-fold accuracy"),
                            ("learning-curve", cmd_learning_curve, "accuracy vs training size")):
        sp = add(name, fn, help_)
        sp.add_argument("inputs", nargs="+")
        sp.add_argument("--kind", choices=classify.KINDS, default=None)
        if name == "cross-validate":
            sp.add_argument("--folds", type=int, default=10)
        if name == "learning-curve":
            sp.add_argument("--sizes", default="5,10,20,40")

    sp = add("predict", cmd_predict, "predict labels for feature CSVs")
    sp.add_argument("model")
    sp.add_argument("inputs", nargs="+")

    add("simulate", cmd_simulate, "run a Thing/Fog/Cloud topology on synthetic walks")

    sp = add("bench", cmd_bench, "experiment sweeps on the synthetic corpus")
    sp.add_argument("sweep", choices=("footsteps", "sampling", "codecs", "histogram"))
    sp.add_argument("--kinds", default=",".join(classify.KINDS))
    sp.add_argument("--f-values", default="1,7")
    sp.add_argument("--rates", default="8000,4000,2000,1000,500")
    sp.add_argument("--folds", type=int, default=0, help="0 = one stratified 70/30 split")
    sp.add_argument("--footsteps-per-profile", type=int, default=None)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_settings(args.config)
        args.func(args, cfg)
    except FootfallError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
