"""Build the synthetic corpus once and run every sweep on it.

Writes bench_footsteps.csv, bench_sampling.csv, bench_codecs.csv and
bench_histogram.csv to --out, and prints a short summary with timings.

    python3 scripts/run_benchmarks.py --out results/
    python3 scripts/run_benchmarks.py --footsteps-per-profile 200 --out /tmp/quick
"""
import argparse
import logging
import time
from dataclasses import replace
from pathlib import Path

from footfall import bench
from footfall.bench import CorpusConfig, Table
from footfall.classify import KINDS
from footfall.seeding import fingerprint


def _ints(text):
    return [int(v) for v in text.split(",")]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--footsteps-per-profile", type=int, default=None)
    ap.add_argument("--kinds", default=",".join(KINDS))
    ap.add_argument("--f-values", default="1,3,5,7")
    ap.add_argument("--rates", default="8000,4000,2000,1000,500")
    ap.add_argument("--folds", type=int, default=0, help="0 = one stratified 70/30 split")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = CorpusConfig(seed=args.seed)
    if args.footsteps_per_profile:
        cfg = replace(cfg, footsteps_per_profile=args.footsteps_per_profile)
    kinds = args.kinds.split(",")
    f_values = _ints(args.f_values)

    t0 = time.perf_counter()
    corpus = bench.build_corpus(cfg)
    logging.info("corpus: %d events", corpus.n_events)
    compressed = bench.compress_corpus(corpus)
    stats = bench.histogram_compression(corpus, compressed)
    logging.info("DS8BP: mean M %.2f, factor %.2f +- %.2f, airtime %.2f ms, discarded %s",
                 stats.atom_counts.mean(), stats.mean_factor, stats.std_factor,
                 1e3 * stats.mean_airtime_s, stats.discarded)
    counts, edges = stats.histogram
    Table(["bin_lo", "bin_hi", "count"],
          [[float(lo), float(hi), int(n)] for lo, hi, n in zip(edges[:-1], edges[1:], counts)],
          fingerprint(corpus.config, corpus.detector)).write_csv(out / "bench_histogram.csv")

    tables = {
        "footsteps": bench.sweep_footsteps(corpus, kinds, f_values, seed=args.seed,
                                           folds=args.folds),
        "sampling": bench.sweep_sampling(corpus, _ints(args.rates), kinds, seed=args.seed,
                                         folds=args.folds),
        "codecs": bench.compare_codecs(corpus, kinds, f_values, seed=args.seed,
                                       folds=args.folds, compressed=compressed),
    }
    for name, table in tables.items():
        table.write_csv(out / f"bench_{name}.csv")
        print(f"\n{name}")
        print(",".join(table.columns))
        for row in table.rows:
            print(",".join(f"{v:.4f}" if isinstance(v, float) else str(v) for v in row))
    print(f"\ntotal {time.perf_counter() - t0:.0f} s")


if __name__ == "__main__":
    main()
