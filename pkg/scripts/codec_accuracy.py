"""Round-trip accuracy and atom counts of the DS8BP codec on corpus footsteps.

Reports the relative reconstruction error against the 1 kHz decimated event,
the atom-count and compression-factor spread, discard reasons, the mean
airtime and the time per event.

    python3 scripts/codec_accuracy.py --footsteps-per-profile 50
"""
import argparse
import time

import numpy as np

from footfall.bench import CorpusConfig, build_corpus
from footfall.codec import (CompressedEvent, Discarded, airtime_s, compress_ds8bp,
                            datagram_size, decompress)
from footfall.signal_core import decimate


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--footsteps-per-profile", type=int, default=50)
    ap.add_argument("--n-profiles", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    corpus = build_corpus(CorpusConfig(n_profiles=args.n_profiles,
                                       footsteps_per_profile=args.footsteps_per_profile,
                                       seed=args.seed))
    errors, atoms, factors, reasons = [], [], [], {}
    t0 = time.perf_counter()
    for walk in corpus.walks:
        for ev in walk.events:
            out = compress_ds8bp(ev)
            if isinstance(out, Discarded):
                reasons[out.reason] = reasons.get(out.reason, 0) + 1
                continue
            assert isinstance(out, CompressedEvent)
            ref = decimate(ev, 8).samples
            errors.append(np.linalg.norm(decompress(out).samples - ref) / np.linalg.norm(ref))
            atoms.append(out.n_atoms)
            factors.append(out.compression_factor)
    per_event = (time.perf_counter() - t0) / corpus.n_events
    errors, atoms = np.array(errors), np.array(atoms)

    print(f"events {corpus.n_events}, accepted {atoms.size}, discarded {reasons}")
    print(f"relative error: median {np.median(errors):.4f}, p95 {np.quantile(errors, 0.95):.4f},"
          f" max {errors.max():.4f}")
    print(f"atoms: mean {atoms.mean():.2f}, min {atoms.min()}, max {atoms.max()}")
    print(f"compression factor: {np.mean(factors):.2f} +- {np.std(factors):.2f}")
    airtime = np.mean([airtime_s(datagram_size(int(m))) for m in atoms])
    print(f"mean airtime {1e3 * airtime:.2f} ms")
    print(f"{1e3 * per_event:.1f} ms per event")


if __name__ == "__main__":
    main()
