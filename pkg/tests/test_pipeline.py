import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from footfall.bench import CorpusConfig, build_corpus, build_samples, footstep_features
from footfall.classify import predict, train
from footfall.codec import (CompressedEvent, Discarded, compress_ds8bp, datagram_size,
                            decompress, encode_datagram)
from footfall.errors import InvalidArgumentError
from footfall.events import extract_events, slice_event
from footfall.features import aggregate_sample, extract_features
from footfall.pipeline import (IdentificationRecord, LinkModel, RecordStore, Topology,
                               Transmission, load_topology, run_fog, run_thing, simulate,
                               sync_cloud)
from footfall.signal_core import TimeSeries, default_profiles, generate_walk

FS = 8000.0


@pytest.fixture(scope="module")
def profiles():
    return default_profiles(3)


@pytest.fixture(scope="module")
def models():
    corpus = build_corpus(CorpusConfig(n_profiles=3, footsteps_per_profile=30, seed=11))
    feats = footstep_features(corpus, "NC")
    return {f: train(build_samples(corpus, feats, f), "logistic") for f in (1, 2, 3)}


@pytest.fixture(scope="module")
def model(models):
    return models[2]


@pytest.fixture(scope="module")
def walk(profiles):
    return generate_walk(profiles[1], 10.0, FS, 5)[0]


@pytest.fixture(scope="module")
def thing_report(walk):
    return run_thing(walk, zone_id="Z", subzone_id="S")


def offline_records(signal, model, f_count):
    """The same steps as Thing + Fog, called one module at a time."""
    onsets, vecs, prev = [], [], None
    for win in extract_events(signal):
        c = compress_ds8bp(slice_event(signal, win))
        if isinstance(c, Discarded):
            continue
        vecs.append(extract_features(decompress(c), win.onset_time_s, prev))
        onsets.append(win.onset_time_s)
        prev = win.onset_time_s
    out = []
    for k in range(len(vecs) // f_count):
        group = vecs[k * f_count:(k + 1) * f_count]
        label, conf = predict(model, aggregate_sample(group, f_count))
        out.append((onsets[(k + 1) * f_count - 1], label, conf))
    return out


def test_one_datagram_per_accepted_event(walk, thing_report):
    results = [compress_ds8bp(slice_event(walk, w)) for w in extract_events(walk)]
    accepted = [r for r in results if isinstance(r, CompressedEvent)]
    assert len(thing_report.transmissions) == len(accepted) > 0
    assert len(thing_report.discarded) == len(results) - len(accepted)
    for tx, ev in zip(thing_report.transmissions, accepted):
        assert tx.datagram == encode_datagram(ev)
        assert tx.airtime_s == pytest.approx(len(tx.datagram) * 8 / 80_000, rel=1e-15)


def test_onsets_leave_in_order(thing_report):
    onsets = [t.onset_s for t in thing_report.transmissions]
    assert onsets == sorted(onsets)


def test_silent_signal_sends_nothing():
    rep = run_thing(TimeSeries(np.zeros(int(10 * FS)), FS))
    assert rep.transmissions == [] and rep.airtime_s == 0.0


def test_partial_buffer_is_not_classified(model, thing_report):
    six = thing_report.transmissions[:6]
    assert len(six) == 6
    assert run_fog(six, model, 7) == []


@pytest.mark.parametrize("f_count", [1, 2, 3])
def test_pipeline_matches_offline_composition(walk, thing_report, models, f_count):
    model = models[f_count]
    records = run_fog(thing_report.transmissions, model, f_count, zone_id="Z")
    expected = offline_records(walk, model, f_count)
    assert len(records) == len(expected) > 0
    for rec, (ts, label, conf) in zip(records, expected):
        assert rec.timestamp == ts and rec.predicted_person == label
        assert abs(rec.confidence - conf) <= 1e-12
        assert rec.f_count == f_count and 0.0 <= rec.confidence <= 1.0


def test_corrupted_datagram_is_skipped(thing_report, models):
    model = models[1]
    txs = list(thing_report.transmissions)
    clean = run_fog(txs, model, 1)
    bad = Transmission("Z", "S", txs[3].onset_s, b"\x00" * 7, 0.0)
    records = run_fog(txs[:3] + [bad] + txs[3:], model, 1)
    assert [(r.timestamp, r.predicted_person, r.confidence) for r in records] == \
           [(r.timestamp, r.predicted_person, r.confidence) for r in clean]


def test_link_model_validation():
    assert LinkModel().airtime(datagram_size(18)) == pytest.approx(0.0182)
    with pytest.raises(InvalidArgumentError):
        LinkModel(0.0)


# -- stores and sync ---------------------------------------------------------

def _record(zone, sub, t, person=0, conf=0.5):
    return IdentificationRecord(float(t), zone, sub, person, conf, 1)


def _store(path, records):
    s = RecordStore(path)
    for r in records:
        s.append(r)
    return s


def test_store_persists_with_sequence_numbers(tmp_path):
    p = tmp_path / "fog.ndjson"
    recs = [_record("Z", "S", t) for t in (0.5, 1.25)]
    _store(p, recs)
    lines = [json.loads(l) for l in p.read_text().splitlines()]
    assert [l["seq"] for l in lines] == [0, 1]
    assert RecordStore(p).records() == recs


def test_sync_twice_is_idempotent(tmp_path):
    fog = _store(tmp_path / "f.ndjson", [_record("Z", "S", t) for t in range(5)])
    cloud = RecordStore(tmp_path / "c.ndjson")
    assert sync_cloud([fog], cloud).added == 5
    before = (tmp_path / "c.ndjson").read_text()
    assert sync_cloud([fog], cloud).added == 0
    assert (tmp_path / "c.ndjson").read_text() == before


def test_disjoint_fogs_add_up():
    a = _store(None, [_record("A", "S", t) for t in range(4)])
    b = _store(None, [_record("B", "S", t) for t in range(3)])
    cloud = RecordStore()
    sync_cloud([a, b], cloud)
    assert len(cloud) == 7


record_lists = st.lists(st.tuples(st.sampled_from(["A", "B"]), st.sampled_from(["1", "2"]),
                                  st.integers(0, 20)), max_size=15)


@settings(max_examples=100, deadline=None)
@given(a=record_lists, b=record_lists, pre=record_lists)
def test_cloud_is_union_of_fog_stores(a, b, pre):
    fogs = [_store(None, [_record(*k) for k in dict.fromkeys(keys)]) for keys in (a, b)]
    cloud = _store(None, [_record(*k) for k in dict.fromkeys(pre)])
    sync_cloud(fogs, cloud)
    expected = {r.key for f in fogs for r in f.records()} | {r.key for r in cloud.records()}
    assert cloud.keys() == expected
    assert len(cloud) == len(expected)
    snapshot = cloud.records()
    sync_cloud(fogs, cloud)
    assert cloud.records() == snapshot


def test_unreadable_store_gives_partial_sync(tmp_path):
    good = _store(tmp_path / "good.ndjson", [_record("A", "S", 1)])
    bad = RecordStore(tmp_path / "bad.ndjson")
    (tmp_path / "bad.ndjson").write_text("{not json\n")
    cloud = RecordStore()
    result = sync_cloud([good, bad], cloud)
    assert not result.complete and result.failed[0][0] is bad
    assert len(cloud) == 1


# -- topology ----------------------------------------------------------------

def test_topology_validation(tmp_path):
    with pytest.raises(InvalidArgumentError):
        Topology({"Z": ("S", "S")})
    with pytest.raises(InvalidArgumentError):
        Topology({"Z": ()})
    p = tmp_path / "t.ini"
    p.write_text("[topology]\nzones = A\n")
    with pytest.raises(InvalidArgumentError):
        load_topology(p)


def test_shipped_topology_has_two_zones():
    topo = load_topology("docs/topology.ini")
    assert list(topo.zones) == ["Z-1", "Z-2"]
    assert len(topo.things()) == 4


def test_simulation_cloud_is_union_and_buffers_carry_over(tmp_path, profiles, models):
    topo = Topology({"A": ("1",), "B": ("1", "2")})
    captures = {(z, s): [generate_walk(profiles[i], 10.0, FS, 100 + 10 * i + k)[0]
                         for k in range(2)]
                for i, (z, s) in enumerate(topo.things())}
    sim = simulate(topo, captures, models[3], 3, tmp_path)
    fog_keys = set().union(*(s.keys() for s in sim.fog_stores.values()))
    assert sim.cloud.keys() == fog_keys and sim.sync.complete
    # footsteps are grouped across the window boundary, so records follow delivered datagrams
    for (z, s), reps in sim.reports.items():
        sent = sum(len(r.transmissions) for r in reps)
        recs = [r for r in sim.fog_stores[z].records() if r.subzone_id == s]
        assert len(recs) == sent // 3
        assert all(r.zone_id == z for r in recs)
    assert (tmp_path / "cloud.ndjson").exists()
