import csv

import numpy as np
import pytest

from footfall.cli import main
from footfall.codec import decode_datagram
from footfall.pipeline import RecordStore
from footfall.signal_core import decimate, read_signal


def run(*argv):
    return main([str(a) for a in argv])


def test_gen_walk_is_deterministic(tmp_path):
    for d in ("a", "b"):
        assert run("gen-walk", "--seed", 1, "--out", tmp_path / d, "--duration", 4) == 0
    for name in ("walk.wav", "onsets.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    run("gen-walk", "--seed", 2, "--out", tmp_path / "c", "--duration", 4)
    assert (tmp_path / "c" / "walk.wav").read_bytes() != (tmp_path / "a" / "walk.wav").read_bytes()


def test_extract_compress_decompress(tmp_path):
    assert run("gen-walk", "--seed", 3, "--out", tmp_path, "--duration", 6) == 0
    assert run("extract", tmp_path / "walk.wav", "--slices", "--out", tmp_path) == 0
    with open(tmp_path / "events.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert any(r["accepted_flag"] == "1" for r in rows)
    event = tmp_path / "event_0000.csv"
    assert run("compress", event, "--sample-rate", 8000, "--out", tmp_path) == 0
    data = (tmp_path / "event.dgram").read_bytes()
    assert len(data) == 10 * decode_datagram(data).n_atoms + 2
    assert run("decompress", tmp_path / "event.dgram", "--out", tmp_path) == 0
    rec = read_signal(tmp_path / "recovered.csv", 1000.0)
    ref = decimate(read_signal(event, 8000.0), 8)
    err = np.linalg.norm(rec.samples - ref.samples) / np.linalg.norm(ref.samples)
    assert err <= 0.1


def test_features_train_predict(tmp_path):
    paths = []
    for person in (0, 1):
        d = tmp_path / f"p{person}"
        run("gen-walk", "--seed", 4, "--person", person, "--out", d, "--duration", 20)
        run("features", d / "walk.wav", "--label", person, "--out", d)
        paths.append(d / "features.csv")
    assert run("train", *paths, "--kind", "logistic", "--out", tmp_path) == 0
    assert run("predict", tmp_path / "model.json", *paths, "--out", tmp_path) == 0
    with open(tmp_path / "predictions.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows and all(0.0 <= float(r["confidence"]) <= 1.0 for r in rows)


@pytest.mark.slow
def test_simulate_two_zone_topology(tmp_path, capsys):
    assert run("simulate", "--config", "docs/topology.ini", "--out", tmp_path) == 0
    stores = tmp_path / "stores"
    fogs = [RecordStore(stores / f"fog-{z}.ndjson") for z in ("Z-1", "Z-2")]
    cloud = RecordStore(stores / "cloud.ndjson")
    assert cloud.keys() == fogs[0].keys() | fogs[1].keys()
    assert len(cloud) == len(fogs[0]) + len(fogs[1])
    assert "zone Z-1" in capsys.readouterr().out


def test_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_unknown_flag_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["gen-walk", "--bogus"])
    assert exc.value.code == 2


def test_module_error_is_typed(tmp_path, capsys):
    p = tmp_path / "short.csv"
    p.write_text("0.0\n1.0\n")
    assert run("extract", p, "--sample-rate", 1000, "--out", tmp_path) == 1
    assert "InvalidArgumentError" in capsys.readouterr().err


def test_bad_config_key(tmp_path, capsys):
    p = tmp_path / "c.ini"
    p.write_text("[lasso]\nbogus = 1\n")
    assert run("gen-walk", "--config", p, "--out", tmp_path) == 1
    assert "bogus" in capsys.readouterr().err
