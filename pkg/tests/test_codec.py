import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from footfall.codec import (CompressedEvent, Discarded, GateConfig, airtime_s, compress_ds16,
                            compress_ds8bp, datagram_size, decode_datagram, decompress,
                            encode_datagram)
from footfall.dictionary import OMEGAS, gabor_atom, get_dictionary, select_columns
from footfall.errors import (CorruptEventError, EncodingOverflowError, InvalidArgumentError,
                             MalformedDatagramError)
from footfall.signal_core import TimeSeries, decimate

FS = 8000.0


def _rel_err(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def atom_event(rng, n_atoms, width_s=0.25):
    """8 kHz event whose 1 kHz decimation is close to ``n_atoms`` dictionary columns.

    Atoms are drawn uniformly over the (tau, omega, cos/sin) grid, on the
    normalized time axis the codec's dictionary uses.
    """
    n = int(round(width_s * FS))
    L = n // 8
    t = (np.arange(n) / 8.0) / (L - 1)
    x = np.zeros(n)
    for _ in range(n_atoms):
        tau = rng.integers(0, L) / (L - 1)
        x += rng.normal(1.0, 0.3) * rng.choice([-1.0, 1.0]) * gabor_atom(
            t, tau, rng.choice(OMEGAS), rng.choice(["cos", "sin"]))
    return TimeSeries(x, FS)


def random_event(rng, max_atoms=60):
    L = int(rng.integers(2, 649))  # 101 * L columns must stay addressable by a u16
    m = int(rng.integers(1, min(max_atoms, 101 * L) + 1))
    idx = rng.choice(101 * L, size=m, replace=False)
    coefs = rng.normal(size=m) * 10.0 ** rng.uniform(-30, 30, size=m)
    return CompressedEvent(coefs, idx, L)


@pytest.mark.parametrize("seed", range(20))
def test_twelve_atom_event_round_trip(seed):
    ev = atom_event(np.random.default_rng(seed), 12)
    out = compress_ds8bp(ev)
    assert isinstance(out, CompressedEvent)
    assert _rel_err(decompress(out).samples, decimate(ev, 8).samples) <= 0.05


def test_ten_atom_event_round_trip_within_1e3():
    # The decimator's anti-alias filter alone moves the 1 kHz signal about 1%
    # away from the span of the generating atoms, so this bound is not met.
    ev = atom_event(np.random.default_rng(123), 10)
    out = compress_ds8bp(ev)
    assert isinstance(out, CompressedEvent)
    assert _rel_err(decompress(out).samples, decimate(ev, 8).samples) <= 1e-3


@pytest.mark.parametrize("seed", range(20))
def test_white_noise_needs_too_many_atoms(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.uniform(0.15, 0.43) * FS)
    out = compress_ds8bp(TimeSeries(rng.normal(size=n), FS))
    assert isinstance(out, Discarded)
    assert out.reason == "too-many-atoms"
    assert out.atom_count > GateConfig().h_gc


def test_gate_counts_atoms():
    ev = atom_event(np.random.default_rng(4), 12)
    assert compress_ds8bp(ev, GateConfig(1, 3)).reason == "too-many-atoms"
    assert compress_ds8bp(ev, GateConfig(39, 40)).reason == "too-few-atoms"


def test_accepted_compression_factor_reported():
    out = compress_ds8bp(atom_event(np.random.default_rng(5), 12))
    assert out.compression_factor == out.length_l / out.n_atoms
    assert GateConfig().l_gc <= out.n_atoms <= GateConfig().h_gc


def test_compress_requires_8khz():
    with pytest.raises(InvalidArgumentError):
        compress_ds8bp(TimeSeries(np.ones(2000), 1000.0))


def test_single_atom_decompresses_to_its_column():
    d = get_dictionary(250)
    out = decompress(CompressedEvent([1.0], [777], 250))
    assert out.sample_rate_hz == 1000.0
    np.testing.assert_array_equal(out.samples, select_columns(d, [777])[:, 0])


def test_zero_coefficients_give_zero_signal():
    out = decompress(CompressedEvent(np.zeros(4), [1, 50, 300, 999], 40))
    assert np.all(out.samples == 0.0) and len(out) == 40


def test_decompressed_signal_has_no_energy_above_top_frequency():
    rng = np.random.default_rng(9)
    L = 300
    ev = CompressedEvent(rng.normal(size=25), rng.choice(101 * L, 25, replace=False), L)
    x = decompress(ev).samples
    # top omega of 250 per unit normalized time is this many cycles over the event
    top_bin = int(np.ceil(OMEGAS[-1] / (2 * np.pi) * L / (L - 1)))
    # atoms do not decay to zero at the event edges, so taper before the DFT
    # to keep edge leakage from masquerading as high-frequency content
    X = np.abs(np.fft.rfft(x * np.hanning(L))) ** 2
    assert X[top_bin + 20:].sum() <= 1e-9 * X.sum()


def test_ds16_length_and_airtime():
    out = compress_ds16(TimeSeries(np.random.default_rng(0).normal(size=2005), FS))
    assert len(out) == 125 and out.sample_rate_hz == 500.0
    assert airtime_s(125 * 8) == pytest.approx(0.100)


def test_datagram_size_reference_point():
    assert datagram_size(18) == 182
    rng = np.random.default_rng(0)
    ev = CompressedEvent(rng.normal(size=18), rng.choice(5000, 18, replace=False), 250)
    assert len(encode_datagram(ev)) == 182


def test_airtime_reference_point():
    # mean M of 18.51 atoms at 80 kbps
    assert (10 * 18.51 + 2) * 8 / 80_000 == pytest.approx(0.01871, abs=5e-6)
    assert airtime_s(datagram_size(18)) == pytest.approx(0.0182)


def test_layout_is_little_endian():
    ev = CompressedEvent([1.5, -2.0], [3, 258], 513)
    data = encode_datagram(ev)
    assert data[:2] == b"\x01\x02"
    assert data[2:6] == b"\x03\x00\x02\x01"
    assert struct.unpack("<2d", data[6:]) == (1.5, -2.0)


@settings(max_examples=1000, deadline=None)
@given(seed=st.integers(0, 2**63 - 1))
def test_datagram_round_trip_is_bitwise(seed):
    ev = random_event(np.random.default_rng(seed))
    data = encode_datagram(ev)
    assert len(data) == 10 * ev.n_atoms + 2
    back = decode_datagram(data)
    assert back == ev
    assert encode_datagram(back) == data


def test_minimal_datagram():
    data = struct.pack("<HHd", 2, 201, 0.25)
    assert len(data) == 12
    ev = decode_datagram(data)
    assert ev.length_l == 2 and ev.atom_indices.tolist() == [201]
    assert ev.coefficients.tolist() == [0.25]


@pytest.mark.parametrize("n", [0, 2, 11, 13, 21, 181])
def test_bad_lengths_are_malformed(n):
    with pytest.raises(MalformedDatagramError):
        decode_datagram(bytes(n))


def test_truncated_datagram():
    rng = np.random.default_rng(2)
    data = encode_datagram(CompressedEvent(rng.normal(size=5), [1, 2, 3, 4, 5], 100))
    with pytest.raises(MalformedDatagramError):
        decode_datagram(data[:-1])


def test_corrupt_indices_rejected():
    with pytest.raises(CorruptEventError):
        decode_datagram(struct.pack("<HHHdd", 10, 4, 4, 1.0, 1.0))
    with pytest.raises(CorruptEventError):
        decode_datagram(struct.pack("<HHd", 10, 1010, 1.0))
    with pytest.raises(CorruptEventError):
        decode_datagram(struct.pack("<HHd", 1, 0, 1.0))


def test_event_invariants():
    with pytest.raises(CorruptEventError):
        CompressedEvent([], [], 10)
    with pytest.raises(CorruptEventError):
        CompressedEvent([1.0, 2.0], [1], 10)
    with pytest.raises(CorruptEventError):
        CompressedEvent([1.0], [1.5], 10)


def test_encoding_overflow():
    with pytest.raises(EncodingOverflowError):
        encode_datagram(CompressedEvent([1.0], [0], 70_000))
    with pytest.raises(EncodingOverflowError):
        encode_datagram(CompressedEvent([1.0], [70_000], 1000))


def test_gate_config_validation():
    with pytest.raises(InvalidArgumentError):
        GateConfig(0, 10)
    with pytest.raises(InvalidArgumentError):
        GateConfig(20, 10)
