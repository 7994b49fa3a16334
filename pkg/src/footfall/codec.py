"""DS8BP compression, the DS16 baseline and the datagram wire format.

Datagram layout, little-endian, ``10 * M + 2`` bytes in total::

    u16 L | M x u16 atom index | M x f64 coefficient

M is implied by the buffer length.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .dictionary import BLOCK, get_dictionary, select_columns
from .errors import (CorruptEventError, EncodingOverflowError, InvalidArgumentError,
                     MalformedDatagramError)
from .signal_core import TimeSeries, decimate
from .sparse import LassoConfig, project_least_squares, select_atoms_by_energy, solve_lasso

THING_RATE_HZ = 8000.0
DS8BP_FACTOR = 8
DS16_FACTOR = 16
DEFAULT_ENERGY_FRACTION = 0.998
# The LASSO only nominates atoms; least squares then sets their weights, so a
# loose stopping rule is enough and roughly halves the cost per event.
CODEC_LASSO = LassoConfig(tol=1e-3)
U16_MAX = 0xFFFF


@dataclass(frozen=True)
class GateConfig:
    l_gc: int = 5
    h_gc: int = 40

    def __post_init__(self):
        if not 0 < self.l_gc <= self.h_gc:
            raise InvalidArgumentError("gate bounds need 0 < l_gc <= h_gc")


@dataclass(frozen=True, eq=False)
class CompressedEvent:
    coefficients: np.ndarray
    atom_indices: np.ndarray
    length_l: int

    def __post_init__(self):
        coefs = np.asarray(self.coefficients, dtype=np.float64).reshape(-1)
        idx = np.asarray(self.atom_indices).reshape(-1)
        if idx.size and not np.issubdtype(idx.dtype, np.integer):
            raise CorruptEventError("atom indices must be integers")
        idx = idx.astype(np.int64)
        object.__setattr__(self, "coefficients", coefs)
        object.__setattr__(self, "atom_indices", idx)
        if coefs.shape != idx.shape or coefs.size < 1:
            raise CorruptEventError("coefficients and atom indices need equal length M >= 1")
        if int(self.length_l) != self.length_l or self.length_l < 2:
            raise CorruptEventError(f"invalid event length {self.length_l}")
        object.__setattr__(self, "length_l", int(self.length_l))
        if idx.min() < 0 or idx.max() >= BLOCK * self.length_l:
            raise CorruptEventError("atom index outside the dictionary")
        if np.unique(idx).size != idx.size:
            raise CorruptEventError("duplicate atom indices")

    @property
    def n_atoms(self) -> int:
        return int(self.coefficients.size)

    @property
    def compression_factor(self) -> float:
        return self.length_l / self.n_atoms

    def __eq__(self, other):
        if not isinstance(other, CompressedEvent):
            return NotImplemented
        return (self.length_l == other.length_l
                and self.atom_indices.tobytes() == other.atom_indices.tobytes()
                and self.coefficients.tobytes() == other.coefficients.tobytes())

    __hash__ = None


@dataclass(frozen=True)
class Discarded:
    """An event the Thing drops instead of transmitting."""
    reason: str  # "too-many-atoms" | "too-few-atoms" | "solver"
    atom_count: int | None = None
    length_l: int | None = None


def compress_ds8bp(event: TimeSeries, gates: GateConfig = GateConfig(),
                   lasso: LassoConfig = CODEC_LASSO,
                   energy_fraction: float = DEFAULT_ENERGY_FRACTION) -> CompressedEvent | Discarded:
    if event.sample_rate_hz != THING_RATE_HZ:
        raise InvalidArgumentError(f"DS8BP expects an {THING_RATE_HZ:g} Hz event")
    sig_ds = decimate(event, DS8BP_FACTOR)
    length_l = len(sig_ds)
    dictionary = get_dictionary(length_l)
    code = solve_lasso(dictionary, sig_ds, lasso)
    if not code.converged:
        return Discarded("solver", len(code), length_l)
    if not code.coefficients:
        return Discarded("too-few-atoms", 0, length_l)
    atoms = select_atoms_by_energy(code, length_l, energy_fraction)
    m = len(atoms)
    if m > gates.h_gc:
        return Discarded("too-many-atoms", m, length_l)  # noise needs many atoms
    if m < gates.l_gc:
        return Discarded("too-few-atoms", m, length_l)
    fit = project_least_squares(select_columns(dictionary, atoms), sig_ds)
    return CompressedEvent(fit.coefficients, np.asarray(atoms, dtype=np.int64), length_l)


def decompress(event: CompressedEvent) -> TimeSeries:
    dictionary = get_dictionary(event.length_l)
    try:
        cols = select_columns(dictionary, event.atom_indices)
    except InvalidArgumentError as exc:
        raise CorruptEventError(str(exc)) from exc
    return TimeSeries(cols @ event.coefficients, THING_RATE_HZ / DS8BP_FACTOR)


def compress_ds16(event: TimeSeries) -> TimeSeries:
    return decimate(event, DS16_FACTOR)


def datagram_size(n_atoms: int) -> int:
    return 10 * n_atoms + 2


def airtime_s(n_bytes: int, data_rate_bps: float = 80_000.0) -> float:
    return n_bytes * 8 / data_rate_bps


def encode_datagram(event: CompressedEvent) -> bytes:
    if event.length_l > U16_MAX:
        raise EncodingOverflowError(f"L={event.length_l} does not fit in 16 bits")
    if event.atom_indices.max() > U16_MAX:
        raise EncodingOverflowError("atom index does not fit in 16 bits")
    return (struct.pack("<H", event.length_l)
            + event.atom_indices.astype("<u2").tobytes()
            + event.coefficients.astype("<f8").tobytes())


def decode_datagram(data: bytes) -> CompressedEvent:
    data = bytes(data)
    n = len(data)
    if n < 12 or (n - 2) % 10:
        raise MalformedDatagramError(f"{n} bytes is not a valid 10M+2 datagram length")
    m = (n - 2) // 10
    (length_l,) = struct.unpack_from("<H", data, 0)
    idx = np.frombuffer(data, dtype="<u2", count=m, offset=2).astype(np.int64)
    coefs = np.frombuffer(data, dtype="<f8", count=m, offset=2 + 2 * m).astype(np.float64)
    return CompressedEvent(coefs, idx, length_l)
