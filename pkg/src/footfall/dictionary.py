"""Over-complete Gabor dictionary used by the DS8BP codec.

Atoms live on a normalized time grid ``t = tau = {0, 1/(L-1), ..., 1}``.  For
every shift ``tau`` the block of ``1 + 2 * len(OMEGAS)`` columns is

    [f(t; tau), f_c(t; tau, 5), f_s(t; tau, 5), ..., f_c(t; tau, 250), f_s(t; tau, 250)]

with ``f = exp(-(t - tau)**2 / sigma**2)`` and ``f_c``/``f_s`` the same envelope
times ``cos(omega * t)``/``sin(omega * t)``.
"""
from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InvalidArgumentError

OMEGAS = np.arange(5.0, 251.0, 5.0)
SIGMA = 0.5
BLOCK = 1 + 2 * len(OMEGAS)  # columns per tau

KINDS = ("gauss", "cos", "sin")

ENV_RANK_TOL = 1e-16  # relative eigenvalue cut for the low-rank envelope product


@dataclass(frozen=True, eq=False)
class GaborDictionary:
    """The L x 101*L atom matrix, stored in factored form.

    Column ``j * BLOCK + m`` is ``envelope[:, j] * carriers[:, m]``; the dense
    ``atoms`` matrix is only built on first access.
    """
    length_l: int
    envelope: np.ndarray  # (t, tau)
    carriers: np.ndarray  # (t, BLOCK): 1, cos(w1 t), sin(w1 t), ...
    column_norms: np.ndarray
    env_left: np.ndarray  # (t, r) with envelope.T ~= env_left @ env_right to machine precision
    env_right: np.ndarray  # (r, t)
    omegas: np.ndarray = field(default_factory=lambda: OMEGAS.copy())
    sigma: float = SIGMA

    @property
    def n_atoms(self) -> int:
        return self.length_l * BLOCK

    @property
    def shape(self):
        return (self.length_l, self.n_atoms)

    @cached_property
    def atoms(self) -> np.ndarray:
        L = self.length_l
        a = (self.envelope[:, :, None] * self.carriers[:, None, :]).reshape(L, L * BLOCK)
        a.setflags(write=False)
        return a

    def columns(self, indices) -> np.ndarray:
        tau_idx, m = np.divmod(np.asarray(indices, dtype=np.int64), BLOCK)
        return self.envelope[:, tau_idx] * self.carriers[:, m]

    def correlate(self, r) -> np.ndarray:
        """``atoms.T @ r`` without forming the dense matrix.

        The Gaussian envelope matrix is numerically low rank (about 15 for
        sigma = 0.5 on [0, 1]), so the product goes through its truncated
        eigendecomposition.
        """
        m = self.carriers * np.asarray(r, dtype=float)[:, None]
        return (self.env_left @ (self.env_right @ m)).reshape(-1)


def time_grid(length_l: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, length_l)


def gabor_atom(t, tau: float, omega: float, kind: str, sigma: float = SIGMA) -> np.ndarray:
    """Evaluate one atom at arbitrary (normalized) times ``t``."""
    t = np.asarray(t, dtype=float)
    env = np.exp(-((t - tau) ** 2) / sigma**2)
    if kind == "gauss":
        return env
    if kind == "cos":
        return env * np.cos(omega * t)
    if kind == "sin":
        return env * np.sin(omega * t)
    raise InvalidArgumentError(f"unknown atom kind {kind!r}")


def column_index(tau_index: int, omega_index: int | None, kind: str) -> int:
    """Column of ``D`` holding the atom (tau_index, omega_index, kind).

    ``omega_index`` indexes OMEGAS and is ignored for the pure Gaussian atom.
    """
    if kind == "gauss":
        return tau_index * BLOCK
    offset = 1 + 2 * omega_index + (0 if kind == "cos" else 1)
    return tau_index * BLOCK + offset


def describe_column(index: int, length_l: int) -> tuple[float, float, str]:
    """Inverse of :func:`column_index`: returns (tau, omega, kind)."""
    tau_index, m = divmod(int(index), BLOCK)
    tau = tau_index / (length_l - 1)
    if m == 0:
        return tau, 0.0, "gauss"
    k, r = divmod(m - 1, 2)
    return tau, float(OMEGAS[k]), "cos" if r == 0 else "sin"


def generate_dictionary(length_l: int) -> GaborDictionary:
    if int(length_l) != length_l or length_l < 2:
        raise InvalidArgumentError(f"dictionary length must be an integer >= 2, got {length_l}")
    length_l = int(length_l)
    t = time_grid(length_l)
    env = np.exp(-((t[:, None] - t[None, :]) ** 2) / SIGMA**2)
    wt = OMEGAS[None, :] * t[:, None]
    carriers = np.empty((length_l, BLOCK))
    carriers[:, 0] = 1.0
    carriers[:, 1::2] = np.cos(wt)
    carriers[:, 2::2] = np.sin(wt)
    norms = np.sqrt((env.T**2 @ carriers**2).reshape(-1))
    vals, vecs = np.linalg.eigh(env)
    keep = np.abs(vals) > ENV_RANK_TOL * np.abs(vals).max()
    left = np.ascontiguousarray(vecs[:, keep] * vals[keep])
    right = np.ascontiguousarray(vecs[:, keep].T)
    for arr in (env, carriers, norms, left, right):
        arr.setflags(write=False)
    return GaborDictionary(length_l=length_l, envelope=env, carriers=carriers, column_norms=norms,
                           env_left=left, env_right=right)


class _DictionaryCache:
    # The dense atoms of a dictionary for L ~ 250-440 weigh 50-150 MB once built.
    def __init__(self, maxsize: int = 4):
        self.maxsize = maxsize
        self._items: OrderedDict[int, GaborDictionary] = OrderedDict()
        self._lock = threading.Lock()
        self._pending: dict[int, threading.Event] = {}

    def get(self, length_l: int) -> GaborDictionary:
        while True:
            with self._lock:
                if length_l in self._items:
                    self._items.move_to_end(length_l)
                    return self._items[length_l]
                waiter = self._pending.get(length_l)
                if waiter is None:
                    waiter = self._pending[length_l] = threading.Event()
                    owner = True
                else:
                    owner = False
            if not owner:
                waiter.wait()
                continue
            try:
                d = generate_dictionary(length_l)
                with self._lock:
                    self._items[length_l] = d
                    while len(self._items) > self.maxsize:
                        self._items.popitem(last=False)
                return d
            finally:
                with self._lock:
                    self._pending.pop(length_l, None)
                waiter.set()

    def clear(self):
        with self._lock:
            self._items.clear()


_cache = _DictionaryCache()


def get_dictionary(length_l: int) -> GaborDictionary:
    """Cached :func:`generate_dictionary`; at most one generation per L in flight."""
    return _cache.get(int(length_l))


def select_columns(dictionary, indices) -> np.ndarray:
    """``D[:, indices]`` for a GaborDictionary or a plain matrix."""
    idx = np.asarray(indices, dtype=np.int64).reshape(-1)
    if isinstance(dictionary, GaborDictionary):
        n = dictionary.n_atoms
    else:
        dictionary = np.asarray(dictionary)
        n = dictionary.shape[1]
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise InvalidArgumentError(f"atom index out of range [0, {n})")
    if np.unique(idx).size != idx.size:
        raise InvalidArgumentError("duplicate atom indices")
    if isinstance(dictionary, GaborDictionary):
        return dictionary.columns(idx)
    return dictionary[:, idx]
