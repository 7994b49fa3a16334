"""LASSO sparse coding, energy-based atom selection and least-squares re-projection.

The solver is cyclic coordinate descent on the column-normalized problem

    min_z  0.5 * ||D_n z - s||^2 + lam * ||z||_1,   D_n = D / ||D||_col

run over a growing working set: coordinates outside the set are only touched
by a full gradient check, which adds the worst KKT violators.  Coefficients
are mapped back to the raw-atom convention (x = z / ||d_j||) on return.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .dictionary import GaborDictionary
from .errors import EmptyCodeError, InvalidArgumentError
from .signal_core import TimeSeries


# sweeps spent on the working set before re-checking the full gradient
INNER_SWEEPS = 5
# iterates combined by each Anderson extrapolation step
N_EXTRAP = 5
# ratio between consecutive lambdas on the warm-start path
PATH_RATIO = 0.6
# sign-pattern refinement steps allowed per working-set round
POLISH_STEPS = 500
MIN_ADD = 5  # violators admitted to the working set per round
ADD_FRACTION = 0.25


@dataclass(frozen=True)
class LassoConfig:
    lambda_rel: float = 0.01
    max_iters: int = 10000  # noise bursts need several thousand sweeps to settle
    tol: float = 1e-6

    def __post_init__(self):
        if not 0 < self.lambda_rel < 1:
            raise InvalidArgumentError("lambda_rel must lie in (0, 1)")
        if not self.tol > 0 or self.max_iters < 1:
            raise InvalidArgumentError("tol must be positive and max_iters >= 1")


@dataclass
class SparseCode:
    coefficients: dict[int, float]
    residual_l2: float
    converged: bool = True
    lam: float = 0.0
    n_sweeps: int = 0
    # objective of the unit-norm normalized problem after every sweep
    objective_history: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    def __len__(self):
        return len(self.coefficients)

    def dense(self, n_atoms: int) -> np.ndarray:
        x = np.zeros(n_atoms)
        for j, v in self.coefficients.items():
            x[j] = v
        return x


@dataclass
class LeastSquaresFit:
    coefficients: np.ndarray
    residual_l2: float
    rank_deficient: bool = False


@njit(cache=True)
def _objective(G, c, z, lam, y_sq):
    n = z.shape[0]
    obj = 0.5 * y_sq
    for j in range(n):
        if z[j] != 0.0:
            gz = 0.0
            for i in range(n):
                gz += G[j, i] * z[i]
            obj += -c[j] * z[j] + 0.5 * z[j] * gz + lam * abs(z[j])
    return obj


@njit(cache=True)
def _cd_sweeps(G, c, z, lam, tol, max_sweeps, y_sq, hist, hist_pos, n_extrap):
    """Cyclic CD on the Gram form, with Anderson extrapolation every ``n_extrap`` sweeps.

    An extrapolated point replaces the iterate only if it lowers the
    objective, so the recorded per-sweep objective never increases.
    """
    n = z.shape[0]
    q = G @ z
    past = np.zeros((n_extrap + 1, n))
    obj = _objective(G, c, z, lam, y_sq)
    for sweep in range(max_sweeps):
        max_delta = 0.0
        for j in range(n):
            gjj = G[j, j]
            if gjj <= 0.0:
                continue
            zj = z[j]
            rho = c[j] - q[j] + gjj * zj
            if rho > lam:
                znew = (rho - lam) / gjj
            elif rho < -lam:
                znew = (rho + lam) / gjj
            else:
                znew = 0.0
            d = znew - zj
            if d != 0.0:
                for i in range(n):
                    q[i] += G[i, j] * d
                z[j] = znew
                if abs(d) > max_delta:
                    max_delta = abs(d)
        obj = _objective(G, c, z, lam, y_sq)
        if n_extrap > 0:
            slot = sweep % (n_extrap + 1)
            past[slot] = z
            if slot == n_extrap:
                U = past[1:] - past[:-1]
                M = U @ U.T
                scale = 0.0
                for i in range(n_extrap):
                    scale = max(scale, M[i, i])
                if scale > 0.0:
                    M = M / scale + 1e-10 * np.eye(n_extrap)
                    w = np.linalg.solve(M, np.ones(n_extrap))
                    sw = w.sum()
                    if sw != 0.0 and np.all(np.isfinite(w)):
                        w = w / sw
                        z_acc = np.zeros(n)
                        for i in range(n_extrap):
                            z_acc += w[i] * past[i + 1]
                        obj_acc = _objective(G, c, z_acc, lam, y_sq)
                        if obj_acc < obj:
                            z[:] = z_acc
                            q[:] = G @ z
                            obj = obj_acc
        hist[hist_pos + sweep] = obj
        if max_delta < tol:
            return sweep + 1, True
    return max_sweeps, False


@njit(cache=True)
def _polish(G, c, z, lam, y_sq, max_steps, hist, hist_pos):
    """Sign-pattern refinement of a CD iterate.

    Solves the KKT system on the current support with the current signs
    frozen, then moves toward that point only as far as the first sign
    change (dropping the coordinate that hits zero).  Within one orthant the
    objective is a convex quadratic minimized at the target, so every
    accepted step lowers it.  Returns the number of steps taken.
    """
    obj = _objective(G, c, z, lam, y_sq)
    for step in range(max_steps):
        S = np.flatnonzero(z)
        m = S.shape[0]
        if m == 0:
            return step
        GS = np.empty((m, m))
        rhs = np.empty(m)
        for a in range(m):
            for b in range(m):
                GS[a, b] = G[S[a], S[b]]
            GS[a, a] += 1e-12
            rhs[a] = c[S[a]] - lam * np.sign(z[S[a]])
        target = np.linalg.solve(GS, rhs)
        t = 1.0
        hit = -1
        for a in range(m):
            za = z[S[a]]
            d = target[a] - za
            if za * target[a] <= 0.0 and d != 0.0:
                ta = -za / d
                if ta < t:
                    t = ta
                    hit = a
        z_new = z.copy()
        for a in range(m):
            z_new[S[a]] = z[S[a]] + t * (target[a] - z[S[a]])
        if hit >= 0:
            z_new[S[hit]] = 0.0
        obj_new = _objective(G, c, z_new, lam, y_sq)
        if not obj_new < obj:
            return step
        z[:] = z_new
        obj = obj_new
        hist[hist_pos + step] = obj
        if hit < 0:
            return step + 1
    return max_steps


class _MatrixOperator:
    """Adapter giving a plain matrix the GaborDictionary solver interface."""

    def __init__(self, D):
        self.D = D
        self.length_l, self.n_atoms = D.shape
        self.column_norms = np.sqrt(np.einsum("ij,ij->j", D, D))

    def correlate(self, r):
        return self.D.T @ r

    def columns(self, idx):
        return self.D[:, idx]


def _as_operator(dictionary):
    if isinstance(dictionary, GaborDictionary):
        return dictionary
    D = np.asarray(dictionary, dtype=float)
    if D.ndim != 2:
        raise InvalidArgumentError("dictionary must be a 2-D matrix")
    return _MatrixOperator(D)


class _WorkingSet:
    def __init__(self, op, safe, corr, first):
        self.op, self.safe, self.corr = op, safe, corr
        self.active = np.asarray(first, dtype=np.int64)
        self.Dn = op.columns(self.active) / safe[self.active]
        self.G = self.Dn.T @ self.Dn
        self.z = np.zeros(self.active.size)

    def grow(self, new):
        Dn_new = self.op.columns(new) / self.safe[new]
        n, k = self.active.size, new.size
        G = np.empty((n + k, n + k))
        G[:n, :n] = self.G
        G[:n, n:] = self.Dn.T @ Dn_new
        G[n:, :n] = G[:n, n:].T
        G[n:, n:] = Dn_new.T @ Dn_new
        self.G = G
        self.Dn = np.hstack([self.Dn, Dn_new])
        self.active = np.concatenate([self.active, new])
        self.z = np.concatenate([self.z, np.zeros(new.size)])

    def prune(self):
        keep = np.flatnonzero(self.z)
        self.active = self.active[keep]
        self.Dn = self.Dn[:, keep]
        self.G = self.G[np.ix_(keep, keep)]
        self.z = self.z[keep]


def _solve_at(ws, y, lam, tol, sweeps_left, hist, hist_pos):
    """Working-set CD at one lambda. Returns (converged, sweeps used)."""
    used = 0
    while sweeps_left - used > 0:
        budget = min(sweeps_left - used, INNER_SWEEPS)
        n_done, inner_ok = _cd_sweeps(ws.G, ws.corr[ws.active], ws.z, lam, tol, budget, 1.0,
                                      hist, hist_pos + used, N_EXTRAP)
        used += n_done
        if not inner_ok and sweeps_left - used > 0:
            used += _polish(ws.G, ws.corr[ws.active], ws.z, lam, 1.0,
                            min(sweeps_left - used, POLISH_STEPS), hist, hist_pos + used)
            # zeroed near-duplicates would otherwise pile up in the working set
            ws.prune()
        g = ws.op.correlate(y - ws.Dn @ ws.z) / ws.safe
        g[ws.active] = 0.0
        viol = np.flatnonzero(np.abs(g) > lam + tol)
        if viol.size == 0:
            if inner_ok:
                return True, used
            continue
        n_add = min(viol.size, max(MIN_ADD, int(ws.active.size * ADD_FRACTION)))
        ws.grow(viol[np.argsort(-np.abs(g[viol]), kind="stable")[:n_add]])
    return False, used


def solve_lasso(dictionary, target, config: LassoConfig = LassoConfig()) -> SparseCode:
    """Sparse code of ``target`` over ``dictionary`` (a GaborDictionary or any matrix).

    ``lam = lambda_rel * max_j |d_j^T s| / ||d_j||`` on the normalized columns.
    The solve walks a short geometric path of lambdas from the null-solution
    value down to ``lam``, warm-starting each step; on this dictionary's
    near-collinear atoms that keeps the iterates sparse.  ``converged`` is
    False if ``max_iters`` sweeps ran out.
    """
    op = _as_operator(dictionary)
    norms = np.asarray(op.column_norms)
    s = target.samples if isinstance(target, TimeSeries) else np.asarray(target, dtype=float)
    if s.shape[0] != op.length_l:
        raise InvalidArgumentError(
            f"target length {s.shape[0]} does not match dictionary length {op.length_l}")
    scale = float(np.linalg.norm(s))
    if scale == 0.0:
        return SparseCode({}, 0.0, True, 0.0, 0)

    # the problem is homogeneous in s, so solve at unit norm and rescale
    y = s / scale
    safe = np.where(norms > 0, norms, np.inf)
    corr = op.correlate(y) / safe
    lam_max = float(np.max(np.abs(corr)))
    lam = config.lambda_rel * lam_max
    hist = np.empty(config.max_iters + 1)

    first = int(np.argmax(np.abs(corr)))
    if not abs(corr[first]) > lam:
        hist[0] = 0.5
        return SparseCode({}, scale, True, lam * scale, 0, hist[:1].copy())
    ws = _WorkingSet(op, safe, corr, [first])
    n_path = max(int(np.ceil(np.log(config.lambda_rel) / np.log(PATH_RATIO))), 1)
    path = lam_max * np.geomspace(1.0, config.lambda_rel, n_path + 1)[1:]
    used = 0
    converged = False
    for k, lam_k in enumerate(path):
        final = k == len(path) - 1
        # intermediate points only need to be roughly right
        tol_k = config.tol if final else max(config.tol, 1e-3)
        converged, n = _solve_at(ws, y, float(lam_k), tol_k, config.max_iters - used, hist, used)
        used += n
        if used >= config.max_iters:
            converged = converged and final
            break

    z, active = ws.z, ws.active
    nz = np.flatnonzero(z)
    coefs = {int(active[i]): float(scale * z[i] / safe[active[i]]) for i in nz}
    residual = scale * float(np.linalg.norm(y - ws.Dn @ z))
    return SparseCode(coefs, residual, converged, lam * scale, used, hist[:used].copy())


def _sorted_by_energy(code: SparseCode) -> list[tuple[int, float]]:
    # decreasing squared magnitude, ties to the lower atom index
    return sorted(code.coefficients.items(), key=lambda kv: (-(kv[1] ** 2), kv[0]))


def select_atoms_by_energy(code: SparseCode, length_l: int, energy_fraction: float = 0.99) -> list[int]:
    """Indices of the strongest coefficients holding ``energy_fraction`` of the energy.

    The pseudocode this follows sorts x, keeps the first L-1 entries, forms a
    lower-triangular cumulative sum normalized by the total energy, and stops
    at the largest i with "sum < 1".  Read literally that condition is always
    true after truncation, so the stop rule is taken as a cumulative energy
    cutoff instead: the shortest prefix reaching ``energy_fraction`` of the
    total squared-coefficient energy.
    """
    if not 0 < energy_fraction <= 1:
        raise InvalidArgumentError("energy_fraction must lie in (0, 1]")
    items = [(j, v) for j, v in _sorted_by_energy(code) if v != 0.0]
    if not items:
        raise EmptyCodeError("sparse code has no nonzero coefficients")
    # one running sum for both, so a fraction of 1 is reached exactly at the last item
    cum = np.cumsum([v * v for _, v in items])
    total = cum[-1]
    kept = items[: max(length_l - 1, 1)]
    cum = cum[: len(kept)]
    hit = np.flatnonzero(cum >= energy_fraction * total)
    count = int(hit[0]) + 1 if hit.size else len(kept)
    return [j for j, _ in kept[:count]]


def project_least_squares(selected_atoms: np.ndarray, target) -> LeastSquaresFit:
    """Pseudoinverse projection of ``target`` onto the columns of ``selected_atoms``."""
    A = np.asarray(selected_atoms, dtype=float)
    s = target.samples if isinstance(target, TimeSeries) else np.asarray(target, dtype=float)
    if A.ndim != 2 or A.shape[0] != s.shape[0]:
        raise InvalidArgumentError("atom matrix rows must match the target length")
    if A.shape[1] > A.shape[0]:
        raise InvalidArgumentError("more atoms than samples")
    if A.shape[1] == 0:
        return LeastSquaresFit(np.zeros(0), float(np.linalg.norm(s)))
    cond = np.linalg.cond(A)
    deficient = not np.isfinite(cond) or cond > 1e10
    rcond = 1e-10 if deficient else None
    coef, *_ = np.linalg.lstsq(A, s, rcond=rcond)
    return LeastSquaresFit(coef, float(np.linalg.norm(s - A @ coef)), deficient)
