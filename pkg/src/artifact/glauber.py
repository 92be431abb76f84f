"""Single-site heat-bath (Glauber) dynamics for the Ising Gibbs measure.

Randomness is drawn in blocks from a numpy Generator and handed to a compiled
update loop, so a chain is fully determined by its seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, NamedTuple

import numba
import numpy as np
import scipy.sparse
from scipy.special import expit

from .instances import CouplingMatrix
from .ising_exact import MAX_TABLE_N, _as_array, configurations, gibbs_table, tv_distance

Scan = Literal["random", "systematic"]

FIELD_REFRESH_SWEEPS = 1000
MAX_KERNEL_N = 12
_BLOCK_UPDATES = 1 << 20


def conditional_prob_plus(h):
    """P(x_i = +1 | rest) = 1 / (1 + exp(-2 h_i)); the diagonal J_ii never enters."""
    return expit(2.0 * np.asarray(h, dtype=float)) if np.ndim(h) else float(expit(2.0 * h))


def local_fields(J, x) -> np.ndarray:
    A = _as_array(J)
    x = np.asarray(x, dtype=float)
    return A @ x - np.diag(A) * x


@dataclass
class GlauberState:
    x: np.ndarray
    fields: np.ndarray
    rng: np.random.Generator
    sweep_count: int = 0

    @classmethod
    def start(cls, J, seed: int | np.random.Generator, x=None) -> "GlauberState":
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        A = _as_array(J)
        if x is None:
            x = rng.choice(np.array([-1.0, 1.0]), size=A.shape[0])
        x = np.array(x, dtype=np.float64)
        return cls(x=x, fields=local_fields(A, x), rng=rng)

    @property
    def n(self) -> int:
        return self.x.size

    def refresh_fields(self, J) -> None:
        self.fields = local_fields(J, self.x)

    def bitmask(self) -> int:
        return int(np.dot((self.x < 0).astype(np.int64), 1 << np.arange(self.n, dtype=np.int64)))


@numba.njit(cache=True)
def _heat_bath_updates(J, x, h, sites, uniforms):
    n = J.shape[0]
    for t in range(sites.size):
        i = sites[t]
        new = 1.0 if uniforms[t] < 1.0 / (1.0 + math.exp(-2.0 * h[i])) else -1.0
        if new != x[i]:
            d = new - x[i]
            x[i] = new
            for j in range(n):
                if j != i:
                    h[j] += J[j, i] * d


@numba.njit(cache=True)
def _record_states(J, x, h, sites, uniforms, updates_per_record, out):
    """Run the updates in consecutive groups, copying x into ``out`` after each group."""
    n = J.shape[0]
    for r in range(out.shape[0]):
        base = r * updates_per_record
        for t in range(base, base + updates_per_record):
            i = sites[t]
            new = 1.0 if uniforms[t] < 1.0 / (1.0 + math.exp(-2.0 * h[i])) else -1.0
            if new != x[i]:
                d = new - x[i]
                x[i] = new
                for j in range(n):
                    if j != i:
                        h[j] += J[j, i] * d
        for i in range(n):
            out[r, i] = x[i]


def _draw_sites(rng: np.random.Generator, n: int, sweeps: int, scan: Scan) -> np.ndarray:
    if scan == "random":
        return rng.integers(0, n, size=sweeps * n, dtype=np.int64)
    if scan == "systematic":
        return np.tile(np.arange(n, dtype=np.int64), sweeps)
    raise ValueError(f"unknown scan order {scan!r}")


def _advance_count(state: GlauberState, J: np.ndarray, sweeps: int) -> None:
    before = state.sweep_count // FIELD_REFRESH_SWEEPS
    state.sweep_count += sweeps
    if state.sweep_count // FIELD_REFRESH_SWEEPS != before:
        state.refresh_fields(J)


def run_sweeps(state: GlauberState, J, sweeps: int, scan: Scan = "random") -> GlauberState:
    """Advance ``state`` in place by ``sweeps`` sweeps of n heat-bath updates each."""
    A = _as_array(J)
    n = state.n
    remaining = sweeps
    block = max(1, _BLOCK_UPDATES // n)
    while remaining > 0:
        k = min(block, remaining, FIELD_REFRESH_SWEEPS - state.sweep_count % FIELD_REFRESH_SWEEPS)
        sites = _draw_sites(state.rng, n, k, scan)
        uniforms = state.rng.random(sites.size)
        _heat_bath_updates(A, state.x, state.fields, sites, uniforms)
        _advance_count(state, A, k)
        remaining -= k
    return state


def sweep(state: GlauberState, J, scan: Scan = "random") -> GlauberState:
    """One sweep: n single-site heat-bath updates."""
    return run_sweeps(state, J, 1, scan)


def record(state: GlauberState, J, n_records: int, spacing: int, scan: Scan = "random") -> np.ndarray:
    """Collect ``n_records`` states, ``spacing`` sweeps apart, continuing from ``state``."""
    A = _as_array(J)
    n = state.n
    out = np.empty((n_records, n), dtype=np.int8)
    per_block = max(1, min(FIELD_REFRESH_SWEEPS // spacing, _BLOCK_UPDATES // (spacing * n)))
    done = 0
    while done < n_records:
        k = min(per_block, n_records - done)
        sites = _draw_sites(state.rng, n, k * spacing, scan)
        uniforms = state.rng.random(sites.size)
        _record_states(A, state.x, state.fields, sites, uniforms, spacing * n, out[done : done + k])
        _advance_count(state, A, k * spacing)
        done += k
    return out


def sample(J, sweeps: int, seed: int, scan: Scan = "random") -> np.ndarray:
    """State after ``sweeps`` sweeps from a uniformly random start."""
    if sweeps < 1:
        raise ValueError("sweeps must be at least 1")
    state = GlauberState.start(J, seed)
    run_sweeps(state, J, sweeps, scan)
    return state.x.astype(np.int8)


def bitmasks(states: np.ndarray) -> np.ndarray:
    n = states.shape[1]
    return (states < 0).astype(np.int64) @ (1 << np.arange(n, dtype=np.int64))


def empirical_table(
    J, n_samples: int, seed: int, burn_in: int | None = None, spacing: int | None = None
) -> np.ndarray:
    """Histogram over configurations from one long chain (burn-in 10n sweeps, spacing n sweeps)."""
    A = _as_array(J)
    n = A.shape[0]
    if n > MAX_TABLE_N:
        raise ValueError(f"n={n} exceeds the table cap {MAX_TABLE_N}")
    burn_in = 10 * n if burn_in is None else burn_in
    spacing = n if spacing is None else spacing
    state = GlauberState.start(A, seed)
    if burn_in:
        run_sweeps(state, A, burn_in)
    counts = np.zeros(1 << n, dtype=np.int64)
    chunk = 100_000
    done = 0
    while done < n_samples:
        k = min(chunk, n_samples - done)
        counts += np.bincount(bitmasks(record(state, A, k, spacing)), minlength=1 << n)
        done += k
    return counts / n_samples


def transition_kernel(J) -> scipy.sparse.csr_matrix:
    """Random-scan single-update kernel on all 2^n configurations (n + 1 nonzeros per row)."""
    A = _as_array(J)
    n = A.shape[0]
    if n > MAX_KERNEL_N:
        raise ValueError(f"n={n} exceeds the kernel cap {MAX_KERNEL_N}")
    X = configurations(n).astype(float)
    H = X @ A.T - X * np.diag(A)
    p_plus = expit(2.0 * H)
    # probability of moving site i to the opposite sign, after picking it
    p_flip = np.where(X > 0, 1.0 - p_plus, p_plus) / n
    idx = np.arange(1 << n)
    rows = np.repeat(idx, n)
    cols = (idx[:, None] ^ (1 << np.arange(n))).ravel()
    stay = 1.0 - p_flip.sum(axis=1)
    K = scipy.sparse.csr_matrix(
        (np.concatenate([p_flip.ravel(), stay]), (np.concatenate([rows, idx]), np.concatenate([cols, idx]))),
        shape=(1 << n, 1 << n),
    )
    return K


class KernelCheck(NamedTuple):
    stationarity: float
    detailed_balance: float


def exact_kernel_stationarity(J) -> KernelCheck:
    """max |mu K - mu| and max |mu(x) K(x,y) - mu(y) K(y,x)| for the exact kernel."""
    K = transition_kernel(J)
    mu = gibbs_table(J).probabilities
    stat = float(np.max(np.abs(K.T @ mu - mu)))
    flow = scipy.sparse.diags(mu) @ K
    db = abs(flow - flow.T)
    return KernelCheck(stationarity=stat, detailed_balance=float(db.max()) if db.nnz else 0.0)


@dataclass(frozen=True)
class MixingReport:
    n: int
    eta_width: float
    sweeps: int
    tv_estimate: float
    method: str

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "eta_width": self.eta_width,
            "sweeps": self.sweeps,
            "tv_estimate": self.tv_estimate,
            "method": self.method,
        }


def mixing_report(
    J: CouplingMatrix,
    sweeps: int,
    method: str = "exact-kernel",
    n_samples: int = 100_000,
    seed: int = 0,
) -> MixingReport:
    """Distance to the Gibbs measure after ``sweeps`` sweeps.

    ``exact-kernel`` propagates the all-plus start through the exact kernel
    (no sampling noise); ``empirical-histogram`` runs independent chains from
    the same start and histograms their endpoints.
    """
    if not isinstance(J, CouplingMatrix):
        J = CouplingMatrix.from_array(J)
    n = J.n
    mu = gibbs_table(J).probabilities
    if method == "exact-kernel":
        K = transition_kernel(J)
        dist = np.zeros(1 << n)
        dist[0] = 1.0
        for _ in range(sweeps * n):
            dist = K.T @ dist
        tv = tv_distance(dist / dist.sum(), mu)
    elif method == "empirical-histogram":
        root = np.random.SeedSequence(seed)
        ends = np.empty((n_samples, n), dtype=np.int8)
        for c, child in enumerate(root.spawn(n_samples)):
            state = GlauberState.start(J.J, np.random.default_rng(child), x=np.ones(n))
            run_sweeps(state, J.J, sweeps)
            ends[c] = state.x
        tv = tv_distance(np.bincount(bitmasks(ends), minlength=1 << n) / n_samples, mu)
    else:
        raise ValueError(f"unknown method {method!r}")
    return MixingReport(n=n, eta_width=J.spectral_width, sweeps=sweeps, tv_estimate=min(max(tv, 0.0), 1.0), method=method)
