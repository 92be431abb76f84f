"""Brute-force oracle for the Ising partition function and related sums.

Configurations are indexed by bitmask: bit i set means x_i = -1, so index 0 is
the all-plus configuration.  The energy of x is the exponent (1/2) x^T J x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.special import gammaln, logsumexp

from .instances import CouplingMatrix

MAX_EXACT_N = 24
MAX_TABLE_N = 20

LOG2 = math.log(2.0)


@dataclass(frozen=True)
class ExactSummary:
    n: int
    log_Z: float
    log_Zhat: float
    pressure: float

    def to_dict(self) -> dict:
        return {"n": self.n, "log_Z": self.log_Z, "log_Zhat": self.log_Zhat, "pressure": self.pressure}


@dataclass(frozen=True)
class GibbsTable:
    probabilities: np.ndarray


@dataclass(frozen=True)
class OverlapProfile:
    reference: np.ndarray
    log_sums: np.ndarray


def _as_array(J) -> np.ndarray:
    if isinstance(J, CouplingMatrix):
        return np.ascontiguousarray(J.J, dtype=np.float64)
    J = np.ascontiguousarray(J, dtype=np.float64)
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise ValueError(f"coupling matrix must be square, got shape {J.shape}")
    return J


def _check_size(n: int, cap: int) -> None:
    if n < 1:
        raise ValueError("need n >= 1")
    if n > cap:
        raise ValueError(f"n={n} exceeds the enumeration cap {cap}")


def configurations(n: int) -> np.ndarray:
    """All 2^n configurations as rows of +-1, in bitmask order."""
    idx = np.arange(1 << n, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(n)) & 1
    return (1 - 2 * bits).astype(np.int8)


def energy(J, x) -> float:
    x = np.asarray(x, dtype=float)
    return 0.5 * float(x @ _as_array(J) @ x)


@numba.njit(cache=True)
def _gray_walk_init(J):
    n = J.shape[0]
    x = np.ones(n)
    # off-diagonal local fields h_i = sum_{j != i} J_ij x_j
    h = np.empty(n)
    e = 0.0
    for i in range(n):
        s = 0.0
        for j in range(n):
            e += J[i, j]
            if j != i:
                s += J[i, j]
        h[i] = s
    return x, h, 0.5 * e


@numba.njit(cache=True)
def _gray_flip(J, x, h, i):
    """Flip site i; returns the energy change and updates the fields in place."""
    xi = x[i]
    de = -2.0 * xi * h[i]
    x[i] = -xi
    n = J.shape[0]
    for j in range(n):
        if j != i:
            h[j] -= 2.0 * xi * J[j, i]
    return de


@numba.njit(cache=True)
def _trailing_zeros(k):
    i = 0
    while (k & 1) == 0:
        k >>= 1
        i += 1
    return i


@numba.njit(cache=True)
def _log_partition_gray(J):
    n = J.shape[0]
    x, h, e = _gray_walk_init(J)
    m = e
    s = 1.0
    for k in range(1, 1 << n):
        e += _gray_flip(J, x, h, _trailing_zeros(k))
        if e > m:
            s = s * math.exp(m - e) + 1.0
            m = e
        else:
            s += math.exp(e - m)
    return m + math.log(s)


@numba.njit(cache=True)
def _energies_gray(J):
    n = J.shape[0]
    out = np.empty(1 << n)
    x, h, e = _gray_walk_init(J)
    out[0] = e
    for k in range(1, 1 << n):
        e += _gray_flip(J, x, h, _trailing_zeros(k))
        out[k ^ (k >> 1)] = e
    return out


@numba.njit(cache=True)
def _overlap_gray(J, ref):
    n = J.shape[0]
    m = np.full(n + 1, -np.inf)
    s = np.zeros(n + 1)
    x, h, e = _gray_walk_init(J)
    agree = 0
    for i in range(n):
        if ref[i] > 0:
            agree += 1
    for k in range(1 << n):
        if k > 0:
            i = _trailing_zeros(k)
            if x[i] == ref[i]:
                agree -= 1
            else:
                agree += 1
            e += _gray_flip(J, x, h, i)
        if e > m[agree]:
            s[agree] = s[agree] * math.exp(m[agree] - e) + 1.0
            m[agree] = e
        else:
            s[agree] += math.exp(e - m[agree])
    out = np.empty(n + 1)
    for r in range(n + 1):
        out[r] = m[r] + math.log(s[r]) if s[r] > 0 else -np.inf
    return out


def log_partition(J) -> float:
    """log Z by a Gray-code walk with O(n) field updates per step."""
    A = _as_array(J)
    _check_size(A.shape[0], MAX_EXACT_N)
    return float(_log_partition_gray(A))


def log_partition_naive(J) -> float:
    """log Z by re-evaluating every energy from scratch (test oracle, small n)."""
    A = _as_array(J)
    X = configurations(A.shape[0]).astype(float)
    return float(logsumexp(0.5 * np.einsum("ki,ij,kj->k", X, A, X)))


def all_energies(J) -> np.ndarray:
    A = _as_array(J)
    _check_size(A.shape[0], MAX_TABLE_N)
    return _energies_gray(A)


def exact_summary(J) -> ExactSummary:
    A = _as_array(J)
    n = A.shape[0]
    log_Z = log_partition(A)
    log_Zhat = log_Z - n * LOG2
    return ExactSummary(n=n, log_Z=log_Z, log_Zhat=log_Zhat, pressure=log_Zhat / n)


def pressure(J) -> float:
    return exact_summary(J).pressure


def gibbs_table(J) -> GibbsTable:
    e = all_energies(J)
    p = np.exp(e - logsumexp(e))
    return GibbsTable(probabilities=p / p.sum())


def overlap_profile(J, reference) -> OverlapProfile:
    """Per-overlap log sums: entry r collects configurations agreeing with ``reference`` in r sites."""
    A = _as_array(J)
    n = A.shape[0]
    _check_size(n, MAX_EXACT_N)
    ref = np.asarray(reference)
    if ref.shape != (n,):
        raise ValueError(f"reference must have length {n}, got shape {ref.shape}")
    if not np.all(np.abs(ref) == 1):
        raise ValueError("reference must be a +-1 vector")
    return OverlapProfile(reference=ref.copy(), log_sums=_overlap_gray(A, ref.astype(np.float64)))


def overlap_lower_bound(n: int, eta: float, eps: float) -> float:
    """Pre-asymptotic planted lower bound on p(eta P) valid when |Px|^2 >= (1 - eps^2) n.

    -log 2 - eps eta + (1/n) log sum_r C(n, r) exp(eta (2r - n)^2 / (2n)).
    """
    r = np.arange(n + 1)
    log_binom = gammaln(n + 1) - gammaln(r + 1) - gammaln(n - r + 1)
    return -LOG2 - eps * eta + float(logsumexp(log_binom + eta * (2 * r - n) ** 2 / (2.0 * n))) / n


def tv_distance(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    for name, t in (("a", a), ("b", b)):
        if abs(t.sum() - 1.0) > 1e-6:
            raise ValueError(f"table {name} does not sum to 1")
    return 0.5 * float(np.abs(a - b).sum())


def spherical_pressure_mc(J, samples: int, seed: int, batches: int = 20) -> tuple[float, float]:
    """Monte Carlo estimate of the spherical pressure and its batch standard error.

    Uses the eigenvalue form: squared coordinates of a uniform point on the
    radius-sqrt(n) sphere are n times Dirichlet(1/2, ..., 1/2) weights, drawn as
    normalized squared Gaussians.
    """
    if samples < 1000:
        raise ValueError("need at least 1000 samples")
    if samples % batches:
        raise ValueError("samples must be a multiple of the batch count")
    lam = J.eigenvalues if isinstance(J, CouplingMatrix) else np.linalg.eigvalsh(_as_array(J))
    lam = np.asarray(lam, dtype=float)
    n = lam.size
    lo = float(lam.min())
    rng = np.random.default_rng(seed)
    g2 = rng.standard_normal((samples, n)) ** 2
    w = n * g2 / g2.sum(axis=1, keepdims=True)
    # shift by lambda_min so that J = cI is reproduced without rounding
    expo = 0.5 * lo * n + 0.5 * (w @ (lam - lo))
    estimate = (float(logsumexp(expo)) - math.log(samples)) / n
    per_batch = expo.reshape(batches, -1)
    batch_est = (logsumexp(per_batch, axis=1) - math.log(per_batch.shape[1])) / n
    stderr = float(np.std(batch_est, ddof=1) / math.sqrt(batches))
    return estimate, stderr
