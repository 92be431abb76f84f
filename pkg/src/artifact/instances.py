"""Null and planted spiked Wishart samplers, the projection construction, and file formats."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.linalg

# stream tags keep the spike draw and the per-vector Gaussian draws on disjoint substreams
_SPIKE_STREAM = 0
_VECTOR_STREAM = 1


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for (seed, key...); order of creation does not matter."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key)))


def derive_seed(seed: int, *key: int) -> int:
    """64-bit child seed for (seed, key...)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class CouplingMatrix:
    """Symmetric coupling matrix with eigenvalues cached in decreasing order."""

    J: np.ndarray
    eigenvalues: np.ndarray = field(repr=False)

    @classmethod
    def from_array(cls, J, sym_tol: float = 1e-10) -> "CouplingMatrix":
        J = np.array(J, dtype=float)
        if J.ndim != 2 or J.shape[0] != J.shape[1]:
            raise ValueError(f"coupling matrix must be square, got shape {J.shape}")
        if J.size and np.max(np.abs(J - J.T)) > sym_tol * max(1.0, float(np.max(np.abs(J)))):
            raise ValueError("coupling matrix is not symmetric")
        J = 0.5 * (J + J.T)
        J.setflags(write=False)
        eig = np.linalg.eigvalsh(J)[::-1].copy()
        eig.setflags(write=False)
        return cls(J=J, eigenvalues=eig)

    @property
    def n(self) -> int:
        return self.J.shape[0]

    @property
    def spectral_width(self) -> float:
        return float(self.eigenvalues[0] - self.eigenvalues[-1])

    def scaled(self, c: float) -> "CouplingMatrix":
        return CouplingMatrix.from_array(c * self.J)


@dataclass(frozen=True)
class ProjectionMatrix:
    P: np.ndarray
    rank: int
    tol: float


@dataclass(frozen=True)
class ObservedSample:
    """What a hypothesis test is allowed to see: the observations, never the spike."""

    n: int
    ys: np.ndarray
    beta: float
    gamma: float
    seed: int

    @property
    def N(self) -> int:
        return self.ys.shape[0]


@dataclass(frozen=True)
class SpikedInstance:
    n: int
    ys: np.ndarray  # shape (N, n)
    beta: float
    gamma: float
    seed: int
    spike: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.ys.ndim != 2 or self.ys.shape[1] != self.n:
            raise ValueError(f"ys must have shape (N, {self.n}), got {self.ys.shape}")
        if self.ys.shape[0] != num_samples(self.n, self.gamma):
            raise ValueError("N must equal ceil(n / gamma)")
        if self.spike is not None:
            if self.spike.shape != (self.n,) or not np.all(np.abs(self.spike) == 1):
                raise ValueError("spike must be a +-1 vector of length n")

    @property
    def N(self) -> int:
        return self.ys.shape[0]

    @property
    def planted(self) -> bool:
        return self.spike is not None

    def observed(self) -> ObservedSample:
        return ObservedSample(n=self.n, ys=self.ys, beta=self.beta, gamma=self.gamma, seed=self.seed)

    def without_spike(self) -> "SpikedInstance":
        return replace(self, spike=None)

    def to_dict(self, include_spike: bool = True) -> dict:
        spike = None
        if include_spike and self.spike is not None:
            spike = [int(v) for v in self.spike]
        return {
            "n": self.n,
            "N": self.N,
            "beta": self.beta,
            "gamma": self.gamma,
            "seed": self.seed,
            "ys": self.ys.tolist(),
            "spike": spike,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpikedInstance":
        ys = np.asarray(d["ys"], dtype=float).reshape(-1, int(d["n"]))
        if ys.shape[0] != int(d["N"]):
            raise ValueError("N does not match the number of stored vectors")
        spike = d.get("spike")
        return cls(
            n=int(d["n"]),
            ys=ys,
            beta=float(d["beta"]),
            gamma=float(d["gamma"]),
            seed=int(d["seed"]),
            spike=None if spike is None else np.asarray(spike, dtype=np.int8),
        )


def num_samples(n: int, gamma: float) -> int:
    return math.ceil(n / gamma)


def _check(n: int, gamma: float) -> None:
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    if not gamma > 1.0:
        raise ValueError(f"gamma must exceed 1, got {gamma}")


def _gaussian_rows(n: int, N: int, seed: int) -> np.ndarray:
    return np.stack([substream(seed, _VECTOR_STREAM, i).standard_normal(n) for i in range(N)])


def sample_null(n: int, gamma: float, seed: int) -> SpikedInstance:
    _check(n, gamma)
    ys = _gaussian_rows(n, num_samples(n, gamma), seed)
    return SpikedInstance(n=n, ys=ys, beta=0.0, gamma=float(gamma), seed=int(seed))


def sample_planted(n: int, beta: float, gamma: float, seed: int) -> SpikedInstance:
    """Draw x uniform on the hypercube, then y_i ~ N(0, I + (beta/n) x x^T).

    y_i = z + a <x, z> x with a = (sqrt(1 + beta) - 1)/n, which has exactly the
    required covariance.  With the same seed the Gaussian draws z coincide with
    those of :func:`sample_null`.
    """
    _check(n, gamma)
    if not -1.0 < beta <= 0.0:
        raise ValueError(f"beta must lie in (-1, 0], got {beta}")
    x = substream(seed, _SPIKE_STREAM).choice(np.array([-1, 1], dtype=np.int8), size=n)
    z = _gaussian_rows(n, num_samples(n, gamma), seed)
    a = (math.sqrt(1.0 + beta) - 1.0) / n
    xf = x.astype(float)
    ys = z + a * np.outer(z @ xf, xf)
    return SpikedInstance(n=n, ys=ys, beta=float(beta), gamma=float(gamma), seed=int(seed), spike=x)


def proj(ys, tol: float = 1e-10) -> ProjectionMatrix:
    """Orthogonal projection onto the orthogonal complement of span(ys).

    A column-pivoted QR of the stacked vectors gives the basis; directions whose
    pivot falls below ``tol`` times the largest are treated as null.
    """
    Y = np.atleast_2d(np.asarray(ys, dtype=float))
    N, n = Y.shape
    if not 1 <= N < n:
        raise ValueError(f"need 1 <= N < n, got N={N}, n={n}")
    Q, R, _ = scipy.linalg.qr(Y.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        raise ValueError("all observation vectors are zero")
    span_rank = int(np.sum(diag > tol * diag[0]))
    B = Q[:, :span_rank]
    P = np.eye(n) - B @ B.T
    P = 0.5 * (P + P.T)
    P.setflags(write=False)
    return ProjectionMatrix(P=P, rank=n - span_rank, tol=tol)


def coupling_from_instance(inst: SpikedInstance | ObservedSample, eta: float, tol: float = 1e-10) -> CouplingMatrix:
    """J = eta * proj(ys)."""
    if eta < 0:
        raise ValueError(f"eta must be nonnegative, got {eta}")
    return CouplingMatrix.from_array(eta * proj(inst.ys, tol).P)


def haar_projection(n: int, rank: int, rng: np.random.Generator) -> np.ndarray:
    """n x rank matrix with orthonormal columns, Haar distributed on the Stiefel manifold."""
    G = rng.standard_normal((n, rank))
    Q, R = np.linalg.qr(G)
    # sign fix makes the QR factor exactly Haar
    return Q * np.sign(np.diag(R))


def read_matrix(path) -> CouplingMatrix:
    """Matrix text format: first line n, then n whitespace-separated rows."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty matrix file")
    n = int(lines[0].strip())
    if len(lines) - 1 != n:
        raise ValueError(f"{path}: expected {n} rows, found {len(lines) - 1}")
    rows = [np.array(ln.split(), dtype=float) for ln in lines[1:]]
    if any(r.size != n for r in rows):
        raise ValueError(f"{path}: every row must have {n} entries")
    return CouplingMatrix.from_array(np.vstack(rows) if n else np.zeros((0, 0)))


def write_matrix(path, J) -> None:
    J = np.asarray(J.J if isinstance(J, CouplingMatrix) else J, dtype=float)
    body = "\n".join(" ".join(repr(float(v)) for v in row) for row in J)
    Path(path).write_text(f"{J.shape[0]}\n{body}\n")


def read_instance(path) -> SpikedInstance:
    return SpikedInstance.from_dict(json.loads(Path(path).read_text()))


def write_instance(path, inst: SpikedInstance, include_spike: bool = True) -> None:
    Path(path).write_text(json.dumps(inst.to_dict(include_spike=include_spike)) + "\n")
