"""Closed-form constants of the planted-vs-null comparison and the spherical bound.

Everything here is a pure function of its arguments.  Logarithms are natural.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize
from scipy.special import entr

LOG2 = math.log(2.0)

# dense grid used to bracket the (at most two) local maxima of f_eta
_GRID_POINTS = 10_000
_GOLDEN_TOL = 1e-12


class VacuousBoundWarning(UserWarning):
    """The overlap loss is at least one, so the planted lower bound says nothing."""


@dataclass(frozen=True)
class ModelParams:
    eta: float
    beta: float
    gamma: float

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if not -1.0 < self.beta <= 0.0:
            raise ValueError(f"beta must lie in (-1, 0], got {self.beta}")
        if not self.gamma > 1.0:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")


@dataclass(frozen=True)
class AnalyticReport:
    params: ModelParams
    epsilon: float
    c_p: float
    c_p_corrected: float
    c_q: float
    delta: float
    threshold: float
    x_star: float
    sup_f: float
    vacuous: bool

    def to_dict(self) -> dict:
        return {
            "eta": self.params.eta,
            "beta": self.params.beta,
            "gamma": self.params.gamma,
            "epsilon": self.epsilon,
            "c_p": self.c_p,
            "c_p_corrected": self.c_p_corrected,
            "c_q": self.c_q,
            "delta": self.delta,
            "threshold": self.threshold,
            "x_star": self.x_star,
            "sup_f": self.sup_f,
            "vacuous": self.vacuous,
        }


@dataclass(frozen=True)
class SphericalBoundResult:
    value: float
    s_star: float
    converged: bool


def _check_unit_interval(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.any(~((arr >= 0.0) & (arr <= 1.0))):
        raise ValueError("argument must lie in [0, 1]")
    return arr


def binary_entropy(x):
    """Binary entropy in nats, with 0 log 0 = 0.  Accepts scalars or arrays."""
    arr = _check_unit_interval(x)
    out = entr(arr) + entr(1.0 - arr)
    return float(out) if out.ndim == 0 else out


def f_eta(eta: float, x):
    """H(x) + 2 eta x^2 - 2 eta x + log(eta)/2 + 1/2 - log 2.

    Its supremum over [0, 1] is exactly c_P - c_Q.
    """
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    arr = _check_unit_interval(x)
    out = (entr(arr) + entr(1.0 - arr)) + 2.0 * eta * arr * (arr - 1.0) + 0.5 * math.log(eta) + 0.5 - LOG2
    return float(out) if out.ndim == 0 else out


def x0(eta: float) -> float:
    """Inflection point (1 + sqrt(1 - 1/eta)) / 2 between the local min and max for eta > 1."""
    if not eta >= 1.0:
        raise ValueError(f"x0 is defined for eta >= 1, got {eta}")
    return 0.5 * (1.0 + math.sqrt(1.0 - 1.0 / eta))


def g_theta(theta: float) -> float:
    if not 0.0 <= theta < 1.0:
        raise ValueError(f"theta must lie in [0, 1), got {theta}")
    return 2.0 * theta / (1.0 - theta**2) - math.log((1.0 + theta) / (1.0 - theta))


def g_theta_derivative(theta: float) -> float:
    if not 0.0 <= theta < 1.0:
        raise ValueError(f"theta must lie in [0, 1), got {theta}")
    return 4.0 * theta**2 / (1.0 - theta**2) ** 2


def f_at_x0_derivative(eta: float) -> float:
    """Closed form of d/d eta f_eta(x0(eta)) for eta > 1."""
    if not eta > 1.0:
        raise ValueError(f"eta must exceed 1, got {eta}")
    theta = math.sqrt(1.0 - 1.0 / eta)
    return g_theta(theta) / (4.0 * eta**2 * theta)


def sup_f(eta: float) -> tuple[float, float]:
    """Global maximizer and maximum of f_eta on [0, 1].

    f_eta is symmetric about 1/2, so only [1/2, 1] is searched and the
    maximizer returned is the one at or above 1/2.
    """
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    grid = np.linspace(0.5, 1.0, _GRID_POINTS + 1)
    vals = f_eta(eta, grid)

    candidates = [(float(vals[0]), 0.5), (float(vals[-1]), 1.0)]
    # interior grid maxima, each refined inside its neighbouring cells
    interior = np.flatnonzero((vals[1:-1] >= vals[:-2]) & (vals[1:-1] >= vals[2:])) + 1
    neg = lambda t: -f_eta(eta, min(max(t, 0.0), 1.0))
    for k in interior:
        a, b, c = grid[k - 1], grid[k], grid[k + 1]
        if vals[k] > vals[k - 1] and vals[k] > vals[k + 1]:
            res = optimize.minimize_scalar(
                neg, bracket=(a, b, c), method="golden", options={"xtol": _GOLDEN_TOL}
            )
            candidates.append((-float(res.fun), float(res.x)))
        else:
            candidates.append((float(vals[k]), float(b)))
    # the left edge of the half grid can itself be a local max (eta <= 1)
    if vals[0] >= vals[1]:
        candidates.append((float(f_eta(eta, 0.5)), 0.5))

    value, x_star = max(candidates, key=lambda t: (t[0], t[1]))
    return x_star, value


def epsilon(beta: float, gamma: float) -> float:
    """Overlap loss sqrt(2(1 + beta)) / (sqrt(gamma) - 1) of the planted lower bound."""
    if beta < -1.0:
        raise ValueError(f"beta must be >= -1, got {beta}")
    if not gamma > 1.0:
        raise ValueError(f"gamma must exceed 1, got {gamma}")
    return math.sqrt(2.0 * (1.0 + beta)) / (math.sqrt(gamma) - 1.0)


def c_q(eta: float) -> float:
    return 0.5 * eta - 0.5 - 0.5 * math.log(eta)


def constants(params: ModelParams) -> AnalyticReport:
    eta = params.eta
    eps = epsilon(params.beta, params.gamma)
    x_star, sup_value = sup_f(eta)

    # planted constant evaluated from its own expression at the maximizer
    inner = float(binary_entropy(x_star)) + 2.0 * eta * x_star * x_star - 2.0 * eta * x_star
    cp = 0.5 * eta - LOG2 + inner
    cq = c_q(eta)

    vacuous = eps >= 1.0
    if vacuous:
        warnings.warn(
            f"epsilon={eps:.4g} >= 1: the planted lower bound is vacuous",
            VacuousBoundWarning,
            stacklevel=2,
        )
    return AnalyticReport(
        params=params,
        epsilon=eps,
        c_p=cp,
        c_p_corrected=cp - eps * eta,
        c_q=cq,
        delta=(cp - cq) / 6.0,
        threshold=0.5 * (cp + cq),
        x_star=x_star,
        sup_f=sup_value,
        vacuous=vacuous,
    )


def spherical_objective(s: float, eigenvalues: Sequence[float]) -> float:
    lam = np.asarray(eigenvalues, dtype=float)
    return s - 0.5 * (1.0 + LOG2) - np.sum(np.log(s - 0.5 * lam)) / (2.0 * lam.size)


def _bisect_offset(derivative, upper: float) -> tuple[float, bool]:
    """Root in (1e-12, upper) of an increasing function of the offset above lambda_max / 2."""
    lo = 1e-12
    if derivative(lo) >= 0.0:
        return lo, True
    try:
        root, info = optimize.bisect(
            derivative, lo, upper, xtol=1e-12, rtol=4 * np.finfo(float).eps, maxiter=400, full_output=True
        )
    except (ValueError, RuntimeError) as exc:
        raise RuntimeError(f"spherical bound bisection failed: {exc}") from exc
    if not info.converged:
        raise RuntimeError("spherical bound bisection did not converge")
    return root, True


def spherical_bound(eigenvalues: Sequence[float]) -> SphericalBoundResult:
    """inf over s > lambda_max / 2 of s - (1 + log 2)/2 - (1/2n) sum log(s - lambda_i / 2).

    The objective's derivative increases from -inf to 1, so the minimizer is
    the unique root, found by bisection on the offset s - lambda_max / 2.
    """
    lam = np.asarray(eigenvalues, dtype=float).ravel()
    if lam.size == 0:
        raise ValueError("need at least one eigenvalue")
    n = lam.size
    top = float(lam.max())
    gaps = 0.5 * (top - lam)

    def derivative(t):
        return 1.0 - np.sum(1.0 / (t + gaps)) / (2.0 * n)

    t_star, converged = _bisect_offset(derivative, n + float(np.abs(lam).max()) + 1.0)
    value = t_star + 0.5 * top - 0.5 * (1.0 + LOG2) - np.sum(np.log(t_star + gaps)) / (2.0 * n)
    return SphericalBoundResult(value=float(value), s_star=0.5 * top + t_star, converged=converged)


def projection_spherical_bound(eta: float, rho: float) -> SphericalBoundResult:
    """Spherical bound for eta times a projection of rank fraction rho.

    Objective: s - (1 + log 2)/2 - (rho/2) log(s - eta/2) - ((1 - rho)/2) log s.
    """
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    half = 0.5 * eta

    def derivative(t):
        return 1.0 - rho / (2.0 * t) - (1.0 - rho) / (2.0 * (t + half))

    t_star, converged = _bisect_offset(derivative, eta + 2.0)
    s = half + t_star
    value = s - 0.5 * (1.0 + LOG2) - 0.5 * rho * math.log(t_star) - 0.5 * (1.0 - rho) * math.log(s)
    return SphericalBoundResult(value=value, s_star=s, converged=converged)


def choose_gamma(eta: float, delta: float, max_k: int = 30) -> float:
    """Largest gamma on the grid 1 + 2^-k whose null spherical bound stays within c_Q + delta/2."""
    if not eta > 1.0:
        raise ValueError(f"eta must exceed 1, got {eta}")
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    target = c_q(eta) + 0.5 * delta
    chosen = None
    # walk upward from gamma = 1+ ; the bound grows with gamma
    for k in range(max_k, -1, -1):
        gamma = 1.0 + 2.0**-k
        rho = 1.0 - 1.0 / gamma
        if projection_spherical_bound(eta, rho).value <= target:
            chosen = gamma
        else:
            break
    if chosen is None:
        raise ValueError(f"no gamma in (1, 2] meets the null bound for eta={eta}, delta={delta}")
    return chosen
