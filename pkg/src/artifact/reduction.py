"""The hypothesis test built from a free-energy approximator, and planted-vs-null experiments."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal, NamedTuple, Sequence

import numpy as np
from scipy.stats import rankdata

from . import analytic
from .analytic import AnalyticReport, ModelParams
from .annealing import default_schedule, estimate_log_Zhat
from .instances import (
    ObservedSample,
    SpikedInstance,
    coupling_from_instance,
    derive_seed,
    proj,
    sample_null,
    sample_planted,
)
from .ising_exact import MAX_EXACT_N, exact_summary

Approximator = Literal["exact-oracle", "annealing"]
APPROXIMATORS = ("exact-oracle", "annealing")

_ARM_CODES = {"planted": 1, "null": 0}
_TEST_STREAM = 2


@dataclass(frozen=True)
class TestOutcome:
    statistic: float
    verdict: str
    threshold_used: float
    approximator: str
    stderr: float = 0.0

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "verdict": self.verdict,
            "threshold_used": self.threshold_used,
            "approximator": self.approximator,
            "stderr": self.stderr,
        }


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    arm: str
    statistic: float
    verdict: str
    bbp_baseline: float


@dataclass(frozen=True)
class ExperimentSummary:
    params: ModelParams
    n: int
    trials: int
    approximator: str
    mean_p_planted: float
    mean_p_null: float
    std_planted: float
    std_null: float
    separation_z: float
    auc: float
    threshold: float
    planted_called_p: float
    null_called_p: float
    records: tuple[TrialRecord, ...] = ()

    def to_dict(self) -> dict:
        return {
            "eta": self.params.eta,
            "beta": self.params.beta,
            "gamma": self.params.gamma,
            "n": self.n,
            "trials": self.trials,
            "approximator": self.approximator,
            "mean_p_planted": self.mean_p_planted,
            "mean_p_null": self.mean_p_null,
            "std_planted": self.std_planted,
            "std_null": self.std_null,
            "separation_z": self.separation_z,
            "auc": self.auc,
            "threshold": self.threshold,
            "planted_called_p": self.planted_called_p,
            "null_called_p": self.null_called_p,
        }


class PredictedBounds(NamedTuple):
    lower_planted: float
    upper_null: float
    vacuous: bool


def _observed(inst: SpikedInstance | ObservedSample) -> ObservedSample:
    return inst.observed() if isinstance(inst, SpikedInstance) else inst


def estimate_pressure(
    inst: SpikedInstance | ObservedSample,
    eta: float,
    approximator: Approximator = "exact-oracle",
    seed: int = 0,
    target_error: float = 0.05,
) -> tuple[float, float]:
    """Pressure of eta * proj(ys) and its standard error (0 for the exact oracle)."""
    obs = _observed(inst)
    J = coupling_from_instance(obs, eta)
    if approximator == "exact-oracle":
        if obs.n > MAX_EXACT_N:
            raise ValueError(f"exact oracle is limited to n <= {MAX_EXACT_N}, got {obs.n}")
        return exact_summary(J.J).pressure, 0.0
    if approximator == "annealing":
        est = estimate_log_Zhat(J.J, default_schedule(J.J, target_error), seed)
        # F / n - log 2 with F = log Zhat + n log 2
        return est.log_Z(obs.n) / obs.n - math.log(2.0), est.stderr / obs.n
    raise ValueError(f"unknown approximator {approximator!r}")


def run_test(
    inst: SpikedInstance | ObservedSample,
    eta: float,
    report: AnalyticReport,
    approximator: Approximator = "exact-oracle",
    seed: int = 0,
) -> TestOutcome:
    """Call ``p`` when the estimated pressure of eta * proj(ys) exceeds the report's threshold."""
    stat, se = estimate_pressure(_observed(inst), eta, approximator, seed)
    return TestOutcome(
        statistic=stat,
        verdict="p" if stat > report.threshold else "q",
        threshold_used=report.threshold,
        approximator=approximator,
        stderr=se,
    )


def bbp_baseline(obs: ObservedSample) -> float:
    """Smallest eigenvalue of the N x N Gram matrix Y Y^T / n (spectral baseline, spike-free)."""
    Y = obs.ys
    return float(np.linalg.eigvalsh(Y @ Y.T / obs.n)[0])


def auc_score(planted: Sequence[float], null: Sequence[float]) -> float:
    """P(planted statistic > null statistic) with ties counted one half."""
    a = np.asarray(planted, dtype=float)
    b = np.asarray(null, dtype=float)
    ranks = rankdata(np.concatenate([a, b]))
    u = ranks[: a.size].sum() - a.size * (a.size + 1) / 2.0
    return float(u / (a.size * b.size))


def separation_z(planted: Sequence[float], null: Sequence[float]) -> float:
    a = np.asarray(planted, dtype=float)
    b = np.asarray(null, dtype=float)
    se = math.sqrt(np.var(a, ddof=1) / a.size + np.var(b, ddof=1) / b.size)
    diff = float(a.mean() - b.mean())
    if se == 0.0:
        return 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
    return diff / se


def _quiet_constants(params: ModelParams) -> AnalyticReport:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", analytic.VacuousBoundWarning)
        return analytic.constants(params)


def trial_seed(seed: int, trial: int, arm: str) -> int:
    return derive_seed(seed, trial, _ARM_CODES[arm])


def run_experiment(
    n: int,
    trials: int,
    params: ModelParams,
    approximator: Approximator = "exact-oracle",
    seed: int = 0,
) -> ExperimentSummary:
    """Run the test on ``trials`` planted and ``trials`` null instances with independent sub-seeds."""
    if trials < 10:
        raise ValueError("need at least 10 trials")
    if approximator not in APPROXIMATORS:
        raise ValueError(f"unknown approximator {approximator!r}")
    report = _quiet_constants(params)
    records = []
    stats = {"planted": [], "null": []}
    for i in range(trials):
        for arm in ("planted", "null"):
            s = trial_seed(seed, i, arm)
            if arm == "planted":
                inst = sample_planted(n, params.beta, params.gamma, s)
            else:
                inst = sample_null(n, params.gamma, s)
            obs = inst.observed()
            out = run_test(obs, params.eta, report, approximator, seed=derive_seed(s, _TEST_STREAM))
            stats[arm].append(out.statistic)
            records.append(TrialRecord(i, arm, out.statistic, out.verdict, bbp_baseline(obs)))
    a = np.asarray(stats["planted"])
    b = np.asarray(stats["null"])
    return ExperimentSummary(
        params=params,
        n=n,
        trials=trials,
        approximator=approximator,
        mean_p_planted=float(a.mean()),
        mean_p_null=float(b.mean()),
        std_planted=float(a.std(ddof=1)),
        std_null=float(b.std(ddof=1)),
        separation_z=separation_z(a, b),
        auc=auc_score(a, b),
        threshold=report.threshold,
        planted_called_p=float(np.mean(a > report.threshold)),
        null_called_p=float(np.mean(b > report.threshold)),
        records=tuple(records),
    )


def gamma_sweep(
    n: int,
    trials: int,
    eta: float,
    beta: float,
    gammas: Sequence[float],
    approximator: Approximator = "exact-oracle",
    seed: int = 0,
) -> list[ExperimentSummary]:
    """Same experiment across aspect ratios; separation should fade as gamma grows."""
    return [run_experiment(n, trials, ModelParams(eta, beta, g), approximator, seed) for g in gammas]


def predicted_bounds(params: ModelParams, epsilon: float | None = None) -> PredictedBounds:
    """Asymptotic planted lower bound c_P - eps*eta and null upper bound c_Q (o(1), delta set to 0).

    ``epsilon`` overrides the value implied by (beta, gamma), e.g. 0 for the beta -> -1 limit.
    """
    report = _quiet_constants(params)
    eps = report.epsilon if epsilon is None else float(epsilon)
    return PredictedBounds(
        lower_planted=report.c_p - eps * params.eta,
        upper_null=report.c_q,
        vacuous=eps >= 1.0,
    )


def overlap_retention(inst: SpikedInstance) -> float:
    """|P x|^2 / n for a planted instance (verification only; reads the spike)."""
    if inst.spike is None:
        raise ValueError("instance has no spike")
    P = proj(inst.ys).P
    x = inst.spike.astype(float)
    return float(x @ P @ x) / inst.n
