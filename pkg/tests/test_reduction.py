import dataclasses
import math
import warnings

import numpy as np
import pytest
from scipy.stats import special_ortho_group

from artifact import analytic, instances, reduction
from artifact.analytic import ModelParams


@pytest.fixture
def report():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", analytic.VacuousBoundWarning)
        return analytic.constants(ModelParams(1.2, -0.9, 2.0))


def test_eta_zero_statistic(report):
    inst = instances.sample_null(10, 2.0, 0)
    out = reduction.run_test(inst, 0.0, report)
    assert out.statistic == 0.0
    assert report.threshold > 0
    assert out.verdict == "q"


def test_verdict_matches_threshold(report):
    for s in range(5):
        out = reduction.run_test(instances.sample_planted(10, -0.9, 2.0, s), 1.2, report)
        assert (out.verdict == "p") == (out.statistic > out.threshold_used)
        assert out.approximator == "exact-oracle"


def test_spike_never_used(report):
    inst = instances.sample_planted(12, -0.9, 2.0, 3)
    a = reduction.run_test(inst, 1.2, report)
    b = reduction.run_test(dataclasses.replace(inst, spike=-inst.spike), 1.2, report)
    c = reduction.run_test(inst.observed(), 1.2, report)
    assert a == b == c


def test_signed_permutation_invariance(report):
    # the hypercube is preserved by signed permutations, so the statistic is too
    inst = instances.sample_null(10, 2.0, 4)
    rng = np.random.default_rng(1)
    Q = np.eye(10)[rng.permutation(10)] * rng.choice([-1.0, 1.0], size=10)
    moved = dataclasses.replace(inst.observed(), ys=inst.ys @ Q.T)
    a = reduction.run_test(inst, 1.2, report).statistic
    b = reduction.run_test(moved, 1.2, report).statistic
    assert a == pytest.approx(b, abs=1e-10)


def test_generic_rotation_changes_only_ising_pressure(report):
    # the spherical pressure sees only the spectrum; the Ising pressure does not
    inst = instances.sample_null(10, 2.0, 4)
    Q = special_ortho_group.rvs(10, random_state=1)
    rotated = dataclasses.replace(inst.observed(), ys=inst.ys @ Q.T)
    J0 = instances.coupling_from_instance(inst, 1.2)
    J1 = instances.coupling_from_instance(rotated, 1.2)
    assert np.allclose(J0.eigenvalues, J1.eigenvalues, atol=1e-10)
    a = reduction.run_test(inst, 1.2, report).statistic
    b = reduction.run_test(rotated, 1.2, report).statistic
    assert abs(a - b) > 1e-6


def test_exact_and_annealing_agree(report):
    within = 0
    trials = 20
    for s in range(trials):
        inst = instances.sample_planted(12, -0.9, 2.0, s)
        exact = reduction.run_test(inst, 1.2, report, "exact-oracle")
        ann = reduction.run_test(inst, 1.2, report, "annealing", seed=s)
        gap = abs(exact.statistic - ann.statistic)
        assert gap <= 4 * ann.stderr
        within += gap <= 2 * ann.stderr
    assert within >= 0.85 * trials


def test_budget_error(report):
    inst = instances.sample_null(26, 2.0, 0)
    with pytest.raises(ValueError):
        reduction.run_test(inst, 1.2, report, "exact-oracle")
    with pytest.raises(ValueError):
        reduction.run_test(instances.sample_null(6, 2.0, 0), 1.2, report, "magic")


def test_auc_and_z_helpers():
    assert reduction.auc_score([2, 3, 4], [0, 1, 1.5]) == 1.0
    assert reduction.auc_score([0, 1], [2, 3]) == 0.0
    assert reduction.auc_score([1, 1], [1, 1]) == 0.5
    a = np.array([1.0, 2.0, 3.0])
    b = np.array([0.0, 1.0, 2.0])
    se = math.sqrt(1 / 3 + 1 / 3)
    assert reduction.separation_z(a, b) == pytest.approx(1 / se)


def test_experiment_reproducible_and_shaped():
    params = ModelParams(1.2, -0.9, 2.0)
    a = reduction.run_experiment(10, 10, params, seed=7)
    b = reduction.run_experiment(10, 10, params, seed=7)
    assert a == b
    assert len(a.records) == 20
    assert {r.arm for r in a.records} == {"planted", "null"}
    assert 0 <= a.auc <= 1
    with pytest.raises(ValueError):
        reduction.run_experiment(10, 5, params)


def test_trial_seeds_independent_across_arms():
    seeds = {reduction.trial_seed(0, i, arm) for i in range(50) for arm in ("planted", "null")}
    assert len(seeds) == 100


def test_beta_zero_control():
    s = reduction.run_experiment(12, 200, ModelParams(1.2, 0.0, 2.0), seed=1)
    assert abs(s.separation_z) < 3
    assert abs(s.auc - 0.5) < 0.1


def test_strong_spike_separates():
    # near-complete spike removal with low-rank couplings gives a clear gap at n = 16
    s = reduction.run_experiment(16, 60, ModelParams(3.0, -0.99, 1.5), seed=3)
    assert s.mean_p_planted > s.mean_p_null
    assert s.separation_z > 3
    assert s.auc > 0.7


def test_separation_fades_with_gamma():
    sweep = reduction.gamma_sweep(16, 60, 3.0, -0.99, [1.5, 4.0], seed=3)
    assert sweep[0].separation_z > sweep[1].separation_z
    assert sweep[0].mean_p_planted - sweep[0].mean_p_null > sweep[1].mean_p_planted - sweep[1].mean_p_null


def test_predicted_bounds():
    b = reduction.predicted_bounds(ModelParams(1.0, -0.9, 2.0), epsilon=0.0)
    assert b.lower_planted == pytest.approx(0.0, abs=1e-12)
    assert b.upper_null == pytest.approx(0.0, abs=1e-15)
    b = reduction.predicted_bounds(ModelParams(1.2, -0.9, 2.0), epsilon=0.0)
    assert b.lower_planted - b.upper_null >= 0.0053
    assert b.lower_planted - b.upper_null == pytest.approx(analytic.sup_f(1.2)[1], abs=1e-12)
    assert reduction.predicted_bounds(ModelParams(1.2, -0.5, 4.0)).vacuous
    assert not reduction.predicted_bounds(ModelParams(1.2, -0.9, 4.0)).vacuous


def test_overlap_retention_requires_spike():
    with pytest.raises(ValueError):
        reduction.overlap_retention(instances.sample_null(8, 2.0, 0))
    r = reduction.overlap_retention(instances.sample_planted(40, -0.95, 2.0, 0))
    assert 0 <= r <= 1
