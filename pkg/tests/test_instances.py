import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact import instances
from artifact.analytic import epsilon
from artifact.instances import CouplingMatrix, SpikedInstance


def test_null_shape_and_determinism():
    a = instances.sample_null(4, 2.0, seed=11)
    b = instances.sample_null(4, 2.0, seed=11)
    assert a.N == 2 and a.ys.shape == (2, 4)
    assert a.spike is None
    assert a.ys.tobytes() == b.ys.tobytes()
    assert instances.sample_null(4, 2.0, seed=12).ys.tobytes() != a.ys.tobytes()


def test_ceiling_arithmetic():
    assert instances.sample_null(10, 10.0, 0).N == 1
    assert instances.sample_null(10, 3.0, 0).N == 4
    assert instances.sample_null(20, 2.0, 0).N == 10


@pytest.mark.parametrize("gamma", [1.0, 0.5])
def test_null_rejects_gamma(gamma):
    with pytest.raises(ValueError):
        instances.sample_null(4, gamma, 0)


@pytest.mark.parametrize("beta", [-1.0, -1.5, 0.2])
def test_planted_rejects_beta(beta):
    with pytest.raises(ValueError):
        instances.sample_planted(4, beta, 2.0, 0)


def test_planted_determinism_and_spike():
    a = instances.sample_planted(30, -0.7, 3.0, seed=5)
    b = instances.sample_planted(30, -0.7, 3.0, seed=5)
    assert np.array_equal(a.ys, b.ys) and np.array_equal(a.spike, b.spike)
    assert set(np.unique(a.spike)) <= {-1, 1}
    assert a.N == 10


def test_beta_zero_reduces_to_null():
    p = instances.sample_planted(12, 0.0, 2.0, seed=9)
    q = instances.sample_null(12, 2.0, seed=9)
    assert np.array_equal(p.ys, q.ys)


def test_substreams_are_order_independent():
    first = instances.substream(3, 1, 4).standard_normal(5)
    instances.substream(3, 1, 0).standard_normal(5)
    again = instances.substream(3, 1, 4).standard_normal(5)
    assert np.array_equal(first, again)


def _many_vectors(n, beta, count, seed):
    """count vectors from the planted law with one fixed spike."""
    rng = np.random.default_rng(seed)
    x = rng.choice([-1.0, 1.0], size=n)
    z = rng.standard_normal((count, n))
    a = (math.sqrt(1 + beta) - 1) / n
    return x, z + a * np.outer(z @ x, x)


def test_null_coordinate_variance():
    ys = np.vstack([instances.sample_null(20, 1.25, s).ys for s in range(6250)])
    assert ys.shape[0] * ys.shape[1] >= 1e5 * 20 / 20
    v = ys[:, 0]
    stderr = math.sqrt(2.0 / v.size)
    assert abs(v.var() - 1.0) <= 3 * stderr


def test_planted_transform_reproduces_covariance():
    n, beta = 8, -0.6
    x, ys = _many_vectors(n, beta, 100_000, seed=1)
    proj_sq = (ys @ x) ** 2 / n
    stderr = proj_sq.std(ddof=1) / math.sqrt(proj_sq.size)
    assert abs(proj_sq.mean() - (1 + beta)) <= 3 * stderr
    u = np.zeros(n)
    u[0], u[1] = x[1], -x[0]
    u /= np.linalg.norm(u)
    w = ys @ u
    assert abs(w.var() - 1.0) <= 3 * math.sqrt(2.0 / w.size)
    cov = ys.T @ ys / ys.shape[0]
    target = np.eye(n) + beta / n * np.outer(x, x)
    assert np.linalg.norm(cov - target, 2) < 0.05


def test_planted_sampler_matches_law():
    # the instance sampler uses the same transform; check (x^T y)^2 / n on its own draws
    vals = []
    for s in range(2000):
        inst = instances.sample_planted(10, -0.8, 2.0, s)
        vals.extend(((inst.ys @ inst.spike) ** 2 / 10).tolist())
    vals = np.asarray(vals)
    stderr = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - 0.2) <= 3 * stderr


def test_proj_axis_cases():
    P = instances.proj([[1.0, 0.0]])
    assert np.allclose(P.P, np.diag([0.0, 1.0]), atol=1e-15)
    assert P.rank == 1
    P = instances.proj([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    assert P.rank == 2
    assert np.allclose(P.P, np.diag([0.0, 1.0, 1.0]), atol=1e-15)


def test_proj_errors():
    with pytest.raises(ValueError):
        instances.proj(np.zeros((2, 5)))
    with pytest.raises(ValueError):
        instances.proj(np.ones((5, 5)))


def test_proj_random_gaussian():
    rng = np.random.default_rng(0)
    ys = rng.standard_normal((3, 8))
    P = instances.proj(ys)
    assert P.rank == 5
    for y in ys:
        assert np.linalg.norm(P.P @ y) <= 1e-8 * np.linalg.norm(y)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 12), st.integers(1, 11), st.integers(0, 2**32 - 1))
def test_proj_is_orthogonal_projection(n, N, seed):
    N = min(N, n - 1)
    ys = np.random.default_rng(seed).standard_normal((N, n))
    P = instances.proj(ys)
    M = P.P
    assert np.max(np.abs(M - M.T)) <= 1e-10
    assert np.linalg.norm(M @ M - M) <= 1e-8 * n
    ev = np.linalg.eigvalsh(M)
    assert np.all(np.minimum(np.abs(ev), np.abs(ev - 1)) <= 1e-8)
    assert P.rank + np.linalg.matrix_rank(ys) == n


def test_coupling_from_instance_width():
    inst = instances.sample_null(12, 3.0, 4)
    J = instances.coupling_from_instance(inst, 1.3)
    assert J.spectral_width == pytest.approx(1.3, abs=1e-8)
    assert np.allclose(J.eigenvalues, np.linalg.eigvalsh(J.J)[::-1], atol=1e-8)
    assert np.all(np.diff(J.eigenvalues) <= 0)
    zero = instances.coupling_from_instance(inst, 0.0)
    assert not np.any(zero.J)


def test_coupling_matrix_validation():
    with pytest.raises(ValueError):
        CouplingMatrix.from_array(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        CouplingMatrix.from_array(np.zeros((2, 3)))


def test_null_projection_is_rotation_distributed():
    n, gamma = 10, 2.0
    u = np.ones(n) / math.sqrt(n)
    vals = np.array([u @ instances.proj(instances.sample_null(n, gamma, s).ys).P @ u for s in range(2000)])
    expected = (n - math.ceil(n / gamma)) / n
    assert abs(vals.mean() - expected) <= 3 * vals.std(ddof=1) / math.sqrt(vals.size)


def test_overlap_retention_bound():
    beta, gamma, n = -0.9, 4.0, 400
    eps = epsilon(beta, gamma)
    assert eps < 1
    hits = 0
    for s in range(200):
        inst = instances.sample_planted(n, beta, gamma, s)
        x = inst.spike.astype(float)
        P = instances.proj(inst.ys).P
        hits += (x @ P @ x) / n >= 1 - eps**2
    assert hits >= 0.95 * 200


def test_instance_json_roundtrip(tmp_path):
    inst = instances.sample_planted(6, -0.5, 2.0, 3)
    path = tmp_path / "inst.json"
    instances.write_instance(path, inst)
    back = instances.read_instance(path)
    assert np.array_equal(back.ys, inst.ys)
    assert np.array_equal(back.spike, inst.spike)
    assert (back.n, back.N, back.beta, back.gamma, back.seed) == (6, 3, -0.5, 2.0, 3)
    instances.write_instance(path, inst, include_spike=False)
    assert instances.read_instance(path).spike is None
    d = inst.to_dict()
    assert set(d) == {"n", "N", "beta", "gamma", "seed", "ys", "spike"}


def test_observed_view_has_no_spike():
    inst = instances.sample_planted(6, -0.5, 2.0, 3)
    obs = inst.observed()
    assert not hasattr(obs, "spike")
    assert inst.without_spike().spike is None


def test_instance_validation():
    with pytest.raises(ValueError):
        SpikedInstance(n=4, ys=np.zeros((3, 4)), beta=0.0, gamma=2.0, seed=0)
    with pytest.raises(ValueError):
        SpikedInstance(n=4, ys=np.zeros((2, 4)), beta=0.0, gamma=2.0, seed=0, spike=np.array([1, 0, 1, 1]))


def test_matrix_text_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    A = rng.standard_normal((5, 5))
    A = A + A.T
    path = tmp_path / "J.txt"
    instances.write_matrix(path, A)
    J = instances.read_matrix(path)
    assert np.array_equal(J.J, A)
    path.write_text("3\n1 2 3\n")
    with pytest.raises(ValueError):
        instances.read_matrix(path)


def test_haar_projection_orthonormal():
    V = instances.haar_projection(9, 4, np.random.default_rng(0))
    assert np.allclose(V.T @ V, np.eye(4), atol=1e-12)
