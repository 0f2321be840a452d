import numpy as np
import pytest

from tvsafeopt.gp import (ObservationSet, SpatialCache, condition, posterior,
                          posterior_batch, posterior_cross_cov)
from tvsafeopt.kernel import KernelSpec, cross, gram

ST = KernelSpec.spatio_temporal(1.0, 25.0)
KERNELS = (ST, KernelSpec.spatio_temporal(0.7, 15.0))


def direct_posterior(spec, X, T, y, noise, Q, tq):
    """Dense solve of (K + noise^2 I) without any factorization reuse."""
    K = gram(spec, X, T) + noise ** 2 * np.eye(len(X))
    kq = cross(spec, Q, tq, X, T)
    mean = kq @ np.linalg.solve(K, y)
    var = 1.0 - np.einsum("ij,ji->i", kq, np.linalg.solve(K, kq.T))
    return mean, np.sqrt(np.maximum(var, 0.0))


def random_obs(rng, n, n_out=2, noise=0.01):
    X = rng.uniform(-2, 2, (n, 2))
    T = rng.integers(0, 60, n).astype(float)
    Y = rng.normal(size=(n, n_out))
    return ObservationSet(X, T, Y, noise)


def test_empty_is_prior():
    m = condition(ObservationSet.empty(2, 2), KERNELS)
    mu, sd = posterior_batch(m, np.zeros((3, 2)), 4.0)
    np.testing.assert_array_equal(mu, 0.0)
    np.testing.assert_array_equal(sd, 1.0)
    assert posterior(m, [0.0, 0.0], 1.0, 1) == (0.0, 1.0)


def test_single_observation_closed_form():
    obs = ObservationSet([[0.0, 0.0]], [0.0], [[1.0]], 0.01)
    mu, sd = posterior(condition(obs, ST), [0.0, 0.0], 0.0, 0)
    assert mu == pytest.approx(1 / (1 + 1e-4), abs=1e-12)
    assert sd ** 2 == pytest.approx(1 - 1 / (1 + 1e-4), abs=1e-12)


def test_ten_points_match_direct_solve():
    rng = np.random.default_rng(0)
    obs = random_obs(rng, 10)
    m = condition(obs, KERNELS)
    Q = rng.uniform(-2, 2, (20, 2))
    mu, sd = posterior_batch(m, Q, 30.0)
    for i, spec in enumerate(KERNELS):
        rm, rs = direct_posterior(spec, obs.X, obs.times, obs.Y[:, i], 0.01,
                                  Q, 30.0)
        np.testing.assert_allclose(mu[:, i], rm, atol=1e-8, rtol=0)
        np.testing.assert_allclose(sd[:, i], rs, atol=1e-8, rtol=0)


def test_far_query_is_prior():
    rng = np.random.default_rng(1)
    m = condition(random_obs(rng, 10), KERNELS)
    mu, sd = posterior(m, [30.0, 30.0], 10.0, 0)
    assert abs(mu) < 1e-6 and abs(sd - 1) < 1e-6


def test_replicates_shrink_std():
    out = []
    for n in range(1, 8):
        obs = ObservationSet(np.zeros((n, 2)), np.zeros(n),
                             np.full((n, 1), 0.5), 0.01)
        _, sd = posterior(condition(obs, ST), [0.0, 0.0], 0.0, 0)
        assert sd ** 2 == pytest.approx(1 - n / (n + 1e-4), abs=1e-10)
        out.append(sd)
    assert np.all(np.diff(out) < 0)


def test_batch_of_one_equals_scalar():
    rng = np.random.default_rng(2)
    m = condition(random_obs(rng, 8), KERNELS)
    x = np.array([0.1, -0.3])
    mu, sd = posterior_batch(m, x[None, :], 12.0, [1])
    assert (mu[0, 0], sd[0, 0]) == posterior(m, x, 12.0, 1)


def test_full_grid_matches_scalar_calls():
    rng = np.random.default_rng(5)
    m = condition(random_obs(rng, 30), KERNELS)
    ax = np.linspace(-2, 2, 100)
    G = np.stack(np.meshgrid(ax, ax, indexing="ij"), -1).reshape(-1, 2)
    mu, sd = posterior_batch(m, G, 40.0)
    for j in rng.choice(len(G), 200, replace=False):
        for i in range(2):
            a, b = posterior(m, G[j], 40.0, i)
            assert abs(a - mu[j, i]) <= 1e-12 and abs(b - sd[j, i]) <= 1e-12


def test_permuted_queries_permute_outputs():
    rng = np.random.default_rng(6)
    m = condition(random_obs(rng, 12), KERNELS)
    Q = rng.uniform(-2, 2, (40, 2))
    perm = rng.permutation(40)
    mu, sd = posterior_batch(m, Q, 3.0)
    mp, sp = posterior_batch(m, Q[perm], 3.0)
    np.testing.assert_allclose(mp, mu[perm], atol=1e-14, rtol=0)
    np.testing.assert_allclose(sp, sd[perm], atol=1e-14, rtol=0)


def test_extend_matches_from_scratch_and_cache():
    rng = np.random.default_rng(7)
    obs = random_obs(rng, 40)
    Q = rng.uniform(-2, 2, (200, 2))
    cache = SpatialCache(Q)
    m = condition(ObservationSet(obs.X[:1], obs.times[:1], obs.Y[:1]),
                  KERNELS)
    for n in range(2, 41):
        m = m.extend(obs.X[n - 1], obs.times[n - 1], obs.Y[n - 1])
        ref = condition(ObservationSet(obs.X[:n], obs.times[:n], obs.Y[:n]),
                        KERNELS)
        a_mu, a_sd = posterior_batch(m, Q, 50.0, cache=cache)
        b_mu, b_sd = posterior_batch(ref, Q, 50.0)
        np.testing.assert_allclose(a_mu, b_mu, atol=1e-8, rtol=0)
        np.testing.assert_allclose(a_sd, b_sd, atol=1e-8, rtol=0)


def test_cache_rejects_other_queries():
    rng = np.random.default_rng(8)
    m = condition(random_obs(rng, 5), KERNELS)
    with pytest.raises(ValueError):
        posterior_batch(m, np.zeros((3, 2)), 1.0,
                        cache=SpatialCache(np.zeros((4, 2))))


def test_interpolation_limit():
    rng = np.random.default_rng(9)
    obs = random_obs(rng, 6, n_out=1, noise=1e-6)
    m = condition(obs, ST)
    for j in range(6):
        mu, _ = posterior(m, obs.X[j], obs.times[j], 0)
        assert abs(mu - obs.Y[j, 0]) < 1e-3


def test_cross_cov_diagonal_is_variance():
    rng = np.random.default_rng(10)
    m = condition(random_obs(rng, 10), KERNELS)
    Q = rng.uniform(-2, 2, (5, 2))
    cov = posterior_cross_cov(m, 1, Q, 8.0, Q, 8.0)
    _, sd = posterior_batch(m, Q, 8.0, [1])
    np.testing.assert_allclose(np.diag(cov), sd[:, 0] ** 2, atol=1e-10)


def test_shared_kernels_share_a_factor():
    rng = np.random.default_rng(11)
    m = condition(random_obs(rng, 5, n_out=3), (ST, ST, KERNELS[1]))
    assert len(m.groups) == 2


def test_invalid_observations():
    with pytest.raises(ValueError):
        ObservationSet(np.zeros((2, 2)), [0.0], np.zeros((2, 1)))
    with pytest.raises(ValueError):
        ObservationSet(np.zeros((1, 2)), [0.0], np.zeros((1, 1)), 0.0)
    with pytest.raises(ValueError):
        ObservationSet(np.zeros((1, 2)), [-1.0], np.zeros((1, 1)))
