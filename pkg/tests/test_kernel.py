import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tvsafeopt.kernel import KernelSpec, cross, eval_kernel, gram

ST = KernelSpec.spatio_temporal(1.0, 25.0)

coords = st.floats(-5, 5, allow_nan=False)
times = st.floats(0, 200, allow_nan=False)
points = st.tuples(st.tuples(coords, coords), times)


def test_diagonal_is_one():
    assert eval_kernel(ST, ((0.3, -1.2), 7.0), ((0.3, -1.2), 7.0)) == 1.0


def test_spatial_offset_closed_form():
    v = eval_kernel(ST, ((0, 0), 0), ((1, 0), 0))
    assert v == pytest.approx(math.exp(-0.5), abs=1e-12)


def test_temporal_offset_closed_form():
    v = eval_kernel(ST, ((0, 0), 0), ((0, 0), 25))
    assert v == pytest.approx(math.exp(-0.5), abs=1e-12)


def test_spatial_mode_ignores_time():
    spec = KernelSpec.spatial(1.0)
    assert eval_kernel(spec, ((0, 0), 0), ((0, 0), 1e6)) == 1.0


def test_infinite_temporal_lengthscale_ignores_time():
    spec = KernelSpec.spatio_temporal(1.0, math.inf)
    assert eval_kernel(spec, ((0, 0), 0), ((0, 0), 1e6)) == 1.0


def test_dimension_mismatch_raises():
    with pytest.raises(ValueError):
        eval_kernel(ST, ((0, 0), 0), ((0, 0, 0), 0))


@pytest.mark.parametrize("kw", [
    dict(spatial_lengthscale=0.0),
    dict(spatial_lengthscale=1.0, temporal_lengthscale=-1.0),
    dict(mode="bogus"),
])
def test_invalid_specs(kw):
    with pytest.raises(ValueError):
        KernelSpec(**kw)


def test_gram_single_point():
    np.testing.assert_array_equal(gram(ST, [[0.5, 0.5]], [3.0]), [[1.0]])


def test_gram_identical_points():
    g = gram(ST, [[0.5, 0.5], [0.5, 0.5]], [3.0, 3.0])
    np.testing.assert_array_equal(g, np.ones((2, 2)))


def test_gram_matches_pairwise_eval():
    rng = np.random.default_rng(3)
    X = rng.uniform(-2, 2, (5, 2))
    T = rng.integers(0, 50, 5).astype(float)
    g = gram(ST, X, T)
    for a in range(5):
        for b in range(5):
            assert g[a, b] == pytest.approx(
                eval_kernel(ST, (X[a], T[a]), (X[b], T[b])), abs=1e-14)


def test_cross_scalar_and_vector_times_agree():
    rng = np.random.default_rng(4)
    Xa, Xb = rng.normal(size=(7, 2)), rng.normal(size=(4, 2))
    tb = rng.uniform(0, 30, 4)
    np.testing.assert_allclose(cross(ST, Xa, 5.0, Xb, tb),
                               cross(ST, Xa, np.full(7, 5.0), Xb, tb),
                               rtol=0, atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(points, points)
def test_symmetry(a, b):
    assert eval_kernel(ST, a, b) == pytest.approx(eval_kernel(ST, b, a),
                                                  abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_gram_is_psd(seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2, 2, (50, 2))
    T = rng.integers(0, 100, 50).astype(float)
    assert np.linalg.eigvalsh(gram(ST, X, T)).min() >= -1e-8


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 5), st.floats(0, 5), st.floats(0, 100),
       st.floats(0, 100))
def test_monotone_decay(d1, d2, t1, t2):
    (d1, d2), (t1, t2) = sorted((d1, d2)), sorted((t1, t2))
    near = eval_kernel(ST, ((0, 0), 0), ((d1, 0), t1))
    far_x = eval_kernel(ST, ((0, 0), 0), ((d2, 0), t1))
    far_t = eval_kernel(ST, ((0, 0), 0), ((d1, 0), t2))
    assert far_x <= near and far_t <= near
