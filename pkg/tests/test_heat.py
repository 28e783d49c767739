import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from obstacle_mbo.grid import GridGeometry
from obstacle_mbo.heat import (apply_semigroup, apply_semigroup_direct, build_spectrum,
                               laplacian_matrix)


def hand_laplacian_2x2():
    # n = 2, eps = 1/2: both x-neighbours of a cell are the same cell, so
    # (L u)_i = 4 * (4 u_i - 2 u_xnbr - 2 u_ynbr); cells row-major 00, 01, 10, 11
    return 4.0 * np.array([[4, -2, -2, 0],
                           [-2, 4, 0, -2],
                           [-2, 0, 4, -2],
                           [0, -2, -2, 4]])


def test_spectrum_zero_mode_and_closed_form():
    for n in (2, 5, 16):
        for h in (1e-4, 0.3):
            m = build_spectrum(h, GridGeometry(n)).multipliers
            assert m[0, 0] == 1.0
    h = 0.01
    m = build_spectrum(h, GridGeometry(2)).multipliers
    assert m[1, 1] == pytest.approx(math.exp(-32 * h), rel=1e-15)


def test_spectrum_symmetry_positivity_and_monotone_in_h():
    g = GridGeometry(9)
    a = build_spectrum(1e-3, g).multipliers
    b = build_spectrum(2e-3, g).multipliers
    flip = np.roll(a[::-1, :], 1, axis=0)
    np.testing.assert_allclose(flip, a, rtol=1e-14)
    np.testing.assert_allclose(np.roll(a[:, ::-1], 1, axis=1), a, rtol=1e-14)
    assert np.all(a > 0) and np.all(a <= 1)
    assert np.all(b <= a)


def test_spectrum_rejects_nonpositive_h():
    with pytest.raises(ValueError):
        build_spectrum(0.0, GridGeometry(4))
    with pytest.raises(ValueError):
        build_spectrum(-1.0, GridGeometry(4))


def test_laplacian_matrix_small_cases():
    np.testing.assert_array_equal(laplacian_matrix(GridGeometry(2)), hand_laplacian_2x2())
    L = laplacian_matrix(GridGeometry(5))
    np.testing.assert_array_equal(L, L.T)
    np.testing.assert_allclose(L.sum(axis=1), 0, atol=1e-12)


def test_checkerboard_decays_like_closed_form():
    h = 0.02
    u = np.array([[1, -1], [-1, 1]], dtype=float)
    oracle = (scipy.linalg.expm(-h * hand_laplacian_2x2()) @ u.ravel()).reshape(2, 2)
    np.testing.assert_allclose(oracle, math.exp(-32 * h) * u, atol=1e-14)
    out = apply_semigroup(u, build_spectrum(h, GridGeometry(2)))
    np.testing.assert_allclose(out, oracle, atol=1e-14)


def test_constants_are_fixed():
    g = GridGeometry(32)
    spec = build_spectrum(0.05, g)
    np.testing.assert_allclose(apply_semigroup(np.ones(g.shape), spec), 1.0, atol=1e-13)
    np.testing.assert_allclose(apply_semigroup_direct(-np.ones((4, 4)), 0.05), -1.0,
                               atol=1e-13)


def test_mean_is_preserved():
    g = GridGeometry(24)
    u = np.random.default_rng(0).choice([-1.0, 1.0], g.shape)
    out = apply_semigroup(u, build_spectrum(3e-3, g))
    assert out.mean() == pytest.approx(u.mean(), abs=1e-14)


def test_complex_path_matches_real_path():
    g = GridGeometry(16)
    spec = build_spectrum(2e-3, g)
    u = np.random.default_rng(1).uniform(-1, 1, g.shape)
    np.testing.assert_allclose(apply_semigroup(u, spec, complex_check=True),
                               apply_semigroup(u, spec), atol=1e-14)


def test_broken_spectrum_is_detected():
    g = GridGeometry(8)
    spec = build_spectrum(1e-3, g)
    m = spec.multipliers.copy()
    m[1, 0] = 0.0  # breaks the even symmetry, so the output is no longer real
    bad = type(spec)(spec.h, m)
    u = np.random.default_rng(2).uniform(-1, 1, g.shape)
    with pytest.raises(RuntimeError, match="imaginary"):
        apply_semigroup(u, bad, complex_check=True)


def test_direct_oracle_limits_and_identity():
    with pytest.raises(ValueError):
        apply_semigroup_direct(np.zeros((65, 65)), 0.1)
    u = np.random.default_rng(3).uniform(-1, 1, (6, 6))
    np.testing.assert_allclose(apply_semigroup_direct(u, 1e-12), u, atol=1e-8)


@pytest.mark.parametrize("n", [2, 4, 8, 16, 32])
def test_spectral_matches_dense_exponential(n):
    g = GridGeometry(n)
    rng = np.random.default_rng(n)
    for h in (1e-4, 5e-3):
        spec = build_spectrum(h, g)
        for _ in range(20):
            u = rng.uniform(-1, 1, g.shape)
            err = np.abs(apply_semigroup(u, spec) - apply_semigroup_direct(u, h, g)).max()
            assert err <= 1e-10


@pytest.mark.slow
def test_spectral_matches_dense_exponential_n64():
    g = GridGeometry(64)
    h = 2e-4
    spec = build_spectrum(h, g)
    rng = np.random.default_rng(64)
    for _ in range(20):
        u = rng.uniform(-1, 1, g.shape)
        assert np.abs(apply_semigroup(u, spec) - apply_semigroup_direct(u, h, g)).max() <= 1e-10


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-5, 1e-2), st.floats(1e-5, 1e-2), st.integers(0, 2 ** 32 - 1))
def test_semigroup_property(h1, h2, seed):
    g = GridGeometry(16)
    u = np.random.default_rng(seed).uniform(-1, 1, g.shape)
    two = apply_semigroup(apply_semigroup(u, build_spectrum(h1, g)), build_spectrum(h2, g))
    one = apply_semigroup(u, build_spectrum(h1 + h2, g))
    assert np.abs(two - one).max() <= 1e-10


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-6, 1.0), st.integers(0, 2 ** 32 - 1))
def test_maximum_principle(h, seed):
    g = GridGeometry(12)
    u = np.random.default_rng(seed).choice([-1.0, 1.0], g.shape)
    out = apply_semigroup(u, build_spectrum(h, g))
    assert out.min() >= u.min() - 1e-12 and out.max() <= u.max() + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-5, 1e-1), st.integers(0, 2 ** 32 - 1))
def test_operator_is_symmetric(h, seed):
    g = GridGeometry(10)
    rng = np.random.default_rng(seed)
    u, v = rng.uniform(-1, 1, (2, *g.shape))
    spec = build_spectrum(h, g)
    assert abs(np.sum(apply_semigroup(u, spec) * v) - np.sum(u * apply_semigroup(v, spec))) <= 1e-10
