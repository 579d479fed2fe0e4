import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cowgait import kernels

py = kernels.python
cy = kernels.compiled
needs_cython = pytest.mark.skipif(cy is None, reason="compiled kernels not built")


def test_backend_name():
    assert kernels.BACKEND in ("cython", "python")
    if cy is not None:
        assert kernels.mad_filter is cy.mad_filter


def test_pure_python_switch():
    env = dict(os.environ, COWGAIT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from cowgait import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@needs_cython
@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e4, 1e4), min_size=3, max_size=80), st.sampled_from([3, 5, 7]),
       st.floats(0.5, 5), st.floats(0, 20))
def test_mad_filter_equivalent(values, window, k, floor):
    x = np.array(values)
    if window > x.size:
        return
    a, na = py.mad_filter(x, window, k, floor)
    b, nb = cy.mad_filter(x, window, k, floor)
    assert na == nb
    np.testing.assert_array_equal(a, b)


@needs_cython
@settings(max_examples=100, deadline=None)
@given(st.integers(2, 40), st.integers(1, 5), st.integers(1, 4), st.integers(0, 10_000), st.booleans())
def test_best_split_equivalent(n, p, min_leaf, seed, discrete):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 4, size=(n, p)).astype(float) if discrete else rng.normal(size=(n, p))
    t = rng.integers(0, 2, n).astype(float)
    feats = np.arange(p, dtype=np.int64)
    fa, ta, ga = py.best_split(X, t, feats, min_leaf)
    fb, tb, gb = cy.best_split(np.ascontiguousarray(X), t, feats, min_leaf)
    assert fa == fb
    if fa >= 0:
        assert ta == tb
        assert ga == pytest.approx(gb, rel=1e-12, abs=1e-12)


def test_best_split_simple():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    t = np.array([0.0, 0.0, 1.0, 1.0])
    f, thr, gain = kernels.best_split(X, t, np.array([0]), 1)
    assert (f, thr) == (0, 1.5)
    assert gain == pytest.approx(1.0)  # SSE 1.0 -> 0.0
    f, _, _ = kernels.best_split(np.ones((4, 1)), t, np.array([0]), 1)
    assert f == -1


def _rbf(X, gamma):
    d = ((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-gamma * d)


@needs_cython
@pytest.mark.parametrize("seed", range(6))
def test_smo_equivalent(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(50, 3))
    y = np.where(X[:, 0] + 0.5 * rng.normal(size=50) > 0, 1.0, -1.0)
    K = np.ascontiguousarray(_rbf(X, 0.5) if seed % 2 else X @ X.T)
    a1, g1, it1, c1 = py.smo_solve(K, y, 1.0, 1e-3, 100_000)
    a2, g2, it2, c2 = cy.smo_solve(K, y, 1.0, 1e-3, 100_000)
    assert c1 and c2
    assert it1 == it2
    np.testing.assert_allclose(a1, a2, atol=1e-9)
    np.testing.assert_allclose(g1, g2, atol=1e-9)


def test_smo_kkt():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(40, 2))
    y = np.where(X[:, 1] > 0, 1.0, -1.0)
    C = 2.0
    alpha, G, _, conv = kernels.smo_solve(np.ascontiguousarray(_rbf(X, 1.0)), y, C, 1e-6, 100_000)
    assert conv
    assert np.all(alpha >= 0) and np.all(alpha <= C)
    assert abs(np.dot(alpha, y)) < 1e-9
