import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from icokd import _kernels as K

needs_numba = pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba not installed")


def test_uniforms_range_and_moments():
    u = K.counter_uniforms_np(1, 0, 200_000)
    assert u.min() >= 0 and u.max() < 1
    assert abs(u.mean() - 0.5) < 0.005
    assert abs(u.var() - 1 / 12) < 0.002


def test_uniforms_counter_property():
    whole = K.counter_uniforms_np(9, 0, 1000)
    parts = np.concatenate([K.counter_uniforms_np(9, s, 100) for s in range(0, 1000, 100)])
    assert np.array_equal(whole, parts)
    assert not np.array_equal(whole, K.counter_uniforms_np(10, 0, 1000))


def test_categorical_skips_empty_bins():
    cdf = np.array([0.25, 0.25, 0.75, 1.0])
    u = K.counter_uniforms_np(2, 0, 50_000)
    idx = K.sample_categorical_np(cdf, u)
    assert not np.any(idx == 1)
    assert abs(np.mean(idx == 2) - 0.5) < 0.01


def test_grid_min_examples():
    val, a, b = K.bilinear_grid_min_np(np.array([0.0, 1.0, 1.0, -3.0]), 11)
    assert (a, b) == (10, 10) and abs(val + 1) < 1e-15
    val, a, b = K.bilinear_grid_min_np(np.array([0.5, 0.0, 0.0, 0.0]), 5)
    assert val == 0.5 and (a, b) == (0, 0)


@needs_numba
@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**63), st.integers(0, 10**9), st.integers(1, 500))
def test_uniforms_numba_equals_numpy(seed, start, n):
    assert np.array_equal(K.counter_uniforms_nb(seed, start, n), K.counter_uniforms_np(seed, start, n))


@needs_numba
@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=16), st.integers(0, 1000))
def test_categorical_numba_equals_numpy(weights, seed):
    w = np.array(weights) + 1e-3
    cdf = np.cumsum(w / w.sum())
    cdf[-1] = 1.0
    u = K.counter_uniforms_np(seed, 0, 300)
    assert np.array_equal(K.sample_categorical_nb(cdf, u), K.sample_categorical_np(cdf, u))


@needs_numba
@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1.0, 1.0), min_size=4, max_size=4), st.integers(2, 60))
def test_grid_min_numba_equals_numpy(coeffs, n):
    c = np.array(coeffs)
    assert K.bilinear_grid_min_nb(c, n) == K.bilinear_grid_min_np(c, n)


def test_backend_flag():
    code = "from icokd import _kernels as K; print(K.BACKEND)"
    env = dict(os.environ, ICOKD_NO_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
    env["ICOKD_NO_NUMBA"] = "0"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == ("numba" if K.HAVE_NUMBA else "numpy")


def test_session_identical_across_backends():
    code = ("from icokd.protocol import run_session; from icokd.attacks import AttackParams; "
            "import hashlib; t = run_session(20000, AttackParams.intercept_z(), seed=5); "
            "print(hashlib.sha256(t.cells.tobytes()).hexdigest())")
    digests = set()
    for flag in ("0", "1"):
        env = dict(os.environ, ICOKD_NO_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        digests.add(out.stdout.strip())
    assert len(digests) == 1
