"""The numba and numpy code paths must agree bit for bit."""

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from missionprofile import _kernels

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def both_medcouples(x):
    xs = np.sort(np.asarray(x, dtype=float))
    return _kernels.medcouple_sorted_numba(xs), _kernels.medcouple_sorted_numpy(xs)


def test_medcouple_paths_agree_on_seeded_samples():
    rng = np.random.default_rng(0)
    for i in range(200):
        n = int(rng.integers(3, 120))
        x = rng.integers(0, 5, n).astype(float) if i % 4 == 0 else rng.standard_t(3, n)
        a, b = both_medcouples(x)
        assert a == b or (np.isnan(a) and np.isnan(b))


@given(arrays(np.float64, st.integers(3, 40), elements=finite))
def test_medcouple_paths_agree_property(x):
    a, b = both_medcouples(x)
    assert a == b or (np.isnan(a) and np.isnan(b))


def test_all_equal_sample_has_no_medcouple():
    a, b = both_medcouples(np.ones(7))
    assert np.isnan(a) and np.isnan(b)


@pytest.mark.parametrize("seed", range(5))
def test_ao_paths_agree(seed):
    rng = np.random.default_rng(seed)
    D, n = 60, int(rng.integers(4, 80))
    cloud = rng.lognormal(size=(D, n))
    cloud[::7] = np.round(cloud[::7])  # ties and some degenerate rows
    cloud[3] = 1.0
    points = np.concatenate([cloud, rng.normal(size=(D, 3))], axis=1)
    out_nb, skip_nb = _kernels.ao_max_numba(cloud, points, 0.0)
    out_np, skip_np = _kernels.ao_max_numpy(cloud, points, 0.0)
    assert skip_nb == skip_np >= 1
    np.testing.assert_array_equal(out_nb, out_np)


@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(4, 25)), elements=finite))
def test_ao_paths_agree_property(cloud):
    out_nb, skip_nb = _kernels.ao_max_numba(cloud, cloud, 1e-3)
    out_np, skip_np = _kernels.ao_max_numpy(cloud, cloud, 1e-3)
    assert skip_nb == skip_np
    np.testing.assert_array_equal(out_nb, out_np)


def test_environment_flag_selects_numpy():
    code = "import missionprofile._accel as a; print(a.USE_NUMBA)"
    env = dict(os.environ, MP_NUMBA="0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "False"
    env["MP_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "True"
