import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.stats import mannwhitneyu, wasserstein_distance

from pmline import kernels

floats = st.floats(-1e3, 1e3, allow_nan=False)


def _levenshtein_ref(a, b):
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


@given(arrays(np.float64, st.integers(10, 60), elements=st.integers(0, 6).map(float)),
       st.integers(2, 5))
def test_rank_sum_paths_agree(x, w):
    a = kernels._rank_sum_scan_loop.py_func(x, w)
    b = kernels._rank_sum_scan_numpy(x, w, chunk=3)
    c = kernels.rank_sum_scan(x, w)
    np.testing.assert_allclose(a, b, atol=1e-12)
    np.testing.assert_allclose(a, c, atol=1e-12)


def test_rank_sum_matches_mann_whitney_u():
    rng = np.random.default_rng(1)
    x = rng.lognormal(0, 1, 80)
    w = 10
    z = kernels.rank_sum_scan(x, w)
    assert len(z) == len(x) - 2 * w + 1
    mean = w * w / 2
    sd = np.sqrt(w * w * (2 * w + 1) / 12)
    for k in (0, 17, len(z) - 1):
        t = k + w
        u = mannwhitneyu(x[t:t + w], x[t - w:t]).statistic
        assert z[k] == pytest.approx((u - mean) / sd)


def test_rank_sum_short_series_empty():
    assert kernels.rank_sum_scan(np.arange(5.0), 3).size == 0


@given(arrays(np.float64, st.integers(0, 40), elements=floats), st.integers(1, 8))
def test_rolling_mean_paths_agree(x, w):
    a = kernels._rolling_mean_loop.py_func(x, w)
    b = kernels._rolling_mean_numpy(x, w)
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(kernels.rolling_mean(x, w), b, rtol=1e-9, atol=1e-9)
    if len(x) >= w:
        ref = np.convolve(x, np.ones(w) / w, mode="valid")
        np.testing.assert_allclose(b, ref, rtol=1e-9, atol=1e-7)


seqs = st.lists(st.integers(0, 4), max_size=12).map(lambda v: np.array(v, dtype=np.int64))


@given(seqs, seqs)
def test_levenshtein_paths_agree(a, b):
    ref = _levenshtein_ref(a.tolist(), b.tolist())
    assert kernels._levenshtein_loop.py_func(a, b) == ref
    assert kernels._levenshtein_numpy(a, b) == ref
    assert kernels.levenshtein(a, b) == ref


@given(arrays(np.float64, st.integers(1, 30), elements=floats),
       arrays(np.float64, st.integers(1, 30), elements=floats))
def test_wasserstein_paths_agree(a, b):
    ref = wasserstein_distance(a, b)
    sa, sb = np.sort(a), np.sort(b)
    for got in (kernels._wasserstein_loop.py_func(sa, sb),
                kernels._wasserstein_numpy(sa, sb), kernels.wasserstein_1d(a, b)):
        assert got == pytest.approx(ref, rel=1e-9, abs=1e-9)


def test_backend_flag():
    assert kernels.BACKEND in ("numba", "numpy")


def test_disable_flag_selects_numpy(tmp_path):
    import subprocess
    import sys
    out = subprocess.run(
        [sys.executable, "-c", "from pmline import kernels; print(kernels.BACKEND)"],
        env={"PMLINE_DISABLE_NUMBA": "1", "PATH": "/usr/bin:/bin"},
        capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
