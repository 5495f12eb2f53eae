"""Backend parity: the compiled kernels must match the pure fallback exactly."""

import numpy as np
import pytest

from endocov import _kernels_py as pure
from endocov import kernels

try:
    from endocov import _kernels_cy as compiled

    HAS_COMPILED = True
except ImportError:
    compiled = None
    HAS_COMPILED = False

needs_compiled = pytest.mark.skipif(not HAS_COMPILED, reason="compiled core unavailable")


def brownian(rng, n, sigma=1.0):
    return np.concatenate(([0.0], np.cumsum(rng.normal(0, sigma, n))))


@needs_compiled
def test_exit_walk_const_parity(rng):
    s = brownian(rng, 200_000, 0.05)
    a = pure.exit_walk_const(s, -0.4, 0.7)
    b = compiled.exit_walk_const(s, -0.4, 0.7)
    np.testing.assert_array_equal(a, b)
    assert a.size > 10


@needs_compiled
def test_exit_walk_per_event_parity(rng):
    s = brownian(rng, 100_000, 0.05)
    lo = -rng.uniform(0.3, 0.8, 5000)
    hi = rng.uniform(0.3, 0.8, 5000)
    a, ea = pure.exit_walk_per_event(s, lo, hi)
    b, eb = compiled.exit_walk_per_event(s, lo, hi)
    np.testing.assert_array_equal(a, b)
    assert ea == eb == False  # noqa: E712


@needs_compiled
def test_exit_walk_per_event_exhaustion(rng):
    s = brownian(rng, 50_000, 0.1)
    lo = np.array([-0.2])
    hi = np.array([0.2])
    for impl in (pure, compiled):
        idx, exhausted = impl.exit_walk_per_event(s, lo, hi)
        assert exhausted and idx.size == 1


@needs_compiled
def test_exit_walk_uncertainty_parity(rng):
    s = brownian(rng, 200_000, 0.05) + 3.0
    s[0] = 3.0
    alpha = 1.0
    ls = rng.integers(1, 4, 4000)
    wu = alpha * (ls - 0.5 + 0.15)
    wd = alpha * (ls - 0.5 + 0.15)
    a = pure.exit_walk_uncertainty(s, alpha, wu, wd, 3, ls)
    b = compiled.exit_walk_uncertainty(s, alpha, wu, wd, 3, ls)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)
    assert a[0].size > 5


@needs_compiled
def test_exit_walk_grid_parity(rng):
    s = brownian(rng, 200_000, 0.03)
    levels = np.cumsum(rng.uniform(0.2, 0.6, 41)) - 6.0
    k0 = int(np.argmin(np.abs(levels - s[0])))
    s = s - s[0] + levels[k0]
    ia, la = pure.exit_walk_grid(s, levels, k0)
    ib, lb = compiled.exit_walk_grid(s, levels, k0)
    np.testing.assert_array_equal(ia, ib)
    np.testing.assert_array_equal(la, lb)


@needs_compiled
def test_heston_variance_parity(rng):
    dw = rng.normal(0, 0.01, 50_000)
    jidx = np.sort(rng.integers(1, 50_001, 12)).astype(np.int64)
    jsz = rng.choice([-1e-4, 1e-4], 12)
    for jump in ((None, None), (jidx, jsz)):
        a = pure.heston_variance(2.56e-4, 4.5, 2.56e-4, 0.4, 1e-4, dw, *jump)
        b = compiled.heston_variance(2.56e-4, 4.5, 2.56e-4, 0.4, 1e-4, dw, *jump)
        np.testing.assert_array_equal(a, b)


@needs_compiled
def test_hy_pair_sum_parity(rng):
    t1 = np.concatenate(([0.0], np.cumsum(rng.exponential(1.0, 3000))))
    t2 = np.concatenate(([0.0], np.cumsum(rng.exponential(0.7, 4000))))
    p1 = np.concatenate(([0.0], np.cumsum(rng.normal(0, 1, 3000))))
    p2 = np.concatenate(([0.0], np.cumsum(rng.normal(0, 1, 4000))))
    tmax = t1[-1] * 0.9
    assert pure.hy_pair_sum(t1, p1, t2, p2, tmax) == compiled.hy_pair_sum(
        t1, p1, t2, p2, tmax
    )


@needs_compiled
def test_one_correlated_merge_parity(rng):
    t1 = np.concatenate(([0.0], np.cumsum(rng.exponential(1.0, 2000))))
    t2 = np.concatenate(([0.0], np.cumsum(rng.exponential(1.3, 2000))))
    np.testing.assert_array_equal(
        pure.one_correlated_merge(t1, t2), compiled.one_correlated_merge(t1, t2)
    )


def test_selected_backend_reports():
    assert kernels.BACKEND in ("compiled", "pure")
