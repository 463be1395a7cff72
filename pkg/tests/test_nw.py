import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from mindex import (
    TruncationFloor,
    UsageError,
    fast_window_eval,
    make_kernel,
    naive_eval,
    nw_conditional_mean,
    nw_deriv,
    nw_full,
    nw_subsample_truncated,
    resolve_floor,
)
from mindex.nw import kernel_components, ratio_at_data

K2, K6 = make_kernel(2), make_kernel(6)


def test_constant_response():
    rng = np.random.default_rng(0)
    z = rng.normal(size=50)
    g = nw_full(np.linspace(-1, 1, 9), z, np.full(50, 0.3), 0.8, K6)
    assert not g.mask.any()
    np.testing.assert_allclose(g.data, 0.3, rtol=1e-12)


def test_single_point():
    assert nw_full([0.0], [0.0], [1.0], 1.0, K2)[0] == 1.0


def test_two_points_hand_weights():
    c = kernel_components([0.0], [-0.5, 0.5], [0.0, 1.0], 1.0, K2)
    assert c.den[0] == pytest.approx((0.5625 + 0.5625) / 2)
    assert nw_full([0.0], [-0.5, 0.5], [0.0, 1.0], 1.0, K2)[0] == pytest.approx(0.5, abs=1e-15)


def test_zero_denominator_is_masked_not_nan():
    g = nw_full([0.0, 10.0], [0.0, 0.2], [1.0, 0.0], 0.5, K2)
    assert g.mask.tolist() == [False, True]
    assert np.all(np.isfinite(g.data))


@pytest.mark.parametrize("h", [0.0, -1.0, np.nan])
def test_bad_bandwidth(h):
    with pytest.raises(UsageError):
        nw_full([0.0], [0.0], [1.0], h, K2)


def test_truncated_equals_full_when_inactive():
    rng = np.random.default_rng(1)
    z = rng.normal(size=300)
    y = (z + rng.normal(size=300) > 0).astype(float)
    full = nw_full(z, z, y, 0.9, K6)
    den = kernel_components(z, z, y, 0.9, K6).den
    sub = nw_subsample_truncated(z, z, y, 0.9, K6, 0.5 * den.min())
    assert den.min() > 0
    assert np.array_equal(sub, full.data)


def test_truncated_far_point():
    assert nw_subsample_truncated([0.0], [5.0], [1.0], 1.0, K2, 0.1)[0] == 0.0


def test_truncated_active_floor():
    floor = TruncationFloor(c_f=2.0, selection_mode="fixed")
    assert nw_subsample_truncated([0.0], [0.0], [1.0], 1.0, K2, floor)[0] == 0.375


def test_truncated_empty_subsample():
    with pytest.raises(UsageError):
        nw_subsample_truncated([0.0], [], [], 1.0, K2, 0.1)


def test_truncated_is_bounded_by_floor():
    rng = np.random.default_rng(2)
    z = rng.standard_cauchy(200)
    y = rng.integers(0, 2, 200).astype(float)
    h, cf = 0.3, 1e-3
    g = nw_subsample_truncated(np.linspace(-50, 50, 500), z, y, h, K6, cf)
    assert np.all(np.isfinite(g))
    # |num| <= sup|K| / h, so |G| <= sup|K| / (h c_f)
    assert np.max(np.abs(g)) <= K6.k0 / (h * cf)


def test_deriv_constant_y():
    z = np.linspace(-2, 2, 40)
    d = nw_deriv(np.linspace(-1.5, 1.5, 7), z, np.ones(40), 0.7, K6)
    np.testing.assert_allclose(d.compressed(), 0.0, atol=1e-12)


def test_deriv_two_point_finite_difference():
    a, h, eps = 0.4, 1.0, 1e-6
    z, y = np.array([-a, a]), np.array([0.0, 1.0])
    d = nw_deriv([0.0], z, y, h, K2)[0]
    fd = (nw_full([eps], z, y, h, K2)[0] - nw_full([-eps], z, y, h, K2)[0]) / (2 * eps)
    assert abs(d - fd) < 1e-5


def test_deriv_linear_function():
    z = np.linspace(0.0, 1.0, 2001)
    d = nw_deriv(np.linspace(0.3, 0.7, 9), z, z, 0.05, K2)
    np.testing.assert_allclose(d.compressed(), 1.0, atol=0.05)


def test_conditional_mean_constant_and_identity():
    z = np.linspace(0.0, 1.0, 2001)
    cols = np.column_stack([np.full(z.size, 4.0), z])
    ev = np.linspace(0.2, 0.8, 13)
    m = nw_conditional_mean(ev, z, cols, 0.05, K6)
    np.testing.assert_allclose(m[:, 0], 4.0, rtol=1e-12)
    np.testing.assert_allclose(m[:, 1], ev, atol=0.05)


def test_conditional_mean_no_columns():
    m = nw_conditional_mean([0.0, 1.0], [0.0, 0.5], np.zeros((2, 0)), 1.0, K2)
    assert m.shape == (2, 0)


def test_fast_equals_naive_on_random_instances():
    rng = np.random.default_rng(3)
    for _ in range(50):
        m = int(rng.integers(1, 400))
        z = rng.standard_cauchy(m) if rng.random() < 0.3 else rng.normal(size=m)
        w = rng.normal(size=(m, int(rng.integers(1, 4))))
        ev = rng.normal(size=int(rng.integers(1, 100)))
        h = float(rng.uniform(0.05, 2.0))
        k = make_kernel(int(rng.choice([2, 4, 6])))
        f, n = fast_window_eval(ev, z, w, h, k), naive_eval(ev, z, w, h, k)
        assert np.array_equal(f.den, n.den) and np.array_equal(f.num, n.num)


def test_fast_equals_naive_when_one_window_covers_all():
    z = np.linspace(-0.1, 0.1, 50)
    f = fast_window_eval([0.0], z, z**2, 10.0, K6)
    n = naive_eval([0.0], z, z**2, 10.0, K6)
    assert np.array_equal(f.num, n.num) and np.array_equal(f.den, n.den)


def test_ratio_at_data_matches_dense_computation():
    rng = np.random.default_rng(4)
    z = np.repeat(rng.normal(size=150), 2)  # duplicates count with multiplicity
    y = rng.integers(0, 2, z.size).astype(float)
    w = np.asarray(K6((z[:, None] - z[None, :]) / 0.7))
    np.testing.assert_allclose(ratio_at_data(z, y, 0.7, K6), (w @ y) / w.sum(1), rtol=1e-10, atol=1e-12)


@pytest.mark.slow
def test_fast_path_speedup():
    rng = np.random.default_rng(5)
    z = rng.uniform(0.0, 1.0, 100_000)
    y = rng.integers(0, 2, z.size).astype(float)
    ev = z[:2000]  # naive on all 10^5 points would take minutes; the ratio is per point
    h = 0.025  # window 2h = 5% of the range
    fast_window_eval(ev[:10], z, y, h, K6), naive_eval(ev[:10], z, y, h, K6)  # compile
    t0 = time.perf_counter()
    naive_eval(ev, z, y, h, K6)
    t_naive = time.perf_counter() - t0
    t0 = time.perf_counter()
    fast_window_eval(ev, z, y, h, K6)
    t_fast = time.perf_counter() - t0
    assert t_naive / t_fast >= 5.0


def test_order2_output_within_response_range():
    rng = np.random.default_rng(6)
    z = rng.normal(size=200)
    y = rng.uniform(-2.0, 3.0, 200)
    g = nw_full(np.linspace(-3, 3, 200), z, y, 0.4, K2).compressed()
    assert g.min() >= y.min() - 1e-12 and g.max() <= y.max() + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(-50.0, 50.0), st.integers(0, 2**31))
def test_shift_equivariance(c, seed):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=60)
    y = rng.integers(0, 2, 60).astype(float)
    ev = rng.normal(size=10)
    a = nw_full(ev, z, y, 0.6, K6)
    b = nw_full(ev + c, z + c, y, 0.6, K6)
    assert np.array_equal(a.mask, b.mask)
    np.testing.assert_allclose(a.compressed(), b.compressed(), atol=1e-7)


def test_resolve_floor_fraction_of_median_density():
    rng = np.random.default_rng(7)
    z = rng.normal(size=500)
    cf = resolve_floor(TruncationFloor(fraction=0.01), z, 0.5, K2)
    den = kernel_components(z, z, np.ones(500), 0.5, K2).den
    assert cf == pytest.approx(0.01 * np.median(den))
    assert resolve_floor(TruncationFloor(c_f=0.2, selection_mode="fixed"), z, 0.5, K2) == 0.2


def test_error_shrinks_with_bandwidth():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        z = rng.uniform(-3.0, 3.0, 10_000)
        y = norm.cdf(z) + rng.uniform(-0.01, 0.01, z.size)
        grid = np.linspace(-2.4, 2.4, 97)
        errs = [np.max(np.abs(nw_full(grid, z, y, h, K2) - norm.cdf(grid))) for h in (0.5, 0.3, 0.1)]
        assert errs[0] > errs[1] > errs[2]
