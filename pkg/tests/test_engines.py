import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import expit

from mindex import (
    BandwidthRule,
    Dataset,
    DGPSpec,
    DivergenceError,
    GDConfig,
    StopRule,
    TruncationFloor,
    bgd_step_known_g,
    check_stop,
    compute_index,
    draw_subsample,
    generate_dataset,
    init_state,
    kbgd_step,
    kmbgd_step,
    make_kernel,
    run_akmbgd,
)
from mindex.engines import full_gradient
from mindex.nw import ratio_at_data

from conftest import logistic_design

REFERENCE_RMSE = np.array([0.0422, 0.0238, 0.0222, 0.0470, 0.1019, 0.0202, 0.0264, 0.0432, 0.0979])
FIXED_H1 = BandwidthRule(scale_mode="fixed", fixed_value=1.0)


def separated_step_data():
    # index points 1 apart, bandwidth 0.01: each NW estimate sees only itself
    x0 = np.arange(-5.0, 5.0)
    return Dataset(x0, np.zeros((10, 1)), (x0 > 0).astype(float))


def tiny_h_config(**kw):
    return GDConfig(
        bw_rule=BandwidthRule(scale_mode="fixed", fixed_value=0.01),
        floor=TruncationFloor(c_f=1e-9, selection_mode="fixed"),
        **kw,
    )


# known-link batch step


def test_known_g_zero_gradient():
    ds, _ = logistic_design(50, [0.3], seed=0)
    st_ = init_state(ds, beta0=[0.7])
    bgd_step_known_g(st_, ds, lambda z: ds.y, 1.0)
    assert st_.beta.tolist() == [0.7]


def test_known_g_single_term():
    ds = Dataset([0.0, 0.0], [[1.0], [1.0]], [1.0, 1.0])
    st_ = init_state(ds, GDConfig(bw_rule=FIXED_H1), beta0=[0.2])
    bgd_step_known_g(st_, ds, lambda z: np.full(z.shape, 0.5), 1.0)
    assert st_.beta[0] == pytest.approx(0.7, abs=1e-15)


def test_known_g_consistency():
    spec = DGPSpec(10_000, 2, "logistic", seed=1)
    ds, _ = generate_dataset(spec)
    st_ = init_state(ds, beta0=np.zeros(2))
    for _ in range(500):
        bgd_step_known_g(st_, ds, expit, 1.0)
    assert np.linalg.norm(st_.beta - spec.beta) < 0.1


def test_divergence_reports_iteration_and_norm():
    ds, _ = logistic_design(200, [1.0], seed=2, x_scale=100.0)
    st_ = init_state(ds, beta0=[-1.0])
    with pytest.raises(DivergenceError) as ei:
        for _ in range(50):
            bgd_step_known_g(st_, ds, expit, 1e6)
    assert ei.value.k >= 1 and ei.value.norm > 1e6


# full-sample kernel step


def test_kbgd_fixed_point_on_separated_step():
    ds = separated_step_data()
    st_ = init_state(ds, tiny_h_config(), beta0=[0.3])
    kbgd_step(st_, ds, tiny_h_config())
    assert st_.beta.tolist() == [0.3]


def test_kbgd_two_point_hand_oracle():
    # z = (-1/4, 1/4): self weight 3/4, cross weight K(1/2) = 9/16
    # G = (4/7, 3/7); gradient = 1/2 [(-3/7)(-1/2) + (3/7)(1/2)] = 3/14
    ds = Dataset([0.0, 0.0], [[-0.5], [0.5]], [1.0, 0.0])
    cfg = GDConfig(kernel=make_kernel(2), bw_rule=FIXED_H1)
    st_ = init_state(ds, cfg, beta0=[0.5])
    kbgd_step(st_, ds, cfg)
    assert abs(st_.beta[0] - 2.0 / 7.0) < 1e-12


def test_kbgd_fast_equals_naive():
    ds, _ = logistic_design(800, [1.0, -0.5, 0.25], seed=3)
    out = []
    for method in ("fast", "naive"):
        cfg = GDConfig(method=method)
        st_ = init_state(ds, cfg, beta0=[0.9, -0.4, 0.2])
        kbgd_step(st_, ds, cfg)
        out.append(st_.beta)
    assert np.max(np.abs(out[0] - out[1])) < 1e-10


# subsample draws


def test_draw_single_point_population():
    ds, _ = logistic_design(20, [1.0], seed=4)
    st_ = init_state(ds, beta0=[1.0])
    assert draw_subsample(st_, 1, 7).indices.tolist() == [0] * 7


def test_draws_reproducible():
    ds, _ = logistic_design(20, [1.0], seed=4)
    seqs = []
    for _ in range(2):
        st_ = init_state(ds, GDConfig(seed=99), beta0=[1.0])
        seqs.append([draw_subsample(st_, 20, 5).indices.tolist() for _ in range(4)])
    assert seqs[0] == seqs[1]
    assert seqs[0][0] != seqs[0][1]


def test_draw_frequencies():
    ds, _ = logistic_design(20, [1.0], seed=4)
    st_ = init_state(ds, GDConfig(seed=5), beta0=[1.0])
    idx = draw_subsample(st_, 10, 100_000).indices
    counts = np.bincount(idx, minlength=10)
    sigma = np.sqrt(100_000 * 0.1 * 0.9)
    assert idx.shape == (100_000,) and idx.min() >= 0 and idx.max() < 10
    assert np.all(np.abs(counts - 10_000) < 4 * sigma)


# mini-batch step


def test_identity_draw_equals_kbgd_bitwise():
    ds, _ = logistic_design(600, [1.0, -0.5], seed=6)
    cfg = GDConfig(floor=TruncationFloor(c_f=1e-12, selection_mode="fixed"))
    a = init_state(ds, cfg, beta0=[0.8, -0.3])
    b = init_state(ds, cfg, beta0=[0.8, -0.3])
    kbgd_step(a, ds, cfg)
    kmbgd_step(b, ds, cfg, indices=np.arange(ds.n))
    assert np.array_equal(a.beta, b.beta)


def test_kmbgd_fixed_point_on_separated_step():
    ds = separated_step_data()
    cfg = tiny_h_config(B=4, seed=1)
    st_ = init_state(ds, cfg, beta0=[0.3])
    for _ in range(5):
        kmbgd_step(st_, ds, cfg)
    assert st_.beta.tolist() == [0.3]


def enumerate_b1(ds, beta, h, kernel):
    """Average of the B=1 gradients over all n draws, with the full-sample link held fixed."""
    z = compute_index(ds, beta).z
    g_hat = ratio_at_data(z, ds.y, h, kernel)
    r = g_hat - ds.y
    per_draw = [full_gradient(r[[i]], ds.x[[i]]) for i in range(ds.n)]
    return np.sum(per_draw, axis=0) / ds.n, full_gradient(r, ds.x) / ds.n


def test_b1_enumeration_two_points():
    ds = Dataset([0.1, -0.4], [[0.5], [2.0]], [1.0, 0.0])
    avg, full = enumerate_b1(ds, np.array([0.3]), 1.0, make_kernel(2))
    assert np.array_equal(avg, full)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 60), st.integers(1, 4), st.integers(0, 2**31))
def test_b1_enumeration_matches_full_gradient(n, p, seed):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n).astype(float)
    ds = Dataset(rng.normal(size=n), rng.normal(size=(n, p)), y)
    avg, full = enumerate_b1(ds, rng.normal(size=p), 0.8, make_kernel(6))
    assert np.max(np.abs(avg - full)) < 1e-12


# averaging and stopping


def test_degenerate_average_is_second_iterate():
    ds, _ = logistic_design(300, [1.0], seed=7)
    cfg = GDConfig(B=100, burn_in=0, follow_T=1)
    est = run_akmbgd(ds, cfg, beta0=[0.8], record_trace=True)
    assert est.trace.shape == (2, 1)
    assert np.array_equal(est.beta_bar, est.trace[1])


def test_constant_iterates_average_to_start():
    ds = separated_step_data()
    est = run_akmbgd(ds, tiny_h_config(B=5, burn_in=3, follow_T=4), beta0=[0.3])
    assert est.beta_bar.tolist() == [0.3] and est.averaged == 4


def test_accumulator_matches_trace_mean():
    ds, _ = logistic_design(500, [1.0, -0.5], seed=8)
    cfg = GDConfig(B=200, burn_in=30, follow_T=70, seed=3)
    est = run_akmbgd(ds, cfg, beta0=[0.9, -0.4], record_trace=True)
    recomputed = est.trace[cfg.burn_in + 1 :].mean(axis=0)
    assert est.trace.shape[0] == cfg.burn_in + cfg.follow_T + 1
    np.testing.assert_allclose(est.beta_bar, recomputed, rtol=0, atol=1e-12)


def test_accumulator_count_invariant():
    ds, _ = logistic_design(300, [1.0], seed=9)
    cfg = GDConfig(B=100, burn_in=5)
    st_ = init_state(ds, cfg, beta0=[1.0])
    for k in range(1, 12):
        kmbgd_step(st_, ds, cfg)
        assert st_.avg_count == max(0, k - cfg.burn_in)


def test_run_is_deterministic():
    ds, _ = logistic_design(500, [1.0, -0.5], seed=10)
    cfg = GDConfig(B=150, burn_in=20, follow_T=30, seed=17)
    a = run_akmbgd(ds, cfg, beta0=[1.0, -0.5])
    b = run_akmbgd(ds, cfg, beta0=[1.0, -0.5])
    assert np.array_equal(a.beta_bar, b.beta_bar)


def test_trace_stream_reports_errors():
    ds, _ = logistic_design(300, [1.0], seed=11)
    seen = []
    run_akmbgd(ds, GDConfig(B=100, burn_in=2, follow_T=3), beta0=[1.0], truth=[1.0], on_step=seen.append)
    assert [r.k for r in seen] == [1, 2, 3, 4, 5]
    assert all(r.error is not None and r.error >= 0 for r in seen)
    assert all(b.seconds >= a.seconds for a, b in zip(seen, seen[1:]))


def make_ring_state(iterates, stop):
    ds = separated_step_data()
    st_ = init_state(ds, GDConfig(stop=stop, bw_rule=FIXED_H1), beta0=[iterates[0]])
    for v in iterates[1:]:
        st_.ring.push(np.array([v]))
    return st_


def test_stop_fires_on_identical_iterates():
    stop = StopRule(window_T=3, gap=2, rho=1e-3)
    assert not check_stop(make_ring_state([1.0] * 4, stop), stop)
    assert check_stop(make_ring_state([1.0] * 5, stop), stop)


def test_stop_never_fires_on_drift():
    stop = StopRule(window_T=4, gap=3, rho=1e-3)
    drift = list(np.arange(40) * 2e-3)
    assert not any(check_stop(make_ring_state(drift[: m + 1], stop), stop) for m in range(40))


def test_stop_strict_inequality():
    stop = StopRule(window_T=1, gap=1, rho=0.5)
    assert not check_stop(make_ring_state([0.0, 0.5], stop), stop)
    assert check_stop(make_ring_state([0.0, 0.25], stop), stop)


def test_run_with_stop_rule():
    ds = separated_step_data()
    cfg = tiny_h_config(B=5, stop=StopRule(window_T=3, gap=2), max_iters=50)
    est = run_akmbgd(ds, cfg, beta0=[0.3])
    assert est.stopped and est.warning is None and est.n_updates == 4 and est.averaged == 5


def test_stop_rule_exhaustion_warns():
    ds, _ = logistic_design(300, [1.0], seed=12)
    cfg = GDConfig(B=100, stop=StopRule(window_T=5, gap=5, rho=1e-12), max_iters=20)
    est = run_akmbgd(ds, cfg, beta0=[1.0])
    assert est.stopped is False and "did not fire" in est.warning


@pytest.mark.slow
def test_desk_scale_run_close_to_truth():
    spec = DGPSpec(5000, 10, "logistic", seed=21)
    ds, _ = generate_dataset(spec)
    est = run_akmbgd(ds, GDConfig(B=1000, burn_in=2000, follow_T=3000, seed=21))
    tol = 4 * np.sqrt(25_000 / 5000) * np.r_[REFERENCE_RMSE, REFERENCE_RMSE.max()]
    assert np.all(np.abs(est.beta_bar - spec.beta) <= tol)
    z_hat = compute_index(ds, est.beta_bar).z
    assert np.mean((2 * ds.y - 1) * z_hat > 0) > 0.5
