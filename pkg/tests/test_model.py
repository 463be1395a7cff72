import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from mindex import Dataset, TrimmingSpec, UsageError, compute_index, trimming_mask


def test_index_zero_covariates():
    d = Dataset([1.0, 2.0], [[0.0], [0.0]], [0, 1])
    assert compute_index(d, [5.0]).z.tolist() == [1.0, 2.0]


def test_index_hand_arithmetic():
    d = Dataset([0.0, 0.0], [[1.0], [2.0]], [0, 1])
    assert compute_index(d, [3.0]).z.tolist() == [3.0, 6.0]


def test_index_two_columns():
    # single-row example padded with a second row (n >= 2 is required)
    d = Dataset([1.0, 1.0], [[2.0, 3.0], [2.0, 3.0]], [0, 1])
    assert compute_index(d, [0.5, -1.0]).z[0] == -1.0


def test_index_dimension_mismatch():
    d = Dataset([0.0, 0.0], [[1.0], [2.0]], [0, 1])
    with pytest.raises(UsageError):
        compute_index(d, [1.0, 2.0])


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(x0=[0.0], x=[[1.0]], y=[1]),
        dict(x0=[0.0, 1.0], x=[[1.0], [np.nan]], y=[1, 0]),
        dict(x0=[0.0, 1.0], x=[[1.0], [2.0]], y=[1, 2]),
        dict(x0=[0.0, 1.0], x=np.zeros((2, 0)), y=[1, 0]),
        dict(x0=[0.0, 1.0, 2.0], x=[[1.0], [2.0]], y=[1, 0]),
    ],
)
def test_dataset_rejects_invalid(kwargs):
    with pytest.raises(UsageError):
        Dataset(**kwargs)


def test_dataset_is_read_only():
    d = Dataset([0.0, 1.0], [[1.0], [2.0]], [0, 1])
    with pytest.raises(ValueError):
        d.x[0, 0] = 5.0


def test_mask_none_all_ones():
    d = Dataset([0.0, 7.0, -3.0], [[9.0], [0.0], [1.0]], [0, 1, 1])
    assert trimming_mask(d, TrimmingSpec()).tolist() == [1.0, 1.0, 1.0]


def test_mask_box():
    d = Dataset([0.4, 0.9], [[0.0], [0.0]], [0, 1])
    assert trimming_mask(d, TrimmingSpec("box", phi=0.5)).tolist() == [1.0, 0.0]


def test_mask_quantile_grid():
    g = np.linspace(0.0, 1.0, 10)
    d = Dataset(g, g[:, None], np.r_[np.zeros(5), np.ones(5)])
    m = trimming_mask(d, TrimmingSpec("quantile", lo=0.1, hi=0.9))
    assert m.tolist() == [0.0] + [1.0] * 8 + [0.0]


@pytest.mark.parametrize(
    "kwargs",
    [dict(mode="box", phi=1.0), dict(mode="box", phi=-0.1), dict(mode="quantile", lo=0.5, hi=0.5), dict(mode="odd")],
)
def test_trimming_spec_validation(kwargs):
    with pytest.raises(UsageError):
        TrimmingSpec(**kwargs)


def test_box_phi_zero_masks_only_outside_unit_box():
    rng = np.random.default_rng(0)
    x0 = rng.uniform(-1.5, 1.5, 200)
    x = rng.uniform(-1.5, 1.5, (200, 2))
    d = Dataset(x0, x, rng.integers(0, 2, 200))
    m = trimming_mask(d, TrimmingSpec("box", phi=0.0))
    outside = np.any(np.abs(d.xe) > 1.0, axis=1)
    assert np.array_equal(m == 0.0, outside)


def test_mask_idempotent():
    rng = np.random.default_rng(1)
    d = Dataset(rng.normal(size=50), rng.normal(size=(50, 3)), rng.integers(0, 2, 50))
    spec = TrimmingSpec("quantile", lo=0.05, hi=0.95)
    assert np.array_equal(trimming_mask(d, spec), trimming_mask(d, spec))


small_ints = st.integers(-4, 4)


@settings(max_examples=60, deadline=None)
@given(
    hnp.arrays(np.float64, (6, 3), elements=st.integers(-8, 8).map(float)),
    hnp.arrays(np.float64, 3, elements=st.integers(-5, 5).map(float)),
    hnp.arrays(np.float64, 3, elements=st.integers(-5, 5).map(float)),
    small_ints,
    small_ints,
)
def test_index_linear_in_beta(x, b1, b2, a, b):
    x0 = np.arange(6, dtype=float) - 2.5
    d = Dataset(x0, x, np.r_[np.zeros(3), np.ones(3)])
    lhs = compute_index(d, a * b1 + b * b2).z
    rhs = a * compute_index(d, b1).z + b * compute_index(d, b2).z + (1 - a - b) * x0
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-9)


def test_index_of_row_subset_is_bitwise_equal():
    rng = np.random.default_rng(2)
    d = Dataset(rng.normal(size=100), rng.normal(size=(100, 7)), rng.integers(0, 2, 100))
    beta = rng.normal(size=7)
    rows = rng.integers(0, 100, 40)
    assert np.array_equal(compute_index(d, beta).z[rows], compute_index(d.subset(rows), beta).z)
