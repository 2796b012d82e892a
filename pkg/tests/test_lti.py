import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcmg.errors import (
    DimensionMismatch,
    NonFinite,
    NonPositiveInput,
    NonSquare,
    RankDeficient,
)
from dcmg.lti import discretize_zoh, left_pinv, matrix_exponential
from oracles import expm_series, zoh_series

RNG = np.random.default_rng(20240817)


# ---------------------------------------------------------------------------
# matrix_exponential


def test_expm_zero_matrix_is_identity():
    assert np.array_equal(matrix_exponential(np.zeros((3, 3))), np.eye(3))


def test_expm_diagonal_case():
    m = np.diag([0.3, -1.7])
    expected = np.diag(np.exp([0.3, -1.7]))
    assert np.allclose(matrix_exponential(m), expected, rtol=0, atol=1e-14)


def test_expm_matches_series_oracle_small_norm():
    # random 4x4 with ||m|| <= 1 against a 50-term series
    for _ in range(20):
        m = RNG.standard_normal((4, 4))
        m /= max(1.0, np.linalg.norm(m, 2))
        diff = matrix_exponential(m) - expm_series(m, terms=50)
        assert np.max(np.abs(diff)) < 1e-12


def test_expm_inverse_property():
    # exp(m) exp(-m) = I; the achievable accuracy degrades like e^(2||m||)
    for norm, tol in ((5.0, 1e-9), (10.0, 1e-7)):
        for _ in range(20):
            m = RNG.standard_normal((5, 5))
            m *= norm / np.linalg.norm(m, 2)
            prod = matrix_exponential(m) @ matrix_exponential(-m)
            assert np.max(np.abs(prod - np.eye(5))) < tol


def test_expm_rejects_nonsquare_and_nonfinite():
    with pytest.raises(NonSquare):
        matrix_exponential(np.zeros((2, 3)))
    with pytest.raises(NonSquare):
        matrix_exponential(np.zeros(4))
    bad = np.zeros((2, 2))
    bad[0, 1] = np.nan
    with pytest.raises(NonFinite):
        matrix_exponential(bad)


# ---------------------------------------------------------------------------
# discretize_zoh


def test_zoh_integrator_case():
    # a_c = 0: pure integrator, A = I and B = ts * b_c
    b_c = np.array([[2.0], [0.5], [-1.0]])
    dm = discretize_zoh(np.zeros((3, 3)), b_c, np.zeros((3, 0)), 1e-3)
    assert np.allclose(dm.a, np.eye(3), rtol=0, atol=1e-15)
    assert np.allclose(dm.b, 1e-3 * b_c, rtol=1e-12, atol=0)
    assert dm.e.shape == (3, 0)


def test_zoh_scalar_decay():
    dm = discretize_zoh(
        np.array([[-200.0]]), np.zeros((1, 1)), np.zeros((1, 1)), 1e-4
    )
    assert abs(dm.a[0, 0] - np.exp(-0.02)) < 1e-12
    assert abs(dm.a[0, 0] - 0.98019867) < 1e-7


def test_zoh_matches_series_oracle_random():
    for _ in range(10):
        a_c = RNG.standard_normal((4, 4)) * 50.0
        b_c = RNG.standard_normal((4, 2))
        e_c = RNG.standard_normal((4, 1))
        dm = discretize_zoh(a_c, b_c, e_c, 1e-3)
        a_o, b_o, e_o = zoh_series(a_c, b_c, e_c, 1e-3)
        assert np.max(np.abs(dm.a - a_o)) < 1e-9
        assert np.max(np.abs(dm.b - b_o)) < 1e-9
        assert np.max(np.abs(dm.e - e_o)) < 1e-9


def test_zoh_semigroup_property():
    a_c = RNG.standard_normal((5, 5)) * 100.0
    b_c = RNG.standard_normal((5, 2))
    e_c = RNG.standard_normal((5, 1))
    full = discretize_zoh(a_c, b_c, e_c, 2e-4)
    half = discretize_zoh(a_c, b_c, e_c, 1e-4)
    assert np.max(np.abs(full.a - half.a @ half.a)) < 1e-9
    assert np.max(np.abs(full.b - (half.a @ half.b + half.b))) < 1e-9
    assert np.max(np.abs(full.e - (half.a @ half.e + half.e))) < 1e-9


@settings(max_examples=60, deadline=None)
@given(
    lams=st.lists(
        st.floats(min_value=-2000.0, max_value=-1e-3), min_size=1, max_size=5
    ),
    ts=st.floats(min_value=1e-6, max_value=1e-2),
)
def test_zoh_diagonal_closed_form(lams, ts):
    # decoupled stable states have the closed form A = e^(lam ts),
    # B = (e^(lam ts) - 1)/lam per state
    lam = np.array(lams)
    a_c = np.diag(lam)
    b_c = np.ones((lam.size, 1))
    dm = discretize_zoh(a_c, b_c, np.zeros((lam.size, 0)), ts)
    assert np.allclose(np.diag(dm.a), np.exp(lam * ts), rtol=1e-10, atol=0)
    expected_b = (np.exp(lam * ts) - 1.0) / lam
    assert np.allclose(dm.b[:, 0], expected_b, rtol=1e-9, atol=1e-18)


def test_zoh_rejects_bad_inputs():
    a = np.zeros((2, 2))
    b = np.zeros((2, 1))
    e = np.zeros((2, 1))
    with pytest.raises(NonPositiveInput):
        discretize_zoh(a, b, e, 0.0)
    with pytest.raises(NonPositiveInput):
        discretize_zoh(a, b, e, -1e-4)
    with pytest.raises(NonSquare):
        discretize_zoh(np.zeros((2, 3)), b, e, 1e-4)
    with pytest.raises(DimensionMismatch):
        discretize_zoh(a, np.zeros((3, 1)), e, 1e-4)
    with pytest.raises(DimensionMismatch):
        discretize_zoh(a, b, np.zeros((3, 1)), 1e-4)


# ---------------------------------------------------------------------------
# left_pinv


def test_left_pinv_unit_column():
    e1 = np.array([[1.0], [0.0], [0.0]])
    assert np.allclose(left_pinv(e1), e1.T, rtol=0, atol=1e-15)


def test_left_pinv_identity():
    assert np.allclose(left_pinv(np.eye(4)), np.eye(4), rtol=0, atol=1e-14)


def test_left_pinv_reconstructs_identity():
    for _ in range(10):
        m = RNG.standard_normal((6, 3))
        assert np.max(np.abs(left_pinv(m) @ m - np.eye(3))) < 1e-10


def test_left_pinv_duplicate_columns_rejected():
    col = RNG.standard_normal((4, 1))
    with pytest.raises(RankDeficient):
        left_pinv(np.hstack([col, col]))


def test_left_pinv_wide_matrix_rejected():
    with pytest.raises(RankDeficient):
        left_pinv(np.ones((2, 3)))


def test_left_pinv_zero_columns_degenerate():
    out = left_pinv(np.zeros((3, 0)))
    assert out.shape == (0, 3)


def test_left_pinv_rejects_non_2d():
    with pytest.raises(DimensionMismatch):
        left_pinv(np.ones(3))
