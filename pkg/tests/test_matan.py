import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.linalg import expm, sqrtm

from lyapbound.errors import DegenerateMatrix, InvalidMatrix, NotPositiveDefinite
from lyapbound.gt_bounds import example_matrices
from lyapbound.matan import (
    abs_part,
    as_hermitian,
    complex_power,
    expansion_rift,
    gap_ratio,
    is_normal,
    lambda_max,
    log_abs,
    log_abs_unimodular,
    log_pd,
    matrix_exp,
    op_norm,
    pair_rift,
    singular_values,
)
from oracles import jacobi_singular_values, power_norm

SQ1000 = math.sqrt(1000.0)
ROT = np.array([[0.0, -1.0], [1.0, 0.0]])

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


def square(d):
    return arrays(np.float64, (d, d), elements=finite)


def invertible(d):
    return square(d).filter(lambda M: np.linalg.svd(M, compute_uv=False)[-1] > 1e-3)


# -- op_norm / singular values ------------------------------------------------


@pytest.mark.parametrize("d", [1, 2, 5])
def test_op_norm_identity(d):
    assert op_norm(np.eye(d)) == pytest.approx(1.0, abs=1e-15)


def test_op_norm_rotation():
    assert op_norm(ROT) == pytest.approx(1.0, abs=1e-15)


def test_op_norm_matches_power_iteration():
    M = np.array([[2.0, 1.0], [0.0, 1.0]])
    # frozen from power iteration on M^T M
    assert op_norm(M) == pytest.approx(2.2882456112707374, abs=1e-14)
    assert op_norm(M) == pytest.approx(power_norm(M), abs=1e-14)


def test_singular_values_diagonal():
    s = singular_values(np.diag([SQ1000, 1 / SQ1000]))
    assert s == pytest.approx([SQ1000, 1 / SQ1000], rel=1e-15)
    assert singular_values(np.eye(3)) == pytest.approx([1, 1, 1])


def test_singular_values_match_jacobi_oracle():
    M = np.random.default_rng(7).standard_normal((3, 3))
    assert np.allclose(singular_values(M), jacobi_singular_values(M), atol=1e-10)


def test_singular_values_det_override():
    M = np.array([[1e20, 0.0], [0.0, 1e-20]])
    assert singular_values(M, det=1.0)[1] == pytest.approx(1e-20, rel=1e-15)


@pytest.mark.parametrize("bad", [np.zeros((2, 3)), np.array([[np.nan, 0], [0, 1]]), np.zeros((0, 0))])
def test_invalid_inputs(bad):
    with pytest.raises(InvalidMatrix):
        op_norm(bad)


# -- gap ratio ----------------------------------------------------------------


def test_gap_ratio_examples():
    assert gap_ratio(np.diag([SQ1000, 1 / SQ1000])) == pytest.approx(1000.0, rel=1e-12)
    assert gap_ratio(np.eye(2)) == 1.0
    assert gap_ratio(np.diag([3.0, 2.0])) == pytest.approx(1.5)


def test_gap_ratio_rejects_rounding_level_s2():
    M = np.outer([1.0, 2.0], [3.0, 1.0]) * 1e10
    with pytest.raises(DegenerateMatrix):
        gap_ratio(M)


# -- rifts --------------------------------------------------------------------


def test_pair_rift_examples():
    assert pair_rift(np.eye(2), np.eye(2)) == pytest.approx(1.0)
    assert pair_rift(np.diag([2.0, 1.0]), np.diag([1.0, 2.0])) == pytest.approx(0.5)


def test_pair_rift_example_matrices():
    A0, A1 = example_matrices(SQ1000, SQ1000)
    direct = np.linalg.norm(A1 @ A0, 2) / (np.linalg.norm(A1, 2) * np.linalg.norm(A0, 2))
    assert pair_rift(A0, A1) == pytest.approx(direct, rel=1e-12)
    assert pair_rift(A0, A1) >= 1 / math.sqrt(2)


@settings(max_examples=50, deadline=None)
@given(st.lists(invertible(2), min_size=2, max_size=6))
def test_expansion_rift_in_unit_interval(seq):
    r = expansion_rift(seq)
    assert 0 < r <= 1 + 1e-12


# -- absolute value and logarithms -------------------------------------------


def test_abs_part_examples():
    P = np.array([[2.0, 1.0], [1.0, 3.0]])
    assert np.allclose(abs_part(P), P, atol=1e-14)
    assert np.allclose(abs_part(ROT), np.eye(2), atol=1e-15)
    M = np.array([[2.0, 1.0], [0.0, 1.0]])
    assert np.allclose(abs_part(M), sqrtm(M.T @ M).real, atol=1e-13)


def test_log_abs_examples():
    assert np.allclose(log_abs(np.eye(3)), 0.0, atol=1e-15)
    assert np.allclose(log_abs(np.diag([math.e, math.e**2])), np.diag([1.0, 2.0]), atol=1e-14)
    _, A1 = example_matrices(SQ1000, 10.0)
    c = math.sqrt(0.5)
    R = np.array([[c, -c], [c, c]])
    want = R @ np.diag([math.log(10), -math.log(10)]) @ R.T
    assert np.allclose(log_abs(A1), want, atol=1e-13)


def test_log_abs_rejects_singular():
    with pytest.raises(NotPositiveDefinite):
        log_abs(np.array([[1.0, 0.0], [0.0, 0.0]]))


def test_log_abs_unimodular_matches_log_abs():
    M = np.array([[3.0, -1.0], [1.0, 0.0]]) @ np.array([[5.0, -1.0], [1.0, 0.0]])
    la, lat = log_abs_unimodular(M / 7.0, math.log(7.0))
    assert np.allclose(la, log_abs(M), atol=1e-13)
    assert np.allclose(lat, log_abs(M.T), atol=1e-13)


def test_log_pd_and_exp_roundtrip():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((4, 4))
    H = 0.5 * (X + X.T)
    assert np.allclose(matrix_exp(H), expm(H), atol=1e-10)
    assert np.allclose(log_pd(matrix_exp(H)), H, atol=1e-10)
    assert np.allclose(matrix_exp(np.eye(2)), math.e * np.eye(2))
    assert np.allclose(matrix_exp(np.zeros((2, 2))), np.eye(2))


def test_log_pd_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        log_pd(np.diag([1.0, -1.0]))


def test_as_hermitian_relative_tolerance():
    H = np.array([[100.0, 1.0], [1.0 + 1e-11, 5.0]])
    assert np.allclose(as_hermitian(H), as_hermitian(H).T)
    with pytest.raises(InvalidMatrix):
        as_hermitian(np.array([[1.0, 1.0], [0.0, 1.0]]))


# -- lambda_max, complex powers, normality -------------------------------------


def test_lambda_max_examples():
    assert lambda_max(np.diag([1.0, 2.0, 3.0])) == 3.0
    assert lambda_max(np.zeros((2, 2))) == 0.0


@pytest.mark.parametrize("pf", [0.0, 0.3, 0.5, 1.0])
def test_lambda_max_example_combination(pf):
    a, b = SQ1000, math.exp(3.0)
    A0, A1 = example_matrices(a, b)
    H = (1 - pf) * log_abs(A1) + pf * log_abs(A0)
    want = math.hypot((1 - pf) * math.log(b), pf * math.log(a))
    assert lambda_max(H) == pytest.approx(want, abs=1e-12)


def test_complex_power_examples():
    assert np.allclose(complex_power(np.eye(2), 0.7 + 0.2j), np.eye(2))
    assert np.allclose(complex_power(np.diag([4.0]), 0.5), np.diag([2.0]))
    P = complex_power(np.diag([2.0, 3.0]), 1 + 1j)
    assert np.allclose(np.diag(P), [2 * 2**1j, 3 * 3**1j])
    assert op_norm(P) == pytest.approx(3.0)


def test_is_normal():
    assert is_normal(ROT)
    assert not is_normal(np.array([[1.0, 1.0], [0.0, 1.0]]))


# -- properties ----------------------------------------------------------------


@settings(max_examples=100, deadline=None)
@given(invertible(3))
def test_gap_ratio_invariances(M):
    g = gap_ratio(M)
    assert g >= 1.0
    assert gap_ratio(abs_part(M)) == pytest.approx(g, rel=1e-8)
    assert gap_ratio(abs_part(M.T)) == pytest.approx(g, rel=1e-8)


@settings(max_examples=100, deadline=None)
@given(square(3), square(3))
def test_norm_identity_abs_parts(A, B):
    lhs = op_norm(A @ B)
    rhs = op_norm(abs_part(A) @ abs_part(B.T))
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 4), st.floats(0.1, 4))
def test_norm_identity_normal(t1, t2, s1, s2):
    def normal(t, s):
        c, sn = math.cos(t), math.sin(t)
        return s * np.array([[c, -sn], [sn, c]]) @ np.diag([1.0, 2.0]) @ np.array([[c, sn], [-sn, c]])

    A, B = normal(t1, s1), normal(t2, s2)
    assert op_norm(A @ B) == pytest.approx(op_norm(abs_part(A.T) @ abs_part(B)), rel=1e-10)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 3, elements=st.floats(0.1, 10)), st.floats(-20, 20))
def test_complex_power_preserves_norm(w, t):
    Q = np.linalg.qr(np.random.default_rng(0).standard_normal((3, 3)))[0]
    P = Q @ np.diag(w) @ Q.T
    assert op_norm(complex_power(P, 1 + 1j * t)) == pytest.approx(op_norm(P), rel=1e-10)


@settings(max_examples=100, deadline=None)
@given(square(3), square(3))
def test_lambda_max_subadditive(X, Y):
    A, B = X + X.T, Y + Y.T
    tol = 1e-10 * (op_norm(A) + op_norm(B))
    assert lambda_max(A + B) <= lambda_max(A) + lambda_max(B) + tol
