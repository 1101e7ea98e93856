import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lyapbound.errors import DomainError, HypothesisNotMet, NearSingularArgument
from lyapbound.schrodinger import (
    ADJOINT_UNITARY,
    adjoint_identity_check,
    admissible_point,
    b0_threshold,
    block_alignment_deficit,
    block_norm_bounds,
    block_statistics,
    check_angles,
    eigenvalues,
    f_bounds,
    f_function,
    log_f_real,
    log_norm_word,
    mu_of,
    polymer_certificate,
    polymer_lower_bound,
    power_via_F,
    spectral_points,
    transfer,
    word_indices,
)
from lyapbound.dynamics import polymer_block_matrices
from oracles import chebyshev_power, cofactor_det, naive_product, norm_2x2


def f_sum(z, q):
    """``F_q`` as the finite geometric sum ``sum_j z**(q-1-2j)``."""
    return sum(z ** (q - 1 - 2 * j) for j in range(q))


# -- basic objects ------------------------------------------------------------------


def test_transfer_and_eigenvalues():
    A = transfer(0.3)
    assert np.array_equal(A, [[0.3, -1.0], [1.0, 0.0]])
    assert cofactor_det(A) == 1.0
    l1, l2 = eigenvalues(0.3)
    assert abs(l1 * l2 - 1) < 1e-14 and abs(l1 + l2 - 0.3) < 1e-14
    with pytest.raises(DomainError):
        transfer(math.inf)


@pytest.mark.parametrize("z", [2.0, -3.5, 1.2, np.exp(0.7j), 0.5 + 0.8j])
@pytest.mark.parametrize("q", [1, 2, 5, 12])
def test_f_function_against_geometric_sum(z, q):
    assert f_function(z, q) == pytest.approx(f_sum(complex(z), q), rel=1e-11, abs=1e-12)


def test_f_function_symmetries():
    assert f_function(2.0, 0) == 0.0
    assert f_function(2.0, -3) == -f_function(2.0, 3)
    assert f_function(2.0, 3) == pytest.approx(5.25)
    for z in (0.0, 1.0, -1.0):
        with pytest.raises(NearSingularArgument):
            f_function(z, 3)


def test_log_f_real():
    assert log_f_real(3.0, 5) == pytest.approx(math.log(f_sum(3.0, 5)), rel=1e-14)
    assert log_f_real(1e100, 20) == pytest.approx(19 * math.log(1e100), rel=1e-12)
    with pytest.raises(DomainError):
        log_f_real(1.0, 2)


@pytest.mark.parametrize("a", [0.0, 0.3, -1.7, 1.99, 2.5, -3.0, 10.0])
@pytest.mark.parametrize("p", [0, 1, 2, 7, 20])
def test_power_via_F_matches_repeated_squaring(a, p):
    got = power_via_F(a, p)
    want = chebyshev_power(a, p)
    scale = max(1.0, np.abs(want).max())
    assert np.abs(got - want).max() <= 1e-10 * scale


def test_power_via_F_guards():
    with pytest.raises(NearSingularArgument):
        power_via_F(2.0, 3)
    with pytest.raises(DomainError):
        power_via_F(10.0, 400)
    with pytest.raises(DomainError):
        power_via_F(1.0, -1)


@settings(max_examples=60, deadline=None)
@given(st.floats(-1.98, 1.98), st.integers(1, 40))
def test_power_determinant_is_one(a, p):
    assert cofactor_det(power_via_F(a, p)) == pytest.approx(1.0, abs=1e-8 * p**2)


# -- F brackets -----------------------------------------------------------------------


def test_f_bounds_real_branch():
    lo, hi = f_bounds(3.0, 6, x0=2.0)
    assert lo <= f_sum(3.0, 6) <= hi
    with pytest.raises(HypothesisNotMet):
        f_bounds(1.5, 6, x0=2.0)


def test_f_bounds_unit_circle():
    z = np.exp(1j * 0.9)
    lo, hi = f_bounds(z, 4, delta1=0.5, delta2=0.2)
    assert lo == 0.1 and hi == 4.0
    assert lo <= abs(f_sum(z, 4)) <= hi
    with pytest.raises(HypothesisNotMet):
        f_bounds(np.exp(0.1j), 4, delta1=0.5, delta2=0.2)
    with pytest.raises(HypothesisNotMet):
        f_bounds(0.5 + 0.1j, 4, delta1=0.5, delta2=0.2)


# -- admissibility ----------------------------------------------------------------------


def test_b0_threshold_formula():
    c = (20 / 9) ** 8
    want = 1 + max(4, c / 0.3, c / 0.09, (1e6 / 0.6) ** (2 / 9), (160 / 4.5) ** 2.5)
    assert b0_threshold(5, 0.5, 0.6) == pytest.approx(want, rel=1e-15)
    with pytest.raises(DomainError):
        b0_threshold(1, 0.5, 0.5)
    with pytest.raises(DomainError):
        b0_threshold(3, 0.0, 0.5)


def test_check_angles():
    th = check_angles(0.0, 2, 0.5, 0.5)
    assert th == pytest.approx(math.pi / 2)
    with pytest.raises(HypothesisNotMet):
        check_angles(0.0, 1, 0.5, 0.5)  # 2 * pi/2 sits on pi Z
    with pytest.raises(HypothesisNotMet):
        check_angles(1.99, 3, 0.5, 0.1)
    with pytest.raises(DomainError):
        check_angles(2.0, 3, 0.5, 0.5)


def test_spectral_points():
    pts = spectral_points(3)
    assert len(pts) == 3
    assert pts[1][0] == pytest.approx(0.0, abs=1e-15)
    assert pts[2][1] == pytest.approx(54 / 3**1.5)


def test_mu_of():
    assert mu_of(2.5) == 2.0
    with pytest.raises(DomainError):
        mu_of(2.0)


def test_admissible_point_is_admissible():
    for p in (3, 6, 11, 20):
        E, v, d1, d2 = admissible_point(p)
        check_angles(E, p, d1, d2)
        b0 = b0_threshold(p, d1, d2)
        assert v >= b0 + E - 1e-12 and E + v >= b0 - 1e-12


# -- words and block norms ----------------------------------------------------------------


def test_word_indices_read_right_to_left():
    assert word_indices("A^2 B^1", 5).tolist() == [1, 0, 0]
    assert word_indices("B^2p A^p", 2).tolist() == [0, 0, 1, 1, 1, 1]
    assert word_indices("A B", 3).tolist() == [1, 0]


def test_log_norm_word_matches_naive_product():
    a, b = 0.4, 7.0
    mats = [transfer(a) if s == 0 else transfer(b) for s in word_indices("A^p B^p A^3 B^2", 4)]
    want = math.log(norm_2x2(naive_product(mats)))
    assert log_norm_word(a, b, "A^p B^p A^3 B^2", 4) == pytest.approx(want, rel=1e-13)


def test_block_norm_brackets_at_admissible_point():
    E, v, d1, d2 = admissible_point(11)
    out = block_norm_bounds(E, v, 11, 5, d1, d2)
    assert set(out) == {"B^q", "A^p B^q", "B^2p A^p B^p", "A^p B^p A^p B^p"}
    assert all(br.ok for br in out.values())
    assert out["B^q"].log_measured == pytest.approx(28.25738625349883, rel=1e-12)


def test_block_norm_requires_b0():
    E, v, d1, d2 = admissible_point(11)
    with pytest.raises(HypothesisNotMet):
        block_norm_bounds(E, v - 10, 11, 5, d1, d2)


def test_adjoint_identity():
    U = ADJOINT_UNITARY
    A = transfer(1.3)
    assert np.allclose(U @ A @ U, A.T)
    seq = [transfer(x) for x in (0.1, 5.0, -3.0, 1.9, 40.0)]
    assert adjoint_identity_check(seq) <= 1e-12
    rng = np.random.default_rng(0)
    assert adjoint_identity_check(list(rng.standard_normal((5, 2, 2)))) > 1e-6


# -- certificate and bound ----------------------------------------------------------------


def test_certificate_constants():
    E, v, d1, d2 = admissible_point(11)
    cert = polymer_certificate(E, v, 11, d1, d2)
    assert cert.eps == pytest.approx(1e-4)
    assert cert.log_kappa == pytest.approx(2 * math.log(5 / d2) - 22 * math.log(mu_of(E + v)))
    stats = block_statistics(E, v, 11)
    assert min(stats["log_gr_X"], stats["log_gr_Y"]) >= -cert.log_kappa
    assert min(val for k, val in stats.items() if "rho" in k) >= math.log(cert.eps)


def test_polymer_bound_at_p11():
    E, v, d1, d2 = admissible_point(11)
    b = polymer_lower_bound(E, v, 11, 0.6, d1, d2)
    assert b.value == pytest.approx(18.64985864307096, rel=1e-10)
    assert b.value == pytest.approx(0.3 * 11 * math.log(mu_of(E + v)), rel=1e-14)
    assert b.extras["exact_bound"] == pytest.approx(99.07388010497615, rel=1e-8)
    assert b.extras["alpha"] == pytest.approx(0.009304385800389836, rel=1e-6)
    assert b.value <= b.extras["exact_bound"]
    assert b.extras["chain_closes"]


def test_polymer_bound_rejects_small_pfrak():
    E, v, d1, d2 = admissible_point(11)
    with pytest.raises(HypothesisNotMet):
        polymer_lower_bound(E, v, 11, 0.4, d1, d2)


def test_bp_ap_relation():
    # B^p A^p = U (A^p B^p)^T U, so both blocks have the same norm.
    a, b, p = 0.3, 9.0, 4
    Ap = chebyshev_power(a, p)
    Bp = chebyshev_power(b, p)
    U = ADJOINT_UNITARY
    assert np.allclose(Bp @ Ap, U @ (Ap @ Bp).T @ U, rtol=1e-12)
    assert log_norm_word(a, b, "B^p A^p", p) == pytest.approx(log_norm_word(a, b, "A^p B^p", p), rel=1e-13)


@settings(max_examples=80, deadline=None)
@given(st.floats(0.301, math.pi - 0.301), st.integers(1, 60))
def test_f_bounds_hold_on_unit_circle(th, q):
    # slack keeps roundoff in the phase away from the hypothesis edge
    d2 = min(0.999 * abs(math.remainder(q * th, math.pi)), 1.5)
    if d2 < 1e-6:
        return
    lo, hi = f_bounds(np.exp(1j * th), q, delta1=0.3, delta2=d2)
    assert lo <= abs(math.sin(q * th) / math.sin(th)) <= hi


def test_adjoint_identity_holds_for_single_matrix_powers():
    blocks = polymer_block_matrices(0.3, 40.0, 5)
    assert adjoint_identity_check([blocks["-"], power_via_F(0.3, 5)]) < 1e-12


def test_adjoint_identity_fails_for_mixed_blocks():
    blocks = polymer_block_matrices(0.3, 40.0, 5)
    assert adjoint_identity_check([blocks["-"], blocks["+"]]) > 1e-3


def test_block_alignment_deficit_at_acceptance_point():
    E, v, *_ = admissible_point(11)
    assert block_alignment_deficit(E, v, 11) == pytest.approx(0.009304385800389836, rel=1e-6)
