import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lyapbound.avalanche import AP_V1, aligned_family, check_ap
from lyapbound.dynamics import Cocycle, exact_expectations
from lyapbound.errors import AlphaTooLarge, DomainError, NotNormal
from lyapbound.gt_bounds import (
    GTQuadrature,
    ergodic_lower_bound,
    example_matrices,
    example_triple,
    finite_lower_bound_general,
    finite_lower_bound_normal,
    gt_check,
    gt_density,
    gt_tail_mass,
    random_hermitian_family,
    strange_alpha,
)
from lyapbound.matan import log_abs
from lyapbound.rng import make_rng
from lyapbound.schrodinger import transfer
from oracles import naive_product

SQ1000 = math.sqrt(1000.0)


# -- density and quadrature ----------------------------------------------------


def test_density_at_zero_and_decay():
    assert gt_density(0.0) == pytest.approx(math.pi / 4, abs=1e-15)
    for t in (5.0, 10.0, 20.0):
        assert gt_density(t) == pytest.approx(math.pi * math.exp(-math.pi * t), rel=1e-6)
    assert 0.0 <= gt_density(1e6) < 1e-300
    assert gt_density(-2.0) == gt_density(2.0)


def test_density_integrates_to_one():
    q = GTQuadrature()
    assert q.weights().sum() + q.tail_mass == pytest.approx(1.0, abs=1e-8)


def test_tail_mass_closed_form():
    assert gt_tail_mass(9.0) == pytest.approx(1 - math.tanh(9 * math.pi / 2), abs=1e-15)
    assert gt_tail_mass(9.0) <= 2 * math.exp(-9 * math.pi)
    assert gt_tail_mass(40.0) == pytest.approx(2 * math.exp(-40 * math.pi), rel=1e-12)


def test_quadrature_validation():
    with pytest.raises(ValueError):
        GTQuadrature(nodes=4000)
    with pytest.raises(ValueError):
        GTQuadrature(half_width=0.0)


# -- Golden-Thompson check ---------------------------------------------------------


def test_gt_commuting_is_tight():
    Hs = [np.diag([1.0, -0.5]), np.diag([0.3, 2.0]), np.diag([-1.0, 0.0])]
    c = gt_check(Hs)
    assert c.lhs == pytest.approx(1.5)
    assert abs(c.slack) <= 1e-9


def test_gt_two_matrices_nonnegative():
    rng = np.random.default_rng(11)
    X, Y = rng.standard_normal((2, 3, 3))
    c = gt_check([X + X.T, Y + Y.T])
    assert c.slack >= -1e-7


def test_gt_three_random_hermitian():
    rng = np.random.default_rng(12)
    Hs = []
    for _ in range(3):
        X = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        Hs.append(0.5 * (X + X.conj().T))
    c = gt_check(Hs)
    assert c.slack >= -1e-7
    assert c.doubling_change <= 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32))
def test_gt_random_families(seed):
    c = gt_check(random_hermitian_family(make_rng(seed)))
    assert c.slack >= -1e-7


# -- alignment deficit ------------------------------------------------------------


def test_strange_alpha_symmetric_pd_is_zero():
    rng = np.random.default_rng(1)
    seq = []
    for _ in range(4):
        X = rng.standard_normal((3, 3))
        seq.append(X @ X.T + np.eye(3))
    assert strange_alpha(seq).alpha == pytest.approx(0.0, abs=1e-12)


def test_strange_alpha_transfer_pair_is_zero():
    assert strange_alpha([transfer(0.7), transfer(-3.1)]).alpha == pytest.approx(0.0, abs=1e-12)


def test_strange_alpha_nonnormal_pair():
    A = np.array([[1.0, 2.0], [0.0, 1.0]])
    B = np.array([[1.0, 0.0], [3.0, 1.0]])
    from scipy.linalg import sqrtm

    absA = sqrtm(A.T @ A).real
    absBt = sqrtm(B @ B.T).real
    want = 1 - np.linalg.norm(B @ A, 2) / np.linalg.norm(absBt @ absA, 2)
    sa = strange_alpha([A, B])
    assert sa.deficits[0] == pytest.approx(want, abs=1e-12)
    assert sa.alpha == pytest.approx(max(0.0, want), abs=1e-12)


# -- finite-n bounds ----------------------------------------------------------------


def test_normal_bound_diagonal_sequence():
    D = np.diag([100.0, 0.01])
    b = finite_lower_bound_normal([D] * 8)
    assert b.value == pytest.approx(math.log(100) - 16 * 1e-4 / 0.01, abs=1e-12)
    assert b.extras["measured"] == pytest.approx(math.log(100), abs=1e-12)


def test_normal_bound_single_matrix():
    D = np.diag([1e4, 1.0])
    b = finite_lower_bound_normal([D])
    assert b.terms["main"] == pytest.approx(math.log(1e4))


def test_normal_bound_example_mixed():
    A0, A1 = example_matrices(SQ1000, SQ1000)
    seq = [A0, A1, A1, A0, A1, A0]
    b = finite_lower_bound_normal(seq, kappa=1e-3, eps=0.1)
    main = max(np.linalg.eigvalsh(sum(log_abs(L) for L in seq) / 6))
    assert b.value == pytest.approx(main - 1.6, abs=1e-12)
    measured = math.log(np.linalg.norm(naive_product(seq), 2)) / 6
    assert b.value <= measured


def test_normal_bound_rejects_nonnormal():
    seq = [np.array([[1e4, 5.0], [0.0, 1.0]])] * 3
    with pytest.raises(NotNormal):
        finite_lower_bound_normal(seq)


def test_general_equals_normal_at_alpha_zero():
    A0, A1 = example_matrices(SQ1000, SQ1000)
    seq = [A0, A1, A0, A1]
    bn = finite_lower_bound_normal(seq, kappa=1e-3, eps=0.1)
    bg = finite_lower_bound_general(seq, kappa=1e-3, eps=0.1, alpha=0.0)
    assert bg.value == bn.value


def test_general_positive_on_transfer_matrices():
    seq = [transfer(50.0)] * 10 + [transfer(-60.0)] * 5
    b = finite_lower_bound_general(seq)
    assert b.value > 0
    assert b.value <= b.extras["measured"]


def test_general_alpha_monotone_to_minus_infinity():
    D = np.diag([1e5, 1e-5])
    vals = [finite_lower_bound_general([D] * 4, alpha=a, kappa=1e-6, eps=0.1).value for a in (0.0, 0.5, 0.9, 0.95)]
    assert all(x > y for x, y in zip(vals, vals[1:]))
    with pytest.raises(AlphaTooLarge):
        finite_lower_bound_general([D] * 4, alpha=0.999, kappa=1e-6, eps=0.1)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.integers(2, 30))
def test_general_bound_below_measured(seed, n):
    seq = aligned_family(make_rng(seed), n, 2, max_angle=0.6)
    rep = check_ap(seq, AP_V1)
    if rep.ok:
        try:
            b = finite_lower_bound_general(seq)
        except AlphaTooLarge:
            return
        assert b.value <= b.extras["measured"] + 1e-9


# -- ergodic bound and the two-symbol example ----------------------------------------


@pytest.mark.parametrize("pf", [0.0, 0.25, 0.5, 1.0])
@pytest.mark.parametrize("b", [SQ1000, math.exp(5), math.exp(10)])
def test_ergodic_matches_example_formula(pf, b):
    A0, A1 = example_matrices(SQ1000, b)
    E1, E2 = exact_expectations(Cocycle.from_mapping({0: A0, 1: A1}), [pf, 1 - pf])
    bound = ergodic_lower_bound(E1, E2, AP_V1, 1e-3, 0.1)
    assert bound.value == pytest.approx(example_triple(SQ1000, b, pf)[1], abs=1e-9)


def test_example_values():
    w, g, u = example_triple(SQ1000, SQ1000, 0.5)
    assert w == pytest.approx(0.6512925464970225, abs=1e-9)
    assert u == pytest.approx(math.log(SQ1000))
    assert g <= u
    g10 = example_triple(SQ1000, math.exp(10), 0.5)[1]
    assert g10 == pytest.approx(math.sqrt(25 + math.log(SQ1000) ** 2 / 4) - 1.6, abs=1e-12)
    assert g10 == pytest.approx(3.690, abs=5e-4)
    assert example_triple(SQ1000, 50.0, 1.0)[1] == pytest.approx(math.log(SQ1000) - 1.6)


def test_example_domain():
    with pytest.raises(DomainError):
        example_triple(10.0, 20.0, 0.5)
    with pytest.raises(DomainError):
        example_triple(40.0, 35.0, 0.5)
    with pytest.raises(DomainError):
        example_triple(40.0, 50.0, 1.5)


def test_example_ordering_on_sufficient_region():
    a = SQ1000
    for lb in np.linspace(math.log(a) + 1e-9, 30, 12):
        for pf in np.linspace(0, 1, 11):
            if pf <= 1 - (math.log(10) + 1100 / a**2) / lb:
                w, g, _ = example_triple(a, math.exp(lb), pf)
                assert w <= g


def test_example_ratio_tends_to_one():
    a = SQ1000
    ratios = [example_triple(a, math.exp(x), 0.5)[1] / example_triple(a, math.exp(x), 0.5)[2] for x in (5, 10, 20, 100, 600)]
    assert all(x < y for x, y in zip(ratios, ratios[1:]))
    assert ratios[-1] > 0.98
