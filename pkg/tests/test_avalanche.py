import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lyapbound.avalanche import (
    AP_V1,
    AP_V2,
    APParams,
    aligned_family,
    ap_sandwich,
    check_ap,
    log_sandwich_middle,
    preset,
    require_ap,
    worst_case_lower_bound,
)
from lyapbound.errors import APHypothesisViolated, InvalidMatrix
from lyapbound.gt_bounds import example_matrices
from lyapbound.rng import make_rng
from oracles import naive_product

SQ1000 = math.sqrt(1000.0)
A0, A1 = example_matrices(SQ1000, SQ1000)


def test_presets():
    assert (AP_V1.eps0, AP_V1.c0, AP_V1.c_l, AP_V1.c_u, AP_V1.min_len) == (0.1, 0.1, 5, 11, 0)
    assert (AP_V2.eps0, AP_V2.c0, AP_V2.c_l, AP_V2.c_u, AP_V2.min_len) == (0.2, 1 / 6, 11, 11, 36)
    assert preset("AP_V2") is AP_V2
    with pytest.raises(ValueError):
        preset("AP_V3")


def test_params_validation():
    with pytest.raises(ValueError):
        APParams(eps0=0.0, c0=0.1, c_l=5, c_u=11)


def test_check_ap_example_sequence():
    rep = check_ap([A0, A1, A0], AP_V1, kappa=1e-3, eps=0.1)
    assert rep.ok and rep.gap_ok and rep.align_ok
    assert rep.measured_kappa == pytest.approx(1e-3, rel=1e-12)
    assert rep.measured_eps >= 1 / math.sqrt(2) - 1e-12


def test_check_ap_identity_fails_gap():
    rep = check_ap([np.eye(2)] * 3, AP_V1)
    assert not rep.gap_ok
    with pytest.raises(APHypothesisViolated):
        require_ap(rep)


def test_check_ap_diagonal_measured():
    D = np.diag([100.0, 0.01])
    rep = check_ap([D, D], AP_V1)
    assert rep.measured_kappa == pytest.approx(1e-4, rel=1e-12)
    assert rep.measured_eps == pytest.approx(1.0)
    assert rep.eps == 0.1
    assert rep.ok


def test_check_ap_v2_length_guard():
    D = np.diag([1e4, 1e-4])
    rep = check_ap([D] * 35, AP_V2)
    assert not rep.len_ok and not rep.ok
    assert check_ap([D] * 36, AP_V2).ok


def test_check_ap_single_matrix():
    rep = check_ap([np.diag([1e4, 1.0])], AP_V1)
    assert rep.n == 1 and rep.measured_eps == 1.0 and rep.ok


def test_sandwich_n2_middle_is_one():
    s = ap_sandwich([A0, A1], AP_V1, 1e-3, 0.1)
    assert s.log_middle == 0.0 and s.middle == 1.0


def test_sandwich_example_length_50():
    seq = [A0 if k % 2 == 0 else A1 for k in range(50)]
    s = ap_sandwich(seq, AP_V1, 1e-3, 0.1)
    assert s.log_lower == pytest.approx(-25.0)
    assert s.log_upper == pytest.approx(55.0)
    # middle via an unrenormalized product; 50 factors of norm ~31.6 stay in range
    P = naive_product(seq)
    norms = [np.linalg.norm(L, 2) for L in seq]
    pairs = [np.linalg.norm(seq[i + 1] @ seq[i], 2) / (norms[i] * norms[i + 1]) for i in range(49)]
    direct = math.log(np.linalg.norm(P, 2)) - sum(map(math.log, norms)) - sum(map(math.log, pairs))
    assert s.log_middle == pytest.approx(direct, abs=1e-9)
    assert s.slack > 0


def test_sandwich_diagonal_middle_one():
    D = np.diag([100.0, 0.01])
    s = ap_sandwich([D] * 10, AP_V1, 1e-4, 0.1)
    assert s.log_middle == pytest.approx(0.0, abs=1e-12)


def test_sandwich_rejects_short_and_bad():
    with pytest.raises(InvalidMatrix):
        ap_sandwich([A0], AP_V1, 1e-3, 0.1)
    with pytest.raises(APHypothesisViolated):
        ap_sandwich([np.eye(2)] * 3, AP_V1, 1e-3, 0.1)


def test_worst_case_examples():
    assert worst_case_lower_bound(1e-3, 0.1, AP_V1).value == pytest.approx(
        math.log(SQ1000) - math.log(10) - 500 / 1000, abs=1e-12
    )
    assert worst_case_lower_bound(1e-3, 0.1, AP_V1).value == pytest.approx(0.6512925465, abs=1e-9)
    assert worst_case_lower_bound(0.01, 0.1, AP_V1).value == pytest.approx(-5.0)
    assert worst_case_lower_bound(1e-6, 0.1, AP_V1).value == pytest.approx(0.5 * math.log(1e4) - 5e-4)


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-8, 1e-3), st.floats(1e-8, 1e-3), st.floats(0.01, 0.1), st.floats(0.01, 0.1))
def test_worst_case_monotone(k1, k2, e1, e2):
    lo_k, hi_k = sorted((k1, k2))
    lo_e, hi_e = sorted((e1, e2))
    f = lambda k, e: worst_case_lower_bound(k, e, AP_V1).value
    assert f(hi_k, lo_e) <= f(lo_k, lo_e) + 1e-12
    assert f(lo_k, lo_e) <= f(lo_k, hi_e) + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.integers(2, 40), st.integers(2, 3))
def test_sandwich_holds_when_ap_passes(seed, n, d):
    seq = aligned_family(make_rng(seed), n, d)
    rep = check_ap(seq, AP_V1)
    if rep.ok:
        s = ap_sandwich(seq, AP_V1, rep.kappa, rep.eps)
        assert s.slack >= -1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.lists(st.floats(0.01, 100.0), min_size=6, max_size=6))
def test_scale_invariance(seed, scales):
    seq = aligned_family(make_rng(seed), 6, 2)
    scaled = [c * L for c, L in zip(scales, seq)]
    r1, r2 = check_ap(seq, AP_V1), check_ap(scaled, AP_V1)
    assert r1.ok == r2.ok
    assert r1.measured_kappa == pytest.approx(r2.measured_kappa, rel=1e-9)
    assert r1.measured_eps == pytest.approx(r2.measured_eps, rel=1e-9)
    assert log_sandwich_middle(seq) == pytest.approx(log_sandwich_middle(scaled), abs=1e-9)
