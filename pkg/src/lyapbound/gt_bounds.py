"""Multivariate Golden-Thompson machinery and the lower bounds built on it.

The n-matrix Golden-Thompson inequality for the operator norm reads

    log ||exp(H_1 + ... + H_n)|| <= integral f(t) log ||prod exp((1+it) H_k)|| dt

with the probability density ``f(t) = (pi/2) / (cosh(pi t) + 1)``. Combined
with the Avalanche Principle it gives lower bounds on finite and ergodic
Lyapunov exponents in terms of ``lambda_max`` of averaged matrix logarithms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .avalanche import AP_V1, APParams, CertifiedBound, check_ap, require_ap
from .errors import (
    AlphaTooLarge,
    BoundViolated,
    DegenerateMatrix,
    DomainError,
    InvalidMatrix,
    NotNormal,
    QuadratureUnderresolved,
)
from .estimator import finite_exponent
from .matan import abs_part, as_hermitian, as_matrix, is_normal, lambda_max, log_abs, op_norm

#: Slack allowed between a certified finite bound and the measured exponent.
BOUND_TOL = 1e-9


def gt_density(t):
    """``f(t) = (pi/2) / (cosh(pi t) + 1)``, written overflow free.

    ``f(t) = (pi/4) sech(pi t/2)**2``; for large ``|t|`` it decays like
    ``pi exp(-pi |t|)``.
    """
    t = np.asarray(t, dtype=float)
    out = (math.pi / 4.0) / np.cosh(np.minimum(np.abs(t) * (math.pi / 2.0), 350.0)) ** 2
    return float(out) if out.ndim == 0 else out


def gt_tail_mass(T: float) -> float:
    """``integral_{|t| > T} f(t) dt = 1 - tanh(pi T / 2)``."""
    return 2.0 / (math.exp(math.pi * T) + 1.0)


@dataclass(frozen=True)
class GTQuadrature:
    """Trapezoid rule on ``[-T, T]`` with a closed-form tail."""

    half_width: float = 9.0
    nodes: int = 4001

    def __post_init__(self):
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")
        if self.nodes < 3 or self.nodes % 2 == 0:
            raise ValueError("nodes must be odd and at least 3")

    @property
    def tail_mass(self) -> float:
        return gt_tail_mass(self.half_width)

    def grid(self) -> np.ndarray:
        return np.linspace(-self.half_width, self.half_width, self.nodes)

    def weights(self) -> np.ndarray:
        h = 2.0 * self.half_width / (self.nodes - 1)
        w = np.full(self.nodes, h)
        w[0] = w[-1] = h / 2
        return w * gt_density(self.grid())


@dataclass(frozen=True)
class GTCheck:
    """Both sides of the operator-norm Golden-Thompson inequality."""

    lhs: float
    rhs: float
    slack: float
    doubling_change: float
    tail_bound: float


def _dressed_log_norms(H_list, ts: np.ndarray) -> np.ndarray:
    """``log || exp((1+it)H_n) ... exp((1+it)H_1) ||`` for every ``t``."""
    d = H_list[0].shape[0]
    prod = np.broadcast_to(np.eye(d, dtype=complex), (ts.size, d, d)).copy()
    acc = np.zeros(ts.size)
    for H in H_list:
        w, V = np.linalg.eigh(H)
        # exp((1+it)H) = V diag(exp((1+it)w)) V^*, for all t at once
        phase = np.exp(np.outer(ts, 1j * w)) * np.exp(w)
        E = np.einsum("ij,tj,kj->tik", V, phase, V.conj())
        prod = E @ prod
        scale = np.max(np.abs(prod), axis=(1, 2))
        prod /= scale[:, None, None]
        acc += np.log(scale)
    gram = np.conj(np.swapaxes(prod, 1, 2)) @ prod
    top = np.linalg.eigvalsh(gram)[:, -1]
    return acc + 0.5 * np.log(top)


def gt_check(H_list: Sequence, quad: GTQuadrature = GTQuadrature(), *, doubling_tol: float = 1e-6) -> GTCheck:
    """Evaluate the Golden-Thompson inequality for the operator norm.

    ``rhs`` is a rigorous lower estimate of the integral: the trapezoid
    value on ``[-T, T]`` minus ``tail_mass * sum ||H_k||``, which bounds the
    integrand's contribution from ``|t| > T``. ``slack = rhs - lhs``.

    Raises
    ------
    QuadratureUnderresolved
        If doubling the node count moves the quadrature by more than
        ``doubling_tol``.
    """
    Hs = [as_hermitian(H) for H in H_list]
    if not Hs:
        raise InvalidMatrix("need at least one Hermitian matrix")
    lhs = lambda_max(sum(Hs[1:], Hs[0]))
    fine = GTQuadrature(quad.half_width, 2 * quad.nodes - 1)
    vals = _dressed_log_norms(Hs, fine.grid())
    q_fine = float(np.dot(fine.weights(), vals))
    q = float(np.dot(quad.weights(), vals[::2]))
    change = abs(q_fine - q)
    if change > doubling_tol:
        raise QuadratureUnderresolved(f"node doubling moved the integral by {change:.3e}")
    tail = quad.tail_mass * math.fsum(op_norm(H) for H in Hs)
    rhs = q - tail
    return GTCheck(lhs=lhs, rhs=rhs, slack=rhs - lhs, doubling_change=change, tail_bound=tail)


@dataclass(frozen=True)
class StrangeAlpha:
    """Deficits ``1 - ||L_{k+1} L_k|| / || |L_{k+1}^T| |L_k| ||`` per pair."""

    alpha: float
    deficits: tuple


def strange_alpha(seq: Sequence) -> StrangeAlpha:
    """Smallest ``alpha`` with ``||L_{k+1}L_k|| >= (1-alpha) || |L_{k+1}^T| |L_k| ||``."""
    mats = [as_matrix(L) for L in seq]
    if len(mats) < 2:
        return StrangeAlpha(0.0, ())
    defs = []
    for A, B in zip(mats[:-1], mats[1:]):
        nA, nB = op_norm(A), op_norm(B)
        if nA == 0 or nB == 0:
            raise DegenerateMatrix("zero matrix in sequence")
        A, B = A / nA, B / nB
        denom = op_norm(abs_part(B.T) @ abs_part(A))
        if denom == 0:
            raise DegenerateMatrix("product of absolute values vanishes")
        defs.append(1.0 - op_norm(B @ A) / denom)
    return StrangeAlpha(max(0.0, max(defs)), tuple(defs))


def _sym_log_abs(L, det=None) -> np.ndarray:
    return 0.5 * (log_abs(L, det=det) + log_abs(np.asarray(L).T, det=det))


def _error_terms(params: APParams, kappa: float, eps: float, alpha: float) -> dict:
    r = kappa / eps**2
    terms = {"ap_error_lower": -params.c_l * r, "ap_error_upper": -params.c_u * r / (1.0 - alpha) ** 2}
    if alpha > 0:
        terms["log_one_minus_alpha"] = math.log1p(-alpha)
    return terms


def _check_alpha(params: APParams, kappa: float, eps: float, alpha: float) -> None:
    if not 0.0 <= alpha < 1.0:
        raise AlphaTooLarge(f"alpha={alpha} must lie in [0, 1)")
    if kappa > params.c0 * ((1.0 - alpha) * eps) ** 2 * (1.0 + 1e-12):
        raise AlphaTooLarge(
            f"kappa={kappa:.3e} exceeds c0*((1-alpha)*eps)^2={params.c0 * ((1 - alpha) * eps) ** 2:.3e}"
        )


def _finish(terms: dict, params, kappa, eps, seq, extras) -> CertifiedBound:
    measured = finite_exponent(np.asarray(seq))
    b = CertifiedBound.from_terms(
        terms, preset=params.name, kappa=kappa, eps=eps, extras={"measured": measured, **extras}
    )
    if b.value > measured + BOUND_TOL:
        raise BoundViolated(f"certified {b.value:.6e} exceeds measured exponent {measured:.6e}")
    return b


def finite_lower_bound_normal(
    seq: Sequence, params: APParams = AP_V1, kappa: float | None = None, eps: float | None = None
) -> CertifiedBound:
    """Lower bound for products of normal matrices.

    ``lambda_max((1/n) sum log|L_k|) - (c_l + c_u) kappa / eps**2``, checked
    against the measured finite exponent.
    """
    mats = [as_matrix(L) for L in seq]
    rep = require_ap(check_ap(mats, params, kappa=kappa, eps=eps))
    for i, L in enumerate(mats):
        if not is_normal(L):
            raise NotNormal(f"L_{i + 1} is not normal")
    main = lambda_max(sum(log_abs(L) for L in mats) / len(mats))
    terms = {"main": main, **_error_terms(params, rep.kappa, rep.eps, 0.0)}
    return _finish(terms, params, rep.kappa, rep.eps, mats, {})


def finite_lower_bound_general(
    seq: Sequence,
    params: APParams = AP_V1,
    kappa: float | None = None,
    eps: float | None = None,
    alpha: float | None = None,
) -> CertifiedBound:
    """Lower bound for general invertible products.

    ``lambda_max((1/n) sum (log|L_k| + log|L_k^T|)/2)
    - (c_l + c_u/(1-alpha)**2) kappa/eps**2 + log(1-alpha)``. ``alpha``
    defaults to the measured :func:`strange_alpha`.
    """
    mats = [as_matrix(L) for L in seq]
    rep = require_ap(check_ap(mats, params, kappa=kappa, eps=eps))
    measured_alpha = strange_alpha(mats).alpha
    a = measured_alpha if alpha is None else float(alpha)
    if a + 1e-10 < measured_alpha:
        raise AlphaTooLarge(f"supplied alpha={a} is below the measured deficit {measured_alpha:.3e}")
    _check_alpha(params, rep.kappa, rep.eps, a)
    main = lambda_max(sum(_sym_log_abs(L) for L in mats) / len(mats))
    terms = {"main": main, **_error_terms(params, rep.kappa, rep.eps, a)}
    return _finish(terms, params, rep.kappa, rep.eps, mats, {"alpha": a})


def ergodic_lower_bound(
    E_log_abs,
    E_log_abs_dag,
    params: APParams,
    kappa: float,
    eps: float,
    alpha: float = 0.0,
) -> CertifiedBound:
    """Lower bound on the ergodic top exponent from exact expectations.

    ``lambda_max((E log|L| + E log|L^T|)/2)
    - (c_l + c_u/(1-alpha)**2) kappa/eps**2 + log(1-alpha)``.
    The AP hypotheses and the alignment deficit ``alpha`` must hold along
    almost every orbit; that is the caller's certificate.
    """
    if kappa <= 0 or eps <= 0:
        raise DomainError("kappa and eps must be positive")
    _check_alpha(params, kappa, eps, alpha)
    H = 0.5 * (as_hermitian(E_log_abs) + as_hermitian(E_log_abs_dag))
    terms = {"main": lambda_max(H), **_error_terms(params, kappa, eps, alpha)}
    return CertifiedBound.from_terms(terms, preset=params.name, kappa=kappa, eps=eps, extras={"alpha": alpha})


# -- the two-symbol example --------------------------------------------------

EXAMPLE_A_MIN = math.sqrt(1000.0)


def example_matrices(a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """``A_0 = diag(a, 1/a)`` and ``A_1 = R(pi/4) diag(b, 1/b) R(pi/4)^T``."""
    c = math.sqrt(0.5)
    R = np.array([[c, -c], [c, c]])
    return np.diag([a, 1.0 / a]), R @ np.diag([b, 1.0 / b]) @ R.T


def example_triple(a: float, b: float, pfrak: float) -> tuple[float, float, float]:
    """``(worst_case, gt_bound, upper_bound)`` for the two-symbol example.

    ``A_0`` is drawn with probability ``pfrak`` and ``A_1`` otherwise, with
    ``kappa = a**-2`` and ``eps = 1/10`` under ``AP_V1``.

    Examples
    --------
    >>> w, g, u = example_triple(math.sqrt(1000), math.sqrt(1000), 0.5)
    >>> round(w, 4)
    0.6513
    """
    if a < EXAMPLE_A_MIN * (1 - 1e-15):
        raise DomainError(f"a={a} is below sqrt(1000)")
    if b < a:
        raise DomainError("the example needs b >= a")
    if not 0.0 <= pfrak <= 1.0:
        raise DomainError("pfrak must lie in [0, 1]")
    la, lb = math.log(a), math.log(b)
    worst = la - math.log(10.0) - 500.0 / a**2
    gt = math.hypot((1.0 - pfrak) * lb, pfrak * la) - 1600.0 / a**2
    upper = pfrak * la + (1.0 - pfrak) * lb
    return worst, gt, upper


def random_hermitian_family(
    rng: np.random.Generator, *, max_n: int = 5, max_d: int = 4, scale_range: tuple[float, float] = (0.1, 2.0)
) -> list[np.ndarray]:
    """Random list of ``1..max_n`` Hermitian ``d x d`` matrices, ``d <= max_d``.

    About half the families are complex. Entry scales are drawn
    log-uniformly from ``scale_range``.
    """
    n = int(rng.integers(1, max_n + 1))
    d = int(rng.integers(1, max_d + 1))
    cplx = bool(rng.integers(0, 2))
    lo, hi = map(math.log, scale_range)
    out = []
    for _ in range(n):
        s = math.exp(rng.uniform(lo, hi))
        X = rng.standard_normal((d, d))
        if cplx:
            X = X + 1j * rng.standard_normal((d, d))
        out.append(0.5 * s * (X + X.conj().T))
    return out
