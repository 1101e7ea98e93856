"""Schrodinger transfer matrices and the polymer-model certificate.

The one-site transfer matrix at spectral parameter ``a = E - V`` is
``[[a, -1], [1, 0]]``. Its powers are written with the F-function

    F_q(z) = (z**q - z**-q) / (z - 1/z),
    A**p = [[F_{p+1}(lam), -F_p(lam)], [F_p(lam), -F_{p-1}(lam)]],

where ``lam`` is an eigenvalue of ``A``. On the unit circle
``F_q(e^{i th}) = sin(q th) / sin(th)``; on the real axis it is a ratio of
real powers. Both branches are evaluated directly, so no complex logarithm
is involved.

In the polymer model the potential is ``0`` or ``-v`` on blocks of ``2p``
sites. With ``A`` the transfer matrix at ``a = E`` and ``B`` the one at
``b = E + v``, a block is ``B^{2p}`` (all sites at ``-v``) or the mixed
block ``A^p B^p``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .avalanche import AP_V2, CertifiedBound
from .errors import CertificateBroken, DomainError, HypothesisNotMet, NearSingularArgument
from .estimator import renorm_indexed
from .gt_bounds import ergodic_lower_bound, strange_alpha
from .matan import abs_part, as_matrix, lambda_max, log_abs_unimodular, op_norm

#: Distance from the parabolic points ``a = +-2`` that is refused.
PARABOLIC_MARGIN = 1e-8
#: Distance from ``z in {0, +-1}`` at which the F-function is refused.
F_MARGIN = 1e-10
#: Above this ``log`` size, matrices are only handled in log scale.
LOG_OVERFLOW = 300.0
_BRACKET_RTOL = 1e-10


def transfer(a: float) -> np.ndarray:
    """``[[a, -1], [1, 0]]``, determinant exactly one."""
    a = float(a)
    if not math.isfinite(a):
        raise DomainError("transfer matrix argument must be finite")
    return np.array([[a, -1.0], [1.0, 0.0]])


def eigenvalues(a: float) -> tuple[complex, complex]:
    """``lam_pm = (a +- sqrt(a**2 - 4)) / 2``; their product is one."""
    r = cmath.sqrt(a * a - 4.0)
    return (a + r) / 2.0, (a - r) / 2.0


def _f_real(x: float, q: int) -> float:
    if x < 0:
        return (-1.0) ** (q + 1) * _f_real(-x, q)
    if x < 1:
        x = 1.0 / x  # F_q(1/x) = F_q(x)
    lx = math.log(x)
    # x**(q-1) * (1 - x**-2q) / (1 - x**-2)
    return math.exp((q - 1) * lx) * math.expm1(-2 * q * lx) / math.expm1(-2 * lx)


def log_f_real(x: float, q: int) -> float:
    """``log F_q(x)`` for real ``x > 1`` and ``q >= 1``, without overflow."""
    if not x > 1 or q < 1:
        raise DomainError("log_f_real needs x > 1 and q >= 1")
    lx = math.log(x)
    return (q - 1) * lx + math.log(-math.expm1(-2 * q * lx)) - math.log(-math.expm1(-2 * lx))


def f_function(z, q: int):
    """``F_q(z) = (z**q - z**-q) / (z - 1/z)`` for integer ``q``.

    Real ``z`` and ``|z| = 1`` give real results; other complex ``z`` give
    complex results. ``F_{-q} = -F_q`` and ``F_0 = 0``.

    Raises
    ------
    NearSingularArgument
        If ``z`` is within ``F_MARGIN`` of ``0``, ``1`` or ``-1``.
    """
    q = int(q)
    z = complex(z)
    if abs(z) < F_MARGIN or abs(z - 1) < F_MARGIN or abs(z + 1) < F_MARGIN:
        raise NearSingularArgument(f"F-function undefined near z={z}")
    if q < 0:
        return -f_function(z, -q)
    if q == 0:
        return 0.0
    if z.imag == 0.0:
        return _f_real(z.real, q)
    if abs(abs(z) - 1.0) < 1e-12:
        th = cmath.phase(z)
        return math.sin(q * th) / math.sin(th)
    return (z**q - z ** (-q)) / (z - 1 / z)


def _f_seq(a: float, qs):
    """``F_q(lam)`` for the eigenvalue of ``transfer(a)``, real for real ``a``."""
    if abs(abs(a) - 2.0) < PARABOLIC_MARGIN:
        raise NearSingularArgument(f"|a| = 2 (parabolic) is excluded, got a={a}")
    if abs(a) < 2.0:
        th = math.acos(a / 2.0)
        s = math.sin(th)
        return [math.sin(q * th) / s for q in qs]
    lam = (a + math.copysign(math.sqrt(a * a - 4.0), a)) / 2.0
    return [f_function(lam, q) if q else 0.0 for q in qs]


def power_via_F(a: float, p: int) -> np.ndarray:
    """``transfer(a)**p`` from the closed form in F-functions.

    Examples
    --------
    >>> power_via_F(3.0, 2)
    array([[ 8., -3.],
           [ 3., -1.]])
    """
    p = int(p)
    if p < 0:
        raise DomainError("p must be non-negative")
    a = float(a)
    if abs(a) > 2 and p * math.log(abs(a)) > LOG_OVERFLOW:
        raise DomainError("power too large for a float matrix; use log-scale helpers")
    f_next, f_p, f_prev = _f_seq(a, (p + 1, p, p - 1))
    return np.array([[f_next, -f_p], [f_p, -f_prev]])


# -- F-function brackets -------------------------------------------------------


def f_bounds(z, q: int, delta1: float | None = None, delta2: float | None = None, x0: float | None = None):
    """Analytic bracket ``(lower, upper)`` for the F-function.

    On the unit circle ``z = e^{i th}`` the bracket is for ``|F_q(z)|``:
    the upper bound ``2/delta1`` needs ``th`` at distance at least
    ``delta1`` from ``pi Z`` (``|sin th|`` is small near ``pi`` as well
    as near ``0``);
    the lower bound ``delta2/2`` needs the separation of ``q th`` from
    ``pi Z`` to be at least ``delta2``. Without ``delta2`` the lower bound
    is ``0``.

    For real ``z = x > x0 > 1`` the bracket is
    ``x**(q-1) (1 - x0**-2q) <= F_q(x) <= x**(q-1) / (1 - x0**-2)``.

    The computed F-value is asserted to lie inside.
    """
    z = complex(z)
    q = int(q)
    if q < 1:
        raise DomainError("q must be at least 1")
    if z.imag == 0.0 and z.real > 1.0:
        x = z.real
        if x0 is None or not 1.0 < x0 < x:
            raise HypothesisNotMet("real branch needs x > x0 > 1")
        lx, lx0 = math.log(x), math.log(x0)
        lo = math.exp((q - 1) * lx) * -math.expm1(-2 * q * lx0)
        hi = math.exp((q - 1) * lx) / -math.expm1(-2 * lx0)
        val = f_function(x, q)
    elif abs(abs(z) - 1.0) < 1e-12:
        th = cmath.phase(z) % (2 * math.pi)
        if delta1 is None or not 0 < delta1 < math.pi / 2:
            raise HypothesisNotMet("unit-circle branch needs 0 < delta1 < pi/2")
        if _pi_distance(th) < delta1:
            raise HypothesisNotMet(f"angle {th:.6f} is closer than delta1={delta1} to a multiple of pi")
        hi = 2.0 / delta1
        lo = 0.0
        if delta2 is not None:
            if not 0 < delta2 < math.pi / 2:
                raise HypothesisNotMet("delta2 must lie in (0, pi/2)")
            if _pi_distance(q * th) < delta2:
                raise HypothesisNotMet(f"q*theta is closer than delta2={delta2} to a multiple of pi")
            lo = delta2 / 2.0
        val = abs(f_function(z, q))
    else:
        raise HypothesisNotMet("f_bounds covers real x > 1 and the unit circle only")
    if not lo * (1 - _BRACKET_RTOL) <= val <= hi * (1 + _BRACKET_RTOL):
        raise CertificateBroken(f"F_{q}({z}) = {val} outside [{lo}, {hi}]")
    return lo, hi


def _pi_distance(x: float) -> float:
    r = math.remainder(x, math.pi)
    return abs(r)


# -- polymer admissibility -----------------------------------------------------


def b0_threshold(p: int, delta1: float, delta2: float) -> float:
    """Smallest admissible ``b = E + v`` for the polymer certificate.

    ``1 + max{4, c/(d1 d2), c/(d1 d2)**2, (1e6/d2)**(2/(2p-1)),
    (160/(9 d1))**(10/(p-1))}`` with ``c = (20/9)**8``.
    """
    if p < 2:
        raise DomainError("p must be at least 2")
    for name, d in (("delta1", delta1), ("delta2", delta2)):
        if not 0 < d < math.pi / 2:
            raise DomainError(f"{name} must lie in (0, pi/2)")
    c = (20.0 / 9.0) ** 8
    dd = delta1 * delta2
    return 1.0 + max(
        4.0,
        c / dd,
        c / dd**2,
        (1e6 / delta2) ** (2.0 / (2 * p - 1)),
        (160.0 / (9.0 * delta1)) ** (10.0 / (p - 1)),
    )


def check_angles(E: float, p: int, delta1: float, delta2: float) -> float:
    """Return ``theta = arccos(E/2)`` after checking both separations.

    The first separation is ``min(theta, pi - theta) >= delta1``, so
    ``E`` stays away from both ``2`` and ``-2``. The second separation is measured as the distance of ``(p+1) theta``
    to ``pi Z``, which is at least as strict as the minimum over
    ``k = 1..p``.
    """
    if not -2.0 < E < 2.0:
        raise DomainError(f"E={E} must lie strictly inside (-2, 2)")
    for name, d in (("delta1", delta1), ("delta2", delta2)):
        if not 0 < d < math.pi / 2:
            raise DomainError(f"{name} must lie in (0, pi/2)")
    th = math.acos(E / 2.0)
    if min(th, math.pi - th) < delta1:
        raise HypothesisNotMet(f"theta={th:.6f} is closer than delta1={delta1} to 0 or pi")
    if _pi_distance((p + 1) * th) < delta2:
        raise HypothesisNotMet(
            f"(p+1)*theta={(p + 1) * th:.6f} is closer than delta2={delta2} to a multiple of pi"
        )
    return th


def mu_of(b: float) -> float:
    """Larger eigenvalue ``(b + sqrt(b**2 - 4)) / 2`` of ``transfer(b)``, ``b > 2``."""
    if b <= 2:
        raise DomainError("b must exceed 2")
    return (b + math.sqrt(b * b - 4.0)) / 2.0


def _check_b(E: float, v: float, b0: float) -> float:
    b = E + v
    if v < b0 + E or b < b0:
        raise HypothesisNotMet(f"need v >= b0 + E and E + v >= b0 (b0={b0:.6g}, E={E}, v={v})")
    return b


# -- log-norms of block products ----------------------------------------------


def _ab_stack(a: float, b: float) -> np.ndarray:
    return np.stack([transfer(a), transfer(b)])


def word_indices(word: str, p: int) -> np.ndarray:
    """Site indices (0 for A, 1 for B) of a word such as ``"A^p B^q"``.

    The word is read as a matrix product, so its rightmost factor acts
    first. Tokens are ``A^k`` or ``B^k`` with ``k`` an integer or a
    multiple of ``p`` written ``p``, ``2p``, ``3p``.
    """
    out: list[int] = []
    for tok in reversed(word.split()):
        sym, _, exp = tok.partition("^")
        exp = exp or "1"
        k = int(exp[:-1] or 1) * p if exp.endswith("p") else int(exp)
        out.extend([{"A": 0, "B": 1}[sym]] * k)
    return np.array(out, dtype=np.int64)


def log_norm_word(a: float, b: float, word: str, p: int) -> float:
    """``log || word ||`` for a word in ``A = transfer(a)``, ``B = transfer(b)``."""
    c, Q = renorm_indexed(_ab_stack(a, b), word_indices(word, p))
    return c



@dataclass(frozen=True)
class Bracket:
    """``lower <= measured <= upper`` in log scale; ``upper`` may be ``inf``."""

    log_lower: float
    log_measured: float
    log_upper: float

    @property
    def ok(self) -> bool:
        tol = _BRACKET_RTOL * max(1.0, abs(self.log_measured))
        return self.log_lower - tol <= self.log_measured <= self.log_upper + tol


def block_norm_bounds(E: float, v: float, p: int, q: int, delta1: float, delta2: float) -> dict:
    """The four norm brackets for block products, checked against measured norms.

    Returns a dict with keys ``"B^q"``, ``"A^p B^q"``, ``"B^2p A^p B^p"``,
    ``"A^p B^p A^p B^p"`` mapping to :class:`Bracket` values in log scale.

    Raises
    ------
    HypothesisNotMet
        If the angle separations or ``b >= b0`` fail.
    CertificateBroken
        If a measured norm leaves its bracket.
    """
    check_angles(E, p, delta1, delta2)
    b = _check_b(E, v, b0_threshold(p, delta1, delta2))
    a = E
    lm = math.log(mu_of(b))
    out = {
        "B^q": Bracket(
            math.log(0.9) + q * lm, log_norm_word(a, b, f"B^{q}", p), math.log(20 / 9) + q * lm
        ),
        "A^p B^q": Bracket(
            math.log(9 * delta2 / 40) + q * lm,
            log_norm_word(a, b, f"A^p B^{q}", p),
            math.log(160 / (9 * delta1)) + q * lm,
        ),
        "B^2p A^p B^p": Bracket(
            math.log(delta2 / 4 * 0.81) + 3 * p * lm, log_norm_word(a, b, "B^2p A^p B^p", p), math.inf
        ),
        "A^p B^p A^p B^p": Bracket(
            math.log(0.5 * (9 * delta2 / 20) ** 2) + 2 * p * lm,
            log_norm_word(a, b, "A^p B^p A^p B^p", p),
            math.inf,
        ),
    }
    bad = [k for k, br in out.items() if not br.ok]
    if bad:
        raise CertificateBroken(f"norm brackets violated for {bad}")
    return out


# -- the AP certificate ------------------------------------------------------------


@dataclass(frozen=True)
class PolymerCertificate:
    """Certified AP constants for polymer blocks.

    ``kappa = (5/delta2)**2 mu**-2p`` and
    ``eps = 1e-4 min{1, (delta1 delta2)**2}``; ``log_kappa`` is kept since
    ``kappa`` underflows for long blocks.
    """

    E: float
    v: float
    p: int
    delta1: float
    delta2: float
    b0: float
    mu: float
    log_kappa: float
    eps: float

    @property
    def kappa(self) -> float:
        return math.exp(self.log_kappa)

    @property
    def theta(self) -> float:
        return math.acos(self.E / 2.0)

    @property
    def b(self) -> float:
        return self.E + self.v


def block_statistics(E: float, v: float, p: int) -> dict:
    """Measured ``log gr`` of both blocks and ``log rho`` of the four block pairs.

    For a unit-determinant block ``gr = ||L||**2``. Pair names follow the
    product, e.g. ``"X Y"`` is ``X @ Y`` with ``Y`` acting first; ``X`` is
    ``B^{2p}`` and ``Y`` is ``A^p B^p``.
    """
    a, b = E, E + v
    lX = log_norm_word(a, b, "B^2p", p)
    lY = log_norm_word(a, b, "A^p B^p", p)
    return {
        "log_gr_X": 2 * lX,
        "log_gr_Y": 2 * lY,
        "log_rho_X X": log_norm_word(a, b, "B^4p", p) - 2 * lX,
        "log_rho_Y Y": log_norm_word(a, b, "A^p B^p A^p B^p", p) - 2 * lY,
        "log_rho_Y X": log_norm_word(a, b, "A^p B^3p", p) - lX - lY,
        "log_rho_X Y": log_norm_word(a, b, "B^2p A^p B^p", p) - lX - lY,
    }


def polymer_certificate(E: float, v: float, p: int, delta1: float, delta2: float) -> PolymerCertificate:
    """AP constants for the polymer cocycle, verified against the blocks.

    Raises
    ------
    HypothesisNotMet
        Angle separations, ``p >= 2`` or ``b >= b0`` fail.
    CertificateBroken
        ``kappa > eps**2/6`` or a measured gap ratio or pair rift is worse
        than certified.
    """
    check_angles(E, p, delta1, delta2)
    b0 = b0_threshold(p, delta1, delta2)
    b = _check_b(E, v, b0)
    mu = mu_of(b)
    log_kappa = 2 * math.log(5.0 / delta2) - 2 * p * math.log(mu)
    eps = 1e-4 * min(1.0, (delta1 * delta2) ** 2)
    if log_kappa > math.log(AP_V2.c0 * eps**2):
        raise CertificateBroken("certified kappa exceeds c0 * eps**2")
    stats = block_statistics(E, v, p)
    tol = 1e-9
    for k, val in stats.items():
        need = -log_kappa if k.startswith("log_gr") else math.log(eps)
        if val < need - tol * max(1.0, abs(need)):
            raise CertificateBroken(f"measured {k}={val:.6g} below certified {need:.6g}")
    return PolymerCertificate(E, v, p, delta1, delta2, b0, mu, log_kappa, eps)


def spectral_points(p: int) -> list[tuple[float, float]]:
    """``(2 cos(pi k/(p+1)), 18 k / p**1.5)`` for ``k = 1..p``."""
    if p < 1:
        raise DomainError("p must be at least 1")
    return [(2.0 * math.cos(math.pi * k / (p + 1)), 18.0 * k / p**1.5) for k in range(1, p + 1)]


ADJOINT_UNITARY = np.diag([1.0, -1.0])


def adjoint_identity_check(seq) -> float:
    """Max over pairs of ``|1 - ||L_{k+1} L_k|| / || |L_{k+1}^T| |L_k| |||``.

    ``U A U = A^T`` with ``U = diag(1, -1)`` for every single transfer
    matrix, so the deviation vanishes when each element is a power of one
    transfer matrix. For a product of different ones ``U L U`` is the
    transpose of the reversed product, and the deviation is in general
    not zero (e.g. for the mixed polymer block ``A^p B^p``).
    """
    mats = [as_matrix(L, allow_complex=False) for L in seq]
    worst = 0.0
    for A, B in zip(mats[:-1], mats[1:]):
        A = A / op_norm(A)
        B = B / op_norm(B)
        lhs = op_norm(B @ A)
        rhs = op_norm(abs_part(B.T) @ abs_part(A))
        worst = max(worst, abs(1.0 - lhs / rhs))
    return worst


# -- the main bound ------------------------------------------------------------------


def block_alignment_deficit(E: float, v: float, p: int) -> float:
    """Alignment deficit ``alpha`` over the four ordered pairs of polymer blocks.

    The smallest ``alpha >= 0`` with
    ``||L' L|| >= (1 - alpha) || |L'^T| |L| ||`` for ``L, L'`` in
    ``{B^{2p}, A^p B^p}``, computed on norm-one representatives so that
    long blocks do not overflow.
    """
    ab = _ab_stack(E, E + v)
    X = renorm_indexed(ab, word_indices("B^2p", p))[1]
    Y = renorm_indexed(ab, word_indices("A^p B^p", p))[1]
    return strange_alpha([X, X, Y, Y, X]).alpha


def _block_sym_log(a: float, b: float, word: str, p: int) -> np.ndarray:
    c, Q = renorm_indexed(_ab_stack(a, b), word_indices(word, p))
    la, lat = log_abs_unimodular(Q, c)
    return 0.5 * (la + lat)


def polymer_lower_bound(E: float, v: float, p: int, pfrak: float, delta1: float, delta2: float) -> CertifiedBound:
    """Certified lower bound ``(pfrak/2) p log mu`` on the block exponent.

    ``pfrak`` is the probability of a ``B^{2p}`` block. The returned value
    is only issued after checking that it does not exceed the exact
    ergodic bound

        lambda_max(pfrak S(B^{2p}) + (1-pfrak) S(A^p B^p))
            - (11 + 11/(1-alpha)**2) kappa/eps**2 + log(1 - alpha),

    with ``S(L) = (log|L| + log|L^T|)/2`` and ``alpha`` the measured
    alignment deficit of :func:`block_alignment_deficit`, which holds for
    any ergodic sampler with these block frequencies. The extras report the terms of
    the scalar proof chain, whether that chain closes, the value with
    ``log b`` in place of ``log mu``, and per-site values (block value
    divided by ``2p``).

    Raises
    ------
    HypothesisNotMet
        ``pfrak < 1/2``, ``p < 2``, or the certificate hypotheses fail.
    CertificateBroken
        The issued value exceeds the exact ergodic bound.
    """
    if not 0.5 <= pfrak <= 1.0:
        raise HypothesisNotMet(f"pfrak={pfrak} must lie in [1/2, 1]")
    cert = polymer_certificate(E, v, p, delta1, delta2)
    a, b = E, E + v
    lmu = math.log(cert.mu)
    SX = _block_sym_log(a, b, "B^2p", p)
    SY = _block_sym_log(a, b, "A^p B^p", p)
    mean = pfrak * SX + (1 - pfrak) * SY
    kappa = max(cert.kappa, np.finfo(float).tiny)
    alpha = block_alignment_deficit(E, v, p)
    exact = ergodic_lower_bound(mean, mean, AP_V2, kappa, cert.eps, alpha)

    err_stated = 1e11 * math.exp(-2 * p * lmu) / delta2**2 * max(1.0, (delta1 * delta2) ** -2)
    chain = {
        "main": pfrak * ((2 * p - 1) * lmu + math.log(0.9)),
        "cross": -(1 - pfrak) * (p * lmu + math.log(160 / (9 * delta1))),
        "error": -err_stated,
    }
    chain_value = math.fsum(chain.values())
    value = 0.5 * pfrak * p * lmu
    if value > exact.value + 1e-9 * max(1.0, abs(exact.value)):
        raise CertificateBroken(f"(pfrak/2) p log mu = {value:.6g} exceeds exact bound {exact.value:.6g}")
    extras = {
        "exact_bound": exact.value,
        "exact_terms": dict(exact.terms),
        "exact_lambda_max": lambda_max(mean),
        "alpha": alpha,
        "chain_terms": chain,
        "chain_value": chain_value,
        "chain_closes": chain_value >= value,
        "stated_form_log_b": 0.5 * pfrak * p * math.log(b),
        "per_site_value": value / (2 * p),
        "per_site_stated_form": 0.5 * pfrak * p * math.log(b) / (2 * p),
        "b0": cert.b0,
        "mu": cert.mu,
        "log_kappa": cert.log_kappa,
    }
    return CertifiedBound(
        value=value,
        terms={"half_pfrak_p_log_mu": value},
        preset=AP_V2.name,
        kappa=cert.kappa,
        eps=cert.eps,
        extras=extras,
    )


def admissible_point(p: int, *, k: int | None = None) -> tuple[float, float, float, float]:
    """A parameter point ``(E, v, delta1, delta2)`` at the edge of admissibility.

    ``theta = (k + 1/2) pi/(p+1)`` sits midway between consecutive
    excluded angles; ``k`` defaults to ``p // 2`` so that ``E`` is near 0.
    The separations are rounded down to one decimal and ``v`` is the
    smallest value satisfying both ``v >= b0 + E`` and ``E + v >= b0``.
    """
    if p < 2:
        raise DomainError("p must be at least 2")
    k = p // 2 if k is None else int(k)
    th = (k + 0.5) * math.pi / (p + 1)
    if not 0 < th < math.pi:
        raise DomainError("k out of range")
    d1 = min(math.floor(10 * min(th, math.pi - th)) / 10, 1.5)
    d2 = min(math.floor(10 * _pi_distance((p + 1) * th)) / 10, 1.5)
    if d1 <= 0 or d2 <= 0:
        raise DomainError("no admissible separations at this angle")
    E = 2.0 * math.cos(th)
    b0 = b0_threshold(p, d1, d2)
    v = b0 + abs(E)
    return E, v, d1, d2
