"""Stability of finite-n exponents near rank-one and diagonal sequences.

Four results are implemented, each as a runtime-verified certificate:

* sequences ``L_k = r_k P + M_k`` dominated by a large rank-one part,
  where the exponent is close to the average of ``log |r_k|``;
* Schrodinger transfer matrices far from the spectrum, with closed-form
  norms and explicit constants;
* perturbations of aligned diagonal sequences, after blocking ``nu``
  consecutive factors to amplify the singular gap;
* the two-step Jacobi transfer matrices near ``E = 0``.

The constants for the rank-one result are not explicit in the theory.
Instead of inventing them, :func:`rankone_sandwich` verifies the AP
hypotheses on the actual sequence and evaluates the exact chain

``log ||L_n..L_1|| = sum log ||L_{k+1} L_k|| - sum_{k=2}^{n-1} log ||L_k|| + log middle``

where ``log middle`` is bracketed by the AP sandwich.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .avalanche import AP_V1, APParams, CertifiedBound, ap_sandwich, check_ap, require_ap
from .errors import (
    BoundViolated,
    CertificateBroken,
    DomainError,
    EnergyTooLarge,
    InvalidMatrix,
    MixedRegime,
    PerturbationTooLarge,
)
from .estimator import log_norm_indexed
from .matan import as_matrix, op_norm

#: Tolerance for projection identities and class-membership checks.
MEMBERSHIP_TOL = 1e-12
#: Minimum distance to the spectrum accepted by the off-spectrum bound.
OFF_SPECTRUM_R0 = 32.0
#: Constant in front of ``r0**-2`` in the off-spectrum bound.
OFF_SPECTRUM_CONST = 1.2e3
#: Slack for comparing a measured gap against a certified one.
GAP_TOL = 1e-9


def _fail_if_above(measured: float, certified: float, what: str) -> None:
    if measured > certified + GAP_TOL:
        raise BoundViolated(f"{what}: measured {measured:.6e} exceeds certified {certified:.6e}")


# ---------------------------------------------------------------------------
# rank-one dominated sequences


@dataclass(frozen=True, eq=False)
class RankOneFamily:
    """``L_k = r_k P + M_k`` with ``P`` a rank-one orthogonal projection.

    Parameters
    ----------
    P : ndarray, shape (d, d)
    M : ndarray, shape (n, d, d)
    r : ndarray, shape (n,)
    C0, C1 : float, optional
        Class bounds ``||M_k|| <= C0`` and ``||M_k^-1|| <= C1``. When
        omitted they are set to the measured maxima.
    """

    P: np.ndarray
    M: np.ndarray
    r: np.ndarray
    C0: float | None = None
    C1: float | None = None

    def __post_init__(self):
        P = as_matrix(self.P, allow_complex=False)
        d = P.shape[0]
        if (
            op_norm(P @ P - P) > MEMBERSHIP_TOL
            or op_norm(P - P.T) > MEMBERSHIP_TOL
            or abs(np.trace(P) - 1.0) > MEMBERSHIP_TOL
        ):
            raise InvalidMatrix("P must be a rank-one orthogonal projection")
        M = np.asarray(self.M, dtype=float)
        if M.ndim == 2:
            M = M[None]
        r = np.atleast_1d(np.asarray(self.r, dtype=float))
        if M.shape[1:] != (d, d):
            raise InvalidMatrix(f"M_k must have shape {(d, d)}")
        if M.shape[0] == 1 and r.size > 1:
            M = np.broadcast_to(M, (r.size, d, d))
        if M.shape[0] != r.size or r.size == 0:
            raise InvalidMatrix("M and r must have the same non-zero length")
        if not (np.all(np.isfinite(M)) and np.all(np.isfinite(r))):
            raise InvalidMatrix("non-finite entries")
        norms = np.linalg.norm(M, 2, axis=(1, 2))
        smin = np.linalg.svd(M, compute_uv=False)[:, -1]
        if np.any(smin == 0.0):
            raise InvalidMatrix("M_k must be invertible")
        inv_norms = 1.0 / smin
        C0 = float(norms.max()) if self.C0 is None else float(self.C0)
        C1 = float(inv_norms.max()) if self.C1 is None else float(self.C1)
        if np.any(norms > C0 * (1 + MEMBERSHIP_TOL)) or np.any(inv_norms > C1 * (1 + MEMBERSHIP_TOL)):
            raise DomainError(f"some M_k violate ||M|| <= {C0:g} or ||M^-1|| <= {C1:g}")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "M", np.ascontiguousarray(M))
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "C0", C0)
        object.__setattr__(self, "C1", C1)

    @property
    def n(self) -> int:
        return int(self.r.size)

    @property
    def r0(self) -> float:
        return float(np.abs(self.r).min())

    def matrices(self) -> np.ndarray:
        return self.r[:, None, None] * self.P + self.M


def _chain_terms(mats: np.ndarray) -> tuple[float, float]:
    """``(sum log ||L_{k+1} L_k||, sum_{k=2}^{n-1} log ||L_k||)``."""
    pairs = np.einsum("kij,kjl->kil", mats[1:], mats[:-1])
    lp = np.log(np.linalg.norm(pairs, 2, axis=(1, 2)))
    li = np.log(np.linalg.norm(mats[1:-1], 2, axis=(1, 2))) if len(mats) > 2 else np.zeros(0)
    return math.fsum(lp), math.fsum(li)


def rankone_sandwich(fam: RankOneFamily, params: APParams = AP_V1) -> tuple[float, CertifiedBound]:
    """Certified distance between the exponent and ``mean log |r_k|``.

    The AP hypotheses are checked with the measured ``kappa = max 1/gr``
    and ``eps = min(eps0, min rho)``. The certified gap is the largest
    distance from ``R = (1/n) sum log |r_k|`` to the interval
    ``[C - c_l kappa/eps^2, C + c_u kappa/eps^2]`` that contains the
    exponent, where ``C`` is the chain value without the middle term.

    Returns
    -------
    measured_gap : float
        ``|(1/n) log ||L_n..L_1|| - R|``.
    certified : CertifiedBound
        Its ``value`` is the certified gap.

    Raises
    ------
    APHypothesisViolated
        If ``r0`` is too small for this family.
    """
    mats = fam.matrices()
    n = fam.n
    if n < 2:
        raise InvalidMatrix("need at least two matrices")
    rep = require_ap(check_ap(mats, params))
    kappa, eps = rep.kappa, rep.eps
    ratio = kappa / eps**2
    sw = ap_sandwich(mats, params, kappa, eps)
    sum_pairs, sum_inner = _chain_terms(mats)
    chain = (sum_pairs - sum_inner) / n
    exponent = log_norm_indexed(mats, np.arange(n)) / n
    R = math.fsum(np.log(np.abs(fam.r))) / n
    lower = chain - params.c_l * ratio
    upper = chain + params.c_u * ratio
    if not (lower - GAP_TOL <= exponent <= upper + GAP_TOL):
        raise BoundViolated(f"exponent {exponent:.6e} outside chain interval [{lower:.6e}, {upper:.6e}]")
    measured = abs(exponent - R)
    below, above = R - lower, upper - R
    if below >= above:
        terms = {"mean_log_r_minus_chain": R - chain, "ap_lower": params.c_l * ratio}
    else:
        terms = {"chain_minus_mean_log_r": chain - R, "ap_upper": params.c_u * ratio}
    cert = CertifiedBound.from_terms(
        terms,
        preset=params.name,
        kappa=kappa,
        eps=eps,
        extras={
            "exponent": exponent,
            "mean_log_r": R,
            "chain": chain,
            "log_middle": sw.log_middle,
            "r0": fam.r0,
            "boundary_term": 2.0 * math.log(abs(fam.r[0] * fam.r[-1])) / n,
            "kappa_rankone": 1.0 / (1000.0 * fam.r0**0.25),
        },
    )
    _fail_if_above(measured, cert.value, "rank-one stability")
    return measured, cert


def _boundary_matrices(C0: float, C1: float, d: int, angles: int) -> np.ndarray:
    """Matrices ``U diag(C0, .., 1/C1) V^T`` on the boundary of the class."""
    if C0 * C1 < 1.0:
        raise DomainError("the class is empty unless C0 * C1 >= 1")
    th = np.linspace(0.0, np.pi, angles, endpoint=False)
    c, s = np.cos(th), np.sin(th)
    rot = np.zeros((angles, d, d))
    rot[:, 0, 0], rot[:, 0, 1], rot[:, 1, 0], rot[:, 1, 1] = c, -s, s, c
    for i in range(2, d):
        rot[:, i, i] = 1.0
    sv = np.full(d, 1.0 / C1)
    sv[0] = C0
    out = np.einsum("aij,j,bkj->abik", rot, sv, rot)
    return out.reshape(-1, d, d)


def _ap_passes_on_pairs(mats: np.ndarray, params: APParams) -> bool:
    s = np.linalg.svd(mats, compute_uv=False)
    kappa = float((s[:, 1] / s[:, 0]).max())
    norms = s[:, 0]
    prods = np.einsum("aij,bjk->abik", mats, mats)
    pn = np.linalg.svd(prods.reshape(-1, *mats.shape[1:]), compute_uv=False)[:, 0]
    rho = pn.reshape(len(mats), len(mats)) / np.outer(norms, norms)
    eps = min(float(rho.min()), params.eps0)
    return kappa < 1.0 and kappa <= params.c0 * eps * eps


def min_rankone_r0(
    C0: float, C1: float, params: APParams = AP_V1, *, d: int = 2, angles: int = 8, r_max: float = 1e9
) -> int:
    """Smallest integer ``r0`` for which AP holds on a worst-case family.

    The family is every sequence built from ``L = +-r0 P + M`` with
    ``P = e_1 e_1^T`` and ``M`` running over an angular grid of boundary
    matrices ``U diag(C0, 1/C1, ..) V^T``. The AP conditions only involve
    single factors and adjacent pairs, so checking all ordered pairs of
    candidates covers every sequence built from them. Bisection assumes
    the pass/fail predicate is monotone in ``r0``.
    """
    Ms = _boundary_matrices(C0, C1, d, angles)
    P = np.zeros((d, d))
    P[0, 0] = 1.0

    def passes(r0: float) -> bool:
        L = np.concatenate([r0 * P + Ms, -r0 * P + Ms])
        return _ap_passes_on_pairs(L, params)

    hi = 1.0
    while not passes(hi):
        hi *= 2.0
        if hi > r_max:
            raise DomainError(f"no r0 <= {r_max:g} makes AP hold for this class")
    lo = hi / 2.0 if hi > 1.0 else 0.0
    lo, hi = math.floor(lo), math.ceil(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if passes(float(mid)):
            hi = mid
        else:
            lo = mid
    return int(hi)


# ---------------------------------------------------------------------------
# Schrodinger transfer matrices off the spectrum


def psi(r):
    """``||transfer(r)||^2 = 1 + (r^2 + |r| sqrt(4 + r^2)) / 2``."""
    r = np.asarray(r, dtype=float)
    return 1.0 + 0.5 * (r * r + np.abs(r) * np.sqrt(4.0 + r * r))


def phi(x, y):
    """``2 + (x - y)^2 + x^2 y^2``, which determines ``||transfer(y) transfer(x)||``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return 2.0 + (x - y) ** 2 + x * x * y * y


def exact_transfer_norms(r):
    """Operator norm of ``[[r, -1], [1, 0]]`` in closed form (vectorized)."""
    return np.sqrt(psi(r))


def exact_pair_norm(r, r_next):
    """``||transfer(r_next) transfer(r)||`` in closed form (vectorized).

    Uses ``sqrt((phi + sqrt(phi^2 - 4)) / 2)`` with ``phi^2 - 4`` written
    as ``(phi - 2)(phi + 2)`` to avoid cancellation near ``phi = 2``.
    """
    f = phi(r, r_next)
    return np.sqrt(0.5 * (f + np.sqrt((f - 2.0) * (f + 2.0))))


def _transfer_stack(r: np.ndarray) -> np.ndarray:
    L = np.zeros((r.size, 2, 2))
    L[:, 0, 0] = r
    L[:, 0, 1] = -1.0
    L[:, 1, 0] = 1.0
    return L


def off_spectrum_sandwich(r_seq, n: int | None = None, *, r0: float | None = None) -> CertifiedBound:
    """Two-sided bound for transfer matrices with ``|r_k| >= r0 >= 32``.

    Certifies ``|(1/n) log ||L_n..L_1|| - (1/n) sum log |r_k||
    <= log(|r_1| |r_n|)/n + 1200 r0^-2`` with ``L_k = transfer(r_k)``.
    The per-element norm brackets and the AP hypotheses with
    ``kappa = r0^-2``, ``eps = 1/10`` are verified along the way.

    Parameters
    ----------
    r_seq : array_like
        The values ``r_k = E - v_k``.
    n : int, optional
        Use only the first ``n`` values.
    r0 : float, optional
        Lower bound on ``|r_k|``; defaults to the measured minimum.

    Returns
    -------
    CertifiedBound
        ``value`` is the certified gap. ``extras`` holds the measured
        exponent, the measured gap and the two-sided interval.
    """
    r = np.atleast_1d(np.asarray(r_seq, dtype=float))
    if n is not None:
        if n < 1 or n > r.size:
            raise DomainError(f"n must be in [1, {r.size}]")
        r = r[:n]
    if r.size == 0 or not np.all(np.isfinite(r)):
        raise DomainError("r_seq must be a non-empty finite sequence")
    rmin = float(np.abs(r).min())
    r0 = rmin if r0 is None else float(r0)
    if r0 < OFF_SPECTRUM_R0:
        raise DomainError(f"r0 = {r0:g} is below {OFF_SPECTRUM_R0:g}")
    if rmin < r0:
        raise DomainError(f"min |r_k| = {rmin:g} is below r0 = {r0:g}")
    n = r.size
    mats = _transfer_stack(r)
    norms = exact_transfer_norms(r)
    ar = np.abs(r)
    single_ok = bool(np.all(ar <= norms * (1 + MEMBERSHIP_TOL)) and np.all(norms <= ar * (1 + r0**-2)))
    pair_ok = True
    if n > 1:
        pn = exact_pair_norm(r[:-1], r[1:])
        pr = ar[:-1] * ar[1:]
        pair_ok = bool(np.all(pr <= pn * (1 + MEMBERSHIP_TOL)) and np.all(pn <= pr * (1 + 3 * r0**-2)))
    if not (single_ok and pair_ok):
        raise CertificateBroken("closed-form norm brackets failed")
    kappa, eps = r0**-2, 0.1
    if n > 1:
        dets = np.ones(n)
        require_ap(check_ap(mats, AP_V1, kappa=kappa, eps=eps, dets=dets))
    exponent = log_norm_indexed(mats, np.arange(n)) / n
    R = math.fsum(np.log(ar)) / n
    measured = abs(exponent - R)
    cert = CertifiedBound.from_terms(
        {"boundary": math.log(ar[0] * ar[-1]) / n, "ap_constant": OFF_SPECTRUM_CONST * r0**-2},
        preset=AP_V1.name,
        kappa=kappa,
        eps=eps,
        extras={"exponent": exponent, "mean_log_r": R, "measured_gap": measured, "r0": r0, "n": n},
    )
    extras = dict(cert.extras)
    extras["lower"] = R - cert.value
    extras["upper"] = R + cert.value
    cert = CertifiedBound(**{**cert.__dict__, "extras": extras})
    _fail_if_above(measured, cert.value, "off-spectrum bound")
    return cert


# ---------------------------------------------------------------------------
# perturbations of aligned diagonal sequences


@dataclass(frozen=True, eq=False)
class DiagonalFamily:
    """Diagonal matrices in the class ``D(Gamma, eta, C0, C1)``.

    Parameters
    ----------
    diags : ndarray, shape (n, d)
        Diagonal entries; column 0 holds the dominant eigenvalue.
    Gamma : float in (0, 1)
        ``|lambda_1| >= max_{i>=2} |lambda_i| / Gamma``.
    eta : float
        ``min_{i>=2} |lambda_i| >= eta``.
    C0, C1 : float
        ``C0 <= |lambda_1| <= C1``.
    """

    diags: np.ndarray
    Gamma: float
    eta: float
    C0: float
    C1: float

    def __post_init__(self):
        lam = np.asarray(self.diags, dtype=float)
        if lam.ndim != 2 or lam.shape[1] < 2 or lam.shape[0] == 0:
            raise InvalidMatrix("diags must have shape (n, d) with d >= 2")
        if not np.all(np.isfinite(lam)):
            raise InvalidMatrix("non-finite entries")
        if not (0.0 < self.Gamma < 1.0) or min(self.eta, self.C0, self.C1) <= 0:
            raise DomainError("need Gamma in (0, 1) and eta, C0, C1 > 0")
        a = np.abs(lam)
        top, rest = a[:, 0], a[:, 1:]
        tol = 1.0 + MEMBERSHIP_TOL
        if np.any(rest.max(axis=1) > self.Gamma * top * tol):
            raise DomainError("not uniformly gapped with this Gamma")
        if np.any(rest.min(axis=1) * tol < self.eta):
            raise DomainError("eigenvalue below eta")
        if np.any(top * tol < self.C0) or np.any(top > self.C1 * tol):
            raise DomainError("dominant eigenvalue outside [C0, C1]")
        object.__setattr__(self, "diags", lam)

    @property
    def n(self) -> int:
        return self.diags.shape[0]

    @property
    def d(self) -> int:
        return self.diags.shape[1]

    def matrices(self) -> np.ndarray:
        out = np.zeros((self.n, self.d, self.d))
        i = np.arange(self.d)
        out[:, i, i] = self.diags
        return out

    def exact_exponent(self) -> float:
        """``(1/n) sum log |lambda_1^(k)|``, the exponent of the diagonal product."""
        return math.fsum(np.log(np.abs(self.diags[:, 0]))) / self.n


@dataclass(frozen=True)
class BlockingPlan:
    """Block length ``nu`` and perturbation threshold ``delta0``."""

    eps1: float
    Gamma: float
    eta: float
    C0: float
    C1: float
    nu: int
    C2: float
    C3: float
    delta0: float
    delta0_terms: tuple = field(default=(), compare=False)

    @property
    def kappa(self) -> float:
        """AP gap constant used for the blocked sequences."""
        return self.eps1 / 2000.0

    @property
    def eps(self) -> float:
        return 0.1

    def certified_gap(self, n: int) -> float:
        return self.eps1 + self.nu / n * math.log(3.0 * self.C1)


def blocking_plan(eps1: float, Gamma: float, eta: float, C0: float, C1: float) -> BlockingPlan:
    """Block length and admissible perturbation size for the diagonal class.

    ``nu = ceil(log(4000/eps1) / log(1/Gamma))``, ``C2 = nu 2^nu C1^nu``,
    ``C3 = 2^nu C1^nu C2 / eta^nu`` and ``delta0`` is the minimum of six
    explicit terms. The terms are evaluated in log scale so that large
    ``nu`` does not overflow.

    Examples
    --------
    >>> blocking_plan(0.4, 0.5, 0.1, 1.0, 2.0).nu
    14
    """
    if not (0.0 < eps1 < 1.0):
        raise DomainError("eps1 must lie in (0, 1)")
    if not (0.0 < Gamma < 1.0):
        raise DomainError("Gamma must lie in (0, 1)")
    if min(eta, C0, C1) <= 0 or not all(map(math.isfinite, (eta, C0, C1))):
        raise DomainError("eta, C0, C1 must be positive and finite")
    if C0 > C1:
        raise DomainError("C0 must not exceed C1")
    nu = max(1, math.ceil(math.log(4000.0 / eps1) / math.log(1.0 / Gamma)))
    ln2, lc1 = math.log(2.0), math.log(C1)
    lC2 = math.log(nu) + nu * ln2 + nu * lc1
    lC3 = nu * ln2 + nu * lc1 + lC2 - nu * math.log(eta)
    logs = (
        0.0,
        math.log(eta / 2.0),
        nu * math.log(eta) - ln2 - lC2,
        2 * nu * math.log(C0) - (nu + 1) * ln2 - nu * lc1 - lC2,
        -nu * math.log(Gamma) + nu * lc1 + lC3 - math.log(3.0),
        math.log(eps1 / 10.0) - 2.0 * (ln2 + lC2),
    )
    delta0 = math.exp(min(logs))
    if delta0 == 0.0:
        raise DomainError("delta0 underflows to zero for these class constants")
    return BlockingPlan(
        eps1=eps1,
        Gamma=Gamma,
        eta=eta,
        C0=C0,
        C1=C1,
        nu=nu,
        C2=math.exp(lC2),
        C3=math.exp(lC3),
        delta0=delta0,
        delta0_terms=tuple(logs),
    )


def _block_products(mats: np.ndarray, nu: int) -> np.ndarray:
    """Disjoint consecutive ``nu``-fold products; the remainder is dropped."""
    m = mats.shape[0] // nu
    out = np.empty((m,) + mats.shape[1:])
    for b in range(m):
        acc = mats[b * nu]
        for j in range(1, nu):
            acc = mats[b * nu + j] @ acc
        out[b] = acc
    return out


def stability2_gap(
    fam: DiagonalFamily,
    M_seq,
    plan: BlockingPlan,
    n: int | None = None,
) -> tuple[float, CertifiedBound]:
    """Certified distance between the exponents of ``M_k`` and of ``D_k``.

    Checks ``max ||D_k - M_k|| < delta0``, flips the sign of ``D_k`` and
    ``M_k`` where ``lambda_1^(k) < 0``, forms the ``nu``-blocked
    sequences and verifies AP on both with ``kappa = eps1/2000`` and
    ``eps = 1/10``. The certified gap is ``eps1 + (nu/n) log(3 C1)``.

    Raises
    ------
    PerturbationTooLarge
        If ``max ||D_k - M_k|| >= delta0``.
    APHypothesisViolated
        If AP fails on a blocked sequence.
    """
    if (plan.Gamma, plan.eta, plan.C0, plan.C1) != (fam.Gamma, fam.eta, fam.C0, fam.C1):
        raise DomainError("plan and family use different class constants")
    D = fam.matrices()
    M = np.asarray(M_seq, dtype=float)
    if M.shape != D.shape:
        raise InvalidMatrix(f"M_seq must have shape {D.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidMatrix("non-finite entries")
    n = fam.n if n is None else int(n)
    if not (1 <= n <= fam.n):
        raise DomainError(f"n must be in [1, {fam.n}]")
    D, M = D[:n], M[:n]
    delta = float(np.linalg.norm(D - M, 2, axis=(1, 2)).max())
    if delta >= plan.delta0:
        raise PerturbationTooLarge(f"max ||D_k - M_k|| = {delta:.3e} >= delta0 = {plan.delta0:.3e}")
    sign = np.where(fam.diags[:n, 0] < 0, -1.0, 1.0)[:, None, None]
    D, M = sign * D, sign * M

    nu = plan.nu
    Dt = _block_products(D, nu)
    Mt = _block_products(M, nu)
    block_pert = float(np.linalg.norm(Dt - Mt, 2, axis=(1, 2)).max()) if len(Dt) else 0.0
    if block_pert > delta * plan.C2 * (1 + MEMBERSHIP_TOL):
        raise CertificateBroken(f"blocked perturbation {block_pert:.3e} exceeds delta*C2")
    min_block_gap = math.inf
    if len(Dt) >= 2:
        for seq in (Dt, Mt):
            require_ap(check_ap(seq, AP_V1, kappa=plan.kappa, eps=plan.eps))
        s = np.linalg.svd(Dt, compute_uv=False)
        min_block_gap = float((s[:, 0] / s[:, 1]).min())

    exp_M = log_norm_indexed(M, np.arange(n)) / n
    exp_D = math.fsum(np.log(np.abs(fam.diags[:n, 0]))) / n
    measured = abs(exp_M - exp_D)
    cert = CertifiedBound.from_terms(
        {"eps1": plan.eps1, "remainder": nu / n * math.log(3.0 * plan.C1)},
        preset=AP_V1.name,
        kappa=plan.kappa,
        eps=plan.eps,
        extras={
            "exponent_M": exp_M,
            "exponent_D": exp_D,
            "delta": delta,
            "delta0": plan.delta0,
            "nu": nu,
            "blocks": len(Dt),
            "block_perturbation": block_pert,
            "block_perturbation_bound": delta * plan.C2,
            "min_block_gap_ratio": min_block_gap,
            "Gamma_pow_minus_nu": plan.Gamma ** (-nu),
        },
    )
    _fail_if_above(measured, cert.value, "diagonal stability")
    return measured, cert


def sample_diagonal_family(
    rng: np.random.Generator, n: int, d: int, Gamma: float, eta: float, C0: float, C1: float
) -> DiagonalFamily:
    """Random member of ``D(Gamma, eta, C0, C1)`` with random signs.

    Requires ``eta <= Gamma * C0`` so that every dominant value admits
    admissible subdominant ones.
    """
    if eta > Gamma * C0:
        raise DomainError("need eta <= Gamma * C0")
    top = rng.uniform(C0, C1, n)
    rest = eta + rng.uniform(0.0, 1.0, (n, d - 1)) * (Gamma * top[:, None] - eta)
    lam = np.concatenate([top[:, None], rest], axis=1)
    lam *= rng.choice([-1.0, 1.0], size=lam.shape)
    return DiagonalFamily(lam, Gamma, eta, C0, C1)


def perturb(rng: np.random.Generator, mats: np.ndarray, delta: float) -> np.ndarray:
    """Add a random perturbation of operator norm ``delta`` to each matrix.

    Perturbations below the float spacing of an entry are rounded away,
    so for tiny ``delta`` the realized ``mats - result`` can differ from
    the drawn one. For diagonal ``mats`` only the diagonal can be lost,
    which keeps the realized norm below ``2 delta``.
    """
    G = rng.standard_normal(mats.shape)
    G /= np.linalg.norm(G, 2, axis=(1, 2))[:, None, None]
    return mats + delta * G


# ---------------------------------------------------------------------------
# Jacobi two-step transfer matrices


def jacobi_transfer(E: float, theta: float) -> np.ndarray:
    """``[[(E^2 - 1)/theta, -E theta], [E/theta, -theta]]``."""
    if not (theta > 0) or not math.isfinite(theta):
        raise DomainError("theta must be positive and finite")
    if not math.isfinite(E):
        raise DomainError("E must be finite")
    return np.array([[(E * E - 1.0) / theta, -E * theta], [E / theta, -theta]])


def _jacobi_stack(E: float, theta: np.ndarray) -> np.ndarray:
    out = np.empty((theta.size, 2, 2))
    out[:, 0, 0] = (E * E - 1.0) / theta
    out[:, 0, 1] = -E * theta
    out[:, 1, 0] = E / theta
    out[:, 1, 1] = -theta
    return out


@dataclass(frozen=True)
class JacobiRegime:
    """Margins and class constants for one of the two regimes."""

    below_one: bool
    beta1: float
    beta2: float
    Gamma: float
    eta: float
    C0: float
    C1: float
    C: float


def jacobi_regime(theta_seq) -> JacobiRegime:
    """Classify ``theta`` as uniformly below or uniformly above one.

    Below one, ``beta1 <= theta <= 1 - beta2``; above one,
    ``1 + beta1 <= theta <= beta2``. ``C`` bounds
    ``||M(E) - M(0)|| / |E|`` for ``|E| <= 1``.
    """
    th = np.atleast_1d(np.asarray(theta_seq, dtype=float))
    if th.size == 0 or not np.all(np.isfinite(th)) or np.any(th <= 0):
        raise DomainError("theta values must be positive and finite")
    lo, hi = float(th.min()), float(th.max())
    C = math.sqrt(2.0 / lo**2 + hi**2)
    if hi < 1.0:
        b1, b2 = lo, 1.0 - hi
        return JacobiRegime(True, b1, b2, (1.0 - b2) ** 2, b1, 1.0 / (1.0 - b2), 1.0 / b1, C)
    if lo > 1.0:
        b1, b2 = lo - 1.0, hi
        return JacobiRegime(False, b1, b2, 1.0 / (1.0 + b1) ** 2, 1.0 / b2, 1.0 + b1, b2, C)
    raise MixedRegime(f"theta values straddle 1 (range [{lo:g}, {hi:g}])")


def jacobi_stability(E: float, theta_seq, eps1: float, n: int | None = None) -> tuple[float, CertifiedBound]:
    """Certified gap between the Jacobi exponents at ``E`` and at ``0``.

    Reduces to :func:`stability2_gap` with ``D_k = M_k(0)``. In the regime
    above one the dominant entry of ``M_k(0)`` sits second, so both
    sequences are conjugated by the coordinate swap, which preserves the
    norms of all products. The certified gap is ``eps1 + xi/n`` with
    ``xi = nu log(3 C1)``.

    Raises
    ------
    MixedRegime
        If the ``theta`` values straddle 1.
    EnergyTooLarge
        If ``|E| >= E0 = delta0 / C``.
    """
    th = np.atleast_1d(np.asarray(theta_seq, dtype=float))
    if n is not None:
        if not (1 <= n <= th.size):
            raise DomainError(f"n must be in [1, {th.size}]")
        th = th[:n]
    reg = jacobi_regime(th)
    plan = blocking_plan(eps1, reg.Gamma, reg.eta, reg.C0, reg.C1)
    E0 = plan.delta0 / reg.C
    if abs(E) >= E0:
        raise EnergyTooLarge(f"|E| = {abs(E):.3e} is not below E0 = {E0:.3e}")
    D = _jacobi_stack(0.0, th)
    M = _jacobi_stack(float(E), th)
    if not reg.below_one:
        D = D[:, ::-1, ::-1]
        M = M[:, ::-1, ::-1]
    lam = np.stack([D[:, 0, 0], D[:, 1, 1]], axis=1)
    fam = DiagonalFamily(lam, reg.Gamma, reg.eta, reg.C0, reg.C1)
    measured, cert = stability2_gap(fam, M, plan)
    extras = dict(cert.extras)
    extras.update(E0=E0, xi=plan.nu * math.log(3.0 * reg.C1), beta1=reg.beta1, beta2=reg.beta2, C=reg.C)
    return measured, CertifiedBound(**{**cert.__dict__, "extras": extras})
