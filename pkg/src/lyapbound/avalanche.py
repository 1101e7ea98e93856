"""Effective Avalanche Principle.

A sequence ``L_1, ..., L_n`` satisfies the hypotheses of
``AP(eps0, c0, c_l, c_u)`` with parameters ``(kappa, eps)`` when

* ``0 < eps <= eps0`` and ``0 < kappa <= c0 * eps**2``;
* gap: ``gr(L_i) >= 1/kappa`` for every ``i``;
* alignment: ``rho(L_i, L_{i+1}) >= eps`` for every adjacent pair.

The conclusion is the two-sided estimate

    exp(-c_l n kappa / eps**2) <= rho(L_1..L_n) / prod rho(L_i, L_{i+1})
                               <= exp(c_u n kappa / eps**2).

Two presets are built in: ``AP_V1 = AP(1/10, 1/10, 5, 11)`` for every
length and ``AP_V2 = AP(1/5, 1/6, 11, 11)`` for lengths ``n >= 36``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import APHypothesisViolated, InvalidMatrix, SandwichViolated
from .matan import as_matrix, gap_ratio, log_expansion_rift, pair_rift

#: Relative slack on hypothesis comparisons; several certified examples
#: sit exactly on the boundary (e.g. ``kappa == c0 * eps**2``).
COND_RTOL = 1e-12
#: Absolute slack, in log scale, of the sandwich assertion.
SANDWICH_TOL = 1e-9


@dataclass(frozen=True)
class APParams:
    """Constants of an effective Avalanche Principle."""

    eps0: float
    c0: float
    c_l: float
    c_u: float
    min_len: int = 0
    name: str = "custom"

    def __post_init__(self):
        if not 0 < self.eps0 <= 1:
            raise ValueError("eps0 must lie in (0, 1]")
        if min(self.c0, self.c_l, self.c_u) <= 0:
            raise ValueError("c0, c_l, c_u must be positive")
        if self.min_len < 0:
            raise ValueError("min_len must be non-negative")


AP_V1 = APParams(0.1, 0.1, 5.0, 11.0, 0, "AP_V1")
AP_V2 = APParams(0.2, 1.0 / 6.0, 11.0, 11.0, 36, "AP_V2")
PRESETS = {"AP_V1": AP_V1, "AP_V2": AP_V2}


def preset(name: str) -> APParams:
    """Look up a built-in preset by name."""
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown AP preset {name!r}; choose from {sorted(PRESETS)}") from None


@dataclass(frozen=True)
class CertifiedBound:
    """A bound together with the named terms it is the sum of.

    ``conditional`` marks values that rest on an assumption the code
    cannot verify. ``extras`` holds diagnostics that are not summed.
    """

    value: float
    terms: Mapping[str, float]
    preset: str
    kappa: float
    eps: float
    conditional: bool = False
    extras: Mapping[str, object] = field(default_factory=dict)

    @classmethod
    def from_terms(cls, terms: Mapping[str, float], **kw) -> "CertifiedBound":
        terms = {k: float(v) for k, v in terms.items()}
        return cls(value=math.fsum(terms.values()), terms=terms, **kw)


@dataclass(frozen=True)
class APReport:
    """Outcome of checking the AP hypotheses on one sequence."""

    kappa: float
    eps: float
    n: int
    gap_ok: bool
    align_ok: bool
    kappa_ok: bool
    eps_ok: bool
    len_ok: bool
    measured_kappa: float
    measured_eps: float
    worst_gap_index: int
    worst_align_index: int
    params: APParams

    @property
    def ok(self) -> bool:
        return self.gap_ok and self.align_ok and self.kappa_ok and self.eps_ok and self.len_ok

    def failures(self) -> list[str]:
        out = []
        if not self.gap_ok:
            out.append(f"gap: gr(L_{self.worst_gap_index}) < 1/kappa (kappa={self.kappa:.3e})")
        if not self.align_ok:
            out.append(f"alignment: rho at pair {self.worst_align_index} < eps={self.eps:.3e}")
        if not self.eps_ok:
            out.append(f"eps={self.eps:.3e} not in (0, {self.params.eps0}]")
        if not self.kappa_ok:
            out.append(f"kappa={self.kappa:.3e} > c0*eps^2={self.params.c0 * self.eps**2:.3e}")
        if not self.len_ok:
            out.append(f"length n={self.n} < {self.params.min_len} required by {self.params.name}")
        return out


def _le(x: float, y: float) -> bool:
    return x <= y * (1.0 + COND_RTOL)


def check_ap(
    seq: Sequence,
    params: APParams,
    *,
    kappa: float | None = None,
    eps: float | None = None,
    dets: Sequence[float] | None = None,
) -> APReport:
    """Check the AP hypotheses on ``seq``.

    Parameters
    ----------
    seq : sequence of (d, d) arrays
    params : APParams
    kappa, eps : float, optional
        Certified values to test instead of the measured ones. Without an
        override, kappa is ``max 1/gr(L_i)`` and eps is
        ``min(eps0, min rho(L_i, L_{i+1}))``.
    dets : sequence of float, optional
        Exact determinants, forwarded to :func:`~lyapbound.matan.gap_ratio`
        for 2x2 factors whose entries are too large for a float SVD.
    """
    mats = [as_matrix(L) for L in seq]
    n = len(mats)
    if n == 0:
        raise InvalidMatrix("empty sequence")
    if dets is not None and len(dets) != n:
        raise InvalidMatrix("dets must match the sequence length")
    grs = np.array([gap_ratio(L, det=None if dets is None else dets[i]) for i, L in enumerate(mats)])
    rhos = np.array([pair_rift(mats[i], mats[i + 1]) for i in range(n - 1)])
    m_kappa = float(1.0 / grs.min())
    m_eps = float(rhos.min()) if n > 1 else 1.0
    k = m_kappa if kappa is None else float(kappa)
    e = min(m_eps, params.eps0) if eps is None else float(eps)
    gap_ok = k < 1.0 and bool(np.all(grs * k >= 1.0 - COND_RTOL))
    align_ok = bool(np.all(rhos >= e * (1.0 - COND_RTOL)))
    return APReport(
        kappa=k,
        eps=e,
        n=n,
        gap_ok=gap_ok,
        align_ok=align_ok,
        kappa_ok=k > 0 and _le(k, params.c0 * e * e),
        eps_ok=0 < e and _le(e, params.eps0),
        len_ok=n >= params.min_len,
        measured_kappa=m_kappa,
        measured_eps=m_eps,
        worst_gap_index=int(np.argmin(grs)) + 1,
        worst_align_index=int(np.argmin(rhos)) + 1 if n > 1 else 0,
        params=params,
    )


def require_ap(report: APReport) -> APReport:
    """Raise :class:`APHypothesisViolated` unless every condition holds."""
    if not report.ok:
        raise APHypothesisViolated("; ".join(report.failures()))
    return report


@dataclass(frozen=True)
class Sandwich:
    """The three sides of the AP estimate, in log scale and exponentiated."""

    log_lower: float
    log_middle: float
    log_upper: float

    @property
    def lower(self) -> float:
        return math.exp(self.log_lower)

    @property
    def middle(self) -> float:
        return math.exp(self.log_middle)

    @property
    def upper(self) -> float:
        return math.exp(self.log_upper)

    @property
    def slack(self) -> float:
        """Smallest distance of the middle to either side (log scale)."""
        return min(self.log_middle - self.log_lower, self.log_upper - self.log_middle)


def log_sandwich_middle(seq: Sequence) -> float:
    """``log( rho(L_1..L_n) / prod rho(L_i, L_{i+1}) )``; zero for ``n = 2``."""
    mats = [as_matrix(L) for L in seq]
    if len(mats) < 2:
        raise InvalidMatrix("need at least two matrices")
    if len(mats) == 2:
        return 0.0
    pairs = math.fsum(math.log(pair_rift(mats[i], mats[i + 1])) for i in range(len(mats) - 1))
    return log_expansion_rift(mats) - pairs


def ap_sandwich(
    seq: Sequence,
    params: APParams,
    kappa: float,
    eps: float,
    *,
    dets: Sequence[float] | None = None,
) -> Sandwich:
    """Verify the hypotheses and evaluate the two-sided AP estimate.

    Raises
    ------
    APHypothesisViolated
        If ``check_ap`` fails for the given ``(kappa, eps)``.
    SandwichViolated
        If the middle falls outside ``[lower, upper]`` by more than
        ``SANDWICH_TOL`` in log scale. With the hypotheses verified, this
        means a bug or numerically singular input.
    """
    mats = [as_matrix(L) for L in seq]
    if len(mats) < 2:
        raise InvalidMatrix("the sandwich needs at least two matrices")
    require_ap(check_ap(mats, params, kappa=kappa, eps=eps, dets=dets))
    n = len(mats)
    r = kappa / eps**2
    s = Sandwich(-params.c_l * n * r, log_sandwich_middle(mats), params.c_u * n * r)
    if s.slack < -SANDWICH_TOL:
        raise SandwichViolated(
            f"log middle {s.log_middle:.6e} outside [{s.log_lower:.6e}, {s.log_upper:.6e}]"
        )
    return s


def worst_case_lower_bound(kappa: float, eps: float, params: APParams) -> CertifiedBound:
    """``1/2 log(eps**2/kappa) - c_l kappa/eps**2``.

    A lower bound on the exponent that uses only the gap and alignment
    constants, not the matrices themselves.

    Examples
    --------
    >>> round(worst_case_lower_bound(1e-6, 0.1, AP_V1).value, 4)
    4.6047
    """
    if kappa <= 0 or eps <= 0:
        raise ValueError("kappa and eps must be positive")
    return CertifiedBound.from_terms(
        {"main": 0.5 * math.log(eps**2 / kappa), "ap_error": -params.c_l * kappa / eps**2},
        preset=params.name,
        kappa=kappa,
        eps=eps,
    )


def _rotation(d: int, angle: float, plane: tuple[int, int]) -> np.ndarray:
    R = np.eye(d)
    i, j = plane
    c, s = math.cos(angle), math.sin(angle)
    R[i, i], R[i, j], R[j, i], R[j, j] = c, -s, s, c
    return R


def aligned_family(
    rng: np.random.Generator,
    n: int,
    d: int = 2,
    *,
    gap_range: tuple[float, float] = (2e3, 1e6),
    max_angle: float = 1.4,
    noise: float = 0.1,
) -> list[np.ndarray]:
    """Random gapped sequence with controlled misalignment.

    ``L_k = R_k D_k S_k^T + noise * G_k``. ``D_k`` is diagonal with top
    entry of size drawn log-uniformly from ``gap_range`` and the others in
    ``[1/2, 1]``. ``S_k`` is ``R_{k-1}`` turned by an angle of at most
    ``max_angle`` in the first coordinate plane, so the rift of each
    adjacent pair is roughly ``cos`` of that angle. ``G_k`` has operator
    norm one.
    """
    if n < 1 or d < 2:
        raise ValueError("need n >= 1 and d >= 2")
    lo, hi = map(math.log, gap_range)
    prev = np.linalg.qr(rng.standard_normal((d, d)))[0]
    out = []
    for _ in range(n):
        lam = np.concatenate([[math.exp(rng.uniform(lo, hi))], rng.uniform(0.5, 1.0, d - 1)])
        lam *= rng.choice([-1.0, 1.0], size=d)
        S = prev @ _rotation(d, rng.uniform(-max_angle, max_angle), (0, 1))
        R = np.linalg.qr(rng.standard_normal((d, d)))[0]
        G = rng.standard_normal((d, d))
        G /= np.linalg.norm(G, 2)
        out.append(R @ np.diag(lam) @ S.T + noise * G)
        prev = R
    return out
