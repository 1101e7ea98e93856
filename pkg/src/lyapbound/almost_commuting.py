"""Lower bounds for products of almost-commuting positive definite matrices.

For i.i.d. positive definite factors ``A_k`` that satisfy a ``1/n``
convergence-speed assumption with constant ``c``,

``gamma_1 >= lambda_max(E log A_1) - max(sqrt(4 e^{5c} kc), 4 e^{5c} kc)``

with ``kc = max ||[log A_j, A_k]||``. The assumption cannot be checked
numerically, so ``c`` is an input and every result that depends on it is
marked ``conditional``. When the factors commute the penalty vanishes and
the bound is the exact exponent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .avalanche import CertifiedBound
from .dynamics import Cocycle
from .errors import DomainError, InvalidMatrix
from .estimator import MCResult, mc_lyapunov
from .matan import as_hermitian, complex_power, lambda_max, log_pd, op_norm

#: Commutators below this (relative) size count as zero.
COMMUTATOR_TOL = 1e-12


def commutator_norm(A, B) -> float:
    """``||AB - BA||``."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidMatrix("commutator needs two square matrices of the same shape")
    return op_norm(A @ B - B @ A)


def penalty(kappa_c: float, c: float) -> float:
    """``max(sqrt(4 e^{5c} kappa_c), 4 e^{5c} kappa_c)``."""
    if kappa_c < 0 or not math.isfinite(c) or c <= 0:
        raise DomainError("need kappa_c >= 0 and finite c > 0")
    x = 4.0 * math.exp(5.0 * c) * kappa_c
    return max(math.sqrt(x), x)


@dataclass(frozen=True)
class IIDSampler:
    """i.i.d. symbols ``0..k-1`` drawn with probabilities ``probs``."""

    probs: tuple

    def orbit(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.choice(len(self.probs), size=n, p=np.asarray(self.probs))


@dataclass(frozen=True, eq=False)
class PDCocycleSample:
    """Positive definite matrices ``A(s)`` with symbol probabilities.

    Parameters
    ----------
    mats : ndarray, shape (k, d, d)
        Symmetric positive definite factors.
    probs : sequence of float, length k
    c : float
        Convergence-speed constant of the assumption; user supplied.
    """

    mats: np.ndarray
    probs: tuple
    c: float

    def __post_init__(self):
        mats = np.asarray(self.mats, dtype=float)
        if mats.ndim == 2:
            mats = mats[None]
        if mats.ndim != 3 or mats.shape[0] == 0:
            raise InvalidMatrix("mats must be a non-empty stack of square matrices")
        mats = np.stack([as_hermitian(M) for M in mats])
        logs = np.stack([log_pd(M) for M in mats])  # raises NotPositiveDefinite
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (mats.shape[0],) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise DomainError("probs must be a probability vector matching mats")
        if not (math.isfinite(self.c) and self.c > 0):
            raise DomainError("c must be positive and finite")
        mats.setflags(write=False)
        logs.setflags(write=False)
        object.__setattr__(self, "mats", mats)
        object.__setattr__(self, "probs", tuple(float(x) for x in p))
        object.__setattr__(self, "_logs", logs)

    @classmethod
    def from_mapping(cls, mapping: Mapping, dist: Mapping, c: float) -> "PDCocycleSample":
        keys = list(mapping)
        if set(dist) - set(keys):
            raise DomainError("distribution has symbols without matrices")
        return cls(np.stack([np.asarray(mapping[s], dtype=float) for s in keys]), tuple(dist.get(s, 0.0) for s in keys), c)

    @property
    def logs(self) -> np.ndarray:
        return self._logs

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.probs) > 0)

    def expected_log(self) -> np.ndarray:
        return sum(p * L for p, L in zip(self.probs, self.logs) if p > 0)

    def sampler(self) -> IIDSampler:
        return IIDSampler(self.probs)

    def cocycle(self, t: float = 0.0) -> Cocycle:
        """Table of ``A(s)`` (``t = 0``) or ``A(s)^{1 + it}``."""
        if t == 0:
            mats = self.mats
        else:
            mats = np.stack([complex_power(M, 1.0 + 1j * t) for M in self.mats])
        return Cocycle.from_mapping(dict(enumerate(mats)))


def _max_commutator(left: np.ndarray, right: np.ndarray, idx: np.ndarray) -> float:
    best = 0.0
    for j in idx:
        for k in idx:
            x = commutator_norm(left[j], right[k])
            scale = max(1.0, op_norm(left[j]) * op_norm(right[k]))
            if x > COMMUTATOR_TOL * scale:
                best = max(best, x)
    return best


def log_commutator_constant(sample: PDCocycleSample) -> float:
    """``max ||[log A_j, A_k]||`` over the support, relative noise snapped to 0."""
    return _max_commutator(sample.logs, sample.mats, sample.support)


def power_commutator_constant(sample: PDCocycleSample, t: float) -> float:
    """``max ||[A_j^{it}, A_k]||`` over the support."""
    if t == 0:
        return 0.0
    unit = np.stack([complex_power(M, 1j * t) for M in sample.mats])
    return _max_commutator(unit, sample.mats.astype(complex), sample.support)


def almost_commuting_bound(sample: PDCocycleSample) -> CertifiedBound:
    """Conditional lower bound on the top exponent.

    ``value = lambda_max(E log A) - penalty(kappa_c, c)``; the result is
    flagged ``conditional`` because it rests on the user-supplied ``c``.

    Examples
    --------
    >>> s = PDCocycleSample(np.array([np.diag([4.0, 1.0]), np.diag([1.0, 2.0])]), (0.5, 0.5), 1.0)
    >>> round(almost_commuting_bound(s).value, 12) == round(0.5 * math.log(4.0), 12)
    True
    """
    lam = lambda_max(sample.expected_log())
    kc = log_commutator_constant(sample)
    pen = penalty(kc, sample.c)
    return CertifiedBound.from_terms(
        {"lambda_max_expected_log": lam, "commutator_penalty": -pen},
        preset="none",
        kappa=float("nan"),
        eps=float("nan"),
        conditional=True,
        extras={"kappa_c": kc, "c": sample.c},
    )


@dataclass(frozen=True)
class GammaTProbe:
    """Monte Carlo estimate of ``gamma_1(t)`` and the matching penalty."""

    t: float
    result: MCResult
    kappa_t: float
    penalty: float

    @property
    def estimate(self) -> float:
        return self.result.mean

    @property
    def stderr(self) -> float:
        return self.result.stderr


def gamma_t_probe(
    sample: PDCocycleSample, t: float, n: int, trials: int, seed: int, *, threads: int | None = None
) -> GammaTProbe:
    """Estimate ``(1/n) log ||prod A_k^{1+it}||`` by renormalized products.

    At ``t = 0`` the real table is used, so the estimate equals
    :func:`~lyapbound.estimator.mc_lyapunov` on ``sample.cocycle()``
    bit for bit. The reported ``penalty`` is the bound on
    ``|gamma_1 - gamma_1(t)|`` (conditional on ``c``).
    """
    if not math.isfinite(t):
        raise DomainError("t must be finite")
    res = mc_lyapunov(sample.sampler(), sample.cocycle(t), n, trials, seed, threads=threads)
    kt = power_commutator_constant(sample, t)
    return GammaTProbe(t=float(t), result=res, kappa_t=kt, penalty=penalty(kt, sample.c))
