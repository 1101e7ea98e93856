"""Overflow-safe finite-n Lyapunov exponents and the Monte Carlo harness.

The finite exponent of ``L_1, ..., L_n`` is ``(1/n) log ||L_n ... L_1||``.
Products are accumulated with renormalization so that ``n`` in the
millions and factor norms up to ``1e10`` stay in range.

Two implementations are provided. :class:`RenormProduct` renormalizes by
the operator norm after every step, so its running matrix always has norm
one. The compiled kernel behind :func:`log_norm_indexed` renormalizes by
the largest entry, which is cheaper, and takes the exact operator norm of
the final matrix. In exact arithmetic both give ``log ||product||``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .errors import DegenerateMatrix, InvalidMatrix
from .matan import as_matrix, op_norm
from .rng import make_rng


@numba.njit(cache=True, nogil=True)
def _indexed_product(mats, idx):
    d = mats.shape[1]
    Q = np.zeros((d, d), dtype=mats.dtype)
    tmp = np.zeros((d, d), dtype=mats.dtype)
    for i in range(d):
        Q[i, i] = 1.0
    acc = 0.0
    for k in range(idx.shape[0]):
        L = mats[idx[k]]
        s = 0.0
        for i in range(d):
            for j in range(d):
                v = L[i, 0] * Q[0, j]
                for m in range(1, d):
                    v += L[i, m] * Q[m, j]
                tmp[i, j] = v
                a = abs(v)
                if a > s:
                    s = a
        if s == 0.0 or not np.isfinite(s):
            return -np.inf, tmp
        acc += math.log(s)
        inv = 1.0 / s
        for i in range(d):
            for j in range(d):
                Q[i, j] = tmp[i, j] * inv
    return acc, Q


def log_norm_indexed(mats: np.ndarray, idx: np.ndarray) -> float:
    """``log || mats[idx[n-1]] ... mats[idx[0]] ||``.

    Parameters
    ----------
    mats : ndarray, shape (m, d, d)
        Distinct factors, real or complex.
    idx : ndarray of int, shape (n,)
        Which factor is applied at each step; ``idx[0]`` acts first.
    """
    mats = np.ascontiguousarray(mats)
    if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
        raise InvalidMatrix(f"expected a stack of square matrices, got shape {mats.shape}")
    if not np.all(np.isfinite(mats)):
        raise InvalidMatrix("matrix has non-finite entries")
    mats = mats.astype(complex if np.iscomplexobj(mats) else float, copy=False)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    if idx.ndim != 1 or idx.size == 0:
        raise InvalidMatrix("index sequence must be a non-empty 1-D array")
    if idx.min() < 0 or idx.max() >= mats.shape[0]:
        raise InvalidMatrix("index out of range")
    acc, Q = _indexed_product(mats, idx)
    if acc == -np.inf:
        raise DegenerateMatrix("product collapsed to zero")
    return acc + math.log(op_norm(Q))


def finite_exponent(seq: Sequence) -> float:
    """``(1/n) log ||L_n ... L_1||`` for a sequence of matrices."""
    mats = np.asarray(seq)
    if mats.ndim != 3 or mats.shape[0] == 0:
        raise InvalidMatrix("expected a non-empty sequence of square matrices")
    n = mats.shape[0]
    return log_norm_indexed(mats, np.arange(n)) / n


class RenormProduct:
    """Running product ``L_k ... L_1 = exp(log_scale) * Q`` with ``||Q|| = 1``.

    Examples
    --------
    >>> rp = RenormProduct(2)
    >>> for _ in range(3):
    ...     rp.push(np.diag([2.0, 0.5]))
    >>> round(rp.exponent, 12)
    0.693147180560
    """

    def __init__(self, dim: int, dtype=float):
        self.Q = np.eye(dim, dtype=dtype)
        self.log_scale = 0.0
        self.steps = 0

    def push(self, L) -> None:
        A = as_matrix(L)
        if A.shape != self.Q.shape:
            raise InvalidMatrix(f"expected shape {self.Q.shape}, got {A.shape}")
        P = A @ self.Q
        c = op_norm(P)
        if c == 0.0:
            raise DegenerateMatrix("product collapsed to zero")
        self.Q = P / c
        self.log_scale += math.log(c)
        self.steps += 1

    @property
    def exponent(self) -> float:
        """``(1/n) log ||product||`` after ``n`` pushes."""
        if self.steps == 0:
            raise InvalidMatrix("empty product")
        return self.log_scale / self.steps


@dataclass(frozen=True)
class MCResult:
    """Mean and standard error of per-trial finite exponents."""

    mean: float
    stderr: float
    trials: int
    n: int
    seed: int
    samples: tuple

    def __str__(self) -> str:
        return f"{self.mean:.6f} +/- {self.stderr:.6f} ({self.trials} trials, n={self.n})"


def thread_count() -> int:
    """Worker count from ``LYAP_THREADS``, else the CPU count."""
    raw = os.environ.get("LYAP_THREADS")
    if raw:
        try:
            k = int(raw)
        except ValueError:
            raise ValueError(f"LYAP_THREADS must be an integer, got {raw!r}") from None
        return max(1, k)
    return os.cpu_count() or 1


def summarize(samples, n: int, seed: int) -> MCResult:
    """Aggregate per-trial values; the result does not depend on their order."""
    x = [float(v) for v in samples]
    t = len(x)
    mean = math.fsum(x) / t
    if t > 1:
        var = math.fsum((v - mean) ** 2 for v in x) / (t - 1)
        stderr = math.sqrt(var / t)
    else:
        stderr = 0.0
    return MCResult(mean=mean, stderr=stderr, trials=t, n=n, seed=seed, samples=tuple(x))


def _trial(sys, coc, n, seed, t):
    rng = make_rng(seed, t)
    orbit = sys.orbit(n, rng)
    mats, idx = coc.materialize(orbit)
    return log_norm_indexed(mats, idx) / n


def mc_lyapunov(sys, coc, n: int, trials: int, seed: int, *, threads: int | None = None) -> MCResult:
    """Monte Carlo estimate of the top Lyapunov exponent.

    Trial ``t`` draws its orbit from ``make_rng(seed, t)``. ``sys`` must
    provide ``orbit(n, rng)`` and ``coc`` must provide ``materialize(orbit)``
    returning ``(mats, idx)``; see :mod:`lyapbound.dynamics`.
    """
    if n < 1 or trials < 1:
        raise ValueError("n and trials must be positive")
    k = min(trials, threads if threads is not None else thread_count())
    if k <= 1:
        vals = [_trial(sys, coc, n, seed, t) for t in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=k) as pool:
            vals = list(pool.map(lambda t: _trial(sys, coc, n, seed, t), range(trials)))
    return summarize(vals, n, seed)


def renorm_indexed(mats: np.ndarray, idx: np.ndarray) -> tuple[float, np.ndarray]:
    """``(c, Q)`` with ``mats[idx[-1]] ... mats[idx[0]] = exp(c) * Q`` and ``||Q|| = 1``."""
    mats = np.ascontiguousarray(mats, dtype=complex if np.iscomplexobj(mats) else float)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    if mats.ndim != 3 or idx.ndim != 1 or idx.size == 0:
        raise InvalidMatrix("expected a stack of matrices and a non-empty index array")
    acc, Q = _indexed_product(mats, idx)
    if acc == -np.inf:
        raise DegenerateMatrix("product collapsed to zero")
    c = op_norm(Q)
    return acc + math.log(c), Q / c
