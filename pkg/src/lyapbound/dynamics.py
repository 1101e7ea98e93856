"""Ergodic dynamics and cocycle sampling.

A :class:`DynSystem` is an immutable descriptor. ``orbit(n, rng)`` draws an
orbit of length ``n`` from a generator supplied by the caller, so the same
descriptor can be sampled independently by many trials. Symbolic systems
(Bernoulli, Markov, explicit) return integer symbols ``0, 1, ...``; toral
systems return their states as floats.

A :class:`Cocycle` maps orbit points to matrices. Its ``materialize``
method returns a stack of distinct matrices plus an index array, which is
the format the compiled estimator consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DomainError, InvalidMatrix, UnknownSymbol
from .matan import as_matrix, log_abs, singular_values
from .rng import make_rng
from .schrodinger import power_via_F, transfer, word_indices

_KINDS = ("bernoulli", "markov", "rotation", "skew_shift", "doubling", "explicit")
_PROB_TOL = 1e-12


@dataclass(frozen=True)
class DynSystem:
    """Descriptor of an ergodic system; build with the module constructors."""

    kind: str
    params: tuple = ()
    seed: int = 0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError(f"unknown system kind {self.kind!r}")

    def orbit(self, n: int, rng: np.random.Generator | None = None) -> np.ndarray:
        """Orbit of length ``n``; ``rng`` defaults to the descriptor's seed."""
        if n < 1:
            raise DomainError("n must be positive")
        rng = make_rng(self.seed) if rng is None else rng
        return _SAMPLERS[self.kind](self.params, n, rng)

    @property
    def stationary(self) -> np.ndarray | None:
        """Stationary symbol distribution of a symbolic system."""
        if self.kind == "bernoulli":
            (p,) = self.params
            return np.array([p, 1.0 - p])
        if self.kind == "markov":
            P, _ = self.params
            return _stationary(np.array(P))
        return None


def bernoulli(p: float, seed: int = 0) -> DynSystem:
    """i.i.d. symbols with ``P(0) = p`` and ``P(1) = 1 - p``."""
    if not 0.0 <= p <= 1.0:
        raise DomainError("p must lie in [0, 1]")
    return DynSystem("bernoulli", (float(p),), seed)


def _stationary(P: np.ndarray) -> np.ndarray:
    a, b = P[0, 1], P[1, 0]
    if a + b == 0:
        return np.array([0.5, 0.5])
    return np.array([b, a]) / (a + b)


def markov(P, init=None, seed: int = 0) -> DynSystem:
    """Two-state Markov chain with transition matrix ``P`` (rows sum to 1).

    ``init`` defaults to the stationary distribution, which makes the
    chain a stationary ergodic shift.
    """
    P = np.asarray(P, dtype=float)
    if P.shape != (2, 2) or np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1) > _PROB_TOL):
        raise DomainError("P must be a 2x2 stochastic matrix")
    pi = _stationary(P) if init is None else np.asarray(init, dtype=float)
    if pi.shape != (2,) or np.any(pi < 0) or abs(pi.sum() - 1) > _PROB_TOL:
        raise DomainError("init must be a probability vector of length 2")
    return DynSystem("markov", (tuple(map(tuple, P)), tuple(pi)), seed)


def markov_with_correlation(p0: float, corr: float, seed: int = 0) -> DynSystem:
    """Stationary chain with ``P(0) = p0`` and lag-one correlation ``corr``.

    For a two-state chain the correlation of consecutive symbols equals
    ``P(0|0) - P(0|1)``; both transition probabilities are solved for.
    """
    if not 0 < p0 < 1:
        raise DomainError("p0 must lie in (0, 1)")
    stay0 = p0 + corr * (1 - p0)
    to0 = p0 * (1 - corr)
    if not (0 <= stay0 <= 1 and 0 <= to0 <= 1):
        raise DomainError("correlation not attainable for this p0")
    return markov([[stay0, 1 - stay0], [to0, 1 - to0]], seed=seed)


def rotation(alpha: float, x0: float | None = None, seed: int = 0) -> DynSystem:
    """``x -> x + alpha mod 1``; a random start is drawn when ``x0`` is None."""
    return DynSystem("rotation", (float(alpha), x0), seed)


def skew_shift(alpha: float, x0: float | None = None, y0: float | None = None, seed: int = 0) -> DynSystem:
    """``(x, y) -> (x + alpha, y + x) mod 1``; the orbit has columns ``(x, y)``."""
    return DynSystem("skew_shift", (float(alpha), x0, y0), seed)


def doubling(x0: float | None = None, seed: int = 0) -> DynSystem:
    """``x -> 2x mod 1`` realized exactly as a shift on 53-bit windows."""
    return DynSystem("doubling", (x0,), seed)


def explicit(symbols: Sequence) -> DynSystem:
    """Cycle through a fixed symbol list."""
    syms = tuple(symbols)
    if not syms:
        raise DomainError("explicit system needs at least one symbol")
    return DynSystem("explicit", (syms,), 0)


# -- samplers --------------------------------------------------------------


def _sample_bernoulli(params, n, rng):
    (p,) = params
    return (rng.random(n) >= p).astype(np.int64)


def _sample_markov(params, n, rng):
    P, pi = np.array(params[0]), np.array(params[1])
    out = np.empty(n, dtype=np.int64)
    s = int(rng.random() >= pi[0])
    i = 0
    # sojourn times in state s are geometric with success 1 - P[s, s]
    while i < n:
        leave = 1.0 - P[s, s]
        run = n - i if leave <= 0 else int(rng.geometric(leave))
        out[i : i + run] = s
        i += run
        s = 1 - s
    return out


def _sample_rotation(params, n, rng):
    alpha, x0 = params
    x0 = rng.random() if x0 is None else float(x0)
    return np.mod(x0 + alpha * np.arange(n), 1.0)


def _sample_skew(params, n, rng):
    alpha, x0, y0 = params
    x = rng.random() if x0 is None else float(x0)
    y = rng.random() if y0 is None else float(y0)
    out = np.empty((n, 2))
    for k in range(n):
        out[k] = x, y
        y = (y + x) % 1.0
        x = (x + alpha) % 1.0
    return out


_WINDOW = 53


def _sample_doubling(params, n, rng):
    (x0,) = params
    if x0 is None:
        bits = rng.integers(0, 2, size=n + _WINDOW - 1, dtype=np.int64)
    else:
        m = int(math.ldexp(float(x0) % 1.0, _WINDOW))
        head = [(m >> (_WINDOW - 1 - j)) & 1 for j in range(_WINDOW)]
        bits = np.zeros(n + _WINDOW - 1, dtype=np.int64)
        bits[: min(_WINDOW, bits.size)] = head[: bits.size]
    win = np.lib.stride_tricks.sliding_window_view(bits, _WINDOW)
    weights = np.ldexp(1.0, -np.arange(1, _WINDOW + 1))
    return win[:n] @ weights


def _sample_explicit(params, n, rng):
    (syms,) = params
    reps = -(-n // len(syms))
    return np.array((list(syms) * reps)[:n], dtype=object if isinstance(syms[0], str) else None)


_SAMPLERS = {
    "bernoulli": _sample_bernoulli,
    "markov": _sample_markov,
    "rotation": _sample_rotation,
    "skew_shift": _sample_skew,
    "doubling": _sample_doubling,
    "explicit": _sample_explicit,
}


def orbit_symbols(sys: DynSystem, n: int) -> np.ndarray:
    """Orbit of length ``n`` drawn from the descriptor's own seed."""
    return sys.orbit(n)


# -- symbol strings ---------------------------------------------------------


def to_symbol_string(symbols, alphabet: str = "01") -> str:
    """Encode integer symbols as characters of ``alphabet``."""
    return "".join(alphabet[int(s)] for s in symbols)


def from_symbol_string(text: str, alphabet: str = "01") -> np.ndarray:
    """Decode a string such as ``"+-+-"`` with ``alphabet="-+"``."""
    pos = {c: i for i, c in enumerate(alphabet)}
    try:
        return np.array([pos[c] for c in text], dtype=np.int64)
    except KeyError as e:
        raise UnknownSymbol(f"symbol {e.args[0]!r} not in alphabet {alphabet!r}") from None


# -- cocycles -----------------------------------------------------------------


@dataclass(frozen=True)
class Cocycle:
    """Map from orbit points to invertible matrices.

    Either ``symbols``/``mats`` (a finite table) or ``fn`` (a vectorized
    function from an array of states to a stack of matrices) is set.
    """

    symbols: tuple = ()
    mats: np.ndarray | None = field(default=None, compare=False)
    fn: Callable | None = field(default=None, compare=False)
    dim: int = 0

    @classmethod
    def from_mapping(cls, mapping: Mapping) -> "Cocycle":
        if not mapping:
            raise InvalidMatrix("empty cocycle table")
        syms = tuple(mapping)
        mats = np.stack([as_matrix(mapping[s], allow_complex=True) for s in syms])
        for s, M in zip(syms, mats):
            if singular_values(M)[-1] == 0.0:
                raise InvalidMatrix(f"matrix for symbol {s!r} is singular")
        mats.setflags(write=False)
        return cls(symbols=syms, mats=mats, dim=mats.shape[1])

    @classmethod
    def from_function(cls, fn: Callable, dim: int) -> "Cocycle":
        return cls(fn=fn, dim=int(dim))

    def indices(self, orbit) -> np.ndarray:
        """Table positions of orbit symbols."""
        orbit = np.asarray(orbit)
        if orbit.dtype.kind in "iu" and self.symbols == tuple(range(len(self.symbols))):
            if orbit.size and (orbit.min() < 0 or orbit.max() >= len(self.symbols)):
                raise UnknownSymbol("orbit symbol outside the cocycle table")
            return orbit.astype(np.int64, copy=False)
        pos = {s: i for i, s in enumerate(self.symbols)}
        try:
            return np.array([pos[s.item() if hasattr(s, "item") else s] for s in orbit], dtype=np.int64)
        except KeyError as e:
            raise UnknownSymbol(f"no matrix for symbol {e.args[0]!r}") from None

    def materialize(self, orbit) -> tuple[np.ndarray, np.ndarray]:
        """``(mats, idx)`` such that the k-th factor is ``mats[idx[k]]``."""
        if self.fn is not None:
            mats = np.asarray(self.fn(np.asarray(orbit)))
            return mats, np.arange(mats.shape[0])
        return self.mats, self.indices(orbit)


def sample_cocycle(sys: DynSystem, coc: Cocycle, n: int, rng=None) -> list[np.ndarray]:
    """The first ``n`` cocycle matrices along an orbit of ``sys``."""
    mats, idx = coc.materialize(sys.orbit(n, rng))
    return [mats[i] for i in idx]


def exact_expectations(coc: Cocycle, dist) -> tuple[np.ndarray, np.ndarray]:
    """``(E log|L|, E log|L^T|)`` for a finite cocycle under ``dist``.

    ``dist`` maps symbols to probabilities, or is a sequence aligned with
    ``coc.symbols``.
    """
    if coc.mats is None:
        raise InvalidMatrix("exact expectations need a finite cocycle table")
    if isinstance(dist, Mapping):
        w = np.array([dist.get(s, 0.0) for s in coc.symbols], dtype=float)
        unknown = set(dist) - set(coc.symbols)
        if unknown:
            raise UnknownSymbol(f"no matrix for symbols {sorted(map(str, unknown))}")
    else:
        w = np.asarray(dist, dtype=float)
    if w.shape != (len(coc.symbols),) or np.any(w < 0) or abs(w.sum() - 1) > _PROB_TOL:
        raise DomainError("distribution must be non-negative and sum to 1")
    E1 = sum(wi * log_abs(M) for wi, M in zip(w, coc.mats) if wi > 0)
    E2 = sum(wi * log_abs(M.T) for wi, M in zip(w, coc.mats) if wi > 0)
    return E1, E2


# -- polymer model -------------------------------------------------------------

#: Polymer block symbols: 0 is '-' (all sites at -v), 1 is '+' (mixed block).
POLYMER_ALPHABET = "-+"


@dataclass(frozen=True)
class PolymerSystem:
    """Polymer blocks of ``2p`` sites at potential ``-v``, sampled by ``sampler``.

    Symbol 0 (``'-'``) is the all ``-v`` block ``B^{2p}``; symbol 1
    (``'+'``) is the mixed block ``A^p B^p``. ``pfrak`` is the stationary
    probability of ``'-'``.
    """

    p: int
    v: float
    sampler: DynSystem

    def __post_init__(self):
        if self.p < 1 or self.v <= 0:
            raise DomainError("need p >= 1 and v > 0")
        if self.sampler.stationary is None:
            raise DomainError("polymer sampler must be a symbolic system")

    @property
    def pfrak(self) -> float:
        return float(self.sampler.stationary[0])

    def orbit(self, n: int, rng=None) -> np.ndarray:
        return self.sampler.orbit(n, rng)

    def site_cocycle(self, E: float) -> "PolymerSiteCocycle":
        return PolymerSiteCocycle(E, self.v, self.p)


@dataclass(frozen=True)
class PolymerSiteCocycle:
    """Expands each block symbol into its ``2p`` single-site transfer matrices.

    The block exponent is ``(1/n_blocks) log ||product over all sites||``;
    no block matrix is ever formed, so nothing overflows.
    """

    E: float
    v: float
    p: int

    def materialize(self, orbit) -> tuple[np.ndarray, np.ndarray]:
        mats = np.stack([transfer(self.E), transfer(self.E + self.v)])
        pats = [word_indices("B^2p", self.p), word_indices("A^p B^p", self.p)]
        orbit = np.asarray(orbit, dtype=np.int64)
        if orbit.size and (orbit.min() < 0 or orbit.max() > 1):
            raise UnknownSymbol("polymer symbols are 0 ('-') and 1 ('+')")
        return mats, np.stack(pats)[orbit].ravel()


def polymer_block_matrices(E: float, v: float, p: int) -> dict[str, np.ndarray]:
    """``{'-': B^{2p}, '+': A^p B^p}`` as float matrices (moderate ``p`` only)."""
    A_p = power_via_F(E, p)
    B_p = power_via_F(E + v, p)
    return {"-": power_via_F(E + v, 2 * p), "+": A_p @ B_p}


def polymer_blocks(ps: PolymerSystem, E: float, n_blocks: int, rng=None) -> list[np.ndarray]:
    """Block matrices along a sampled polymer sequence."""
    blocks = polymer_block_matrices(E, ps.v, ps.p)
    syms = ps.orbit(n_blocks, rng)
    table = [blocks["-"], blocks["+"]]
    return [table[s] for s in syms]


def polymer_site_potentials(symbol: str, p: int, v: float) -> np.ndarray:
    """Site potentials of one block, in the order the sites act.

    ``'-'`` is ``2p`` sites at ``-v``. ``'+'`` lists the ``p`` sites at
    ``-v`` first, then ``p`` sites at ``0``; the product of their transfer
    matrices is ``A^p B^p``.
    """
    if symbol == "-":
        return np.full(2 * p, -float(v))
    if symbol == "+":
        return np.concatenate([np.full(p, -float(v)), np.zeros(p)])
    raise UnknownSymbol(f"polymer symbol must be '-' or '+', got {symbol!r}")
