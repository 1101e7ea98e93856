"""Small dense matrix analysis.

Everything here operates on plain ``numpy`` arrays of shape ``(d, d)``; the
functions validate their input and never mutate it. Singular values come
from LAPACK (``numpy.linalg.svd``) and Hermitian functional calculus from
``numpy.linalg.eigh``.

For 2x2 matrices with huge entries (long products of SL(2) transfer
matrices) the small singular value cannot be recovered from the rounded
entries. Functions that need it accept ``det=`` so the caller can supply
the exactly known determinant; then ``s_2 = |det| / s_1``.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import DegenerateMatrix, InvalidMatrix, NotPositiveDefinite

#: Relative asymmetry accepted (and symmetrized away) in Hermitian inputs.
HERMITIAN_TOL = 1e-12
#: Eigenvalues below ``PD_TOL * ||P||`` are treated as non-positive.
PD_TOL = 1e-13
#: Below this multiple of ``s_1 * eps`` a computed ``s_d`` is pure rounding.
_NOISE_FLOOR = 8.0


def as_matrix(M, *, allow_complex: bool = True) -> np.ndarray:
    """Return ``M`` as a finite square 2-D array (no copy when possible)."""
    A = np.asarray(M)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise InvalidMatrix(f"expected a non-empty square matrix, got shape {A.shape}")
    if np.iscomplexobj(A):
        if not allow_complex:
            raise InvalidMatrix("expected a real matrix")
        A = A.astype(complex, copy=False)
    else:
        A = A.astype(float, copy=False)
    if not np.all(np.isfinite(A)):
        raise InvalidMatrix("matrix has non-finite entries")
    return A


def as_hermitian(H) -> np.ndarray:
    """Validate a Hermitian matrix and return its exact symmetrization."""
    A = as_matrix(H)
    scale = max(1.0, float(np.max(np.abs(A))))
    asym = float(np.max(np.abs(A - A.conj().T)))
    if asym > HERMITIAN_TOL * scale:
        raise InvalidMatrix(f"matrix is not Hermitian (asymmetry {asym:.3e})")
    return 0.5 * (A + A.conj().T)


def op_norm(M) -> float:
    """Operator (spectral) norm, the largest singular value."""
    A = as_matrix(M)
    if A.shape[0] == 1:
        return float(abs(A[0, 0]))
    return float(np.linalg.norm(A, 2))


def singular_values(M, *, det: float | None = None) -> np.ndarray:
    """Singular values in descending order.

    Parameters
    ----------
    M : array_like, shape (d, d)
    det : float, optional
        Exact determinant of a 2x2 matrix. When given, the second singular
        value is computed as ``|det| / s_1`` instead of from the entries.
    """
    A = as_matrix(M)
    s = np.linalg.svd(A, compute_uv=False)
    if det is not None:
        if A.shape[0] != 2:
            raise InvalidMatrix("det= is only supported for 2x2 matrices")
        s = np.array([s[0], abs(float(det)) / s[0]]) if s[0] > 0 else s
    return s


def gap_ratio(M, *, det: float | None = None) -> float:
    """Ratio ``s_1 / s_2`` of the two largest singular values."""
    A = as_matrix(M)
    if A.shape[0] < 2:
        raise InvalidMatrix("gap ratio needs d >= 2")
    s = singular_values(A, det=det)
    if s[1] == 0.0:
        raise DegenerateMatrix("second singular value is zero")
    if det is None and s[1] < _NOISE_FLOOR * np.finfo(float).eps * s[0]:
        raise DegenerateMatrix(
            "second singular value is below rounding level; pass det= if it is known exactly"
        )
    return float(s[0] / s[1])


def log_expansion_rift(seq: Sequence) -> float:
    """``log( ||L_n ... L_1|| / prod ||L_k|| )``, overflow free.

    Each factor is divided by its norm before multiplying, and the running
    product is renormalized at every step so long misaligned products do
    not underflow either.
    """
    mats = [as_matrix(L) for L in seq]
    if not mats:
        raise InvalidMatrix("empty sequence")
    d = mats[0].shape[0]
    Q = np.eye(d, dtype=np.result_type(*mats))
    acc = 0.0
    for L in mats:
        nL = op_norm(L)
        if nL == 0.0:
            raise DegenerateMatrix("zero matrix in sequence")
        Q = (L / nL) @ Q
        c = op_norm(Q)
        if c == 0.0:
            raise DegenerateMatrix("product collapsed to zero")
        acc += math.log(c)
        Q /= c
    return acc


def expansion_rift(seq: Sequence) -> float:
    """Expansion rift ``||L_n ... L_1|| / (||L_n|| ... ||L_1||)`` in (0, 1]."""
    mats = list(seq)
    if len(mats) < 2:
        raise InvalidMatrix("expansion rift needs at least two matrices")
    for L in mats:
        if singular_values(L)[-1] == 0.0:
            raise DegenerateMatrix("singular matrix in sequence")
    return math.exp(log_expansion_rift(mats))


def pair_rift(L1, L2) -> float:
    """``rho(L1, L2) = ||L2 L1|| / (||L2|| ||L1||)``; note the product order."""
    A, B = as_matrix(L1), as_matrix(L2)
    return op_norm((B / op_norm(B)) @ (A / op_norm(A)))


def _svd_log_parts(A: np.ndarray, det: float | None):
    _, s, Vh = np.linalg.svd(A)
    if det is not None:
        if A.shape[0] != 2:
            raise InvalidMatrix("det= is only supported for 2x2 matrices")
        s = np.array([s[0], abs(float(det)) / s[0]])
    return s, Vh


def abs_part(M, *, det: float | None = None) -> np.ndarray:
    """Matrix absolute value ``|M| = sqrt(M^T M)`` (real symmetric PSD)."""
    A = as_matrix(M)
    s, Vh = _svd_log_parts(A, det)
    V = Vh.conj().T
    out = (V * s) @ Vh
    return 0.5 * (out + out.conj().T)


def log_abs(M, *, det: float | None = None) -> np.ndarray:
    """``log |M|`` for invertible ``M``, computed from the SVD of ``M``."""
    A = as_matrix(M)
    s, Vh = _svd_log_parts(A, det)
    if s[-1] <= 0.0:
        raise NotPositiveDefinite("|M| is singular, its logarithm is undefined")
    if det is None and s[-1] < _NOISE_FLOOR * np.finfo(float).eps * s[0]:
        raise NotPositiveDefinite(
            "smallest singular value is below rounding level; pass det= if it is known exactly"
        )
    V = Vh.conj().T
    out = (V * np.log(s)) @ Vh
    return 0.5 * (out + out.conj().T)


def _pd_eigh(P):
    H = as_hermitian(P)
    w, V = np.linalg.eigh(H)
    scale = float(np.max(np.abs(w)))
    if w[0] <= PD_TOL * scale:
        raise NotPositiveDefinite(f"smallest eigenvalue {w[0]:.3e} is not positive")
    return w, V


def _from_eig(w, V) -> np.ndarray:
    out = (V * w) @ V.conj().T
    out = 0.5 * (out + out.conj().T)
    if np.isrealobj(V) and np.isrealobj(w):
        return out.real
    return out


def log_pd(P) -> np.ndarray:
    """Principal logarithm of a positive definite Hermitian matrix."""
    w, V = _pd_eigh(P)
    return _from_eig(np.log(w), V)


def matrix_exp(H) -> np.ndarray:
    """Exponential of a Hermitian matrix via its eigendecomposition."""
    w, V = np.linalg.eigh(as_hermitian(H))
    return _from_eig(np.exp(w), V)


def complex_power(P, z: complex) -> np.ndarray:
    """``P**z = V diag(w**z) V^*`` for positive definite ``P``.

    For ``z = 1 + i t`` this is ``P`` times the unitary ``P**(i t)``, so the
    operator norm is unchanged.
    """
    w, V = _pd_eigh(P)
    wz = np.exp(complex(z) * np.log(w))
    return (V * wz) @ V.conj().T


def lambda_max(H) -> float:
    """Largest eigenvalue of a Hermitian matrix."""
    return float(np.linalg.eigvalsh(as_hermitian(H))[-1])


def is_normal(M, *, rtol: float = 1e-10) -> bool:
    """``||M^T M - M M^T|| <= rtol * ||M||^2``."""
    A = as_matrix(M)
    lhs = A.conj().T @ A - A @ A.conj().T
    return op_norm(lhs) <= rtol * op_norm(A) ** 2


def log_abs_unimodular(Q, log_scale: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """``(log|M|, log|M^T|)`` for ``M = exp(log_scale) * Q`` with ``|det M| = 1``.

    For a 2x2 matrix of unit determinant the singular values are
    ``s, 1/s``, so ``log|M| = log(s) (v1 v1^T - v2 v2^T)`` with ``v_i`` the
    right singular vectors. Only the top singular triple of ``Q`` is used,
    which stays accurate however large ``M`` is.
    """
    A = as_matrix(Q, allow_complex=False)
    if A.shape != (2, 2):
        raise InvalidMatrix("log_abs_unimodular needs a 2x2 matrix")
    U, s, Vh = np.linalg.svd(A)
    if s[0] == 0.0:
        raise DegenerateMatrix("zero matrix")
    ls = math.log(s[0]) + float(log_scale)
    P = np.outer(Vh[0], Vh[0])
    R = np.outer(U[:, 0], U[:, 0])
    I = np.eye(2)
    return ls * (2.0 * P - I), ls * (2.0 * R - I)
