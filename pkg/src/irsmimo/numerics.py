"""
Complex linear-algebra kernel shared by all other modules.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Every routine
here is a pure function; nothing keeps state between calls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, SingularMatrixError

__all__ = [
    "Tolerances",
    "TOL",
    "SvdResult",
    "svd",
    "pd_solve",
    "dft_matrix",
    "capacity_log_det",
]


@dataclass(frozen=True)
class Tolerances:
    """Library-wide numerical tolerances."""

    svd_reconstruction: float = 1e-10
    hermitian: float = 1e-10
    solve_residual: float = 1e-8
    singular_ratio: float = 1e-14
    unit_norm: float = 1e-9


TOL = Tolerances()


@dataclass(frozen=True)
class SvdResult:
    """Full SVD ``A = U @ diag(S) @ V^H`` (``V`` holds right vectors as columns)."""

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        m, n = self.U.shape[0], self.V.shape[0]
        sigma = np.zeros((m, n), dtype=complex)
        k = self.S.size
        sigma[:k, :k] = np.diag(self.S)
        return self.U @ sigma @ self.V.conj().T


def _as_matrix(a, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise InvalidInputError(f"{name} must be a nonempty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return a


def svd(a) -> SvdResult:
    """
    Full singular value decomposition with a fixed phase convention.

    Each left singular vector is rotated so that its first entry with
    non-negligible magnitude is real and positive; the matching right
    singular vector receives the same rotation so the product is unchanged.
    """
    a = _as_matrix(a)
    u, s, vh = np.linalg.svd(a, full_matrices=True)
    v = vh.conj().T
    k = s.size
    for i in range(k):
        col = u[:, i]
        mags = np.abs(col)
        j = int(np.argmax(mags > 1e-12 * mags.max())) if mags.max() > 0 else 0
        if mags[j] == 0:
            continue
        rot = np.conj(col[j]) / mags[j]
        u[:, i] = col * rot
        v[:, i] = v[:, i] * rot
    return SvdResult(u, s, v)


def pd_solve(a, b) -> np.ndarray:
    """
    Solve ``A X = B`` for Hermitian positive definite ``A``.

    Raises
    ------
    InvalidInputError
        If ``A`` is not square or not Hermitian to ``TOL.hermitian``.
    SingularMatrixError
        If the smallest eigenvalue is below ``TOL.singular_ratio`` times the
        largest.
    """
    a = _as_matrix(a, "A")
    b_in = np.asarray(b, dtype=complex)
    b = _as_matrix(b_in, "B")
    n = a.shape[0]
    if a.shape != (n, n):
        raise InvalidInputError(f"A must be square, got {a.shape}")
    if b.shape[0] != n:
        raise InvalidInputError(f"B has {b.shape[0]} rows, A is {n}x{n}")
    scale = max(1.0, float(np.abs(a).max()))
    if np.abs(a - a.conj().T).max() > TOL.hermitian * scale:
        raise InvalidInputError("A is not Hermitian")
    w, v = np.linalg.eigh(a)
    if w[-1] <= 0 or w[0] <= TOL.singular_ratio * w[-1]:
        raise SingularMatrixError(
            f"matrix is numerically singular (eigenvalues {w[0]:.3e} .. {w[-1]:.3e})"
        )
    vh = v.conj().T
    x = v @ ((vh @ b) / w[:, None])
    # one refinement step keeps the residual small for ill-conditioned A
    x = x + v @ ((vh @ (b - a @ x)) / w[:, None])
    return x.reshape(b_in.shape) if b_in.ndim == 1 else x


def dft_matrix(n: int) -> np.ndarray:
    """Unitary ``n x n`` DFT matrix, entry ``(k, m) = exp(-2j*pi*k*m/n) / sqrt(n)``."""
    if int(n) != n or n < 1:
        raise InvalidInputError(f"DFT size must be a positive integer, got {n}")
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def capacity_log_det(h, lam: float) -> float:
    """``log2 det(I + lam * H H^H)`` evaluated from the singular values of ``H``."""
    h = _as_matrix(h, "H")
    if not lam > 0:
        raise InvalidInputError(f"lambda must be positive, got {lam}")
    s = np.linalg.svd(h, compute_uv=False)
    return float(np.sum(np.log1p(lam * s**2)) / np.log(2.0))
