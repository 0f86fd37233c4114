"""Dense complex matrix primitives.

Everything downstream works with square ``complex128`` ndarrays.  Matrix
exponentials are always of the form ``exp(-i * theta * H)`` with ``H``
Hermitian, so they are computed through the real-eigenvalue spectral
decomposition ``H = Q diag(w) Q^dag`` rather than scaling-and-squaring: the
decomposition is reusable across many values of ``theta`` (only the phase
diagonal changes) and the result is unitary up to eigensolver accuracy.
"""

from __future__ import annotations

import numpy as np

# Relative Hermiticity tolerance.  Inputs built by this package are Hermitian
# by construction ((M + M^dag)/2); the check guards against corruption.
HERMITICITY_RTOL = 1e-12


class NotHermitianError(ValueError):
    """Matrix fails the Hermiticity check (also triggered by NaN/Inf entries)."""


class EigenFailureError(RuntimeError):
    """The eigendecomposition did not converge."""


def frobenius_norm(m: np.ndarray) -> float:
    """Frobenius norm sqrt(sum |m_ij|^2)."""
    return float(np.linalg.norm(np.asarray(m)))


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Hermitian part (M + M^dag)/2 of a square matrix."""
    m = np.asarray(m)
    return (m + m.conj().T) / 2


def hermiticity_defect(m: np.ndarray) -> float:
    """Frobenius distance ||M - M^dag||_F from the Hermitian matrices."""
    m = np.asarray(m)
    return frobenius_norm(m - m.conj().T)


def is_hermitian(m: np.ndarray, rtol: float = HERMITICITY_RTOL) -> bool:
    """True iff ||M - M^dag||_F <= rtol * max(1, ||M||_F).

    NaN entries make the defect NaN, so corrupted matrices test False.
    """
    return hermiticity_defect(m) <= rtol * max(1.0, frobenius_norm(m))


def require_hermitian(m: np.ndarray, rtol: float = HERMITICITY_RTOL) -> None:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotHermitianError(f"expected a square matrix, got shape {m.shape}")
    if not is_hermitian(m, rtol):
        raise NotHermitianError(
            f"matrix is not Hermitian: defect {hermiticity_defect(m):.3e} "
            f"exceeds {rtol:g} * max(1, ||M||_F)"
        )


def hermitian_eigensystem(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending, real) and eigenvectors of a Hermitian matrix.

    Raises NotHermitianError on bad input and EigenFailureError if LAPACK
    does not converge.
    """
    require_hermitian(h)
    try:
        eigvals, eigvecs = np.linalg.eigh(np.asarray(h, dtype=np.complex128))
    except np.linalg.LinAlgError as exc:
        raise EigenFailureError(f"eigendecomposition failed: {exc}") from exc
    return eigvals, eigvecs


def expm_from_eigensystem(
    eigvals: np.ndarray, eigvecs: np.ndarray, theta: float
) -> np.ndarray:
    """exp(-i * theta * H) given the eigensystem of H.

    Computed as Q diag(exp(-i theta w)) Q^dag; unitary because w is real.
    """
    phases = np.exp(-1j * theta * eigvals)
    return (eigvecs * phases) @ eigvecs.conj().T


def hermitian_expm(h: np.ndarray, theta: float) -> np.ndarray:
    """Unitary exp(-i * theta * H) for Hermitian H via eigendecomposition."""
    if not np.isfinite(theta):
        raise ValueError(f"theta must be finite, got {theta}")
    eigvals, eigvecs = hermitian_eigensystem(h)
    return expm_from_eigensystem(eigvals, eigvecs, theta)
