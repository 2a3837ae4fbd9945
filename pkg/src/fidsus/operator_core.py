"""Dense complex linear algebra used by every other module.

Operators are plain ``numpy`` arrays of shape ``(dim, dim)`` with ``dim`` a
power of two; states are 1-D arrays of length ``dim``.  Multi-register
operators put ancilla qubits on the most significant side, so the block an
encoding exposes is always the top-left ``dim x dim`` corner.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    NormalizationError,
    NotHermitianError,
    NotPSDError,
    ShapeError,
)

HERMITIAN_TOL = 1e-10
DEGENERACY_TOL = 1e-10
STATE_NORM_TOL = 1e-10
DILATION_SLACK = 1e-12


def is_power_of_two(k: int) -> bool:
    return k >= 1 and (k & (k - 1)) == 0


def num_qubits(dim: int) -> int:
    if not is_power_of_two(dim):
        raise ShapeError(f"dimension {dim} is not a power of two")
    return dim.bit_length() - 1


def as_operator(A, *, square=True) -> np.ndarray:
    """Validate ``A`` as a finite complex matrix with power-of-two dimensions."""
    A = np.asarray(A, dtype=complex)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2:
        raise ShapeError(f"expected a matrix, got array with shape {A.shape}")
    if square and A.shape[0] != A.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {A.shape}")
    for d in A.shape:
        if not is_power_of_two(d):
            raise ShapeError(f"dimension {d} is not a power of two")
    if not np.all(np.isfinite(A)):
        raise ValueError("operator has non-finite entries")
    return A


def as_state(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).ravel()
    if not is_power_of_two(v.size):
        raise ShapeError(f"state length {v.size} is not a power of two")
    nrm = np.linalg.norm(v)
    if abs(nrm - 1.0) > STATE_NORM_TOL:
        raise NormalizationError(f"state has norm {nrm:.3e}, expected 1")
    return v


def basis_state(dim: int, index: int = 0) -> np.ndarray:
    e = np.zeros(dim, dtype=complex)
    e[index] = 1.0
    return e


def operator_norm(A) -> float:
    """Largest singular value."""
    A = np.asarray(A, dtype=complex)
    if not np.all(np.isfinite(A)):
        raise ValueError("operator has non-finite entries")
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))


def hermiticity_defect(A) -> float:
    A = np.asarray(A)
    return float(np.max(np.abs(A - A.conj().T))) if A.size else 0.0


def check_hermitian(A, tol: float = HERMITIAN_TOL) -> None:
    defect = hermiticity_defect(A)
    scale = max(1.0, float(np.max(np.abs(A)))) if np.size(A) else 1.0
    if defect > tol * scale:
        raise NotHermitianError(
            f"matrix is not Hermitian: max |A - A^dag| = {defect:.3e} "
            f"exceeds {tol:.1e} (scale {scale:.3g})"
        )


def _fix_phases(V: np.ndarray) -> np.ndarray:
    # each column: largest-magnitude entry made real positive
    idx = np.argmax(np.abs(V), axis=0)
    ph = V[idx, np.arange(V.shape[1])]
    ph = ph / np.abs(ph)
    return V / ph


@dataclass(frozen=True)
class SpectralData:
    """Eigensystem of a Hermitian operator, eigenvalues ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    e0: float
    gap: float
    degenerate: bool

    @property
    def ground_state(self) -> np.ndarray:
        return self.eigenvectors[:, 0]

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.conj().T


def hermitian_eig(A) -> SpectralData:
    """Eigendecomposition of a Hermitian matrix.

    Eigenvector columns are phase-fixed so their largest-magnitude entry is
    real and positive.  The ground level is flagged degenerate when
    ``E1 - E0 < 1e-10 * ||A||``.
    """
    A = as_operator(A)
    check_hermitian(A)
    A = 0.5 * (A + A.conj().T)
    w, V = np.linalg.eigh(A)
    V = _fix_phases(V)
    if w.size > 1:
        gap = float(w[1] - w[0])
        scale = float(np.max(np.abs(w)))
        degenerate = gap < DEGENERACY_TOL * scale
    else:
        gap = math.inf
        degenerate = False
    return SpectralData(
        eigenvalues=w, eigenvectors=V, e0=float(w[0]), gap=gap, degenerate=degenerate
    )


def spectral_function(A, func) -> np.ndarray:
    """Apply ``func`` to the eigenvalues of Hermitian ``A``."""
    sd = hermitian_eig(A)
    V = sd.eigenvectors
    return (V * func(sd.eigenvalues)) @ V.conj().T


def psd_sqrt(B) -> np.ndarray:
    """Square root of a Hermitian PSD matrix; tiny negative eigenvalues clamp to 0."""
    B = np.asarray(B, dtype=complex)
    B = 0.5 * (B + B.conj().T)
    w, V = np.linalg.eigh(B)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.conj().T


def pseudoinverse(A, tol: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse of a Hermitian PSD matrix.

    Eigenvalues above ``tol`` are inverted, the rest map to zero.  The
    default ``tol`` is ``1e-10 * max(1, ||A||)``.
    """
    A = as_operator(A)
    check_hermitian(A)
    A = 0.5 * (A + A.conj().T)
    w, V = np.linalg.eigh(A)
    scale = max(1.0, float(np.max(np.abs(w))))
    if tol is None:
        tol = 1e-10 * scale
    if w[0] < -max(tol, DEGENERACY_TOL * scale):
        raise NotPSDError(f"matrix has eigenvalue {w[0]:.3e} below -tol={-tol:.1e}")
    inv = np.zeros_like(w)
    keep = w > tol
    inv[keep] = 1.0 / w[keep]
    return (V * inv) @ V.conj().T


def unitary_dilation(M) -> np.ndarray:
    """Embed a contraction ``M`` as the top-left block of a unitary.

    Returns ``[[M, sqrt(I - M M^dag)], [sqrt(I - M^dag M), -M^dag]]``, which
    has one extra (most significant) qubit.  The square roots come from the
    SVD ``M = W S V^dag``, so the result is unitary to rounding even when
    ``||M|| = 1`` exactly.
    """
    M = as_operator(M)
    nrm = operator_norm(M)
    if nrm > 1.0 + DILATION_SLACK:
        raise NormalizationError(
            f"||M|| = {nrm:.12g} > 1; divide by a normalization alpha >= ||M|| first"
        )
    d = M.shape[0]
    W, s, Vh = np.linalg.svd(M)
    s = np.clip(s, 0.0, 1.0)
    c = np.sqrt((1.0 - s) * (1.0 + s))
    V = Vh.conj().T
    U = np.empty((2 * d, 2 * d), dtype=complex)
    U[:d, :d] = M
    U[:d, d:] = (W * c) @ W.conj().T
    U[d:, :d] = (V * c) @ Vh
    U[d:, d:] = -M.conj().T
    return U


def unitarity_defect(U) -> float:
    U = np.asarray(U)
    return float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))


def state_prep_unitary(v) -> np.ndarray:
    """Unitary whose first column is exactly ``v``.

    Built as a Householder reflection onto ``v`` with the phase of ``v[0]``
    moved into the first column.  Ground states from :func:`hermitian_eig`
    already carry the largest-amplitude-real-positive phase convention.
    """
    v = as_state(v)
    d = v.size
    phase = v[0] / abs(v[0]) if abs(v[0]) > 0 else 1.0
    u = v / phase  # u[0] real and >= 0
    w = basis_state(d) - u
    wn = np.vdot(w, w).real
    if wn < 1e-30:
        P = np.eye(d, dtype=complex)
    else:
        P = np.eye(d, dtype=complex) - 2.0 * np.outer(w, w.conj()) / wn
    P[:, 0] *= phase
    return P
