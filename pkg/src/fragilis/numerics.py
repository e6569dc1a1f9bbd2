"""Dense linear-algebra primitives used by every other module.

All norms are spectral (largest singular value). Functions are pure and
thread-safe.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import (
    InfeasibleConstraintError,
    InvalidInputError,
    NumericFailureError,
    SingularResolventError,
)

#: eigenvalue proximity tolerance for the resolvent, relative to ``||A||``
RESOLVENT_TOL = 1e-12
#: singular values below ``RANK_TOL * s_max`` count as zero in ``min_norm_solve``
RANK_TOL = 1e-12
#: ``condition_number`` returns ``inf`` when ``s_min < COND_TOL * s_max``
COND_TOL = 1e-14
#: relative residual above which ``min_norm_solve`` declares ``B x = b`` infeasible
FEASIBILITY_TOL = 1e-8


def as_matrix(A, square=False, name="A"):
    """Return ``A`` as a finite 2-D ndarray, raising InvalidInputError otherwise."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise InvalidInputError(f"{name} must be a non-empty 2-D matrix, got shape {A.shape}")
    if not np.issubdtype(A.dtype, np.number):
        raise InvalidInputError(f"{name} must be numeric, got dtype {A.dtype}")
    if square and A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} has non-finite entries")
    if np.iscomplexobj(A):
        return A.astype(complex)
    return A.astype(float)


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues sorted by descending real part (ties: descending imaginary part)
    with the matching unit-norm eigenvectors stored column-wise."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __len__(self):
        return len(self.eigenvalues)

    @property
    def smallest(self):
        """The last eigenvalue in the ordering (``lambda_n``)."""
        return self.eigenvalues[-1]


def spectral_norm(A):
    """Largest singular value of ``A``."""
    A = as_matrix(A)
    return float(np.linalg.norm(A, 2))


def eigen(A):
    A = as_matrix(A, square=True)
    try:
        w, V = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        # LAPACK geev does not report its sweep count
        raise NumericFailureError(f"eigensolver did not converge: {exc}", iterations=None) from exc
    w = w.astype(complex)
    order = np.lexsort((-w.imag, -w.real))
    return Spectrum(eigenvalues=w[order], eigenvectors=V.astype(complex)[:, order])


def resolvent(A, z):
    """Return ``(A - z I)^{-1}``.

    Note the sign convention: this is ``-(z I - A)^{-1}``. The result is real
    when both ``A`` and ``z`` are real.

    Raises SingularResolventError when ``z`` is within ``1e-12 * ||A||`` of an
    eigenvalue of ``A``.
    """
    A = as_matrix(A, square=True)
    z = complex(z)
    if not np.isfinite(z):
        raise InvalidInputError("z must be finite")
    n = A.shape[0]
    tol = RESOLVENT_TOL * np.linalg.norm(A, 2)
    lam = np.linalg.eigvals(A)
    gap = float(np.min(np.abs(lam - z)))
    if gap <= tol:
        raise SingularResolventError(f"z={z} is within {gap:.3g} of the spectrum of A")
    if z.imag == 0 and not np.iscomplexobj(A):
        M = A - z.real * np.eye(n)
    else:
        M = A - z * np.eye(n)
    try:
        return np.linalg.solve(M, np.eye(n, dtype=M.dtype))
    except np.linalg.LinAlgError as exc:
        raise SingularResolventError(f"A - zI is singular for z={z}") from exc


def condition_number(V):
    """2-norm condition number ``s_max / s_min``; ``inf`` when numerically singular."""
    V = as_matrix(V, square=True, name="V")
    s = np.linalg.svd(V, compute_uv=False)
    if s[0] == 0 or s[-1] < COND_TOL * s[0]:
        return float("inf")
    return float(s[0] / s[-1])


def min_norm_solve(B, b):
    """Minimum 2-norm solution of ``B x = b`` via a thresholded pseudo-inverse.

    Raises InfeasibleConstraintError if the least-squares residual exceeds
    ``1e-8 * ||b||``, i.e. ``b`` is not in the range of ``B``.
    """
    B = as_matrix(B, name="B")
    b = np.asarray(b, dtype=B.dtype).ravel()
    if b.shape[0] != B.shape[0]:
        raise InvalidInputError(f"b has length {b.shape[0]}, expected {B.shape[0]}")
    if not np.all(np.isfinite(b)):
        raise InvalidInputError("b has non-finite entries")

    U, s, Vh = np.linalg.svd(B, full_matrices=False)
    rank = int(np.sum(s > RANK_TOL * s[0])) if s[0] > 0 else 0
    x = Vh[:rank].conj().T @ ((U[:, :rank].conj().T @ b) / s[:rank])

    b_norm = np.linalg.norm(b)
    residual = float(np.linalg.norm(B @ x - b))
    if residual > FEASIBILITY_TOL * b_norm:
        raise InfeasibleConstraintError(
            f"b is not in the range of B (residual {residual:.3g}, ||b|| = {b_norm:.3g})",
            residual=residual,
        )
    return x
