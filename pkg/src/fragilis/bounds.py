"""Computable forms of the analytic fragility bounds.

Every bound reports the hypotheses it rests on as named boolean flags instead
of raising, so parameter sweeps always produce complete tables. The helper
lemmas (Neumann series, resolvent, bounded invertibility) do raise
:class:`~fragilis.exceptions.PreconditionError` since they are used as direct
checks.

All norms are spectral norms.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import PreconditionError, SingularResolventError
from .fragility import fragility_all_channels
from .numerics import as_matrix, condition_number, eigen, resolvent, spectral_norm

# relative slack when comparing a bound against a computed fragility
COMPARE_RTOL = 1e-9


def neumann_inverse_bound(A):
    """``1 / (1 - ||A||)``, an upper bound on ``||(I - A)^{-1}||`` for ``||A|| < 1``."""
    a = spectral_norm(A)
    if not a < 1:
        raise PreconditionError(f"need ||A|| < 1, got {a:.6g}", flag="norm_A_lt_1")
    return 1.0 / (1.0 - a)


def resolvent_norm_bound(A, z):
    """``1 / (|z| - ||A||)``, an upper bound on ``||(zI - A)^{-1}||`` for ``|z| > ||A||``."""
    a = spectral_norm(A)
    if not abs(z) > a:
        raise PreconditionError(f"need |z| > ||A||, got |z|={abs(z):.6g}, ||A||={a:.6g}", flag="z_gt_norm_A")
    return 1.0 / (abs(z) - a)


def kato_inverse_bounds(T, A):
    """Stability of bounded invertibility for ``S = T + A``.

    Returns ``(||T^-1|| / (1 - ||A|| ||T^-1||), ||A|| ||T^-1||^2 / (1 - ||A|| ||T^-1||))``,
    upper bounds on ``||S^-1||`` and ``||S^-1 - T^-1||`` respectively.
    """
    T = as_matrix(T, square=True, name="T")
    A = as_matrix(A, square=True)
    if T.shape != A.shape:
        raise PreconditionError("T and A must have the same shape", flag="same_shape")
    if not np.isfinite(condition_number(T)):
        raise PreconditionError("T is not invertible", flag="T_invertible")
    t_inv = spectral_norm(np.linalg.inv(T))
    a = spectral_norm(A)
    if not a * t_inv < 1:
        raise PreconditionError(
            f"need ||A|| < 1/||T^-1||, got ||A||={a:.6g}, 1/||T^-1||={1 / t_inv:.6g}",
            flag="norm_A_lt_inv_norm_T_inv",
        )
    denom = 1.0 - a * t_inv
    return t_inv / denom, a * t_inv**2 / denom


def relative_boundedness_check(A, T, a, b, n_samples=1000, seed=0, rtol=1e-12):
    """Test ``||A u|| <= a ||u|| + b ||T u||`` on random and extremal unit vectors.

    The probe set is ``n_samples`` Gaussian unit vectors plus the right
    singular vectors of ``A`` and ``T``.
    """
    if a < 0 or b < 0:
        raise ValueError("a and b must be nonnegative")
    A = as_matrix(A)
    T = as_matrix(T, name="T")
    if A.shape[1] != T.shape[1]:
        raise ValueError("A and T must share a domain (same number of columns)")
    n = A.shape[1]
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((n, n_samples))
    U = np.hstack([U, np.linalg.svd(A)[2].conj().T, np.linalg.svd(T)[2].conj().T])
    U = U / np.linalg.norm(U, axis=0)
    lhs = np.linalg.norm(A @ U, axis=0)
    rhs = a + b * np.linalg.norm(T @ U, axis=0)
    return bool(np.all(lhs <= rhs + rtol * np.maximum(1.0, rhs)))


@dataclass(frozen=True)
class LowerBound:
    """Bauer-Fike lower bound on ``||gamma||``.

    ``value`` is ``min_lam |r - lam| / kappa(V)`` (sound); ``literal`` uses
    only the smallest eigenvalue ``lam_n``. Both are 0 and ``valid`` is False
    when the eigenvector matrix is numerically singular.
    """

    value: float
    literal: float
    kappa: float
    valid: bool


@dataclass(frozen=True)
class FlaggedBound:
    value: float
    flags: dict = field(default_factory=dict)

    @property
    def valid(self):
        return all(self.flags.values())


def bauer_fike_lower(A, r):
    spec = eigen(A)
    kappa = condition_number(spec.eigenvectors)
    if not np.isfinite(kappa):
        return LowerBound(value=0.0, literal=0.0, kappa=kappa, valid=False)
    dist = np.abs(spec.eigenvalues - complex(r))
    return LowerBound(
        value=float(dist.min() / kappa),
        literal=float(abs(complex(r) - spec.smallest) / kappa),
        kappa=kappa,
        valid=True,
    )


def _resolvent_norm(A, r):
    try:
        return spectral_norm(resolvent(A, r))
    except SingularResolventError:
        return float("inf")


def upper_bound_true(A, r):
    """``rho / (1 - rho) * (|r| + 1)^2`` with ``rho = ||(A - rI)^{-1}||``.

    Flags: ``norm_A_lt_1`` (the stated hypothesis), ``resolvent_norm_lt_1``
    (needed for the final step of the derivation) and ``r_real`` (the
    derivation starts from the real-target closed form of gamma).
    """
    A = as_matrix(A, square=True)
    r = complex(r)
    rho = _resolvent_norm(A, r)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = rho / (1.0 - rho) * (abs(r) + 1.0) ** 2
    flags = {
        "norm_A_lt_1": spectral_norm(A) < 1,
        "resolvent_norm_lt_1": rho < 1,
        "r_real": r.imag == 0,
    }
    return FlaggedBound(value=float(value), flags=flags)


def upper_bound_estimated(A, E, eps, r):
    """``rho / (1 - ||E|| rho) * (|r| + 1 + eps)^2`` bounding fragility of ``A + E``.

    ``rho = ||(A - rI)^{-1}||`` is computed on the true matrix.
    """
    A = as_matrix(A, square=True)
    E = as_matrix(E, square=True, name="E")
    r = complex(r)
    rho = _resolvent_norm(A, r)
    e_norm = spectral_norm(E)
    a_norm = spectral_norm(A)
    denom = 1.0 - e_norm * rho
    with np.errstate(divide="ignore", invalid="ignore"):
        value = rho / denom * (abs(r) + 1.0 + eps) ** 2
    flags = {
        "norm_A_lt_1": a_norm < 1,
        "E_norm_lt_eps": e_norm < eps,
        "eps_lt_norm_A": eps < a_norm,
        "denominator_positive": bool(denom > 0),
        "r_real": r.imag == 0,
    }
    return FlaggedBound(value=float(value), flags=flags)


def _le(x, bound):
    return x <= bound + COMPARE_RTOL * max(abs(bound), 1e-300)


@dataclass(frozen=True)
class BoundReport:
    """All bounds for one ``(A, E, r)`` together with per-channel fragilities.

    ``fragility`` is computed on ``A``; ``fragility_estimated`` on ``A + E``
    (None when no ``E`` was supplied).
    """

    r: complex
    lower: LowerBound
    lower_estimated: LowerBound
    upper_true: FlaggedBound
    upper_estimated: FlaggedBound
    fragility: np.ndarray
    fragility_estimated: np.ndarray
    preconditions: dict

    @property
    def lower_bauer_fike(self):
        return self.lower.value if self.lower.valid else float("nan")

    @property
    def actual(self):
        """Smallest per-channel fragility of ``A``."""
        return float(np.nanmin(self.fragility))

    def violations(self):
        """Names of bound checks that fail while all their hypotheses hold."""
        out = []
        if not self.preconditions["r_gt_norm_A"]:
            return out
        frag = self.fragility[np.isfinite(self.fragility)]
        if self.lower.valid and not all(_le(self.lower.value, f) for f in frag):
            out.append("lower_bauer_fike")
        if self.upper_true.valid and not all(_le(f, self.upper_true.value) for f in frag):
            out.append("upper_true")
        if self.fragility_estimated is not None:
            frag_hat = self.fragility_estimated[np.isfinite(self.fragility_estimated)]
            if self.lower_estimated.valid and not all(_le(self.lower_estimated.value, f) for f in frag_hat):
                out.append("lower_bauer_fike_estimated")
            if self.upper_estimated.valid and not all(_le(f, self.upper_estimated.value) for f in frag_hat):
                out.append("upper_estimated")
        return out


def bound_report(A, r, E=None, eps=None, structure="row"):
    A = as_matrix(A, square=True)
    r = complex(r)
    a_norm = spectral_norm(A)
    lower = bauer_fike_lower(A, r)
    upper = upper_bound_true(A, r)
    frag = fragility_all_channels(A, r, structure)

    if E is None:
        nan = FlaggedBound(value=float("nan"), flags={"E_supplied": False})
        lower_hat, upper_hat, frag_hat = LowerBound(0.0, 0.0, float("inf"), False), nan, None
        e_flags = {}
    else:
        E = as_matrix(E, square=True, name="E")
        eps = float(eps)
        A_hat = A + E
        lower_hat = bauer_fike_lower(A_hat, r)
        upper_hat = upper_bound_estimated(A, E, eps, r)
        frag_hat = fragility_all_channels(A_hat, r, structure)
        e_flags = {k: upper_hat.flags[k] for k in ("E_norm_lt_eps", "eps_lt_norm_A", "denominator_positive")}

    preconditions = {
        "norm_A_lt_1": upper.flags["norm_A_lt_1"],
        "resolvent_norm_lt_1": upper.flags["resolvent_norm_lt_1"],
        "r_gt_norm_A": abs(r) > a_norm,
        "r_real": r.imag == 0,
        "diagonalizable": lower.valid,
        **e_flags,
    }
    return BoundReport(
        r=r,
        lower=lower,
        lower_estimated=lower_hat,
        upper_true=upper,
        upper_estimated=upper_hat,
        fragility=frag,
        fragility_estimated=frag_hat,
        preconditions=preconditions,
    )
