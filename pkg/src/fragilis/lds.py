"""Continuous and discrete linear dynamical systems.

Discretization is forward Euler, ``A = I + A_c * dt``, so that a continuous
eigenvalue ``lam`` maps to ``1 + lam * dt``.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInputError
from .numerics import as_matrix, eigen


@dataclass(frozen=True)
class ContinuousSystem:
    """``dx/dt = A_c x`` with ``A_c`` in units of 1/second."""

    A_c: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A_c", as_matrix(self.A_c, square=True, name="A_c"))

    @property
    def dim(self):
        return self.A_c.shape[0]


@dataclass(frozen=True)
class LinearSystem:
    """Discrete recursion ``x[t+1] = A x[t]`` sampled every ``dt`` seconds."""

    A: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "A", as_matrix(self.A, square=True))
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise InvalidInputError(f"dt must be positive, got {self.dt}")

    @property
    def dim(self):
        return self.A.shape[0]


@dataclass(frozen=True)
class StabilityReport:
    eigenvalues: np.ndarray  # of A_c
    per_eigenvalue: np.ndarray  # bool, one per eigenvalue
    stable: bool


def _check_dt(dt):
    if not (np.isfinite(dt) and dt > 0):
        raise InvalidInputError(f"dt must be positive, got {dt}")


def discretize(cs, dt):
    _check_dt(dt)
    n = cs.dim
    return LinearSystem(A=np.eye(n) + cs.A_c * dt, dt=dt)


def is_discrete_stable(cs, dt):
    """Evaluate ``(1 + Re(lam) dt)^2 + (Im(lam) dt)^2 < 1`` for every eigenvalue of ``A_c``.

    Equality counts as unstable.
    """
    _check_dt(dt)
    lam = eigen(cs.A_c).eigenvalues
    lhs = (1.0 + lam.real * dt) ** 2 + (lam.imag * dt) ** 2
    per = lhs < 1.0
    return StabilityReport(eigenvalues=lam, per_eigenvalue=per, stable=bool(np.all(per)))


def spectral_radius_margin(ls):
    """``1 - max|lam(A)|``; positive iff the discrete system is strictly stable."""
    lam = eigen(ls.A).eigenvalues
    return float(1.0 - np.max(np.abs(lam)))
