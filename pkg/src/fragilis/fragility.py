"""Minimum-norm structured rank-one perturbations and fragility heatmaps.

For a state matrix ``A``, a target ``r`` not in its spectrum, and a channel
``k``, the row-structured perturbation is ``Delta = e_k gamma^T`` (row ``k`` of
``A`` is modified). Writing ``u = (A - rI)^{-1} e_k``, the matrix-determinant
lemma gives ``r in sigma(A + Delta)`` iff ``gamma^T u = -1``. Splitting into
real and imaginary parts yields the 2 x n system ``B gamma = b`` with
``B = [Im u; Re u]`` and ``b = [0, -1]``; fragility is the norm of its
minimum-norm solution. The column structure ``Delta = gamma e_k^T`` uses
``u = (A - rI)^{-T} e_k`` instead.

For real ``r`` the solution is ``gamma = -u / ||u||^2``, so fragility is
``1 / ||(A - rI)^{-1} e_k||``.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InfeasibleConstraintError, InvalidInputError, SingularResolventError
from .numerics import as_matrix, min_norm_solve, resolvent

STRUCTURES = ("row", "column")
_B_RHS = np.array([0.0, -1.0])


@dataclass(frozen=True)
class PerturbationTarget:
    r: complex
    structure: str = "row"

    def __post_init__(self):
        object.__setattr__(self, "r", complex(self.r))
        if self.structure not in STRUCTURES:
            raise InvalidInputError(f"structure must be one of {STRUCTURES}, got {self.structure!r}")
        if not np.isfinite(self.r):
            raise InvalidInputError("target r must be finite")


@dataclass(frozen=True)
class PerturbationResult:
    gamma: np.ndarray
    k: int
    target: PerturbationTarget
    fragility: float
    delta: np.ndarray = field(repr=False)

    def to_dict(self):
        r = self.target.r
        return {
            "r": [r.real, r.imag],
            "k": self.k,
            "structure": self.target.structure,
            "fragility": self.fragility,
            "gamma": self.gamma.tolist(),
            "delta": self.delta.tolist(),
        }


def _check_structure(structure):
    if structure not in STRUCTURES:
        raise InvalidInputError(f"structure must be one of {STRUCTURES}, got {structure!r}")


def _check_k(k, n):
    if not (isinstance(k, (int, np.integer)) and 0 <= k < n):
        raise InvalidInputError(f"channel index k={k!r} out of range for n={n}")
    return int(k)


def _resolvent_vector(A, r, k, structure):
    R = resolvent(A, r)
    return R[:, k] if structure == "row" else R[k, :]


def assemble_delta(gamma, k, n, structure="row"):
    """Place ``gamma`` in row ``k`` (``"row"``) or column ``k`` (``"column"``) of an n x n zero matrix."""
    _check_structure(structure)
    delta = np.zeros((n, n))
    if structure == "row":
        delta[k, :] = gamma
    else:
        delta[:, k] = gamma
    return delta


def _result(gamma, k, r, structure, n):
    return PerturbationResult(
        gamma=gamma,
        k=k,
        target=PerturbationTarget(r, structure),
        fragility=float(np.linalg.norm(gamma)),
        delta=assemble_delta(gamma, k, n, structure),
    )


def perturb_real(A, r, k, structure="row"):
    """Closed-form minimum-norm perturbation for a real target ``r``."""
    A = as_matrix(A, square=True)
    _check_structure(structure)
    k = _check_k(k, A.shape[0])
    if complex(r).imag != 0:
        raise InvalidInputError(f"perturb_real needs a real target, got r={r}")
    r = complex(r).real
    u = _resolvent_vector(A, r, k, structure)
    norm_u = np.linalg.norm(u)
    # dividing by ||u|| twice avoids the extra rounding of u.u
    gamma = -(u / norm_u) / norm_u
    return _result(gamma, k, r, structure, A.shape[0])


def perturb_complex(A, r, k, structure="row"):
    """Minimum-norm real perturbation placing ``r`` (and its conjugate) in the spectrum.

    Raises InfeasibleConstraintError when no real row/column perturbation can
    reach ``r``.
    """
    A = as_matrix(A, square=True)
    if np.iscomplexobj(A):
        raise InvalidInputError("A must be real")
    _check_structure(structure)
    k = _check_k(k, A.shape[0])
    u = np.asarray(_resolvent_vector(A, complex(r), k, structure), dtype=complex)
    B = np.vstack([u.imag, u.real])
    gamma = min_norm_solve(B, _B_RHS)
    return _result(gamma, k, complex(r), structure, A.shape[0])


def perturb(A, r, k, structure="row"):
    """Dispatch to :func:`perturb_real` or :func:`perturb_complex` on ``Im(r)``."""
    if complex(r).imag == 0:
        return perturb_real(A, r, k, structure)
    return perturb_complex(A, r, k, structure)


def fragility_row(A, r, k, structure="row"):
    """Fragility ``||gamma||_2`` of channel ``k`` for target ``r``."""
    return perturb(A, r, k, structure).fragility


def fragility_all_channels(A, r, structure="row"):
    """Fragility of every channel for one target, sharing a single resolvent.

    Cells that are infeasible, or the whole row when ``r`` hits the spectrum,
    are NaN.
    """
    A = as_matrix(A, square=True)
    _check_structure(structure)
    n = A.shape[0]
    r = complex(r)
    try:
        R = resolvent(A, r)
    except SingularResolventError:
        return np.full(n, np.nan)
    U = R if structure == "row" else R.T  # column k is u_k
    if r.imag == 0:
        return 1.0 / np.linalg.norm(U, axis=0)
    out = np.empty(n)
    for k in range(n):
        u = U[:, k]
        try:
            out[k] = np.linalg.norm(min_norm_solve(np.vstack([u.imag, u.real]), _B_RHS))
        except InfeasibleConstraintError:
            out[k] = np.nan
    return out


def default_targets(n_angles=12):
    """Unit-circle grid ``exp(i w)`` for ``w = 0, pi/n_angles, ..., pi``."""
    w = np.arange(n_angles + 1) * np.pi / n_angles
    targets = np.exp(1j * w)
    # exact 1 and -1 so real targets take the closed-form path
    targets[0] = 1.0
    targets[-1] = -1.0
    targets.imag[np.abs(targets.imag) < 1e-15] = 0.0
    return [complex(t) for t in targets]


@dataclass(frozen=True)
class FragilityHeatmap:
    """Windows x channels fragility grid.

    ``values`` holds raw ``||gamma||`` (NaN where no target was feasible);
    ``normalized`` maps each window to [0, 1] with the most fragile (smallest
    norm) channel at 1.
    """

    values: np.ndarray
    normalized: np.ndarray
    window_times: np.ndarray
    channel_labels: tuple
    targets: tuple
    structure: str = "row"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        normalized = np.asarray(self.normalized, dtype=float)
        times = np.asarray(self.window_times, dtype=float)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise InvalidInputError(f"heatmap needs at least one window and channel, got {values.shape}")
        if normalized.shape != values.shape or times.shape != (values.shape[0],):
            raise InvalidInputError("heatmap arrays have inconsistent shapes")
        if len(self.channel_labels) != values.shape[1]:
            raise InvalidInputError("channel_labels does not match the number of channels")
        if np.any(normalized < 0) or np.any(normalized > 1) or np.any(np.isnan(normalized)):
            raise InvalidInputError("normalized values must lie in [0, 1]")
        if not self.targets:
            raise InvalidInputError("target set is empty")
        _check_structure(self.structure)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "normalized", normalized)
        object.__setattr__(self, "window_times", times)
        object.__setattr__(self, "channel_labels", tuple(str(c) for c in self.channel_labels))
        object.__setattr__(self, "targets", tuple(complex(t) for t in self.targets))

    @property
    def shape(self):
        return self.values.shape


def normalize_windows(values, rtol=1e-12):
    """Inverted per-window min-max scaling: ``(max - v) / (max - min)``.

    Windows whose spread is within ``rtol`` of their maximum map to 0, as do
    NaN cells.
    """
    values = np.asarray(values, dtype=float)
    out = np.zeros_like(values)
    for w, row in enumerate(values):
        finite = np.isfinite(row)
        if not finite.any():
            continue
        hi, lo = row[finite].max(), row[finite].min()
        spread = hi - lo
        if spread <= rtol * abs(hi):
            continue
        out[w, finite] = (hi - row[finite]) / spread
    return np.clip(out, 0.0, 1.0)


def _window_fragility(A, targets, structure):
    # fixed target order keeps the reduction deterministic
    best = np.full(A.shape[0], np.nan)
    for r in targets:
        best = np.fmin(best, fragility_all_channels(A, r, structure))
    return best


def heatmap(reports, targets, structure="row", window_times=None, channel_labels=None, threads=1):
    """Per-window, per-channel fragility minimized over ``targets``.

    ``reports`` is a sequence of :class:`~fragilis.sysid.EstimationReport`
    (anything with an ``A_hat`` attribute) or of raw square matrices.
    """
    mats = [as_matrix(getattr(rep, "A_hat", rep), square=True) for rep in reports]
    if not mats:
        raise InvalidInputError("need at least one window")
    targets = [complex(t) for t in targets]
    if not targets:
        raise InvalidInputError("target set is empty")
    _check_structure(structure)
    n = mats[0].shape[0]
    if any(m.shape != (n, n) for m in mats):
        raise InvalidInputError("all windows must share the same dimension")

    def job(A):
        return _window_fragility(A, targets, structure)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(job, mats))
    else:
        rows = [job(A) for A in mats]
    values = np.vstack(rows)

    if window_times is None:
        window_times = np.arange(len(mats), dtype=float)
    if channel_labels is None:
        channel_labels = tuple(f"ch{i}" for i in range(n))
    return FragilityHeatmap(
        values=values,
        normalized=normalize_windows(values),
        window_times=np.asarray(window_times, dtype=float),
        channel_labels=tuple(channel_labels),
        targets=tuple(targets),
        structure=structure,
    )
