"""Synthetic systems, trajectories and the bound-validation sweep.

Randomness always flows from ``numpy.random.SeedSequence`` keyed on the master
seed and the trial's grid position, so serial and threaded runs agree.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import itertools

import numpy as np

from .bounds import bound_report
from .exceptions import InvalidInputError, SimulationOverflowError
from .fragility import fragility_all_channels
from .lds import LinearSystem
from .numerics import as_matrix, spectral_norm
from .sysid import estimate_window

FAMILIES = ("dense-random", "rotation-like", "diagonal")
NOISE_KINDS = ("process", "measurement", "matrix-perturbation")
OVERFLOW_LIMIT = 1e12


def _rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)))


@dataclass(frozen=True)
class SystemSpec:
    n: int
    target_norm: float = 0.9
    seed: int = 0
    family: str = "dense-random"

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInputError(f"n must be >= 1, got {self.n}")
        if not 0 < self.target_norm < 1:
            raise InvalidInputError(f"target_norm must lie in (0, 1), got {self.target_norm}")
        if self.family not in FAMILIES:
            raise InvalidInputError(f"family must be one of {FAMILIES}, got {self.family!r}")


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "process"
    scale: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise InvalidInputError(f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        if not self.scale >= 0:
            raise InvalidInputError(f"noise scale must be >= 0, got {self.scale}")


def _rotation_like(n, rng):
    A = np.zeros((n, n))
    for i in range(0, n - 1, 2):
        theta = rng.uniform(0, np.pi)
        c, s = np.cos(theta), np.sin(theta)
        A[i:i + 2, i:i + 2] = rng.uniform(0.5, 1.0) * np.array([[c, -s], [s, c]])
    if n % 2:
        A[-1, -1] = rng.uniform(-1.0, 1.0)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return Q @ A @ Q.T


def gen_system(spec, rng=None):
    """Random ``n x n`` state matrix rescaled to ``||A|| = spec.target_norm``."""
    if rng is None:
        rng = _rng(spec.seed)
    n = spec.n
    while True:
        if spec.family == "dense-random":
            A = rng.standard_normal((n, n))
        elif spec.family == "rotation-like":
            A = _rotation_like(n, rng)
        else:
            A = np.diag(rng.uniform(-1.0, 1.0, n))
        norm = np.linalg.norm(A, 2)
        if norm > 0:
            return A * (spec.target_norm / norm)


def perturbation_matrix(n, norm, rng):
    """Dense Gaussian matrix rescaled to spectral norm exactly ``norm``."""
    if norm == 0:
        return np.zeros((n, n))
    E = rng.standard_normal((n, n))
    return E * (norm / np.linalg.norm(E, 2))


def simulate(ls, x0, T, noise=None):
    """Trajectory ``x[t+1] = A x[t] + w[t]`` as a channels x T array.

    ``noise.kind == "process"`` adds Gaussian ``w`` of standard deviation
    ``noise.scale`` to the state; ``"measurement"`` leaves the state clean and
    adds it to the returned observations instead.
    """
    A = ls.A if isinstance(ls, LinearSystem) else as_matrix(ls, square=True)
    n = A.shape[0]
    x = np.asarray(x0, dtype=float).ravel()
    if x.shape != (n,):
        raise InvalidInputError(f"x0 has shape {x.shape}, expected ({n},)")
    if T < 2:
        raise InvalidInputError(f"T must be >= 2, got {T}")
    noise = noise or NoiseSpec()
    if noise.kind == "matrix-perturbation":
        raise InvalidInputError("matrix-perturbation noise applies to A, not to trajectories")

    rng = _rng(noise.seed)
    W = rng.standard_normal((n, T)) * noise.scale if noise.scale > 0 else np.zeros((n, T))
    X = np.empty((n, T))
    X[:, 0] = x
    for t in range(T - 1):
        x = A @ x
        if noise.kind == "process":
            x = x + W[:, t]
        if not np.all(np.abs(x) <= OVERFLOW_LIMIT):
            raise SimulationOverflowError(f"trajectory exceeded {OVERFLOW_LIMIT:g} at step {t + 1}", step=t + 1)
        X[:, t + 1] = x
    if noise.kind == "measurement":
        X = X + W
    return X


@dataclass(frozen=True)
class Sweep:
    """Grid for :func:`validate_bounds`. ``E`` is drawn with ``||E|| = e_fraction * eps``."""

    n_list: tuple = (2, 4, 8)
    norms: tuple = (0.3, 0.5, 0.9)
    eps_list: tuple = (0.01, 0.05)
    r_list: tuple = (1.5, 2.0, 1.2 + 1.2j)
    trials: int = 50
    seed: int = 0
    family: str = "dense-random"
    e_fraction: float = 0.5
    structure: str = "row"

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidInputError("trials must be >= 1")
        if not 0 <= self.e_fraction < 1:
            raise InvalidInputError("e_fraction must lie in [0, 1)")


@dataclass
class ValidationRecord:
    trial: int
    n: int
    family: str
    norm_A: float
    eps: float
    E_norm: float
    r: complex
    report: object = field(repr=False)
    error: str = ""

    @property
    def flags(self):
        return {} if self.report is None else dict(self.report.preconditions)

    @property
    def violations(self):
        if self.report is None:
            return []
        return self.report.violations()

    @property
    def violated(self):
        return bool(self.violations)

    def to_row(self):
        rep = self.report
        row = {
            "trial": self.trial,
            "n": self.n,
            "family": self.family,
            "norm_A": self.norm_A,
            "eps": self.eps,
            "E_norm": self.E_norm,
            "r_re": self.r.real,
            "r_im": self.r.imag,
        }
        if rep is None:
            row["error"] = self.error
            return row
        row.update(
            lower_bauer_fike=rep.lower.value if rep.lower.valid else float("nan"),
            lower_literal=rep.lower.literal if rep.lower.valid else float("nan"),
            kappa=rep.lower.kappa,
            upper_true=rep.upper_true.value,
            upper_estimated=rep.upper_estimated.value,
            fragility_min=float(np.nanmin(rep.fragility)),
            fragility_max=float(np.nanmax(rep.fragility)),
            fragility=";".join(_fmt(v) for v in rep.fragility),
            fragility_estimated=";".join(_fmt(v) for v in (rep.fragility_estimated if rep.fragility_estimated is not None else [])),
        )
        row.update({f"flag_{k}": int(v) for k, v in rep.preconditions.items()})
        row["violations"] = ";".join(self.violations)
        row["error"] = self.error
        return row


def _fmt(x):
    return format(float(x), ".17g")


def _trial(sweep, i_n, i_norm, trial):
    n, norm = sweep.n_list[i_n], sweep.norms[i_norm]
    A = gen_system(SystemSpec(n, norm, sweep.seed, sweep.family), rng=_rng(sweep.seed, 0, i_n, i_norm, trial))
    norm_A = spectral_norm(A)
    records = []
    for i_eps, eps in enumerate(sweep.eps_list):
        E = perturbation_matrix(n, sweep.e_fraction * eps, _rng(sweep.seed, 1, i_n, i_norm, i_eps, trial))
        e_norm = spectral_norm(E)
        for r in sweep.r_list:
            r = complex(r)
            try:
                report, err = bound_report(A, r, E=E, eps=eps, structure=sweep.structure), ""
            except Exception as exc:  # recorded, never dropped
                report, err = None, f"{type(exc).__name__}: {exc}"
            records.append(ValidationRecord(trial, n, sweep.family, norm_A, eps, e_norm, r, report, err))
    return records


def validate_bounds(sweep=None, threads=1):
    """Evaluate every bound over the sweep grid; one record per (trial, eps, r).

    Violations surface through :attr:`ValidationRecord.violations`; nothing is
    filtered out.
    """
    sweep = sweep or Sweep()
    if sweep.eps_list and sweep.norms and max(sweep.eps_list) >= min(sweep.norms):
        raise InvalidInputError("every eps must be smaller than every norm")
    if any(not 0 < s < 1 for s in sweep.norms):
        raise InvalidInputError("norms must lie in (0, 1)")
    jobs = list(itertools.product(range(len(sweep.n_list)), range(len(sweep.norms)), range(sweep.trials)))

    def run(job):
        return _trial(sweep, *job)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(run, jobs))
    else:
        chunks = [run(job) for job in jobs]
    return [rec for chunk in chunks for rec in chunk]


def summarize(records):
    """Counts of records, flag-valid checks and violations."""
    violated = [rec for rec in records if rec.violated]
    return {
        "records": len(records),
        "errors": sum(1 for rec in records if rec.report is None),
        "upper_true_checked": sum(1 for rec in records if rec.report and rec.report.upper_true.valid
                                  and rec.report.preconditions["r_gt_norm_A"]),
        "upper_estimated_checked": sum(1 for rec in records if rec.report and rec.report.upper_estimated.valid
                                       and rec.report.preconditions["r_gt_norm_A"]),
        "violations": len(violated),
    }


def fragility_gap(A, A_hat, r, structure="row"):
    """Per-channel ``| ||gamma(A_hat)|| - ||gamma(A)|| |``."""
    return np.abs(fragility_all_channels(A_hat, r, structure) - fragility_all_channels(A, r, structure))


@dataclass(frozen=True)
class NoiseCurveRow:
    scale: float
    median_A_error: float
    median_fragility_gap: float


def sysid_noise_curve(spec, scales, trials=20, T=200, r=1.0, kind="process", structure="row", threads=1):
    """Median ``||A_hat - A||`` and median max-channel fragility gap per noise scale.

    Each trial draws one system and one initial state and reuses them (and the
    same unit noise draws) at every scale.
    """
    scales = [float(s) for s in scales]
    if not scales or scales[0] != 0 or any(b < a for a, b in zip(scales, scales[1:])):
        raise InvalidInputError("scales must be sorted ascending and start at 0")

    def run(trial):
        rng = _rng(spec.seed, 2, trial)
        A = gen_system(spec, rng=rng)
        x0 = rng.standard_normal(spec.n)
        noise_seed = int(rng.integers(2**63))
        out = []
        for s in scales:
            X = simulate(A, x0, T, NoiseSpec(kind, s, noise_seed))
            A_hat = estimate_window(X).A_hat
            out.append((spectral_norm(A_hat - A), float(np.nanmax(fragility_gap(A, A_hat, r, structure)))))
        return out

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_trial = list(pool.map(run, range(trials)))
    else:
        per_trial = [run(t) for t in range(trials)]
    arr = np.array(per_trial)  # trials x scales x 2
    return [
        NoiseCurveRow(scale=s, median_A_error=float(np.median(arr[:, i, 0])),
                      median_fragility_gap=float(np.median(arr[:, i, 1])))
        for i, s in enumerate(scales)
    ]
