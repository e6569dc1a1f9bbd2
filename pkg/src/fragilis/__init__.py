"""Neural fragility: minimum-norm structured rank-one perturbations of
estimated linear systems, with computable bounds and a validation harness."""

from .bounds import (
    BoundReport,
    bauer_fike_lower,
    bound_report,
    kato_inverse_bounds,
    neumann_inverse_bound,
    relative_boundedness_check,
    resolvent_norm_bound,
    upper_bound_estimated,
    upper_bound_true,
)
from .estimators import FragilityTransformer, LinearSystemEstimator
from .exceptions import (
    FragilisError,
    InfeasibleConstraintError,
    InvalidInputError,
    NumericFailureError,
    ParseError,
    PreconditionError,
    SimulationOverflowError,
    SingularResolventError,
)
from .fragility import (
    FragilityHeatmap,
    PerturbationResult,
    PerturbationTarget,
    default_targets,
    fragility_all_channels,
    fragility_row,
    heatmap,
    perturb,
    perturb_complex,
    perturb_real,
)
from .lds import ContinuousSystem, LinearSystem, discretize, is_discrete_stable, spectral_radius_margin
from .numerics import Spectrum, condition_number, eigen, min_norm_solve, resolvent, spectral_norm
from .sysid import EstimationReport, WindowedSeries, estimate_window, sliding_estimate

__version__ = "0.1.0"
