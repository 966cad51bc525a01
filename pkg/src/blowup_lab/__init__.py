"""Blowup criteria, critical norms and radial simulations for ``u_t = Delta u + |u|^(p-1) u``."""
from __future__ import annotations

from .criteria import (
    BLOWUP,
    DIVERGENT,
    INCONCLUSIVE,
    CriterionReport,
    ThresholdReport,
    blowup_threshold,
    blowup_time_bound_from_W0,
    check_blowup_criterion,
    heat_at_origin,
    morrey_norm,
    morrey_norm_singular,
    radial_mass,
    scaled_semigroup_constant,
    threshold_M,
    threshold_N,
    thresholds,
    weighted_criterion_bound,
)
from .diagnostics import (
    MomentSeries,
    SlopeViolation,
    backward_kernel,
    check_lower_bound,
    check_moment_ode,
    lower_bound_trajectory,
    mass_L1,
    moment_W,
)
from .errors import DomainError, QuadratureError, SingularityError
from .model import (
    Constant,
    Gaussian,
    Indicator,
    ModelParams,
    PowerTail,
    RadialProfile,
    RegimeFlags,
    Sampled,
    Singular,
    TruncatedSingular,
    classify_regime,
    eval_profile,
    gamma_exponent,
    load_sampled_csv,
    profile_from_dict,
    singular_constant,
    surface_area,
)
from .numerics import (
    QuadratureConfig,
    SupSearchResult,
    integrate,
    log_gamma,
    power_integral,
    radial_integral,
    sup_search,
)
from .solver import (
    GridConfig,
    Outcome,
    SimResult,
    SimState,
    barrier_max,
    init_state,
    simulate,
    step,
    time_derivative,
)

__version__ = "0.1.0"
