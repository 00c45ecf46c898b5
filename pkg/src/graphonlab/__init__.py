"""Graphon particle systems with common noise.

Positive-measure Wasserstein metric (WOP2), graphon discretizations and cut
norms, Euler-Maruyama simulation of finite and reference systems, and Monte
Carlo estimators for their convergence.
"""
__version__ = "0.1.0"

from ._kernels import BACKEND
from .coefficients import Coefficient, CoefficientFamily, builtin_linear_family
from .config import ConfigError, SystemConfig, load_config, parse_config, validate_config
from .experiments import (
    ExperimentReport,
    RateParams,
    estimate_coupling_error,
    estimate_empirical_lln,
    estimate_spatial_continuity,
    estimate_weighted_lln,
    fit_loglog_slope,
    rate_m_n,
)
from .graphon import (
    DiscretizedGraphon,
    Graphon,
    cut_norm,
    cut_norm_exact,
    cut_norm_heuristic,
    discretize_average,
    discretize_sample,
    inf_to_one_norm,
    validate_graphon_lipschitz,
)
from .meanfield import (
    ConditionalLawGrid,
    averaged_law,
    conditional_law,
    interaction_measure,
    simulate_reference,
)
from .measures import (
    DiscreteMeasure,
    PathMeasure,
    graphon_weighted_empirical,
    normalize,
    scale_pushforward,
    second_moment,
    total_mass,
)
from .noise import NoiseBundle, generate_noise
from .sde import NumericalBlowUp, TrajectoryEnsemble, simulate_finite, step_euler
from .transport import (
    TransportPlan,
    Wop2Result,
    marginal_restriction_w2,
    w2_bruteforce,
    w2_exact,
    wop2,
    wop2_closed_form,
    wop2_path_upper_bound,
)
