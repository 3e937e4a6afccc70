"""Bayesian registration of closed planar curves.

A template curve deforms along geodesics of a smoothing deformation metric,
driven by an initial normal momentum; an explicit reparameterisation handles
parameterisation freedom. The posterior over (momentum, generator) given
noisy point observations is characterised by a function-space pCN sampler
with a BFGS/exact-adjoint burn-in.
"""

from .errors import (
    BlowUpError,
    ContractError,
    DegenerateCurveError,
    InputError,
    IntegrationAccuracyError,
    NonDiffeomorphismError,
    ObservationFailure,
    ShapeRegError,
    ValidationError,
)
from .inference import (
    ChainRecord,
    ChainState,
    PosteriorTarget,
    PriorOnlyTarget,
    SamplerConfig,
    chain_summary,
    gibbs_sigma2,
    initial_state,
    pcn_step,
    run_chain,
)
from .kernel import curve_normal, metric_inverse, spline_eval_grid, spline_eval_loop, spread_to_grid
from .map_optimizer import OptimizerConfig, bfgs_minimize, map_objective, minimize_bfgs
from .observation import ForwardOperator, ObservationSet, observe, observe_gradient, potential
from .prior import (
    PriorPair,
    PriorSpec,
    cameron_martin_norm,
    paper_default_priors,
    sample_prior,
    validate_spec,
)
from .reparam import Reparameterisation, cotangent_lift, lie_exponential, reparam_adjoint, reparam_forward
from .scenarios import (
    ScenarioSpec,
    rounded_square_target,
    run_scenario,
    synthesize_observations,
    template_circle,
)
from .shooting import Trajectory, hamiltonian, shoot, shoot_adjoint, shoot_phase, velocity_field
from .types import (
    ClosedCurve2D,
    MetricSpec,
    PhaseState,
    ScalarLoopField,
    ShootConfig,
    TorusGridField,
)

__version__ = "0.1.0"
