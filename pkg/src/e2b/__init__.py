"""End-to-end balancing weights for continuous-treatment causal inference."""

from .data import (
    BalancingProblem,
    BasisExpansion,
    BasisSpec,
    CsvSchema,
    Dataset,
    DensityFeatures,
    build_problem,
    demean,
    load_csv,
    silverman_bandwidth,
    treatment_density,
)
from .implicit import WeightJacobianContext, dual_jacobian, jacobian_context, weights_vjp
from .inference import (
    WeightVariance,
    gsw_balance_check,
    sandwich_variance,
    weight_and_variance_at,
    weighted_entropy_identity,
)
from .ipw import PropensityModel, fit_propensity, stabilized_weights, winsorize
from .lbwnet import (
    AdamState,
    LbwNetParams,
    adam_step,
    constant_output_params,
    init_params,
    load_checkpoint,
    save_checkpoint,
)
from .regressors import KernelOptions, ResponseCurve, evaluation_loss, kernel_curve, wls_slope
from .solver import (
    DualSolution,
    SolverOptions,
    balance_residual,
    kl_to_base,
    solve_dual,
    weights_from_dual,
)
from .synthgen import (
    CURVE_GRID,
    NoiseModel,
    PseudoSampler,
    SynthDesign,
    estimate_noise,
    gen_linear,
    gen_nonlinear,
    gen_pseudo_responses,
    gen_schema_sample,
    hermite,
)

__version__ = "0.1.0"
