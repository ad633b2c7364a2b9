"""Numerical checks of entropy-power and Fisher-information inequalities for
dependent random vectors."""

from .catalog import build_density, correlated_gaussian, quartic_coupling, uniform_box
from .density import (
    BlockStructure,
    GaussianDensity,
    GridAxis,
    GridDensity,
    Weights,
    convolve_isotropic_gaussian,
    gaussian_to_grid,
    marginalize,
    normalize,
    product,
    scale_blocks,
    sum_density,
)
from .flow import (
    FlowTrace,
    RemainderEstimate,
    debruijn_check,
    flow_trace,
    ou_evolve,
    remainder_R,
    remainder_S,
)
from .functionals import (
    FisherMatrix,
    ScoreField,
    conditional_entropy,
    entropy,
    entropy_power,
    erasure_entropy,
    fisher_matrix,
    fisher_of_sum,
    fisher_scalar,
    score,
    score_projection_residual,
)
from .harness import (
    VerificationReport,
    hao_jog_comparison,
    rioul_condition_check,
    verify_classical_epi,
    verify_conditional_epi,
    verify_conditional_epi_clean,
    verify_conditional_linearized,
    verify_dependent_epi,
    verify_dependent_linearized,
    verify_lambda_fisher,
    verify_optimized_stam,
    verify_supermodular_epi,
    verify_weighted_fisher,
)
from .supermodularity import LsmReport, class_C_check, gaussian_lsm_check, lattice_check, mixed_partials_check

__version__ = "0.1.0"
