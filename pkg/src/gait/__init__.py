"""Geometry-aware entropy, divergence and mutual information on finite similarity spaces."""

__version__ = "0.1.0"

from .divergence import (
    DivergenceReport,
    EmpiricalMeasure,
    divergence_grad_atoms,
    divergence_grad_weights,
    forward_backward,
    gait_divergence_empirical,
    gait_divergence_shared,
    measure_divergence,
)
from .entropy import diversity, entropy_grad, gait_entropy, neg_entropy_hessian, power_mean, similarity_profile
from .exceptions import BoundaryError, DegenerateGradientWarning, InfiniteDivergence, NumericalFailure, ValidationError
from .infotheory import (
    DPIReport,
    JointDistribution,
    check_dpi,
    conditional_entropy,
    conditional_mutual_information,
    joint_entropy,
    mutual_information,
)
from .kernels import BlockGram, KernelSpec, SimilaritySpace, build_block_gram, build_gram, conv_apply, dense_apply
from .modes import SweepResult, birthday_estimate, birthday_sweep, curvature_select, diversity_sweep
from .optimize import (
    AdamState,
    OptimizerConfig,
    SparsityPenalty,
    adaptive_step,
    approximate_measure,
    barycenter_solve,
    maxent_solve,
    minibatch_sample,
)
from .verify import (
    CounterexampleRecord,
    SearchConfig,
    concavity_segment_check,
    hessian_spectrum_search,
    parallel_lines_check,
    random_search_divergence,
    segment_search,
)
