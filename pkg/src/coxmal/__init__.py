"""Mallows-distributed random elements of finite Coxeter groups.

Types A, B, D and the dihedral groups are realized as (signed) permutation
windows; the library computes lengths, descents, the two-sided descent
statistic and its exact or sampled distribution, and carries the verification
checks (moment formulas, coupling bounds, normal-approximation distances)
that the `coxmal` command drives.
"""

from .coxeter import (
    DihedralElement,
    EnumerationCapError,
    GroupDescriptor,
    ParabolicSubset,
    ProductDescriptor,
    SignedPermutation,
    apply_left_generator,
    apply_right_generator,
    compose,
    coxeter_graph_neighbors,
    descent_number,
    descriptor_factors,
    element_from_text,
    element_to_text,
    enumerate_group,
    generator_element,
    identity_element,
    invert,
    is_left_descent,
    is_right_descent,
    length,
    longest_element_in,
    parabolic_decompose,
    parse_group,
    two_sided_descent,
)
from .mallows import (
    MallowsSpec,
    normalization_constant,
    normalization_enumeration_check,
    pattern_probability_bound_check,
    pmf,
    reversal_identity_check,
    sample_elements,
    sample_one,
    sample_statistic,
    sample_windows,
)
from .moments import (
    DiscreteDistribution,
    MomentSummary,
    cube_moment_bound_check,
    descent_indicator_mean_check,
    empirical_distribution,
    exact_distribution,
    goodness_of_fit,
    mean_two_sided,
    two_sample_chi_square,
    variance_bounds_two_sided,
)
from .normal import (
    NormalizedStatistic,
    exact_w2_floor,
    smooth_bound_checks,
    tail_bound_check,
    w1_bound_check,
    w1_to_normal_by_cdf,
    w2_bound_check,
    w2_with_se,
    wasserstein_from_samples,
    wasserstein_p_to_normal,
)
from .reports import CheckResult, ExperimentReport
from .sizebias import (
    CouplingSample,
    conditional_star_law_check,
    coupling_boundedness_check,
    covariance_type_sums,
    coxeter_graph_distances,
    ensure_left_descent,
    ensure_right_descent,
    generic_stein_bound,
    sample_coupled,
    size_bias_law_check,
    star,
    stein_bound_rhs,
    stein_error_terms,
    type1_pairwise_covariances,
)

__version__ = "0.1.0"
