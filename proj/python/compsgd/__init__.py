# SPDX-License-Identifier: Apache-2.0
"""Communication-compressed distributed SGD.

Python surface over the C++ core: compression operators with exact bit
accounting, client-sampling schemes, synthetic quadratic benchmarks with
closed-form constants, the plain / error-feedback / partial-participation
training loops, and the certification and rate-bound tooling.
"""

from ._core import (
    BoundsRow,
    CertificationRow,
    CompressorSpec,
    EsoCertificate,
    ExperimentResult,
    FormatError,
    Message,
    ParameterError,
    ParticipationVariance,
    Problem,
    RunRecord,
    RunRow,
    RunSummary,
    SamplingScheme,
    Schedule,
    VarianceInequality,
    averaged_delta,
    certify_compressor,
    certify_roster,
    check_variance_inequality,
    compare_bounds,
    compress,
    dcsgd_pp_rate_bound,
    dcsgd_rate_bound,
    default_eso_vector,
    draw_subset,
    expected_cardinality,
    from_bytes,
    identity,
    index_bits,
    induced,
    induced_delta,
    is_proper,
    is_unbiased,
    make_counterexample,
    make_random_quadratic,
    nominal_delta,
    nu_rand1,
    pp_variance_parameters,
    probability_matrix,
    probability_vector,
    rand_k,
    run,
    run_experiment,
    split_budget_induced,
    subset_support,
    ternary,
    top_k,
    validate_eso,
    validate_spec,
    wangni_k,
)

__version__ = "0.1.0"

__all__ = [
    "BoundsRow",
    "CertificationRow",
    "CompressorSpec",
    "EsoCertificate",
    "ExperimentResult",
    "FormatError",
    "Message",
    "ParameterError",
    "ParticipationVariance",
    "Problem",
    "RunRecord",
    "RunRow",
    "RunSummary",
    "SamplingScheme",
    "Schedule",
    "VarianceInequality",
    "averaged_delta",
    "certify_compressor",
    "certify_roster",
    "check_variance_inequality",
    "compare_bounds",
    "compress",
    "dcsgd_pp_rate_bound",
    "dcsgd_rate_bound",
    "default_eso_vector",
    "draw_subset",
    "expected_cardinality",
    "from_bytes",
    "identity",
    "index_bits",
    "induced",
    "induced_delta",
    "is_proper",
    "is_unbiased",
    "make_counterexample",
    "make_random_quadratic",
    "nominal_delta",
    "nu_rand1",
    "pp_variance_parameters",
    "probability_matrix",
    "probability_vector",
    "rand_k",
    "run",
    "run_experiment",
    "split_budget_induced",
    "subset_support",
    "ternary",
    "top_k",
    "validate_eso",
    "validate_spec",
    "wangni_k",
]
