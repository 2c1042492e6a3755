"""Mixture conditional regression.

A latent-class linear regression for settings where class membership is
carried by many weak binary features: EM on the response/covariate block,
per-feature Bernoulli probabilities, log-space posterior memberships, a
weighted-design least-squares refit with standard errors, and BIC selection
of the class count, plus a simulation benchmark and replication harness.
"""

from .core import (
    EPS_CLAMP,
    NOISE_VAR_FLOOR,
    Dataset,
    FullParams,
    MixtureParams,
    PosteriorMatrix,
    ResponseProbs,
    align_labels,
    canonical_order,
    indicator_matrix,
    validate,
)
from .errors import (
    ColumnOutOfRange,
    DegenerateWeights,
    DimensionMismatch,
    EmptyClass,
    EmptyVocabulary,
    InvariantViolation,
    KMismatch,
    McrError,
    MissingLabels,
    NonConvergence,
    SchemaMismatch,
    SingularDesign,
    ZeroVariance,
)
from .features import em_step_feature, fit_response_probs, loglik_feature
from .finalfit import FinalFit, build_design, fit_final, fit_oracle
from .fit import McrFit, fit_mcr
from .harness import HarnessSpec, derive_seed, run_harness, run_replication
from .io import (
    METRICS_HEADER,
    ModelFile,
    read_counts,
    read_dataset,
    read_metrics_csv,
    read_model,
    read_params,
    write_counts,
    write_dataset,
    write_metrics_csv,
    write_model,
    write_params,
)
from .metrics import (
    diff_real_oracle,
    err_norm,
    max_err_posterior,
    max_err_response,
    out_of_sample_r2,
    predict,
    predict_dataset,
)
from .mixreg import (
    EmConfig,
    EmTrace,
    em_step_limited,
    fit_initial,
    loglik_limited,
    posterior_limited,
)
from .pipeline import SplitResult, binarize, split_controls
from .posterior import (
    hard_assign,
    posterior_features_only,
    posterior_features_only_batch,
    posterior_full,
)
from .select import bic, degrees_of_freedom, select_k
from .simulate import SimDesign, default_design, generate

__all__ = [
    "EPS_CLAMP",
    "NOISE_VAR_FLOOR",
    "ColumnOutOfRange",
    "Dataset",
    "DegenerateWeights",
    "DimensionMismatch",
    "EmConfig",
    "EmTrace",
    "EmptyClass",
    "EmptyVocabulary",
    "FinalFit",
    "FullParams",
    "HarnessSpec",
    "InvariantViolation",
    "KMismatch",
    "METRICS_HEADER",
    "McrError",
    "McrFit",
    "MissingLabels",
    "MixtureParams",
    "ModelFile",
    "NonConvergence",
    "PosteriorMatrix",
    "ResponseProbs",
    "SchemaMismatch",
    "SimDesign",
    "SingularDesign",
    "SplitResult",
    "ZeroVariance",
    "align_labels",
    "bic",
    "binarize",
    "build_design",
    "canonical_order",
    "default_design",
    "degrees_of_freedom",
    "derive_seed",
    "diff_real_oracle",
    "em_step_feature",
    "em_step_limited",
    "err_norm",
    "fit_final",
    "fit_initial",
    "fit_mcr",
    "fit_oracle",
    "fit_response_probs",
    "generate",
    "hard_assign",
    "indicator_matrix",
    "loglik_feature",
    "loglik_limited",
    "max_err_posterior",
    "max_err_response",
    "out_of_sample_r2",
    "posterior_features_only",
    "posterior_features_only_batch",
    "posterior_full",
    "posterior_limited",
    "predict",
    "predict_dataset",
    "read_counts",
    "read_dataset",
    "read_metrics_csv",
    "read_model",
    "read_params",
    "run_harness",
    "run_replication",
    "select_k",
    "split_controls",
    "validate",
    "write_counts",
    "write_dataset",
    "write_metrics_csv",
    "write_model",
    "write_params",
]
