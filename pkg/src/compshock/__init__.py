"""Impulse responses to composite shocks: SVMA simulation, LP-IV estimands,
sectoral identification with several instruments, a GMM test of no
inter-sectoral effects, identified-set bounds and Monte Carlo verification."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CollinearityError,
    CompShockError,
    ConvergenceError,
    DegenerateLineError,
    DivisionError,
    EmptyInputError,
    IdentificationError,
    InsufficientSampleError,
    InvalidArgumentError,
    NonIdentificationError,
    NormalizationError,
    ParseError,
    RankConditionError,
    RelevanceError,
    SchemaError,
    SingularityError,
    UndefinedEventError,
    UnderIdentificationError,
    UsageError,
    WeightingError,
)
from .svma import (  # noqa: E402
    AugmentedSvmaModel,
    DiscreteShock,
    InstrumentSpec,
    LagPolynomial,
    Panel,
    SvmaModel,
    as_augmented,
    autocovariance,
    collapse,
    composite_average_irf,
    simulate,
    true_irf,
)
from .identification import (  # noqa: E402
    alpha,
    covariance_ratio,
    cumulative_lpiv_estimand,
    lpiv_estimand,
    lpiv_weights,
    multi_iv_identify,
    multi_iv_identify_cumulative,
    multi_iv_identify_population,
    recompose_multiplier,
    same_sign_holds,
)
from .estimation import (  # noqa: E402
    ControlSpec,
    decompose_multiplier,
    gmm_test_no_intersectoral,
    lpiv_estimate,
    newey_west,
    residualize,
    sectoral_irf_estimate,
)
from .bounds import (  # noqa: E402
    SignRestriction,
    case2_line,
    counterfactual_theta1,
    intersect,
    is_subset,
    sign_restriction_set,
    subset_relations,
)
from .verify import Experiment, bias_curve, run_experiment  # noqa: E402
from .dataio import DatasetSchema, load_csv, write_csv  # noqa: E402

__all__ = [
    "AugmentedSvmaModel",
    "CollinearityError",
    "CompShockError",
    "ControlSpec",
    "ConvergenceError",
    "DatasetSchema",
    "DegenerateLineError",
    "DiscreteShock",
    "DivisionError",
    "EmptyInputError",
    "Experiment",
    "IdentificationError",
    "InstrumentSpec",
    "InsufficientSampleError",
    "InvalidArgumentError",
    "LagPolynomial",
    "NonIdentificationError",
    "NormalizationError",
    "Panel",
    "ParseError",
    "RankConditionError",
    "RelevanceError",
    "SchemaError",
    "SignRestriction",
    "SingularityError",
    "SvmaModel",
    "UndefinedEventError",
    "UnderIdentificationError",
    "UsageError",
    "WeightingError",
    "__version__",
    "alpha",
    "as_augmented",
    "autocovariance",
    "bias_curve",
    "case2_line",
    "collapse",
    "composite_average_irf",
    "counterfactual_theta1",
    "covariance_ratio",
    "cumulative_lpiv_estimand",
    "decompose_multiplier",
    "gmm_test_no_intersectoral",
    "intersect",
    "is_subset",
    "load_csv",
    "lpiv_estimand",
    "lpiv_estimate",
    "lpiv_weights",
    "multi_iv_identify",
    "multi_iv_identify_cumulative",
    "multi_iv_identify_population",
    "newey_west",
    "recompose_multiplier",
    "residualize",
    "run_experiment",
    "same_sign_holds",
    "sectoral_irf_estimate",
    "sign_restriction_set",
    "simulate",
    "subset_relations",
    "true_irf",
    "write_csv",
]
