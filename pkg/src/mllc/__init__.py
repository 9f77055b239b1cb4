"""Multi-label surrogate losses, a linear-time logistic gradient, and
conditional-regret checks of their consistency bounds."""

from .errors import (
    AdmissibilityError,
    CapacityError,
    DimensionError,
    DivergedError,
    DomainError,
    LabelRangeError,
    MLLCError,
    NumericOverflowError,
    ParseError,
    UnsupportedModeError,
)
from .kernels import BACKEND
from .labels import (
    FBeta,
    Hamming,
    Jaccard,
    LabelTree,
    LabelVector,
    LinearFractional,
    PrecisionAtK,
    RecallAtK,
    SubsetZeroOne,
    TreeDistance,
    confusion,
    decode_scores,
    l_max,
    loss_eval,
    parse_target,
)
from .surrogates import (
    GCE,
    MAE,
    BinaryLogistic,
    BinaryRelevance,
    CompSum,
    Constrained,
    Exp,
    Hinge,
    Log,
    MLLogistic,
    RhoMargin,
    SqHinge,
    SumExp,
    chain_softmax,
    conditional_error,
    naive_gradient,
    parse_surrogate,
    surrogate_eval,
)
from .fastgrad import build_chain_wfa, fast_gradient, forward_backward, precompute_sums
from .lab import (
    BoundSpec,
    ConditionalDistribution,
    MinimizerOptions,
    SweepConfig,
    bayes_costs,
    minimize_conditional_surrogate,
    random_distribution,
    sweep,
    target_conditional_regret,
    verify_bound,
)
from .trainer import LinearModel, TrainConfig, evaluate, load_model, parse_dataset, predict, save_model, train

__version__ = "0.1.0"
