"""Prediction and retrodiction of quadrature measurements on Gaussian states."""

from .errors import InfeasibleError, InvalidArgumentError, NumericalSingularityError
from .gaussian import (
    GaussianOperator,
    Kind,
    LinearPhaseSpaceMap,
    QuadratureDirection,
    ScalarGaussian,
    apply_linear_map,
    condition_on_effect,
    make_coherent,
    make_epr_effect,
    make_homodyne_effect,
    make_two_mode_squeezed,
    make_vacuum,
    marginal,
    rotated_variance,
    validate,
)
from .joint import (
    MeterStatistics,
    Scenario,
    build_transform,
    optimal_combination_variance,
    optimal_weights,
    predicted_meter_stats,
    retrodict_meter_stats,
)
from .retrodiction import (
    PqsPair,
    RetrodictionResult,
    butterfly_curve,
    heterodyne_retrodiction,
    pqs_distribution_single,
    pqs_two_mode,
    pqs_variance_single,
)

__version__ = "0.1.0"
