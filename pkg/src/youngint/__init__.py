"""Numerics for Young integrals and Young differential equations driven by Hölder paths."""

from __future__ import annotations

from .bounds import (
    BoundReport,
    SubdivisionPlan,
    bound_bounded,
    bound_linear_growth,
    calibrate_k,
    stability_bound,
    subdivision_plan,
)
from .errors import (
    CalibrationError,
    DivergenceError,
    DomainError,
    ExperimentError,
    NumericalError,
    PreconditionError,
    YoungError,
    YoungWarning,
)
from .fraccalc import (
    FracOrder,
    default_order,
    gamma_fn,
    rl_integral_left,
    rl_integral_right,
    weyl_derivative_left,
    weyl_derivative_right,
)
from .integrate import IntegralResult, rs_integral, zahle_integral
from .paths import (
    FbmSpec,
    GridPath,
    covariance_rh,
    estimate_holder_exponent,
    holder_seminorm,
    sample_fbm,
    sup_norm,
)
from .solver import FieldMeta, SolveConfig, VectorField, picard_refine, solve_young_euler

__version__ = "0.1.0"
