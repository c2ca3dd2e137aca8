from psqueue.spectral.coefficients import (
    CoefficientTable,
    MomentMethod,
    PrecisionPolicy,
    build_coefficient_table,
    cross_check_moments,
    escalate_table,
    moments,
)
from psqueue.spectral.measure import (
    SpectralMeasure,
    build_quadrature,
    measure_density_theta,
    measure_density_x,
    quadrature_moments,
    refined_for_degree,
)
from psqueue.spectral.polynomials import (
    eval_pollaczek,
    eval_Q,
    gen_P,
    gen_Q,
    gen_Q_ode_residual,
    phi,
    pollaczek_matrix,
    pollaczek_weight,
)

__all__ = [
    "CoefficientTable",
    "MomentMethod",
    "PrecisionPolicy",
    "SpectralMeasure",
    "build_coefficient_table",
    "build_quadrature",
    "cross_check_moments",
    "escalate_table",
    "eval_Q",
    "eval_pollaczek",
    "gen_P",
    "gen_Q",
    "gen_Q_ode_residual",
    "measure_density_theta",
    "measure_density_x",
    "moments",
    "phi",
    "pollaczek_matrix",
    "pollaczek_weight",
    "quadrature_moments",
    "refined_for_degree",
]
