"""
Конформная замена метрики, цепочка срезок и численные проверки
"""

from .factors import (
    ConformalFactor,
    ConstantFactor,
    CutoffFactor,
    GaussianBump,
    base_bump,
    build_factor,
    cutoff_chain,
    smooth_radius,
    support_radius,
)
from .model import ConformalDrift, ConformalModel
from .toolkit import (
    ConnectionReport,
    ContainmentReport,
    CurvatureTrend,
    LaplacianReport,
    approx_curvature_bound,
    conformal_christoffel,
    conformal_connection_diff,
    conformal_metric,
    conformal_ricci,
    containment_probe,
    covariant_hessian,
    laplacian_comparison,
    radial_sample,
    random_vector_fields,
    ricci_oracle,
    transformed_drift,
    transformed_drift_jacobian,
    transformed_drift_squared_form,
)

__all__ = [
    'ConformalFactor', 'ConstantFactor', 'CutoffFactor', 'GaussianBump', 'base_bump', 'build_factor',
    'cutoff_chain', 'smooth_radius', 'support_radius', 'ConformalDrift', 'ConformalModel',
    'ConnectionReport', 'ContainmentReport', 'CurvatureTrend', 'LaplacianReport', 'approx_curvature_bound',
    'conformal_christoffel', 'conformal_connection_diff', 'conformal_metric', 'conformal_ricci',
    'containment_probe', 'covariant_hessian', 'laplacian_comparison', 'radial_sample',
    'random_vector_fields', 'ricci_oracle', 'transformed_drift', 'transformed_drift_jacobian',
    'transformed_drift_squared_form',
]
