"""
Модельные многообразия со сносом и геометрические проверки
"""

from .checks import (CurvatureReport, central_difference, check_growth_envelope, christoffel_consistency,
                     christoffel_from_metric, distance, exp_and_transport, ricci_consistency,
                     ricci_from_christoffel, ricci_z_matrix, verify_curvature_bound)
from .drifts import PotentialDrift, ZeroDrift, expression_potential, ou_potential, power_potential
from .envelopes import AffineEnvelope, GrowthEnvelope, PowerEnvelope, build_envelope
from .frames import Frame, orthonormal_frame, orthonormality_error, random_frame
from .models import (ChartModel, EuclideanModel, HyperbolicModel, ManifoldModel, SphereModel,
                     StereographicSphere)

__all__ = [
    'ManifoldModel', 'ChartModel', 'EuclideanModel', 'HyperbolicModel', 'SphereModel',
    'StereographicSphere', 'ZeroDrift', 'PotentialDrift', 'ou_potential', 'power_potential',
    'expression_potential', 'GrowthEnvelope', 'AffineEnvelope', 'PowerEnvelope', 'build_envelope',
    'Frame', 'orthonormal_frame', 'random_frame', 'orthonormality_error',
    'CurvatureReport', 'ricci_z_matrix', 'distance', 'verify_curvature_bound', 'exp_and_transport',
    'check_growth_envelope', 'central_difference', 'christoffel_from_metric', 'ricci_from_christoffel',
    'christoffel_consistency', 'ricci_consistency',
]
