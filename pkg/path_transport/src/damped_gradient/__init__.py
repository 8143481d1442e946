"""
Резольвентный поток, затухающий градиент и сертификаты на пространстве путей
"""

from .certificates import (
    CertificateEstimate,
    DampedGradient,
    damped_energy_bound,
    damped_gradient_of,
    duality_residual,
    energy_constant,
    ibp_residual,
    lsi_gap,
    scatter_valid,
)
from .conditional_metric import (
    ConditionalMetric,
    ConditionalSamples,
    EllipticityReport,
    conditional_samples,
    continuity_probe,
    ellipticity_floor,
    estimate_conditional_metric,
)
from .flow import DampedFlow, check_flow_invariants, resolvent_shift, solve_damped_flow, solve_damped_flow_bundle
from .functionals import (
    CylindricalFunction,
    build_functional,
    bump_functional,
    check_gradient_oracle,
    constant_functional,
    linear_functional,
    smooth_bounded_functional,
    tilt_functional,
)

__all__ = [
    'CertificateEstimate', 'DampedGradient', 'damped_energy_bound', 'damped_gradient_of',
    'duality_residual', 'energy_constant', 'ibp_residual', 'lsi_gap', 'scatter_valid',
    'ConditionalMetric', 'ConditionalSamples', 'EllipticityReport', 'conditional_samples',
    'continuity_probe', 'ellipticity_floor', 'estimate_conditional_metric',
    'DampedFlow', 'check_flow_invariants', 'resolvent_shift', 'solve_damped_flow', 'solve_damped_flow_bundle',
    'CylindricalFunction', 'build_functional', 'bump_functional', 'check_gradient_oracle',
    'constant_functional', 'linear_functional', 'smooth_bounded_functional', 'tilt_functional',
]
