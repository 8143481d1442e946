"""
Стохастическое развитие, производный поток и каплинг
"""

from .coupling import CouplingResult, couple_bundle, parallel_coupling, uniform_distance
from .derivative_flow import (DerivativeFlow, derivative_flow, derivative_flow_bundle,
                              finite_difference_probe)
from .development import (EnsembleSpec, HorizontalPath, PathBundle, develop_bundle, develop_path,
                          grid_indices, simulate_ensemble)
from .noise import CameronMartinPath, DrivingNoise, noise_batch, path_increments, time_grid

__all__ = [
    'DrivingNoise', 'CameronMartinPath', 'noise_batch', 'path_increments', 'time_grid',
    'HorizontalPath', 'PathBundle', 'EnsembleSpec', 'develop_bundle', 'develop_path',
    'simulate_ensemble', 'grid_indices', 'DerivativeFlow', 'derivative_flow',
    'derivative_flow_bundle', 'finite_difference_probe', 'CouplingResult', 'couple_bundle',
    'parallel_coupling', 'uniform_distance',
]
