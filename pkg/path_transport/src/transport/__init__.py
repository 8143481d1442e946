"""
W₂ между ансамблями путей и транспортные сертификаты
"""

from .certificates import (
    InitialConstantReport,
    TalagrandReport,
    freepath_certificate,
    freepath_constant,
    relative_entropy,
    talagrand_certificate,
    talagrand_constant,
    validate_initial_constant,
)
from .ensembles import (
    PathMetric,
    TransportPlan,
    WeightedPathEnsemble,
    cost_matrix,
    distance_matrix,
    nested_partition_costs,
)
from .solvers import ATOM_CAP, SinkhornReport, atom_count, solve_exact, w1, w2, w2_exact, w2_sinkhorn

__all__ = [
    'InitialConstantReport', 'TalagrandReport', 'freepath_certificate', 'freepath_constant',
    'relative_entropy', 'talagrand_certificate', 'talagrand_constant', 'validate_initial_constant',
    'PathMetric', 'TransportPlan', 'WeightedPathEnsemble', 'cost_matrix', 'distance_matrix',
    'nested_partition_costs', 'ATOM_CAP', 'SinkhornReport', 'atom_count', 'solve_exact', 'w1', 'w2', 'w2_exact',
    'w2_sinkhorn',
]
