"""
Взвешенные ансамбли путей, транспортные планы и матрицы стоимости
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np

from ..errors import ConfigError, ContractViolation
from ..stochastic.development import PathBundle, grid_indices
from ..utils import run_chunked

logger = logging.getLogger(__name__)

WEIGHT_TOL = 1e-12
METRIC_KINDS = ('sup', 'partition', 'endpoint')


@dataclass
class PathMetric:
    """
    Расстояние между путями

    Attributes:
        kind: 'sup' — d_∞, 'partition' — d_I, 'endpoint' — ρ(γ_T, η_T)
        partition: моменты разбиения для d_I
    """

    kind: str = 'sup'
    partition: Optional[Sequence[float]] = None

    def __post_init__(self):
        if self.kind not in METRIC_KINDS:
            raise ConfigError(f"Неизвестная метрика путей: {self.kind}", "metric.kind")
        if self.kind == 'partition' and not self.partition:
            raise ConfigError("Для d_I нужно разбиение", "metric.partition")

    def slots(self, times: np.ndarray) -> np.ndarray:
        if self.kind == 'sup':
            return np.arange(times.size)
        if self.kind == 'endpoint':
            return np.array([times.size - 1])
        return grid_indices(times, self.partition)

    @property
    def label(self) -> str:
        if self.kind == 'partition':
            return f"d_I[{','.join(f'{s:g}' for s in self.partition)}]"
        return {'sup': 'd_inf', 'endpoint': 'endpoint'}[self.kind]


@dataclass
class WeightedPathEnsemble:
    """Атомы-пути на общей сетке с неотрицательными весами, сумма которых равна 1"""

    bundle: PathBundle
    weights: np.ndarray
    provenance: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.bundle.require_valid()
        if self.weights.shape != (self.bundle.size,):
            raise ContractViolation("Число весов не совпадает с числом путей")
        if np.any(self.weights < 0):
            raise ContractViolation("Веса ансамбля должны быть неотрицательны")
        if abs(float(np.sum(self.weights)) - 1.0) > WEIGHT_TOL:
            raise ContractViolation(f"Сумма весов {np.sum(self.weights)!r} отличается от 1")

    @classmethod
    def uniform(cls, bundle: PathBundle, **provenance) -> "WeightedPathEnsemble":
        return cls(bundle, np.full(bundle.size, 1.0 / bundle.size), dict(provenance))

    @classmethod
    def tilted(cls, bundle: PathBundle, density: np.ndarray, **provenance) -> "WeightedPathEnsemble":
        """Самонормированные веса F(γ_i)/Σ_j F(γ_j) на тех же атомах"""
        density = np.asarray(density, dtype=float)
        if np.any(density < 0) or not np.all(np.isfinite(density)):
            raise ContractViolation("Плотность должна быть конечной и неотрицательной")
        total = float(np.sum(density))
        if total <= 0:
            raise ContractViolation("Плотность тождественно равна нулю на выборке")
        weights = density / total
        weights /= np.sum(weights)
        return cls(bundle, weights, dict(provenance))

    @property
    def size(self) -> int:
        return self.bundle.size

    @property
    def times(self) -> np.ndarray:
        return self.bundle.times

    @property
    def model(self):
        return self.bundle.model


@dataclass
class TransportPlan:
    """Матрица каплинга π с маргиналями a, b и стоимостью Σ π c"""

    matrix: np.ndarray
    source: np.ndarray
    target: np.ndarray
    cost: float

    @property
    def marginal_violation(self) -> float:
        rows = np.max(np.abs(self.matrix.sum(axis=1) - self.source))
        cols = np.max(np.abs(self.matrix.sum(axis=0) - self.target))
        return float(max(rows, cols))


def _check_grids(a: WeightedPathEnsemble, b: WeightedPathEnsemble) -> None:
    if a.times.shape != b.times.shape or not np.array_equal(a.times, b.times):
        raise ContractViolation("Ансамбли заданы на разных сетках")


def distance_matrix(a: WeightedPathEnsemble, b: WeightedPathEnsemble, metric: PathMetric,
                    workers: int = 1, chunk_size: int = 8) -> np.ndarray:
    """
    Матрица расстояний metric(γ_a, η_b) формы (m, n)

    Строки считаются по чанкам, при workers > 1 — в потоках.
    """
    _check_grids(a, b)
    slots = metric.slots(a.times)
    pa = a.bundle.points[:, slots]
    pb = b.bundle.points[:, slots]
    model = a.model

    def rows(start: int, stop: int) -> np.ndarray:
        values = model.distance(pa[start:stop, None], pb[None])
        return np.max(values, axis=-1)

    parts = run_chunked(rows, a.size, chunk_size, workers, description="Стоимости")
    return np.concatenate(parts, axis=0)


def cost_matrix(a: WeightedPathEnsemble, b: WeightedPathEnsemble, metric: PathMetric,
                power: float = 2.0, workers: int = 1) -> np.ndarray:
    """c_ab = metric(γ_a, η_b)^p"""
    return distance_matrix(a, b, metric, workers) ** power


def nested_partition_costs(a: WeightedPathEnsemble, b: WeightedPathEnsemble,
                           partitions: Sequence[Sequence[float]]) -> np.ndarray:
    """
    Матрицы расстояний d_{I_n} для вложенных разбиений и d_∞ (последний элемент)

    Для I ⊂ I' поэлементно d_I ≤ d_{I'} ≤ d_∞; нарушение попадает в лог.
    """
    matrices = [distance_matrix(a, b, PathMetric('partition', list(p))) for p in partitions]
    matrices.append(distance_matrix(a, b, PathMetric('sup')))
    stacked = np.stack(matrices)
    if np.any(np.diff(stacked, axis=0) < -1e-12):
        logger.warning("Нарушена монотонность d_I по вложенным разбиениям")
    return stacked
