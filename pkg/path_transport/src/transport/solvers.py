"""
W₂ между взвешенными ансамблями: точный транспортный LP и энтропийная регуляризация
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import ot

from ..errors import ConfigError, TransportCapError
from .ensembles import PathMetric, TransportPlan, WeightedPathEnsemble, cost_matrix

logger = logging.getLogger(__name__)

ATOM_CAP = 600
SLACKNESS_TOL = 1e-8
MARGINAL_TOL = 1e-9


@dataclass
class SinkhornReport:
    iterations: int
    row_violation: float
    column_violation: float
    converged: bool
    epsilon: float


def atom_count(a: WeightedPathEnsemble, b: WeightedPathEnsemble) -> int:
    """Число различных атомов носителя: ансамбли на одном пакете путей делят атомы"""
    return a.size if a.bundle is b.bundle else a.size + b.size


def _check_cap(a: WeightedPathEnsemble, b: WeightedPathEnsemble) -> None:
    if atom_count(a, b) > ATOM_CAP:
        raise TransportCapError(
            f"{atom_count(a, b)} атомов больше предела {ATOM_CAP} точного LP; используйте w2_sinkhorn"
        )


def slackness_residual(plan: np.ndarray, cost: np.ndarray, u: np.ndarray, v: np.ndarray) -> float:
    """Невязка условий оптимальности: недопустимость двойственных и Σ π·(c − u − v)"""
    reduced = cost - u[:, None] - v[None, :]
    scale = max(1.0, float(np.max(np.abs(cost))))
    infeasibility = max(0.0, -float(np.min(reduced)))
    complementary = float(np.sum(plan * np.abs(reduced)))
    return max(infeasibility, complementary) / scale


def solve_exact(source: np.ndarray, target: np.ndarray, cost: np.ndarray) -> Tuple[float, TransportPlan, float]:
    """
    Сетевой симплекс (POT) с проверкой дополняющей нежесткости

    Returns:
        (стоимость, план, невязка оптимальности)
    """
    plan, log = ot.emd(source, target, cost, numItermax=10_000_000, log=True)
    if log.get('warning'):
        logger.warning(f"Сетевой симплекс: {log['warning']}")
    residual = slackness_residual(plan, cost, np.asarray(log['u']), np.asarray(log['v']))
    if residual > SLACKNESS_TOL:
        logger.warning(f"Невязка дополняющей нежесткости {residual:.2e} > {SLACKNESS_TOL:g}")
    value = float(np.sum(plan * cost))
    return value, TransportPlan(plan, source, target, value), residual


def w2_exact(a: WeightedPathEnsemble, b: WeightedPathEnsemble, metric: PathMetric,
             cost: Optional[np.ndarray] = None, workers: int = 1) -> Tuple[float, TransportPlan]:
    """
    W₂² по метрике путей точным решением транспортной задачи

    Args:
        a, b: ансамбли на общей сетке, всего не больше 600 атомов
        metric: d_∞, d_I или расстояние концов
        cost: готовая матрица c_ab = metric²

    Returns:
        (W₂², TransportPlan)
    """
    _check_cap(a, b)
    if cost is None:
        cost = cost_matrix(a, b, metric, workers=workers)
    value, plan, _ = solve_exact(a.weights, b.weights, cost)
    return value, plan


def w1(a: WeightedPathEnsemble, b: WeightedPathEnsemble, metric: PathMetric,
       distances: Optional[np.ndarray] = None, workers: int = 1) -> float:
    """W₁ по метрике путей (стоимость без квадрата)"""
    _check_cap(a, b)
    if distances is None:
        distances = cost_matrix(a, b, metric, power=1.0, workers=workers)
    return float(ot.emd2(a.weights, b.weights, distances, numItermax=10_000_000))


def _sinkhorn_plan(source, target, cost, epsilon, max_iters):
    plan, log = ot.sinkhorn(source, target, cost, epsilon, method='sinkhorn_log',
                            numItermax=max_iters, stopThr=MARGINAL_TOL, log=True)
    rows = float(np.max(np.abs(plan.sum(axis=1) - source)))
    cols = float(np.max(np.abs(plan.sum(axis=0) - target)))
    report = SinkhornReport(iterations=int(log.get('niter', max_iters)), row_violation=rows,
                            column_violation=cols, converged=max(rows, cols) <= MARGINAL_TOL,
                            epsilon=float(epsilon))
    return plan, report


def w2_sinkhorn(a: WeightedPathEnsemble, b: WeightedPathEnsemble, metric: PathMetric,
                epsilon: float, max_iters: int = 100_000, debiased: bool = False,
                cost: Optional[np.ndarray] = None,
                workers: int = 1) -> Tuple[float, TransportPlan, SinkhornReport]:
    """
    Энтропийная оценка W₂² итерациями Синкхорна в логарифмической области

    Args:
        epsilon: параметр регуляризации ε > 0
        max_iters: предел числа итераций
        debiased: вернуть S(a,b) − ½S(a,a) − ½S(b,b) вместо ⟨π, c⟩

    Returns:
        (оценка W₂², план, отчет о сходимости)
    """
    if epsilon <= 0:
        raise ConfigError("ε должно быть положительным", "transport.epsilon")
    if cost is None:
        cost = cost_matrix(a, b, metric, workers=workers)
    plan, report = _sinkhorn_plan(a.weights, b.weights, cost, epsilon, max_iters)
    value = float(np.sum(plan * cost))
    if not report.converged:
        logger.warning(f"Синкхорн не сошелся за {report.iterations} итераций: нарушение маргиналей "
                       f"{max(report.row_violation, report.column_violation):.2e}")
    if debiased:
        self_a = cost_matrix(a, a, metric, workers=workers)
        self_b = cost_matrix(b, b, metric, workers=workers)
        plan_a, _ = _sinkhorn_plan(a.weights, a.weights, self_a, epsilon, max_iters)
        plan_b, _ = _sinkhorn_plan(b.weights, b.weights, self_b, epsilon, max_iters)
        value -= 0.5 * float(np.sum(plan_a * self_a)) + 0.5 * float(np.sum(plan_b * self_b))
    return value, TransportPlan(plan, a.weights, b.weights, float(np.sum(plan * cost))), report


def w2(a: WeightedPathEnsemble, b: WeightedPathEnsemble, metric: PathMetric,
       epsilon_scale: float = 0.01, workers: int = 1) -> Tuple[float, str]:
    """
    W₂²: точный LP в пределах 600 атомов, иначе Синкхорн без смещения

    Returns:
        (значение, имя решателя)
    """
    cost = cost_matrix(a, b, metric, workers=workers)
    if atom_count(a, b) <= ATOM_CAP:
        value, _ = w2_exact(a, b, metric, cost=cost)
        return value, 'exact'
    positive = cost[cost > 0]
    epsilon = epsilon_scale * float(np.median(positive)) if positive.size else epsilon_scale
    logger.info(f"{atom_count(a, b)} атомов: энтропийная оценка с ε={epsilon:.3g}")
    value, _, _ = w2_sinkhorn(a, b, metric, epsilon, debiased=True, cost=cost, workers=workers)
    return value, 'sinkhorn'
