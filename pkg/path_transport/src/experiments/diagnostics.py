"""
Дихотомия взрыва для V = (1+|x|²)^δ и проверка сжатия каплинга
"""

import logging
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from ..geometry import EuclideanModel, ManifoldModel, power_potential
from ..stochastic import EnsembleSpec, couple_bundle, noise_batch, simulate_ensemble
from ..utils import Timer, concat_chunks, run_chunked, stable_mean

logger = logging.getLogger(__name__)


@dataclass
class SweepPoint:
    delta: float
    lam: float
    explosion_fraction: float
    estimate: float
    estimate_half: float
    change: float
    stable: bool
    explosive: bool


@dataclass
class Example11Report:
    points: List[SweepPoint] = field(default_factory=list)
    explosion: dict = field(default_factory=dict)
    passed: bool = True


@dataclass
class CouplingRow:
    rho0: float
    max_ratio: float
    abort_fraction: float
    passed: bool


@dataclass
class CouplingReport:
    K: float
    rows: List[CouplingRow] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)


def exponential_moment(sup_squared: np.ndarray, lam: float):
    """
    E exp(λ sup|γ|²) по полной выборке и по первой половине

    Returns:
        (оценка, оценка по половине, относительное изменение)
    """
    values = np.exp(lam * sup_squared)
    full = stable_mean(values)
    half = stable_mean(values[:max(values.size // 2, 1)])
    change = abs(full - half) / abs(full) if np.isfinite(full) and full != 0 else float('inf')
    return full, half, change


def example11_sweep(deltas: Sequence[float], horizon: float, n_paths: int, lambdas: Sequence[float],
                    dimension: int = 2, n_steps: int = 200, seed: int = 0,
                    explosion_threshold: float = 0.95, stability_tolerance: float = 0.1,
                    explosion_radius: float = 1e6, chunk_size: int = 256, workers: int = 1) -> Example11Report:
    """
    Доля взрывов до T и устойчивость E exp(λ sup_t|γ_t|²) при удвоении выборки

    Для δ ≤ 1 ожидается отсутствие взрывов и устойчивая оценка момента, для δ > 1
    доля взрывов не меньше explosion_threshold, оценка момента помечается расходящейся.
    Шаг адаптивный при δ > 1.
    """
    report = Example11Report()
    for delta in deltas:
        explosive = delta > 1.0
        model = EuclideanModel(dimension, drift=power_potential(dimension, delta),
                               explosion_threshold=explosion_radius)
        spec = EnsembleSpec(horizon, n_steps, n_paths, seed, adaptive=explosive)
        with Timer(f"Пример δ={delta:g}"):
            bundle = simulate_ensemble(model, spec, chunk_size=chunk_size, workers=workers)
        fraction = bundle.exclusion_fraction
        report.explosion[float(delta)] = fraction
        if explosive:
            ok = fraction >= explosion_threshold
            logger.info(f"{'✓' if ok else '✗'} δ={delta:g}: доля взрывов {fraction:.3f} "
                        f"(порог {explosion_threshold:g}), экспоненциальный момент расходится")
            report.passed &= bool(ok)
            for lam in lambdas:
                report.points.append(SweepPoint(float(delta), float(lam), fraction, float('inf'),
                                                float('inf'), float('inf'), False, True))
            continue

        ok = fraction == 0.0
        if not ok:
            logger.warning(f"δ={delta:g}: {fraction:.3%} путей взорвались при ожидаемой неразрывности")
        report.passed &= bool(ok)
        valid = bundle.select(bundle.valid)
        sup_squared = np.max(np.sum(valid.points ** 2, axis=-1), axis=-1)
        for lam in lambdas:
            full, half, change = exponential_moment(sup_squared, lam)
            stable = change <= stability_tolerance
            report.passed &= bool(stable)
            logger.info(f"{'✓' if stable else '✗'} δ={delta:g}, λ={lam:g}: E exp(λ sup²) = {full:.5g} "
                        f"(половина выборки {half:.5g}, изменение {change:.2%})")
            report.points.append(SweepPoint(float(delta), float(lam), fraction, full, half, change,
                                            bool(stable), False))
    return report


def displaced_start(model: ManifoldModel, rho0: float) -> np.ndarray:
    """Точка на расстоянии ρ₀ от начала вдоль первого базисного направления"""
    origin = model.origin[None]
    basis = model.tangent_basis(origin)
    v = rho0 * basis[..., 0]
    point, _ = model.exp_and_transport(origin, v, v)
    return point[0]


def coupling_report(model: ManifoldModel, K: float, rho0: Sequence[float], n_paths: int,
                    horizon: float = 1.0, n_steps: int = 1000, seed: int = 0, tolerance: float = 0.05,
                    max_abort: float = 0.01, chunk_size: int = 256, workers: int = 1) -> CouplingReport:
    """
    max по путям и сетке ρ_t / (ρ₀ e^{Kt/2}) для каплинга параллельным переносом

    Строка проходит, если отношение не больше 1 + tolerance и доля прерванных
    путей не больше max_abort.
    """
    report = CouplingReport(K=float(K))
    times = np.linspace(0.0, horizon, n_steps + 1)
    growth = np.exp(K * times / 2.0)
    x0 = model.origin
    for r0 in rho0:
        y0 = displaced_start(model, r0)

        def chunk(start: int, stop: int, y0=y0):
            indices = np.arange(start, stop)
            increments = noise_batch(horizon, n_steps, model.dimension, seed, indices)
            result = couple_bundle(model, increments, x0, y0, horizon, seed, indices)
            return result.distances, result.aborted

        with Timer(f"Каплинг ρ₀={r0:g}"):
            parts = run_chunked(chunk, n_paths, chunk_size, workers, description="Каплинг")
        distances = concat_chunks([p[0] for p in parts])
        aborted = concat_chunks([p[1] for p in parts])
        ratios = distances[~aborted] / (r0 * growth)
        finite = ratios[np.isfinite(ratios)]
        max_ratio = float(np.max(finite)) if finite.size else float('inf')
        abort_fraction = float(np.mean(aborted))
        passed = max_ratio <= 1.0 + tolerance and abort_fraction <= max_abort
        message = (f"{'✓' if passed else '✗'} Каплинг ρ₀={r0:g}: max ρ_t/(ρ₀e^(Kt/2)) = {max_ratio:.4f}, "
                   f"прервано {abort_fraction:.2%}")
        if passed:
            logger.info(message)
        else:
            logger.warning(message)
        report.rows.append(CouplingRow(float(r0), max_ratio, abort_fraction, bool(passed)))
    return report
