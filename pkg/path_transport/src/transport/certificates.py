"""
Относительная энтропия и транспортные неравенства типа Талаграна на пространстве путей
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
import ot
from scipy.special import xlogy

from ..damped_gradient.certificates import energy_constant
from ..damped_gradient.functionals import CylindricalFunction
from ..errors import CertificateRefused, ContractViolation
from ..geometry.checks import CurvatureReport, verify_curvature_bound
from ..geometry.models import ManifoldModel
from ..stochastic.development import EnsembleSpec, simulate_ensemble
from ..utils import Timer, mix_seed, stable_mean
from .ensembles import PathMetric, WeightedPathEnsemble
from .solvers import ATOM_CAP, w1, w2

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 0.15
LOG_FLOOR = 1e-300
CURVATURE_SAMPLE = 2000


@dataclass
class TalagrandReport:
    certificate: str
    metric: str
    n: int
    lhs: float
    control: float
    lhs_corrected: float
    rhs: float
    constant: float
    entropy: float
    entropy_se: float
    ratio: float
    w1: float
    w1_below_w2: bool
    solver: str
    exclusion_fraction: float
    passed: bool

    def as_row(self) -> Dict[str, object]:
        return {'certificate': self.certificate, 'metric': self.metric, 'n_paths': self.n,
                'lhs': self.lhs, 'control': self.control, 'rhs': self.rhs, 'constant': self.constant,
                'se': self.entropy_se, 'ratio': self.ratio, 'pass': self.passed,
                'exclusion_fraction': self.exclusion_fraction}


@dataclass
class InitialConstantReport:
    C0: float
    worst_ratio: float
    passed: bool


def relative_entropy(values: np.ndarray) -> Tuple[float, float]:
    """
    Ent = μ̂(F log F)/F̄ − log F̄ после самонормировки, SE — дельта-метод

    Args:
        values: значения F ≥ 0 на выборке μ

    Returns:
        (оценка, стандартная ошибка)
    """
    values = np.asarray(values, dtype=float)
    if np.any(values < 0):
        raise ContractViolation("Плотность F должна быть неотрицательной")
    mean = stable_mean(values)
    if not mean > 0:
        raise ContractViolation("F тождественно равна нулю: энтропия не определена")
    flogf = xlogy(values, np.maximum(values, LOG_FLOOR))
    p = stable_mean(flogf)
    estimate = p / mean - np.log(mean)
    n = values.size
    if n < 2:
        return float(estimate), float('inf')
    gradient = np.array([1.0 / mean, -p / mean ** 2 - 1.0 / mean])
    cov = np.cov(np.stack([flogf, values]))
    se = float(np.sqrt(max(gradient @ cov @ gradient, 0.0) / n))
    return float(estimate), se


def talagrand_constant(K: float, T: float) -> float:
    """2(e^{KT} − 1)/K с пределом 2T"""
    return 2.0 * energy_constant(K, T)


def freepath_constant(C0: float, K: float, T: float) -> float:
    """C₀e^{KT} + 2(e^{KT} − 1)/K"""
    return float(C0 * np.exp(K * T)) + talagrand_constant(K, T)


def _curvature_points(bundle, limit: int = CURVATURE_SAMPLE, seed: int = 0) -> np.ndarray:
    points = bundle.points.reshape(-1, bundle.points.shape[-1])
    points = points[np.all(np.isfinite(points), axis=-1)]
    if points.shape[0] > limit:
        rng = np.random.default_rng(seed)
        points = points[rng.choice(points.shape[0], limit, replace=False)]
    return points


def _transport_report(name: str, bundle, values: np.ndarray, constant: float, metric: PathMetric,
                      tolerance: float, seed: int, exclusion: float, workers: int) -> TalagrandReport:
    mu = WeightedPathEnsemble.uniform(bundle, model=bundle.model.model_id, seed=seed)
    if np.allclose(values, values[0]):
        # F постоянна: Fμ = μ на тех же атомах
        lhs = control = 0.0
        w1_value = 0.0
        solver = 'trivial'
    else:
        tilted = WeightedPathEnsemble.tilted(bundle, values, model=bundle.model.model_id, seed=seed, F=name)
        lhs, solver = w2(tilted, mu, metric, workers=workers)
        rng = np.random.default_rng(mix_seed(seed, 7919))
        shuffled = WeightedPathEnsemble.tilted(bundle, values[rng.permutation(values.size)])
        control, _ = w2(shuffled, mu, metric, workers=workers)
        w1_value = w1(tilted, mu, metric, workers=workers) if bundle.size <= ATOM_CAP else float('nan')
    entropy, entropy_se = relative_entropy(values)
    rhs = constant * max(entropy, 0.0)
    corrected = max(lhs - control, 0.0)
    ratio = corrected / rhs if rhs > 0 else (0.0 if corrected == 0 else float('inf'))
    w1_ok = bool(np.isnan(w1_value) or w1_value <= np.sqrt(max(lhs, 0.0)) + 1e-9)
    if not w1_ok:
        logger.warning(f"{name}: W₁ = {w1_value:.4e} больше W₂ = {np.sqrt(lhs):.4e}")
    passed = corrected <= rhs * (1 + tolerance) + 1e-12
    report = TalagrandReport(
        certificate=name, metric=metric.label, n=bundle.size, lhs=float(lhs), control=float(control),
        lhs_corrected=float(corrected), rhs=float(rhs), constant=float(constant), entropy=entropy,
        entropy_se=entropy_se, ratio=float(ratio), w1=float(w1_value), w1_below_w2=w1_ok, solver=solver,
        exclusion_fraction=exclusion, passed=bool(passed),
    )
    status = "✓" if passed else "✗"
    message = (f"{status} {name} [{metric.label}]: W₂² = {lhs:.4e} − контроль {control:.4e} = {corrected:.4e}, "
               f"правая часть {rhs:.4e} = {constant:.4g}·Ent({entropy:.4e}), отношение {ratio:.3f}")
    if passed:
        logger.info(message)
    else:
        logger.warning(message)
    return report


def _simulate_density(model: ManifoldModel, F: CylindricalFunction, spec: EnsembleSpec,
                      chunk_size: int, workers: int):
    bundle = simulate_ensemble(model, spec, chunk_size=chunk_size, workers=workers)
    exclusion = bundle.exclusion_fraction
    bundle = bundle.select(bundle.valid)
    values = F.evaluate(bundle)
    return bundle, values, exclusion


def talagrand_certificate(model: ManifoldModel, F: CylindricalFunction, K: float, spec: EnsembleSpec,
                          metric: Optional[PathMetric] = None, tolerance: float = DEFAULT_TOLERANCE,
                          curvature: Optional[CurvatureReport] = None,
                          chunk_size: int = 256, workers: int = 1) -> TalagrandReport:
    """
    W₂²(Fμ, μ) ≤ 2(e^{KT} − 1)/K · μ(F log F) на ансамбле путей

    Fμ строится перевзвешиванием тех же атомов, что и μ. Из левой части вычитается
    контрольный прогон (веса F, переставленные случайно). Оценка кривизны проверяется
    на точках ансамбля, если готовый отчет не передан.

    Raises:
        CertificateRefused: оценка Ric_Z ≥ −K не подтверждена
    """
    metric = metric or PathMetric('sup')
    with Timer(f"Сертификат Талаграна ({metric.label})"):
        bundle, values, exclusion = _simulate_density(model, F, spec, chunk_size, workers)
        if curvature is None:
            curvature = verify_curvature_bound(model, _curvature_points(bundle, seed=spec.seed), K)
        if not curvature.passed:
            raise CertificateRefused(f"Оценка кривизны K={K:g} не подтверждена: "
                                     f"min λ = {curvature.min_eigenvalue:.4g}")
        constant = talagrand_constant(K, spec.horizon)
        name = 'talagrand' if metric.kind != 'partition' else 'talagrand_partition'
        return _transport_report(name, bundle, values, constant, metric, tolerance, spec.seed,
                                 exclusion, workers)


def freepath_certificate(model: ManifoldModel, sampler: Callable[[int, np.random.Generator], np.ndarray],
                         C0: float, F: CylindricalFunction, K: float, spec: EnsembleSpec,
                         metric: Optional[PathMetric] = None, tolerance: float = DEFAULT_TOLERANCE,
                         curvature: Optional[CurvatureReport] = None,
                         chunk_size: int = 256, workers: int = 1) -> TalagrandReport:
    """
    Сертификат для случайного начала X₀ ~ ν с константой C₀e^{KT} + 2(e^{KT} − 1)/K

    Args:
        sampler: (n, rng) → начальные точки (n, D)
        C0: константа Талаграна закона ν по расстоянию ρ (0 для точечной массы)
    """
    metric = metric or PathMetric('sup')
    rng = np.random.default_rng(mix_seed(spec.seed, 104729))
    starts = np.asarray(sampler(spec.n_paths, rng), dtype=float)
    free_spec = EnsembleSpec(spec.horizon, spec.n_steps, spec.n_paths, spec.seed, starts=starts,
                             adaptive=spec.adaptive, dt_floor=spec.dt_floor)
    with Timer("Сертификат со случайным началом"):
        bundle, values, exclusion = _simulate_density(model, F, free_spec, chunk_size, workers)
        if curvature is None:
            curvature = verify_curvature_bound(model, _curvature_points(bundle, seed=spec.seed), K)
        if not curvature.passed:
            raise CertificateRefused(f"Оценка кривизны K={K:g} не подтверждена: "
                                     f"min λ = {curvature.min_eigenvalue:.4g}")
        constant = freepath_constant(C0, K, spec.horizon)
        return _transport_report('freepath', bundle, values, constant, metric, tolerance, spec.seed,
                                 exclusion, workers)


def validate_initial_constant(C0: float, thetas: Sequence[float] = (0.25, 0.5, 1.0, 1.5),
                              grid_size: int = 4000, half_width: float = 8.0,
                              slack: float = 1e-3) -> InitialConstantReport:
    """
    Проверка W₂(fν, ν)² ≤ C₀ ν(f log f) для ν = N(0, 1) дискретным OT на сетке

    Плотности f — экспоненциальные наклоны e^{θx − θ²/2}.
    """
    x = np.linspace(-half_width, half_width, grid_size)
    nu = np.exp(-0.5 * x ** 2)
    nu /= nu.sum()
    worst = 0.0
    for theta in thetas:
        density = np.exp(theta * x - 0.5 * theta ** 2)
        tilted = nu * density
        tilted /= tilted.sum()
        f = tilted / nu
        entropy = float(np.sum(nu * xlogy(f, f)))
        cost = float(ot.emd2_1d(x, x, tilted, nu, metric='sqeuclidean'))
        worst = max(worst, cost / (C0 * entropy) if entropy > 0 else 0.0)
    passed = worst <= 1.0 + slack
    status = "✓" if passed else "✗"
    logger.info(f"{status} Константа C₀={C0:g} начального закона: худшее отношение {worst:.4f}")
    return InitialConstantReport(C0=float(C0), worst_ratio=float(worst), passed=bool(passed))
