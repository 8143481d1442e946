"""
Условная метрика A^I(z) ядерной регрессией и проверка ее эллиптичности
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from sklearn.metrics.pairwise import rbf_kernel

from ..errors import ConfigError
from ..geometry.models import ManifoldModel
from ..stochastic.development import EnsembleSpec, PathBundle, grid_indices, simulate_ensemble
from ..utils import Timer
from .certificates import scatter_valid
from .flow import solve_damped_flow_bundle

logger = logging.getLogger(__name__)

MIN_EFFECTIVE_SAMPLES = 30
MIN_ENSEMBLE = 1000
ELLIPTICITY_SLACK = 0.1


@dataclass
class ConditionalSamples:
    """
    Выборка для регрессии: маргинали Λ_I(γ) и матрицы подынтегрального выражения по путям

    ambient[b] — блочная матрица (N·D)×(N·D) с блоками g_j E_j K_ij E_iᵀ g_i,
    K_ij = Q_{s_j} ∫_0^{s_i∧s_j} Q_s⁻¹Q_s⁻ᵀ ds Q_{s_i}ᵀ.
    """

    partition: np.ndarray
    features: np.ndarray
    ambient: np.ndarray
    exclusion_fraction: float

    @property
    def size(self) -> int:
        return self.features.shape[0]


@dataclass
class ConditionalMetric:
    partition: np.ndarray
    anchor: np.ndarray
    matrix: np.ndarray
    n_samples: int
    effective_sample_size: float
    bandwidth: float
    asymmetry: float
    reliable: bool


@dataclass
class EllipticityReport:
    ratio: float
    isotropic_ratio: float
    floor: float
    passed: bool


def _path_matrices(bundle: PathBundle, slots: np.ndarray) -> np.ndarray:
    model = bundle.model
    flow = solve_damped_flow_bundle(bundle)
    B, n1, d, _ = flow.Q.shape
    weights = flow.Q_inv[:, 1:] @ np.swapaxes(flow.Q_inv[:, 1:], -1, -2) * bundle.dt
    C = np.zeros((B, n1, d, d))
    C[:, 1:] = np.cumsum(weights, axis=1)
    Qs = flow.Q[:, slots]
    x = bundle.points[:, slots]
    L = np.einsum('bjkl,bjli->bjki', model.metric(x), bundle.frames[:, slots])
    N = slots.size
    D = x.shape[-1]
    out = np.zeros((B, N * D, N * D))
    for i in range(N):
        for j in range(N):
            m = min(slots[i], slots[j])
            K = Qs[:, j] @ C[:, m] @ np.swapaxes(Qs[:, i], -1, -2)
            out[:, j * D:(j + 1) * D, i * D:(i + 1) * D] = L[:, j] @ K @ np.swapaxes(L[:, i], -1, -2)
    return out


def conditional_samples(model: ManifoldModel, partition: Sequence[float], spec: EnsembleSpec,
                        chunk_size: int = 256, workers: int = 1) -> ConditionalSamples:
    """
    Параллельное вычисление маргиналей и матриц по путям ансамбля

    Args:
        model: модель
        partition: моменты s_1 < … < s_N на сетке
        spec: параметры ансамбля

    Returns:
        ConditionalSamples без взорвавшихся путей
    """
    partition = np.atleast_1d(np.asarray(partition, dtype=float))
    if spec.n_paths < MIN_ENSEMBLE:
        raise ConfigError(f"Для A^I нужно не меньше {MIN_ENSEMBLE} путей", "ensemble.n_paths")
    times = np.linspace(0.0, spec.horizon, spec.n_steps + 1)
    slots = grid_indices(times, partition)
    N, D = slots.size, model.ambient_dimension

    def compute(bundle: PathBundle):
        return {
            'features': bundle.points[:, slots].reshape(bundle.size, N * D),
            'ambient': _path_matrices(bundle, slots),
        }

    with Timer("Выборка для условной метрики"):
        data = simulate_ensemble(
            model, spec,
            reducer=lambda b: scatter_valid(b, compute, {'features': (N * D,), 'ambient': (N * D, N * D)}),
            chunk_size=chunk_size, workers=workers,
        )
    mask = np.all(np.isfinite(data['features']), axis=-1)
    return ConditionalSamples(partition=partition, features=data['features'][mask],
                              ambient=data['ambient'][mask],
                              exclusion_fraction=1.0 - float(np.mean(mask)))


def default_bandwidth(samples: ConditionalSamples) -> float:
    """0.2 · средний разброс маргиналей"""
    std = np.std(samples.features, axis=0)
    std = std[std > 0]
    return 0.2 * float(np.mean(std)) if std.size else 1.0


def anchor_basis(model: ManifoldModel, anchor: np.ndarray) -> np.ndarray:
    """Блочно-диагональный g-ортонормированный базис T_zM^I формы (N·D, N·d)"""
    anchor = np.atleast_2d(anchor)
    N, D = anchor.shape
    d = model.dimension
    basis = model.tangent_basis(anchor)
    out = np.zeros((N * D, N * d))
    for j in range(N):
        out[j * D:(j + 1) * D, j * d:(j + 1) * d] = basis[j]
    return out


def estimate_conditional_metric(model: ManifoldModel, partition: Sequence[float], anchor: np.ndarray,
                                spec: Optional[EnsembleSpec] = None, bandwidth: Optional[float] = None,
                                samples: Optional[ConditionalSamples] = None,
                                chunk_size: int = 256, workers: int = 1) -> ConditionalMetric:
    """
    Оценка Надарая–Уотсона A^I(z) с гауссовым ядром в координатах маргиналей

    Args:
        model: модель
        partition: моменты разбиения
        anchor: точка z ∈ M^I формы (N, D)
        spec: параметры ансамбля (если samples не заданы)
        bandwidth: ширина ядра; по умолчанию 0.2·разброс маргиналей
        samples: готовая выборка (для серии точек z)

    Returns:
        ConditionalMetric в g-ортонормированном базисе T_zM^I
    """
    if samples is None:
        if spec is None:
            raise ConfigError("Нужны либо samples, либо параметры ансамбля", "ensemble")
        samples = conditional_samples(model, partition, spec, chunk_size, workers)
    if bandwidth is None:
        bandwidth = default_bandwidth(samples)
    if bandwidth <= 0:
        raise ConfigError("Ширина ядра должна быть положительной", "conditional_metric.bandwidth")

    anchor = np.atleast_2d(np.asarray(anchor, dtype=float))
    weights = rbf_kernel(samples.features, anchor.reshape(1, -1), gamma=1.0 / (2 * bandwidth ** 2))[:, 0]
    total = float(np.sum(weights))
    ess = total ** 2 / float(np.sum(weights ** 2)) if total > 0 else 0.0
    basis = anchor_basis(model, anchor)
    if total > 0:
        ambient = np.einsum('b,bkl->kl', weights / total, samples.ambient)
        raw = basis.T @ ambient @ basis
    else:
        raw = np.full((basis.shape[1], basis.shape[1]), np.nan)
    norm = np.linalg.norm(raw)
    asymmetry = float(np.linalg.norm(raw - raw.T) / norm) if norm > 0 else 0.0
    reliable = ess >= MIN_EFFECTIVE_SAMPLES
    if not reliable:
        logger.warning(f"A^I ненадежна: эффективный размер выборки {ess:.1f} < {MIN_EFFECTIVE_SAMPLES}")
    else:
        logger.info(f"A^I оценена: ESS={ess:.0f}, ширина ядра {bandwidth:.3g}")
    return ConditionalMetric(
        partition=samples.partition, anchor=anchor, matrix=0.5 * (raw + raw.T),
        n_samples=samples.size, effective_sample_size=ess, bandwidth=float(bandwidth),
        asymmetry=asymmetry, reliable=reliable,
    )


def ellipticity_floor(metric: ConditionalMetric, K1: float, n_directions: int = 1000,
                      seed: int = 0) -> EllipticityReport:
    """
    Проверка ⟨A a, a⟩ ≥ |a_N|² e^{−K₁Δ}Δ, Δ = s_N − s_{N−1}

    Наименьшее отношение по всем a вычисляется точно: это λ_min дополнения Шура
    последнего блока. Отношение с изотропной нормировкой |a|²/N по случайным
    направлениям возвращается для сравнения.
    """
    partition = metric.partition
    previous = partition[-2] if partition.size > 1 else 0.0
    delta = float(partition[-1] - previous)
    floor = float(np.exp(-K1 * delta) * delta)
    A = metric.matrix
    n = A.shape[0]
    d = n // partition.size
    last = slice(n - d, n)
    rest = slice(0, n - d)
    S = A[last, last]
    if n > d:
        S = S - A[last, rest] @ np.linalg.pinv(A[rest, rest], hermitian=True) @ A[rest, last]
    ratio = float(np.min(np.linalg.eigvalsh(0.5 * (S + S.T)))) / floor

    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n_directions, n))
    a /= np.linalg.norm(a, axis=1, keepdims=True)
    quadratic = np.einsum('ri,ij,rj->r', a, A, a)
    isotropic = float(np.min(quadratic)) / (floor / partition.size)

    passed = ratio >= 1.0 - ELLIPTICITY_SLACK
    status = "✓" if passed else "✗"
    logger.info(f"{status} Эллиптичность A^I: отношение {ratio:.4f} (изотропное {isotropic:.4f})")
    return EllipticityReport(ratio=ratio, isotropic_ratio=isotropic, floor=floor, passed=bool(passed))


def continuity_probe(model: ManifoldModel, samples: ConditionalSamples, anchor: np.ndarray,
                     direction: np.ndarray, offsets: Sequence[float] = (0.05, 0.1, 0.2),
                     bandwidth: Optional[float] = None) -> np.ndarray:
    """
    ‖A^I(z_δ) − A^I(z)‖/δ для z_δ = exp_z(δ v) по каждому слоту

    Returns:
        Массив отношений по смещениям
    """
    anchor = np.atleast_2d(np.asarray(anchor, dtype=float))
    basis = model.tangent_basis(anchor)
    base = estimate_conditional_metric(model, samples.partition, anchor, samples=samples, bandwidth=bandwidth)
    direction = np.broadcast_to(np.asarray(direction, dtype=float), anchor.shape[:-1] + (model.dimension,))
    ratios = []
    for delta in offsets:
        v = np.einsum('jki,ji->jk', basis, delta * direction)
        moved, _ = model.exp_and_transport(anchor, v, basis)
        shifted = estimate_conditional_metric(model, samples.partition, moved, samples=samples,
                                              bandwidth=base.bandwidth)
        ratios.append(np.linalg.norm(shifted.matrix - base.matrix) / delta)
    return np.asarray(ratios)
