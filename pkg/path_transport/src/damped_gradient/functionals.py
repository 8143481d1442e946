"""
Цилиндрические функционалы F(γ) = f(γ_{s_1}, …, γ_{s_N}) и их градиенты
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from ..errors import ConfigError, ContractViolation, GeometryEvaluationError
from ..stochastic.development import PathBundle, grid_indices
from ..utils import mix_seed

logger = logging.getLogger(__name__)

FD_STEP = 1e-5


@dataclass
class CylindricalFunction:
    """
    Цилиндрическая функция на пространстве путей

    Attributes:
        times: моменты s_1 < … < s_N
        f: (B, N, D) → (B,)
        grad: (B, N, D) → (B, N, D) частные производные; None — центральные разности
        bound: оценка sup|f| (inf, если не ограничена)
        gradient_bound: оценка sup Σ_j|∂_j f|_g (inf, если неизвестна)
        label: имя для отчетов
    """

    times: np.ndarray
    f: Callable[[np.ndarray], np.ndarray]
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    bound: float = float('inf')
    gradient_bound: float = float('inf')
    label: str = "F"
    params: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.atleast_1d(np.asarray(self.times, dtype=float))
        if np.any(np.diff(self.times) <= 0):
            raise ContractViolation(f"Моменты {self.label} должны строго возрастать")
        if self.times[0] <= 0:
            raise ContractViolation(f"Моменты {self.label} должны лежать в (0, T]")

    @property
    def n_slots(self) -> int:
        return self.times.size

    def value(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(self.f(np.asarray(z, dtype=float)), dtype=float)

    def gradient(self, z: np.ndarray) -> np.ndarray:
        """∂_j f в точке z формы (B, N, D)"""
        z = np.asarray(z, dtype=float)
        if self.grad is not None:
            out = np.asarray(self.grad(z), dtype=float)
        else:
            out = finite_difference_gradient(self.f, z, FD_STEP)
        if not np.all(np.isfinite(out)):
            raise GeometryEvaluationError(f"Градиент {self.label} нефинитен", point=z)
        return out

    def slots(self, bundle: PathBundle) -> np.ndarray:
        """Индексы сетки для моментов s_j"""
        if self.times[-1] > bundle.horizon * (1 + 1e-12):
            raise ContractViolation(f"Моменты {self.label} выходят за горизонт {bundle.horizon}")
        return grid_indices(bundle.times, self.times)

    def marginals(self, bundle: PathBundle) -> np.ndarray:
        return bundle.points[:, self.slots(bundle)]

    def evaluate(self, bundle: PathBundle) -> np.ndarray:
        return self.value(self.marginals(bundle))


def finite_difference_gradient(f: Callable, z: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    B, N, D = z.shape
    out = np.zeros_like(z)
    for j in range(N):
        for k in range(D):
            shift = np.zeros_like(z)
            shift[:, j, k] = step
            out[:, j, k] = (f(z + shift) - f(z - shift)) / (2 * step)
    return out


def check_gradient_oracle(F: CylindricalFunction, z: np.ndarray, step: float = FD_STEP,
                          tolerance: float = 1e-5) -> float:
    """
    Сравнение замкнутого градиента с центральными разностями

    Returns:
        Максимальное отклонение; при превышении допуска — предупреждение в лог
    """
    z = np.asarray(z, dtype=float)
    if F.grad is None:
        return 0.0
    deviation = float(np.max(np.abs(F.gradient(z) - finite_difference_gradient(F.f, z, step))))
    if deviation > tolerance:
        logger.warning(f"Градиент {F.label} расходится с разностным на {deviation:.3e}")
    return deviation


def constant_functional(times, value: float = 1.0) -> CylindricalFunction:
    return CylindricalFunction(
        times=times,
        f=lambda z: np.full(z.shape[0], value),
        grad=lambda z: np.zeros_like(z),
        bound=abs(value), gradient_bound=0.0,
        label="constant", params={'value': value},
    )


def linear_functional(time: float, direction) -> CylindricalFunction:
    """F = ⟨a, γ_s⟩"""
    a = np.asarray(direction, dtype=float)
    return CylindricalFunction(
        times=[time],
        f=lambda z: z[:, 0] @ a,
        grad=lambda z: np.broadcast_to(a, z.shape).copy(),
        gradient_bound=float(np.linalg.norm(a)),
        label="linear",
    )


def tilt_functional(time: float, theta: float, dimension: int, axis: int = 0,
                    power: float = 1.0) -> CylindricalFunction:
    """
    Экспоненциальный наклон F = exp(p(θγ_s^{(axis)} − θ²s/2))

    power=1 — плотность Гирсанова, power=½ — ее квадратный корень.
    """
    e = np.zeros(dimension)
    e[axis] = 1.0

    def f(z):
        return np.exp(power * (theta * z[:, 0, axis] - 0.5 * theta ** 2 * time))

    def grad(z):
        return (power * theta * f(z))[:, None, None] * e

    return CylindricalFunction(times=[time], f=f, grad=grad, label="tilt",
                               params={'theta': theta, 'power': power})


def bump_functional(time: float, center, width: float) -> CylindricalFunction:
    """F = exp(−|γ_s − c|²/(2w²))"""
    c = np.asarray(center, dtype=float)
    if width <= 0:
        raise ConfigError("Ширина bump должна быть положительной", "functional.width")

    def f(z):
        return np.exp(-np.sum((z[:, 0] - c) ** 2, axis=-1) / (2 * width ** 2))

    def grad(z):
        return (-(z[:, 0] - c) / width ** 2 * f(z)[:, None])[:, None]

    return CylindricalFunction(times=[time], f=f, grad=grad, bound=1.0,
                               gradient_bound=float(np.exp(-0.5) / width),
                               label="bump", params={'width': width})


def smooth_bounded_functional(horizon: float, dimension: int, n_slots: int = 2, seed: int = 0,
                              amplitude: float = 0.5, frequency: float = 1.0) -> CylindricalFunction:
    """
    Случайная тригонометрическая F = 1 + (A/N)Σ_j sin(⟨a_j, γ_{s_j}⟩ + φ_j), s_j = jT/N

    Значения лежат в [1 − A, 1 + A].
    """
    if not 0 < amplitude < 1:
        raise ConfigError("Амплитуда должна лежать в (0, 1)", "functional.amplitude")
    rng = np.random.default_rng(mix_seed(seed, n_slots))
    waves = frequency * rng.standard_normal((n_slots, dimension))
    phases = rng.uniform(0.0, 2 * np.pi, n_slots)
    times = horizon * np.arange(1, n_slots + 1) / n_slots
    scale = amplitude / n_slots

    def f(z):
        return 1.0 + scale * np.sum(np.sin(np.einsum('bjk,jk->bj', z, waves) + phases), axis=-1)

    def grad(z):
        return scale * np.cos(np.einsum('bjk,jk->bj', z, waves) + phases)[..., None] * waves

    return CylindricalFunction(
        times=times, f=f, grad=grad, bound=1.0 + amplitude,
        gradient_bound=float(scale * np.sum(np.linalg.norm(waves, axis=-1))),
        label="smooth_bounded", params={'seed': seed, 'amplitude': amplitude},
    )


def build_functional(spec: dict, horizon: float, dimension: int) -> CylindricalFunction:
    """
    Функционал из словаря конфигурации

    Args:
        spec: {'kind': ..., параметры}
        horizon: горизонт T (время по умолчанию)
        dimension: размерность координат точек

    Returns:
        CylindricalFunction
    """
    spec = dict(spec or {'kind': 'constant'})
    kind = spec.pop('kind', 'constant')
    time = float(spec.pop('time', horizon))
    if kind == 'constant':
        return constant_functional([time], float(spec.get('value', 1.0)))
    if kind == 'linear':
        direction = spec.get('direction', np.eye(dimension)[0])
        return linear_functional(time, direction)
    if kind == 'tilt':
        return tilt_functional(time, float(spec.get('theta', 0.5)), dimension,
                               int(spec.get('axis', 0)), float(spec.get('power', 1.0)))
    if kind == 'bump':
        return bump_functional(time, spec.get('center', np.zeros(dimension)), float(spec.get('width', 1.0)))
    if kind == 'smooth_bounded':
        return smooth_bounded_functional(horizon, dimension, int(spec.get('n_slots', 2)),
                                         int(spec.get('seed', 0)), float(spec.get('amplitude', 0.5)),
                                         float(spec.get('frequency', 1.0)))
    raise ConfigError(f"Неизвестный функционал: {kind}", "functional.kind")
