"""
Возмущающий шум и направления Камерона–Мартина
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ContractViolation
from ..utils import mix_seed


def time_grid(horizon: float, steps: int) -> np.ndarray:
    """Равномерная сетка t_0 = 0, ..., t_n = T"""
    if horizon <= 0 or steps < 1:
        raise ContractViolation(f"Некорректная сетка: T={horizon}, n={steps}")
    return np.linspace(0.0, float(horizon), int(steps) + 1)


def path_increments(horizon: float, steps: int, dimension: int, seed: int, index: int) -> np.ndarray:
    """Приращения броуновского движения пути index; зависят только от (seed, index)"""
    rng = np.random.default_rng(mix_seed(seed, index))
    return rng.standard_normal((int(steps), int(dimension))) * np.sqrt(horizon / steps)


def noise_batch(horizon: float, steps: int, dimension: int, seed: int,
                indices: Sequence[int]) -> np.ndarray:
    """Приращения для пакета путей, форма (B, n, d)"""
    return np.stack([path_increments(horizon, steps, dimension, seed, i) for i in indices], axis=0)


@dataclass
class DrivingNoise:
    """Приращения Δw одного пути с дисперсией dt = T/n"""

    horizon: float
    steps: int
    increments: np.ndarray
    seed: int
    path_index: int

    @classmethod
    def generate(cls, horizon: float, steps: int, dimension: int, seed: int,
                 path_index: int = 0) -> "DrivingNoise":
        return cls(float(horizon), int(steps),
                   path_increments(horizon, steps, dimension, seed, path_index),
                   int(seed), int(path_index))

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def dimension(self) -> int:
        return self.increments.shape[-1]

    @property
    def times(self) -> np.ndarray:
        return time_grid(self.horizon, self.steps)

    def shifted(self, h: "CameronMartinPath", eps: float) -> "DrivingNoise":
        """Шум w + εh (для конечно-разностного зонда отображения Ито)"""
        return DrivingNoise(self.horizon, self.steps, self.increments + eps * h.increments,
                            self.seed, self.path_index)


@dataclass
class CameronMartinPath:
    """Кусочно-линейный путь h с h_0 = 0 и кусочно-постоянной ḣ"""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[-2] != self.times.size:
            raise ContractViolation("Длина значений h не совпадает с сеткой")
        if not np.allclose(self.values[..., 0, :], 0.0, atol=0.0):
            raise ContractViolation("Путь Камерона–Мартина должен начинаться в нуле")

    @classmethod
    def from_derivative(cls, times: np.ndarray, derivative: np.ndarray) -> "CameronMartinPath":
        times = np.asarray(times, dtype=float)
        derivative = np.asarray(derivative, dtype=float)
        dt = np.diff(times)
        increments = derivative * dt[:, None]
        values = np.concatenate([np.zeros(derivative.shape[:-2] + (1, derivative.shape[-1])),
                                 np.cumsum(increments, axis=-2)], axis=-2)
        return cls(times, values)

    @classmethod
    def constant_direction(cls, times: np.ndarray, direction: np.ndarray) -> "CameronMartinPath":
        times = np.asarray(times, dtype=float)
        direction = np.asarray(direction, dtype=float)
        return cls.from_derivative(times, np.broadcast_to(direction, (times.size - 1, direction.size)))

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=-2)

    @property
    def derivative(self) -> np.ndarray:
        return self.increments / np.diff(self.times)[:, None]

    @property
    def energy(self) -> float:
        """‖h‖²_H = Σ|ḣ|²dt"""
        return float(np.sum(self.derivative ** 2 * np.diff(self.times)[:, None]))
