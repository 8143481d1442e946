"""
Каплинг параллельным переносом и равномерное расстояние между путями
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from ..errors import ChartDomainError, ContractViolation, NumericFailure
from ..geometry.models import ManifoldModel
from .development import DRIFT_SCALE, HorizontalPath, PathBundle, grid_indices
from .noise import DrivingNoise, time_grid

logger = logging.getLogger(__name__)


@dataclass
class CouplingResult:
    """Пара пакетов X, Y, процесс расстояний ρ_k и флаги прерванных путей"""

    first: PathBundle
    second: PathBundle
    distances: np.ndarray
    aborted: np.ndarray

    @property
    def abort_fraction(self) -> float:
        return float(np.mean(self.aborted)) if self.aborted.size else 0.0


def _transport_frames(model: ManifoldModel, x: np.ndarray, y: np.ndarray, e: np.ndarray):
    """Перенос репера e из x в y вдоль минимальной геодезической; сбои помечаются"""
    failed = np.zeros(x.shape[0], dtype=bool)
    try:
        v = model.log_map(x, y)
        _, ey = model.exp_and_transport(x, v, e)
        same = np.all(x == y, axis=-1)
        return np.where(same[..., None, None], e, ey), failed
    except (NumericFailure, ChartDomainError):
        ey = np.full_like(e, np.nan)
        for i in range(x.shape[0]):
            try:
                v = model.log_map(x[i], y[i])
                _, ey[i] = model.exp_and_transport(x[i], v, e[i])
            except (NumericFailure, ChartDomainError) as exc:
                logger.warning(f"Каплинг прерван для пути {i}: {exc}")
                failed[i] = True
        return ey, failed


def couple_bundle(model: ManifoldModel, increments: np.ndarray, x0: np.ndarray, y0: np.ndarray,
                  horizon: float, seed: int = 0, indices: Optional[np.ndarray] = None) -> CouplingResult:
    """
    Каплинг параллельным переносом для пакета шумов

    Путь Y на каждом шаге получает репер, перенесенный из X вдоль геодезической X_k → Y_k,
    и те же приращения Δw.
    """
    increments = np.asarray(increments, dtype=float)
    B, n, d = increments.shape
    indices = np.arange(B) if indices is None else np.asarray(indices)
    dt = horizon / n
    x0 = np.asarray(x0, dtype=float)
    x = np.array(np.broadcast_to(x0, (B, x0.shape[-1])))
    y = np.array(np.broadcast_to(np.asarray(y0, dtype=float), x.shape))
    ex = model.tangent_basis(x)
    D = x.shape[-1]

    px = np.full((B, n + 1, D), np.nan)
    py = np.full((B, n + 1, D), np.nan)
    px[:, 0], py[:, 0] = x, y
    aborted = np.zeros(B, dtype=bool)
    exploded = np.full(B, -1, dtype=int)

    with np.errstate(all='ignore'):
        for k in range(n):
            idx = np.flatnonzero(~aborted & (exploded < 0))
            if idx.size == 0:
                break
            ey, failed = _transport_frames(model, x[idx], y[idx], ex[idx])
            aborted[idx[failed]] = True
            ok = idx[~failed]
            ok_local = ~failed
            if ok.size == 0:
                continue
            dw = increments[ok, k]
            x1, e1, _, _ = model.step(x[ok], ex[idx][ok_local], dw, dt, DRIFT_SCALE)
            y1, _, _, _ = model.step(y[ok], ey[ok_local], dw, dt, DRIFT_SCALE)
            blown = model.is_exploded(x1) | model.is_exploded(y1)
            x[ok], ex[ok], y[ok] = x1, e1, y1
            exploded[ok[blown]] = k + 1
            good = ok[~blown]
            px[good, k + 1], py[good, k + 1] = x[good], y[good]

    times = time_grid(horizon, n)
    first = PathBundle(model, times, px, None, increments, exploded.copy(), seed, indices)
    second = PathBundle(model, times, py, None, increments, exploded.copy(), seed, indices)
    distances = model.distance(px, py)
    n_aborted = int(aborted.sum())
    if n_aborted:
        logger.warning(f"Каплинг прерван в {n_aborted} из {B} путей")
    return CouplingResult(first=first, second=second, distances=distances, aborted=aborted)


def parallel_coupling(model: ManifoldModel, noise: DrivingNoise, x0: np.ndarray, y0: np.ndarray):
    """
    Каплинг параллельным переносом для одного шума

    Returns:
        (HorizontalPath X, HorizontalPath Y, ρ_k)
    """
    result = couple_bundle(model, noise.increments[None], np.asarray(x0, dtype=float)[None],
                           np.asarray(y0, dtype=float)[None], noise.horizon, noise.seed,
                           np.array([noise.path_index]))
    if result.aborted[0]:
        raise NumericFailure("Геодезическая между X и Y не найдена, путь прерван")
    return result.first.path(0), result.second.path(0), result.distances[0]


PathLike = Union[HorizontalPath, PathBundle]


def uniform_distance(a: PathLike, b: PathLike, partition: Optional[Sequence[float]] = None) -> np.ndarray:
    """
    d_∞ (без разбиения) или d_I (максимум по моментам разбиения) на сетке

    Args:
        a, b: пути или пакеты путей на одной сетке
        partition: моменты разбиения (точки сетки)

    Returns:
        Расстояние (скаляр для путей, массив для пакетов)
    """
    if a.times.shape != b.times.shape or not np.array_equal(a.times, b.times):
        raise ContractViolation("Пути заданы на разных сетках")
    pa, pb = a.points, b.points
    if partition is not None:
        idx = grid_indices(a.times, partition)
        pa, pb = pa[..., idx, :], pb[..., idx, :]
    values = a.model.distance(pa, pb)
    return np.max(values, axis=-1)
