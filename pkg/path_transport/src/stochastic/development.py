"""
Стохастическое развитие: du = Σ H_i(u)∘dw^i + ½H_Z(u)dt

Пути считаются пакетами (PathBundle); одиночный HorizontalPath — пакет из одного пути.
Ансамбли режутся на чанки фиксированного размера, поэтому результат не зависит
от числа воркеров.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from ..errors import ContractViolation
from ..geometry.frames import Frame
from ..geometry.models import ManifoldModel
from ..utils import concat_chunks, mix_seed, run_chunked
from .noise import DrivingNoise, noise_batch, time_grid

logger = logging.getLogger(__name__)

DRIFT_SCALE = 0.5


@dataclass
class PathBundle:
    """
    Пакет горизонтальных путей на общей сетке

    Attributes:
        model: модель многообразия
        times: сетка (n+1,)
        points: γ_k, форма (B, n+1, D); после взрыва NaN
        frames: u_k, форма (B, n+1, D, d) или None, если реперы не сохранялись
        increments: Δw, форма (B, n, d)
        exploded_at: индекс сетки взрыва или −1
        seed: главное зерно
        indices: номера путей в ансамбле
    """

    model: ManifoldModel
    times: np.ndarray
    points: np.ndarray
    frames: Optional[np.ndarray]
    increments: np.ndarray
    exploded_at: np.ndarray
    seed: int = 0
    indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    @property
    def dt(self) -> float:
        return float(self.times[-1] / self.n_steps)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def valid(self) -> np.ndarray:
        return self.exploded_at < 0

    @property
    def exclusion_fraction(self) -> float:
        return float(np.mean(~self.valid)) if self.size else 0.0

    def select(self, mask: np.ndarray) -> "PathBundle":
        mask = np.asarray(mask)
        return replace(
            self,
            points=self.points[mask],
            frames=None if self.frames is None else self.frames[mask],
            increments=self.increments[mask],
            exploded_at=self.exploded_at[mask],
            indices=self.indices[mask],
        )

    def without_frames(self) -> "PathBundle":
        return replace(self, frames=None)

    def require_valid(self) -> None:
        if np.any(~self.valid):
            raise ContractViolation(f"В пакете {int(np.sum(~self.valid))} взорвавшихся путей")

    def require_frames(self) -> None:
        if self.frames is None:
            raise ContractViolation("Реперы пути не сохранены")

    def path(self, i: int) -> "HorizontalPath":
        return HorizontalPath(
            model=self.model,
            times=self.times,
            points=self.points[i],
            frames=None if self.frames is None else self.frames[i],
            noise=DrivingNoise(self.horizon, self.n_steps, self.increments[i], self.seed,
                               int(self.indices[i]) if self.indices.size else i),
            exploded_at=int(self.exploded_at[i]) if self.exploded_at[i] >= 0 else None,
        )

    @classmethod
    def concatenate(cls, parts: Sequence["PathBundle"]) -> "PathBundle":
        first = parts[0]
        frames = None if any(p.frames is None for p in parts) else concat_chunks([p.frames for p in parts])
        return replace(
            first,
            points=concat_chunks([p.points for p in parts]),
            frames=frames,
            increments=concat_chunks([p.increments for p in parts]),
            exploded_at=concat_chunks([p.exploded_at for p in parts]),
            indices=concat_chunks([p.indices for p in parts]),
        )


@dataclass
class HorizontalPath:
    """Один путь: сетка, реперы u_k, база γ_k и породивший его шум"""

    model: ManifoldModel
    times: np.ndarray
    points: np.ndarray
    frames: Optional[np.ndarray]
    noise: DrivingNoise
    exploded_at: Optional[int] = None

    @property
    def exploded(self) -> bool:
        return self.exploded_at is not None

    def frame(self, k: int) -> Frame:
        return Frame(self.points[k], self.frames[k])

    def as_bundle(self) -> PathBundle:
        return PathBundle(
            model=self.model,
            times=self.times,
            points=self.points[None],
            frames=None if self.frames is None else self.frames[None],
            increments=self.noise.increments[None],
            exploded_at=np.array([-1 if self.exploded_at is None else self.exploded_at]),
            seed=self.noise.seed,
            indices=np.array([self.noise.path_index]),
        )


@dataclass
class EnsembleSpec:
    """Параметры ансамбля путей"""

    horizon: float
    n_steps: int
    n_paths: int
    seed: int
    starts: Optional[np.ndarray] = None
    adaptive: bool = False
    dt_floor: float = 1e-8


def _initial_state(model: ManifoldModel, x0: np.ndarray, e0: Optional[np.ndarray], batch: int):
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 1:
        x0 = np.broadcast_to(x0, (batch, x0.size))
    x0 = np.array(x0, dtype=float)
    if e0 is None:
        e0 = model.tangent_basis(x0)
    e0 = np.array(np.broadcast_to(e0, x0.shape + (model.dimension,)), dtype=float)
    return x0, e0


def develop_bundle(model: ManifoldModel, increments: np.ndarray, x0: np.ndarray,
                   horizon: float, e0: Optional[np.ndarray] = None, seed: int = 0,
                   indices: Optional[np.ndarray] = None, keep_frames: bool = True,
                   adaptive: bool = False, dt_floor: float = 1e-8) -> PathBundle:
    """
    Развитие пакета шумов в пути на многообразии

    Args:
        model: модель
        increments: Δw формы (B, n, d)
        x0: начальные точки (D,) или (B, D)
        horizon: T
        e0: начальные реперы; по умолчанию tangent_basis(x0)
        seed: главное зерно (для адаптивного дробления шага)
        indices: номера путей
        keep_frames: сохранять ли реперы на всей сетке
        adaptive: дробление шага для взрывных сносов

    Returns:
        PathBundle; взорвавшиеся пути помечены exploded_at и заполнены NaN
    """
    increments = np.asarray(increments, dtype=float)
    B, n, d = increments.shape
    if d != model.dimension:
        raise ContractViolation(f"Размерность шума {d} не совпадает с размерностью модели {model.dimension}")
    indices = np.arange(B) if indices is None else np.asarray(indices)
    times = time_grid(horizon, n)
    dt = horizon / n
    x, e = _initial_state(model, x0, e0, B)
    D = x.shape[-1]

    points = np.full((B, n + 1, D), np.nan)
    frames = np.full((B, n + 1, D, d), np.nan) if keep_frames else None
    points[:, 0] = x
    if keep_frames:
        frames[:, 0] = e
    exploded_at = np.full(B, -1, dtype=int)
    alive = np.ones(B, dtype=bool)

    with np.errstate(all='ignore'):
        for k in range(n):
            idx = np.flatnonzero(alive)
            if idx.size == 0:
                break
            xa, ea, dwa = x[idx], e[idx], increments[idx, k]
            if adaptive:
                x1, e1, blown = _adaptive_step(model, xa, ea, dwa, dt, dt_floor,
                                               lambda j, _k=k, _idx=idx: mix_seed(mix_seed(seed, int(indices[_idx[j]])), _k))
            else:
                x1, e1, _, _ = model.step(xa, ea, dwa, dt, DRIFT_SCALE)
                blown = np.zeros(idx.size, dtype=bool)
            blown |= model.is_exploded(x1) | ~np.all(np.isfinite(e1), axis=(-1, -2))
            x[idx], e[idx] = x1, e1
            if np.any(blown):
                exploded_at[idx[blown]] = k + 1
                alive[idx[blown]] = False
            ok = idx[~blown]
            points[ok, k + 1] = x[ok]
            if keep_frames:
                frames[ok, k + 1] = e[ok]

    n_blown = int(np.sum(exploded_at >= 0))
    if n_blown:
        logger.debug(f"Взрыв в {n_blown} из {B} путей")
    return PathBundle(model=model, times=times, points=points, frames=frames,
                      increments=increments, exploded_at=exploded_at, seed=int(seed), indices=indices)


def _needs_refinement(model: ManifoldModel, x: np.ndarray, h: float) -> np.ndarray:
    drift = DRIFT_SCALE * np.linalg.norm(model.drift(x), axis=-1)
    return drift * h > 0.1 * np.linalg.norm(x, axis=-1) + 1.0


def _adaptive_step(model, x, e, dw, dt, dt_floor, rng_seed):
    """
    Шаг с дроблением: dt делится пополам, пока |снос|·dt > 0.1|x| + 1

    Шум на подынтервалах восстанавливается броуновским мостом, так что
    сумма приращений совпадает с исходным Δw. Шаг меньше dt_floor — взрыв.
    """
    blown = np.zeros(x.shape[0], dtype=bool)
    refine = _needs_refinement(model, x, dt)
    x_out, e_out = x.copy(), e.copy()
    plain = np.flatnonzero(~refine)
    if plain.size:
        x1, e1, _, _ = model.step(x[plain], e[plain], dw[plain], dt, DRIFT_SCALE)
        x_out[plain], e_out[plain] = x1, e1
    for j in np.flatnonzero(refine):
        rng = np.random.default_rng(rng_seed(j))
        xj, ej = x[j:j + 1], e[j:j + 1]
        stack = [(dw[j], dt)]
        while stack:
            inc, h = stack.pop()
            if _needs_refinement(model, xj, h)[0]:
                if h / 2 < dt_floor:
                    blown[j] = True
                    break
                first = inc / 2 + np.sqrt(h / 4) * rng.standard_normal(inc.shape)
                stack.append((inc - first, h / 2))
                stack.append((first, h / 2))
                continue
            xj, ej, _, _ = model.step(xj, ej, inc[None], h, DRIFT_SCALE)
            if model.is_exploded(xj)[0]:
                blown[j] = True
                break
        x_out[j], e_out[j] = xj[0], ej[0]
    return x_out, e_out, blown


def develop_path(model: ManifoldModel, noise: DrivingNoise, u0: Frame) -> HorizontalPath:
    """
    Стохастическое развитие одного пути из репера u0

    Args:
        model: модель
        noise: возмущающий шум
        u0: начальный ортонормированный репер

    Returns:
        HorizontalPath
    """
    bundle = develop_bundle(model, noise.increments[None], u0.base[None], noise.horizon,
                            e0=u0.columns[None], seed=noise.seed, indices=np.array([noise.path_index]))
    return bundle.path(0)


def simulate_ensemble(model: ManifoldModel, spec: EnsembleSpec,
                      reducer: Optional[Callable[[PathBundle], Dict[str, np.ndarray]]] = None,
                      chunk_size: int = 256, workers: int = 1,
                      keep_frames: bool = False):
    """
    Ансамбль путей по чанкам

    Args:
        model: модель
        spec: параметры ансамбля
        reducer: функция чанка → словарь массивов по путям; если None, возвращается пакет путей
        chunk_size: фиксированный размер чанка
        workers: число потоков
        keep_frames: сохранять реперы (только без reducer)

    Returns:
        PathBundle или словарь склеенных массивов
    """

    def chunk(start: int, stop: int):
        indices = np.arange(start, stop)
        increments = noise_batch(spec.horizon, spec.n_steps, model.dimension, spec.seed, indices)
        x0 = model.origin if spec.starts is None else spec.starts[start:stop]
        bundle = develop_bundle(model, increments, x0, spec.horizon, seed=spec.seed, indices=indices,
                                keep_frames=keep_frames or reducer is not None,
                                adaptive=spec.adaptive, dt_floor=spec.dt_floor)
        if reducer is None:
            return bundle
        return reducer(bundle)

    parts = run_chunked(chunk, spec.n_paths, chunk_size, workers, description="Пути")
    if reducer is None:
        return PathBundle.concatenate(parts)
    return {key: concat_chunks([p[key] for p in parts]) for key in parts[0]}


def grid_indices(times: np.ndarray, partition: Sequence[float]) -> np.ndarray:
    """Индексы сетки для моментов разбиения; моменты вне сетки — нарушение контракта"""
    times = np.asarray(times, dtype=float)
    partition = np.atleast_1d(np.asarray(partition, dtype=float))
    idx = np.searchsorted(times, partition - 1e-9 * max(1.0, times[-1]))
    idx = np.clip(idx, 0, times.size - 1)
    if not np.allclose(times[idx], partition, atol=1e-9 * max(1.0, times[-1]), rtol=0.0):
        raise ContractViolation(f"Моменты разбиения {partition} не лежат на сетке")
    return idx
