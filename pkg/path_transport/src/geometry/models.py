"""
Модельные римановы многообразия с карто-вычислимой геометрией

Соглашения по формам массивов (ведущие оси — пакет точек):
    x:  (..., D)        точка в координатах представления
    e:  (..., D, d)     столбцы репера
    Γ:  (..., D, D, D)  Γ[k, l, m] = Γ^k_{lm}
"""

import logging
from abc import ABC, abstractmethod
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import solve_bvp

from ..errors import (ChartDomainError, GeodesicSolverError, GeometryEvaluationError,
                      UnsupportedModelError)
from .drifts import DriftField, ZeroDrift
from .envelopes import AffineEnvelope, GrowthEnvelope

logger = logging.getLogger(__name__)


def _as_columns(v: np.ndarray, w: np.ndarray) -> Tuple[np.ndarray, bool]:
    """Вектор w формы v превращается в матрицу из одного столбца"""
    w = np.asarray(w, dtype=float)
    if w.shape == np.shape(v):
        return w[..., None], True
    return w, False


def conformally_flat_christoffel(dphi: np.ndarray) -> np.ndarray:
    """
    Символы Кристоффеля метрики g = e^{2φ}δ

    Γ^k_{ij} = δ^k_i ∂_jφ + δ^k_j ∂_iφ − δ_{ij} ∂_kφ
    """
    D = dphi.shape[-1]
    eye = np.eye(D)
    return (np.einsum('ki,...j->...kij', eye, dphi)
            + np.einsum('kj,...i->...kij', eye, dphi)
            - np.einsum('ij,...k->...kij', eye, dphi))


def _safe_cholesky(G: np.ndarray):
    """Разложение Холецкого пакета; нефинитные и не положительно определенные матрицы заменяются на I"""
    d = G.shape[-1]
    bad = ~np.all(np.isfinite(G), axis=(-1, -2))
    G = np.where(bad[..., None, None], np.eye(d), G)
    try:
        return np.linalg.cholesky(G), bad
    except np.linalg.LinAlgError:
        flat = G.reshape(-1, d, d)
        flat_bad = bad.reshape(-1).copy()
        L = np.empty_like(flat)
        for i, matrix in enumerate(flat):
            try:
                L[i] = np.linalg.cholesky(matrix)
            except np.linalg.LinAlgError:
                L[i] = np.eye(d)
                flat_bad[i] = True
        return L.reshape(G.shape), flat_bad.reshape(bad.shape)


def metric_cholesky_basis(g: np.ndarray) -> np.ndarray:
    """g-ортонормированный базис B = L^{-T}, g = L Lᵀ"""
    L = np.linalg.cholesky(g)
    eye = np.broadcast_to(np.eye(g.shape[-1]), g.shape)
    return np.swapaxes(np.linalg.solve(L, eye), -1, -2)


class ManifoldModel(ABC):
    """
    Базовая модель: метрика, связность, Риччи, снос Z, расстояние

    Подклассы задают геометрию; здесь собраны операции, общие для всех
    моделей (ковариантная производная сноса, форма Ric − ∇Z, детекция взрыва).
    """

    kind = "abstract"
    exact_stepping = False
    flat = False

    def __init__(self, dimension: int, drift: Optional[DriftField] = None,
                 psi: Optional[GrowthEnvelope] = None,
                 curvature_floor: Optional[float] = None,
                 curvature_ceiling: Optional[float] = None,
                 explosion_threshold: float = 1e6):
        if dimension < 1:
            raise ValueError(f"Размерность должна быть положительной, получено {dimension}")
        self.dimension = int(dimension)
        self.drift_field = drift if drift is not None else ZeroDrift(self.ambient_dimension)
        self.psi = psi if psi is not None else AffineEnvelope(1.0, 0.0)
        self.explosion_threshold = float(explosion_threshold)
        self._curvature_floor = curvature_floor
        self._curvature_ceiling = curvature_ceiling

    # ------------------------------------------------------------------
    # геометрия, задаваемая подклассом
    # ------------------------------------------------------------------

    @property
    def ambient_dimension(self) -> int:
        return self.dimension

    @property
    def origin(self) -> np.ndarray:
        return np.zeros(self.ambient_dimension)

    @property
    def sectional_curvature(self) -> Optional[float]:
        """Постоянная секционная кривизна κ или None"""
        return None

    @abstractmethod
    def metric(self, x: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def christoffel(self, x: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def ricci(self, x: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def distance(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def exp_and_transport(self, x: np.ndarray, v: np.ndarray, w: np.ndarray):
        ...

    @abstractmethod
    def log_map(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def tangent_basis(self, x: np.ndarray) -> np.ndarray:
        ...

    def in_domain(self, x: np.ndarray) -> np.ndarray:
        return np.all(np.isfinite(x), axis=-1)

    # ------------------------------------------------------------------
    # общие величины
    # ------------------------------------------------------------------

    def drift(self, x: np.ndarray) -> np.ndarray:
        return self.drift_field.value(x)

    def drift_jacobian(self, x: np.ndarray) -> np.ndarray:
        """
        Ковариантная производная сноса как (1,1)-тензор

        C[..., k, j] = ∂_j Z^k + Γ^k_{jl} Z^l, так что ∇_v Z = C v.
        """
        x = np.asarray(x, dtype=float)
        J = self.drift_field.jacobian(x)
        if self.drift_field.is_zero or self.flat:
            return J
        return J + np.einsum('...kjl,...l->...kj', self.christoffel(x), self.drift(x))

    def ricci_z_form(self, x: np.ndarray) -> np.ndarray:
        """Билинейная форма Ric − ∇Z в координатах (не симметризована)"""
        x = np.asarray(x, dtype=float)
        ric = self.ricci(x)
        if self.drift_field.is_zero:
            form = ric
        else:
            C = self.drift_jacobian(x)
            form = ric - np.einsum('...ki,...kj->...ij', C, self.metric(x))
        if not np.all(np.isfinite(form)):
            bad = np.argwhere(~np.isfinite(form).all(axis=(-1, -2)).reshape(-1))
            point = x.reshape(-1, x.shape[-1])[int(bad[0][0])] if bad.size else x
            raise GeometryEvaluationError("Нефинитное значение Ric − ∇Z", point=point)
        return form

    def curvature_operator(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """
        Ω(a, b) ∈ so(d) в координатах репера

        Для постоянной кривизны κ: Ω(a,b)c = κ(⟨b,c⟩a − ⟨a,c⟩b).
        """
        kappa = self.sectional_curvature
        if kappa is None:
            raise UnsupportedModelError(f"Тензор кривизны недоступен для модели {self.model_id}")
        return kappa * (np.einsum('...i,...j->...ij', a, b) - np.einsum('...i,...j->...ij', b, a))

    @property
    def curvature_floor(self) -> float:
        """K: Ric − ∇Z ≥ −K"""
        if self._curvature_floor is not None:
            return float(self._curvature_floor)
        return self._default_curvature_bounds()[0]

    @property
    def curvature_ceiling(self) -> float:
        """K₁: Ric − ∇Z ≤ K₁"""
        if self._curvature_ceiling is not None:
            return float(self._curvature_ceiling)
        return self._default_curvature_bounds()[1]

    def _default_curvature_bounds(self) -> Tuple[float, float]:
        return (np.inf, np.inf)

    def distance_from_origin(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.distance(np.broadcast_to(self.origin, x.shape), x)

    def radial_laplacian(self, rho: np.ndarray) -> np.ndarray:
        raise UnsupportedModelError(f"Модель {self.model_id} не радиально-симметрична")

    def check_drift_supported(self) -> None:
        if not self.drift_field.is_zero:
            raise UnsupportedModelError(f"Модель {self.kind} поддерживает только нулевой снос")

    # ------------------------------------------------------------------
    # шаг развития и реортонормировка
    # ------------------------------------------------------------------

    def orthonormalize(self, x: np.ndarray, e: np.ndarray):
        """Грам–Шмидт относительно g(x): e ← e L^{-T}, G = eᵀ g e = L Lᵀ"""
        with np.errstate(all='ignore'):
            G = np.einsum('...ki,...kl,...lj->...ij', e, self.metric(x), e)
        L, bad = _safe_cholesky(G)
        e_new = np.swapaxes(np.linalg.solve(L, np.swapaxes(e, -1, -2)), -1, -2)
        if np.any(bad):
            # вырожденные реперы помечаются NaN, взрыв фиксирует развитие
            e_new = np.where(bad[..., None, None], np.nan, e_new)
        return x, e_new

    def step(self, x: np.ndarray, e: np.ndarray, dw: np.ndarray, dt: float,
             drift_scale: float = 0.5):
        """
        Один шаг стохастического развития

        Returns:
            (x1, e1, xp, ep): новое состояние и точка предиктора
        """
        if self.exact_stepping:
            v = np.einsum('...kj,...j->...k', e, dw)
            if not self.drift_field.is_zero:
                v = v + drift_scale * self.drift(x) * dt
            x1, e1 = self.exp_and_transport(x, v, e)
            x1, e1 = self.orthonormalize(x1, e1)
            return x1, e1, x1, e1
        return self._heun_step(x, e, dw, dt, drift_scale)

    def _increment(self, x, e, dw, dt, drift_scale):
        dx = np.einsum('...kj,...j->...k', e, dw)
        if not self.drift_field.is_zero:
            dx = dx + drift_scale * self.drift(x) * dt
        if self.flat:
            return dx, np.zeros_like(e)
        de = -np.einsum('...klm,...l,...mj->...kj', self.christoffel(x), dx, e)
        return dx, de

    def _heun_step(self, x, e, dw, dt, drift_scale):
        dx1, de1 = self._increment(x, e, dw, dt, drift_scale)
        xp, ep = x + dx1, e + de1
        dx2, de2 = self._increment(xp, ep, dw, dt, drift_scale)
        x1 = x + 0.5 * (dx1 + dx2)
        e1 = e + 0.5 * (de1 + de2)
        if self.flat:
            return x1, e1, xp, ep
        x1, e1 = self.orthonormalize(x1, e1)
        return x1, e1, xp, ep

    def is_exploded(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        finite = np.all(np.isfinite(x), axis=-1)
        norm = np.linalg.norm(np.where(np.isfinite(x), x, 0.0), axis=-1)
        return ~finite | (norm > self.explosion_threshold) | ~self.in_domain(np.where(np.isfinite(x), x, 0.0))

    @property
    def model_id(self) -> str:
        return f"{self.kind}(d={self.dimension},Z={self.drift_field.describe()})"


class ChartModel(ManifoldModel):
    """
    Модель в одной глобальной карте

    Символы Кристоффеля по умолчанию получаются центральными разностями
    метрики, расстояние и логарифм стрельбой по геодезическим (solve_bvp),
    экспонента и параллельный перенос интегрируются методом РК4.
    """

    kind = "chart"
    geodesic_steps = 256
    shooting_tol = 1e-8
    fd_step = 1e-5

    def christoffel(self, x):
        from .checks import christoffel_from_metric
        return christoffel_from_metric(self.metric, x, self.fd_step)

    def ricci(self, x):
        from .checks import ricci_from_christoffel
        return ricci_from_christoffel(self.christoffel, x, self.fd_step)

    def tangent_basis(self, x):
        return metric_cholesky_basis(self.metric(np.asarray(x, dtype=float)))

    def _geodesic_rhs(self, x, v, w):
        G = self.christoffel(x)
        acc = -np.einsum('...klm,...l,...m->...k', G, v, v)
        dw = -np.einsum('...klm,...l,...mj->...kj', G, v, w)
        return v, acc, dw

    def exp_and_transport(self, x, v, w):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        W, squeeze = _as_columns(v, w)
        h = 1.0 / self.geodesic_steps
        pos, vel, vec = x.copy(), v.copy(), W.copy()
        for _ in range(self.geodesic_steps):
            k1 = self._geodesic_rhs(pos, vel, vec)
            k2 = self._geodesic_rhs(pos + 0.5 * h * k1[0], vel + 0.5 * h * k1[1], vec + 0.5 * h * k1[2])
            k3 = self._geodesic_rhs(pos + 0.5 * h * k2[0], vel + 0.5 * h * k2[1], vec + 0.5 * h * k2[2])
            k4 = self._geodesic_rhs(pos + h * k3[0], vel + h * k3[1], vec + h * k3[2])
            pos = pos + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            vel = vel + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            vec = vec + h / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
            if not np.all(self.in_domain(pos)):
                raise ChartDomainError("Геодезическая вышла из области карты")
        return pos, (vec[..., 0] if squeeze else vec)

    def _shoot(self, x0: np.ndarray, x1: np.ndarray) -> np.ndarray:
        """Начальная скорость геодезической x0 → x1 за единичное время"""
        D = x0.shape[-1]
        t = np.linspace(0.0, 1.0, 11)
        guess = np.vstack([
            x0[:, None] + np.outer(x1 - x0, t),
            np.repeat((x1 - x0)[:, None], t.size, axis=1),
        ])

        def rhs(_, y):
            pos, vel = y[:D].T, y[D:].T
            acc = -np.einsum('mklj,ml,mj->mk', self.christoffel(pos), vel, vel)
            return np.vstack([vel.T, acc.T])

        def bc(ya, yb):
            return np.concatenate([ya[:D] - x0, yb[:D] - x1])

        sol = solve_bvp(rhs, bc, t, guess, tol=self.shooting_tol, max_nodes=20000)
        if sol.status != 0:
            residual = float(np.max(sol.rms_residuals)) if sol.rms_residuals is not None else float('nan')
            raise GeodesicSolverError(f"Стрельба {x0} → {x1} не сошлась: {sol.message}", residual)
        return sol.sol(0.0)[D:]

    def log_map(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.broadcast_to(np.asarray(y, dtype=float), x.shape)
        flat_x = x.reshape(-1, x.shape[-1])
        flat_y = y.reshape(-1, y.shape[-1])
        out = np.empty_like(flat_x)
        for i, (a, b) in enumerate(zip(flat_x, flat_y)):
            out[i] = 0.0 if np.allclose(a, b, atol=1e-15) else self._shoot(a, b)
        return out.reshape(x.shape)

    def distance(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        x, y = np.broadcast_arrays(x, y)
        v = self.log_map(x, y)
        g = self.metric(x)
        return np.sqrt(np.maximum(np.einsum('...i,...ij,...j->...', v, g, v), 0.0))


class EuclideanModel(ChartModel):
    """ℝ^d с евклидовой метрикой и произвольным градиентным сносом"""

    kind = "euclidean"
    flat = True

    def metric(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.eye(self.dimension), x.shape + (self.dimension,)).copy()

    def christoffel(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape + (self.dimension, self.dimension))

    def ricci(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape + (self.dimension,))

    def tangent_basis(self, x):
        return self.metric(x)

    @property
    def sectional_curvature(self) -> float:
        return 0.0

    def distance(self, x, y):
        return np.linalg.norm(np.asarray(y, dtype=float) - np.asarray(x, dtype=float), axis=-1)

    def exp_and_transport(self, x, v, w):
        return np.asarray(x, dtype=float) + np.asarray(v, dtype=float), np.array(w, dtype=float)

    def log_map(self, x, y):
        return np.asarray(y, dtype=float) - np.asarray(x, dtype=float)

    def _default_curvature_bounds(self):
        lower, upper = self.drift_field.hessian_bounds()
        # Ric_Z = −Hess V
        return (max(0.0, float(upper)), float(-lower))

    def radial_laplacian(self, rho):
        return (self.dimension - 1) / np.asarray(rho, dtype=float)


class HyperbolicModel(ChartModel):
    """
    Гиперболическое пространство кривизны −c в карте шара Пуанкаре

    Метрика g = 4/(c(1−|x|²)²)·I; шаги и перенос точные, через гиперболоид.
    """

    kind = "hyperbolic"
    exact_stepping = True

    def __init__(self, dimension: int, curvature: float = 1.0, **kwargs):
        super().__init__(dimension, **kwargs)
        if curvature <= 0:
            raise ValueError(f"Параметр кривизны c должен быть положительным, получено {curvature}")
        self.c = float(curvature)
        self.check_drift_supported()

    @property
    def sectional_curvature(self) -> float:
        return -self.c

    def in_domain(self, x):
        return np.sum(np.asarray(x, dtype=float) ** 2, axis=-1) < 1.0

    def _conformal_scale(self, x):
        return 4.0 / (self.c * (1.0 - np.sum(x ** 2, axis=-1)) ** 2)

    def metric(self, x):
        x = np.asarray(x, dtype=float)
        return self._conformal_scale(x)[..., None, None] * np.eye(self.dimension)

    def christoffel(self, x):
        x = np.asarray(x, dtype=float)
        dphi = 2.0 * x / (1.0 - np.sum(x ** 2, axis=-1, keepdims=True))
        return conformally_flat_christoffel(dphi)

    def ricci(self, x):
        return -(self.dimension - 1) * self.c * self.metric(x)

    def tangent_basis(self, x):
        x = np.asarray(x, dtype=float)
        scale = (1.0 - np.sum(x ** 2, axis=-1)) * np.sqrt(self.c) / 2.0
        return scale[..., None, None] * np.eye(self.dimension)

    def distance(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        num = np.linalg.norm(x - y, axis=-1)
        den = np.sqrt((1.0 - np.sum(x ** 2, axis=-1)) * (1.0 - np.sum(y ** 2, axis=-1)))
        return 2.0 * np.arcsinh(num / den) / np.sqrt(self.c)

    # --- гиперболоид {−P0² + |Ps|² = −1} ---

    @staticmethod
    def _lorentz(a, b):
        return -a[..., 0] * b[..., 0] + np.sum(a[..., 1:] * b[..., 1:], axis=-1)

    @staticmethod
    def _to_hyperboloid(x):
        r2 = np.sum(x ** 2, axis=-1, keepdims=True)
        den = 1.0 - r2
        return np.concatenate([(1.0 + r2) / den, 2.0 * x / den], axis=-1)

    @staticmethod
    def _push(x, w):
        """Дифференциал вложения для столбцов w (..., d, k)"""
        r2 = np.sum(x ** 2, axis=-1)[..., None, None]
        den = 1.0 - r2
        xw = np.einsum('...i,...ik->...k', x, w)[..., None, :]
        w0 = 4.0 * xw / den ** 2
        ws = 2.0 * w / den + 4.0 * x[..., :, None] * xw / den ** 2
        return np.concatenate([w0, ws], axis=-2)

    @staticmethod
    def _pull(P, W):
        """Обратно в карту: x = Ps/(1+P0), dx = Ws/(1+P0) − Ps W0/(1+P0)²"""
        one = 1.0 + P[..., 0]
        x = P[..., 1:] / one[..., None]
        w = W[..., 1:, :] / one[..., None, None] - P[..., 1:, None] * W[..., 0:1, :] / (one ** 2)[..., None, None]
        return x, w

    def exp_and_transport(self, x, v, w):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        W, squeeze = _as_columns(v, w)
        P = self._to_hyperboloid(x)
        V = self._push(x, v[..., None])[..., 0]
        Wh = self._push(x, W)
        n = np.sqrt(np.maximum(self._lorentz(V, V), 0.0))
        safe = np.where(n > 0, n, 1.0)
        u = V / safe[..., None]
        ch, sh = np.cosh(n), np.sinh(n)
        P1 = ch[..., None] * P + sh[..., None] * u
        uW = -u[..., 0, None] * Wh[..., 0, :] + np.einsum('...i,...ik->...k', u[..., 1:], Wh[..., 1:, :])
        W1 = Wh + uW[..., None, :] * ((ch - 1.0)[..., None, None] * u[..., :, None] + sh[..., None, None] * P[..., :, None])
        x1, w1 = self._pull(P1, W1)
        if not np.all(self.in_domain(x1)):
            raise ChartDomainError("Геодезическая вышла из шара Пуанкаре")
        return x1, (w1[..., 0] if squeeze else w1)

    def log_map(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        x, y = np.broadcast_arrays(x, y)
        P, Q = self._to_hyperboloid(x), self._to_hyperboloid(y)
        alpha = np.maximum(-self._lorentz(P, Q), 1.0)
        dist = np.arccosh(alpha)
        norm = np.sqrt(np.maximum(alpha ** 2 - 1.0, 0.0))
        factor = np.where(norm > 1e-300, dist / np.where(norm > 1e-300, norm, 1.0), 1.0)
        V = factor[..., None] * (Q - alpha[..., None] * P)
        # обратный дифференциал вложения в точке P
        _, v = self._pull(P, V[..., None])
        return v[..., 0]

    def _default_curvature_bounds(self):
        value = (self.dimension - 1) * self.c
        return (value, -value)

    def radial_laplacian(self, rho):
        s = np.sqrt(self.c)
        return (self.dimension - 1) * s / np.tanh(s * np.asarray(rho, dtype=float))


class SphereModel(ManifoldModel):
    """
    Сфера радиуса R, хранимая во вложенных координатах ℝ^{d+1}

    Вложенное представление не имеет границы карты; стереографическая
    карта (chart_view) используется для проверок согласованности.
    """

    kind = "sphere"
    exact_stepping = True

    def __init__(self, dimension: int, radius: float = 1.0, **kwargs):
        if radius <= 0:
            raise ValueError(f"Радиус должен быть положительным, получено {radius}")
        self.radius = float(radius)
        super().__init__(dimension, **kwargs)
        self.check_drift_supported()

    @property
    def ambient_dimension(self) -> int:
        return self.dimension + 1

    @property
    def origin(self) -> np.ndarray:
        o = np.zeros(self.ambient_dimension)
        o[-1] = self.radius
        return o

    @property
    def sectional_curvature(self) -> float:
        return 1.0 / self.radius ** 2

    def metric(self, x):
        x = np.asarray(x, dtype=float)
        D = self.ambient_dimension
        return np.broadcast_to(np.eye(D), x.shape[:-1] + (D, D)).copy()

    def christoffel(self, x):
        raise UnsupportedModelError("Символы Кристоффеля сферы вычисляются в стереографической карте (chart_view)")

    def ricci(self, x):
        return (self.dimension - 1) / self.radius ** 2 * self.metric(x)

    def drift_jacobian(self, x):
        x = np.asarray(x, dtype=float)
        D = self.ambient_dimension
        return np.zeros(x.shape[:-1] + (D, D))

    def tangent_basis(self, x):
        """Ортонормированный базис x^⊥ через отражение Хаусхолдера"""
        x = np.asarray(x, dtype=float)
        D = self.ambient_dimension
        n = x / np.linalg.norm(x, axis=-1, keepdims=True)
        e_last = np.zeros(D)
        e_last[-1] = 1.0
        u = n - e_last
        uu = np.sum(u ** 2, axis=-1)
        safe = np.where(uu > 1e-24, uu, 1.0)
        H = np.eye(D) - 2.0 * np.einsum('...i,...j->...ij', u, u) / safe[..., None, None]
        H = np.where((uu > 1e-24)[..., None, None], H, np.eye(D))
        return H[..., :, :-1]

    def distance(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        chord = np.linalg.norm(x - y, axis=-1)
        return 2.0 * self.radius * np.arcsin(np.clip(chord / (2.0 * self.radius), 0.0, 1.0))

    def exp_and_transport(self, x, v, w):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        W, squeeze = _as_columns(v, w)
        R = self.radius
        n = np.linalg.norm(v, axis=-1)
        safe = np.where(n > 0, n, 1.0)
        u = v / safe[..., None]
        theta = n / R
        c, s = np.cos(theta), np.sin(theta)
        x1 = c[..., None] * x + (R * s)[..., None] * u
        uw = np.einsum('...i,...ik->...k', u, W)
        W1 = W + uw[..., None, :] * ((c - 1.0)[..., None, None] * u[..., :, None]
                                     - s[..., None, None] * x[..., :, None] / R)
        return x1, (W1[..., 0] if squeeze else W1)

    def log_map(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        R = self.radius
        w = y - (np.sum(x * y, axis=-1, keepdims=True) / R ** 2) * x
        norm = np.linalg.norm(w, axis=-1, keepdims=True)
        dist = self.distance(x, y)[..., None]
        return np.where(norm > 1e-300, dist * w / np.where(norm > 1e-300, norm, 1.0), 0.0)

    def orthonormalize(self, x, e):
        R = self.radius
        x = R * x / np.linalg.norm(x, axis=-1, keepdims=True)
        e = e - np.einsum('...i,...ij->...j', x, e)[..., None, :] * x[..., :, None] / R ** 2
        return super().orthonormalize(x, e)

    def in_domain(self, x):
        x = np.asarray(x, dtype=float)
        return np.abs(np.linalg.norm(x, axis=-1) - self.radius) < 1e-6 * self.radius

    def is_exploded(self, x):
        return ~np.all(np.isfinite(np.asarray(x, dtype=float)), axis=-1)

    def _default_curvature_bounds(self):
        value = (self.dimension - 1) / self.radius ** 2
        return (0.0, value)

    def chart_view(self) -> "StereographicSphere":
        return StereographicSphere(self.dimension, radius=self.radius)

    def to_chart(self, p: np.ndarray) -> np.ndarray:
        """Стереографическая проекция из южного полюса"""
        p = np.asarray(p, dtype=float)
        return self.radius * p[..., :-1] / (self.radius + p[..., -1:])

    def from_chart(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        R = self.radius
        r2 = np.sum(y ** 2, axis=-1, keepdims=True)
        return np.concatenate([2 * R ** 2 * y / (R ** 2 + r2), R * (R ** 2 - r2) / (R ** 2 + r2)], axis=-1)


class StereographicSphere(ChartModel):
    """Сфера радиуса R в стереографической карте: g = 4R⁴/(R²+|y|²)²·I"""

    kind = "sphere-chart"

    def __init__(self, dimension: int, radius: float = 1.0, **kwargs):
        super().__init__(dimension, **kwargs)
        self.radius = float(radius)
        self._embedded = None

    @property
    def embedded(self) -> SphereModel:
        if self._embedded is None:
            self._embedded = SphereModel(self.dimension, radius=self.radius)
        return self._embedded

    @property
    def sectional_curvature(self) -> float:
        return 1.0 / self.radius ** 2

    def metric(self, x):
        x = np.asarray(x, dtype=float)
        R2 = self.radius ** 2
        scale = 4.0 * R2 ** 2 / (R2 + np.sum(x ** 2, axis=-1)) ** 2
        return scale[..., None, None] * np.eye(self.dimension)

    def christoffel(self, x):
        x = np.asarray(x, dtype=float)
        dphi = -2.0 * x / (self.radius ** 2 + np.sum(x ** 2, axis=-1, keepdims=True))
        return conformally_flat_christoffel(dphi)

    def ricci(self, x):
        return (self.dimension - 1) / self.radius ** 2 * self.metric(x)

    def distance(self, x, y):
        return self.embedded.distance(self.embedded.from_chart(x), self.embedded.from_chart(y))

    def _default_curvature_bounds(self):
        value = (self.dimension - 1) / self.radius ** 2
        return (0.0, value)
