"""
Конформные множители f (0 ≤ f ≤ 1) и цепочка срезок f_n = h_n(ρ̃)
"""

import logging
from typing import Optional

import numpy as np
from scipy import optimize

from ..errors import ConfigError
from ..geometry.checks import central_difference
from ..geometry.envelopes import AffineEnvelope, GrowthEnvelope, build_envelope
from ..geometry.models import EuclideanModel, ManifoldModel

logger = logging.getLogger(__name__)

FD_STEP = 1e-5


class ConformalFactor:
    """
    Гладкая функция f на базовой модели: значения, частные производные и гессиан частных производных

    Подклассы задают value и, если есть замкнутая форма, gradient и hessian;
    по умолчанию производные берутся центральными разностями.
    """

    kind = "abstract"
    support_radius = float('inf')

    def value(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return central_difference(self.value, np.asarray(x, dtype=float), FD_STEP)

    def hessian(self, x: np.ndarray) -> np.ndarray:
        return central_difference(self.gradient, np.asarray(x, dtype=float), FD_STEP)

    def describe(self) -> str:
        return self.kind


class ConstantFactor(ConformalFactor):
    kind = "constant"

    def __init__(self, value: float = 1.0):
        if not 0 < value <= 1:
            raise ConfigError(f"Постоянный множитель должен лежать в (0, 1], получено {value}", "conformal.value")
        self.c = float(value)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], self.c)

    def gradient(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape + (x.shape[-1],))

    def describe(self) -> str:
        return f"constant({self.c:g})"


class GaussianBump(ConformalFactor):
    """f = a·exp(−|x − c|²/(2w²)) в координатах карты"""

    kind = "gaussian"

    def __init__(self, center, width: float = 1.0, amplitude: float = 1.0):
        if width <= 0 or not 0 < amplitude <= 1:
            raise ConfigError("Гауссов множитель требует w > 0 и 0 < a ≤ 1", "conformal.width")
        self.center = np.asarray(center, dtype=float)
        self.width = float(width)
        self.amplitude = float(amplitude)

    def value(self, x):
        diff = np.asarray(x, dtype=float) - self.center
        return self.amplitude * np.exp(-np.sum(diff ** 2, axis=-1) / (2 * self.width ** 2))

    def gradient(self, x):
        diff = np.asarray(x, dtype=float) - self.center
        return -diff / self.width ** 2 * self.value(x)[..., None]

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        diff = x - self.center
        w2 = self.width ** 2
        eye = np.eye(x.shape[-1])
        outer = np.einsum('...i,...j->...ij', diff, diff)
        return (outer / w2 ** 2 - eye / w2) * self.value(x)[..., None, None]

    def describe(self) -> str:
        return f"gaussian(w={self.width:g},a={self.amplitude:g})"


def smoothstep(t: np.ndarray):
    """s₅(t) = 6t⁵ − 15t⁴ + 10t³ на [0, 1] с первой и второй производными"""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    value = t ** 3 * (10 - 15 * t + 6 * t ** 2)
    first = 30 * t ** 2 * (1 - t) ** 2
    second = 60 * t * (1 - t) * (1 - 2 * t)
    return value, first, second


def base_bump(u: np.ndarray):
    """h₀(u) = 1 − s₅(u − 1): 1 при u ≤ 1, 0 при u ≥ 2"""
    value, first, second = smoothstep(np.asarray(u, dtype=float) - 1.0)
    return 1.0 - value, -first, -second


def smooth_radius(rho: np.ndarray) -> np.ndarray:
    """ρ̃ = √(1 + ρ²)"""
    return np.sqrt(1.0 + np.asarray(rho, dtype=float) ** 2)


def support_radius(envelope: GrowthEnvelope, n: int, upper: float = 1e12) -> float:
    """
    Радиус r_n по ρ̃: ∫_0^{r} dt/ψ(t+1) = 2n

    Для аффинной ψ = a + bs используется замкнутая форма.

    Raises:
        ConfigError: интеграл ограничен, и срезки не исчерпывают многообразие
    """
    target = 2.0 * n
    if isinstance(envelope, AffineEnvelope):
        if envelope.b == 0.0:
            return target * envelope.a
        base = envelope.a + envelope.b
        return float(base * np.expm1(target * envelope.b) / envelope.b)
    hi = 1.0
    while float(envelope.shifted_integral(hi)) < target:
        hi *= 4.0
        if hi > upper:
            raise ConfigError(f"∫dt/ψ(t+1) не достигает {target} до {upper:g}: ψ неинтегрируемо растет",
                              "model.psi")
    return float(optimize.brentq(lambda r: float(envelope.shifted_integral(r)) - target, 0.0, hi, xtol=1e-10))


class CutoffFactor(ConformalFactor):
    """
    f_n = h_n(ρ̃), h_n(s) = h₀(I(s)/n), I(s) = ∫_0^s dt/ψ(t+1)

    Производные по ρ̃ замкнутые; для евклидовой базы ∇ρ̃ = x/ρ̃ и
    ∂²ρ̃ = I/ρ̃ − xxᵀ/ρ̃³, для прочих баз ρ̃ дифференцируется численно.
    """

    kind = "cutoff"

    def __init__(self, model: ManifoldModel, envelope: GrowthEnvelope, n: int):
        if n < 2:
            raise ConfigError(f"Номер срезки должен быть не меньше 2, получено {n}", "conformal.n")
        self.model = model
        self.envelope = envelope
        self.n = int(n)
        tilde = support_radius(envelope, self.n)
        self.support_tilde = tilde
        self.support_radius = float(np.sqrt(max(tilde ** 2 - 1.0, 0.0)))

    def _profile(self, s: np.ndarray):
        """h_n(s), h_n′(s), h_n″(s)"""
        s = np.asarray(s, dtype=float)
        u = self.envelope.shifted_integral(s) / self.n
        h, h1, h2 = base_bump(u)
        psi = self.envelope(s + 1.0)
        dpsi = self.envelope.derivative(s + 1.0)
        first = h1 / (self.n * psi)
        second = h2 / (self.n * psi) ** 2 - h1 * dpsi / (self.n * psi ** 2)
        return h, first, second

    def _radius(self, x: np.ndarray) -> np.ndarray:
        return smooth_radius(self.model.distance_from_origin(x))

    def _radius_derivatives(self, x: np.ndarray):
        if isinstance(self.model, EuclideanModel):
            tilde = smooth_radius(np.linalg.norm(x, axis=-1))
            grad = x / tilde[..., None]
            eye = np.eye(x.shape[-1])
            hess = (eye / tilde[..., None, None]
                    - np.einsum('...i,...j->...ij', x, x) / tilde[..., None, None] ** 3)
            return tilde, grad, hess
        tilde = self._radius(x)
        grad = central_difference(self._radius, x, FD_STEP)
        hess = central_difference(lambda y: central_difference(self._radius, y, FD_STEP), x, 1e-4)
        return tilde, grad, 0.5 * (hess + np.swapaxes(hess, -1, -2))

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return self._profile(self._radius(x))[0]

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        tilde, grad, _ = self._radius_derivatives(x)
        _, first, _ = self._profile(tilde)
        return first[..., None] * grad

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        tilde, grad, hess = self._radius_derivatives(x)
        _, first, second = self._profile(tilde)
        return (second[..., None, None] * np.einsum('...i,...j->...ij', grad, grad)
                + first[..., None, None] * hess)

    def describe(self) -> str:
        return f"cutoff(n={self.n},psi={self.envelope.describe()})"


def cutoff_chain(model: ManifoldModel, envelope: GrowthEnvelope, n: int) -> CutoffFactor:
    """
    Член цепочки срезок f_n

    Args:
        model: базовая модель (расстояние ρ_o от ее начала координат)
        envelope: огибающая ψ
        n: номер, n ≥ 2

    Returns:
        CutoffFactor с компактным носителем {ρ̃ ≤ r_n}
    """
    factor = CutoffFactor(model, envelope, n)
    logger.debug(f"Срезка n={n}: носитель ρ ≤ {factor.support_radius:.4g}")
    return factor


def build_factor(spec: Optional[dict], model: ManifoldModel) -> ConformalFactor:
    """Множитель из словаря конфигурации: constant, gaussian или cutoff"""
    spec = dict(spec or {'kind': 'constant'})
    kind = spec.pop('kind', 'constant')
    if kind == 'constant':
        return ConstantFactor(float(spec.get('value', 1.0)))
    if kind == 'gaussian':
        center = spec.get('center', np.zeros(model.ambient_dimension))
        return GaussianBump(center, float(spec.get('width', 1.0)), float(spec.get('amplitude', 1.0)))
    if kind == 'cutoff':
        envelope = build_envelope(spec['psi']) if 'psi' in spec else model.psi
        return cutoff_chain(model, envelope, int(spec.get('n', 2)))
    raise ConfigError(f"Неизвестный конформный множитель: {kind}", "conformal.kind")
